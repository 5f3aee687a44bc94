#include "levylab/drift.hpp"

#include <boost/math/quadrature/gauss.hpp>

#include <algorithm>
#include <cmath>
#include <random>

#include "levylab/bump.hpp"
#include "levylab/errors.hpp"
#include "levylab/fourier.hpp"
#include "levylab/levy.hpp"

namespace levylab {

namespace {

using Gauss16 = boost::math::quadrature::gauss<double, 16>;

Components zeros(const Grid& g) { return Components(g.n, std::vector<double>(g.size(), 0.0)); }

std::vector<double> uniform_nodes(double T, int count) {
    if (count < 2) throw PreconditionError("a drift needs at least two time nodes");
    std::vector<double> t(count);
    for (int i = 0; i < count; ++i) t[i] = T * i / (count - 1);
    return t;
}

struct Mode {
    std::array<double, 3> k{};
    std::array<double, 3> a{}, b{};
    double phase = 0.0;
};

// Integer modes 0 < |m| <= K in a half space.
std::vector<std::array<int, 3>> half_space_modes(int n, int K) {
    std::vector<std::array<int, 3>> out;
    int hi[3] = {K, n > 1 ? K : 0, n > 2 ? K : 0};
    for (int i = -hi[0]; i <= hi[0]; ++i)
        for (int j = -hi[1]; j <= hi[1]; ++j)
            for (int l = -hi[2]; l <= hi[2]; ++l) {
                std::array<int, 3> m{i, j, l};
                int r2 = i * i + j * j + l * l;
                if (r2 == 0 || r2 > K * K) continue;
                bool upper = (i > 0) || (i == 0 && j > 0) || (i == 0 && j == 0 && l > 0);
                if (upper) out.push_back(m);
            }
    return out;
}

}  // namespace

Components VelocityField::at(double t) const {
    if (time_nodes.empty()) return zeros(grid);
    if (t <= time_nodes.front()) return data.front();
    if (t >= time_nodes.back()) return data.back();
    auto it = std::upper_bound(time_nodes.begin(), time_nodes.end(), t);
    std::size_t j = static_cast<std::size_t>(it - time_nodes.begin()) - 1;
    double lam = (t - time_nodes[j]) / (time_nodes[j + 1] - time_nodes[j]);
    Components out = data[j];
    for (std::size_t c = 0; c < out.size(); ++c)
        for (std::size_t i = 0; i < out[c].size(); ++i)
            out[c][i] = (1.0 - lam) * data[j][c][i] + lam * data[j + 1][c][i];
    return out;
}

Components VelocityField::at_zero_extended(double t) const {
    const double tiny = 1e-12 * std::max(1.0, horizon());
    if (time_nodes.empty() || t < time_nodes.front() - tiny || t > time_nodes.back() + tiny) return zeros(grid);
    return at(t);
}

double VelocityField::max_speed() const {
    double m = 0.0;
    for (const auto& comps : data)
        for (std::size_t i = 0; i < grid.size(); ++i) {
            double s = 0.0;
            for (const auto& c : comps) s += c[i] * c[i];
            m = std::max(m, std::sqrt(s));
        }
    return m;
}

double VelocityField::divergence_residual() const {
    double worst = 0.0;
    for (const auto& comps : data) {
        auto div = spectral_divergence(grid, comps, false);
        double scale = 0.0;
        for (int d = 0; d < grid.n; ++d) {
            auto dv = spectral_derivative(grid, comps[d], d);
            for (double x : dv) scale = std::max(scale, std::abs(x));
        }
        double m = 0.0;
        for (double x : div) m = std::max(m, std::abs(x));
        if (scale > 0.0) worst = std::max(worst, m / scale);
        else worst = std::max(worst, m);
    }
    return worst;
}

VelocityField zero_velocity(const Grid& g, double horizon, int nodes) {
    VelocityField v;
    v.grid = g;
    v.time_nodes = uniform_nodes(horizon, nodes);
    v.data.assign(nodes, zeros(g));
    v.generator = "zero";
    return v;
}

VelocityField constant_velocity(const Grid& g, const std::array<double, 3>& c, double horizon, int nodes) {
    VelocityField v = zero_velocity(g, horizon, nodes);
    for (auto& comps : v.data)
        for (int d = 0; d < g.n; ++d) std::fill(comps[d].begin(), comps[d].end(), c[d]);
    v.generator = "constant";
    return v;
}

void attach_morrey_norm(VelocityField& v, const MorreyParams& params) {
    double m = 0.0;
    for (const auto& comps : v.data) m = std::max(m, morrey_norm(comps, v.grid, params));
    v.morrey_params = params;
    v.morrey_norm = m;
}

VelocityField make_divfree(const DriftSpec& spec, const Grid& g, const MorreyParams& profile) {
    profile.validate(g.n);
    VelocityField v;
    v.grid = g;
    v.time_nodes = uniform_nodes(spec.horizon, spec.time_nodes);
    v.data.assign(spec.time_nodes, zeros(g));
    v.generator = spec.kind;
    const double unit = g.wavenumber_unit();

    if (spec.kind == "zero") {
        attach_morrey_norm(v, profile);
        return v;
    }
    if (spec.kind == "constant") {
        VelocityField c = constant_velocity(g, spec.constant, spec.horizon, spec.time_nodes);
        attach_morrey_norm(c, profile);
        return c;
    }
    if (spec.kind != "stream" && spec.kind != "leray" && spec.kind != "shear")
        throw PreconditionError("unknown drift generator '" + spec.kind + "'");
    if (g.n < 2) throw PreconditionError("divergence-free drifts need n >= 2");
    if (spec.kind == "stream" && g.n != 2)
        throw PreconditionError("stream-function drifts are two-dimensional; use leray for n > 2");
    if (3 * spec.max_mode >= g.points_per_dim || 3 * spec.shear_mode >= g.points_per_dim)
        throw PreconditionError("drift modes exceed the dealiased band of the grid");

    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 2.0 * M_PI);
    std::vector<Mode> modes;

    if (spec.kind == "shear") {
        Mode md;
        md.k[1] = unit * spec.shear_mode;
        md.b[0] = 1.0;  // v1 = sin(k x2)
        md.phase = 0.0;
        modes.push_back(md);
    } else {
        for (const auto& m : half_space_modes(g.n, spec.max_mode)) {
            Mode md;
            double len2 = 0.0;
            for (int d = 0; d < g.n; ++d) {
                md.k[d] = unit * m[d];
                len2 += double(m[d]) * m[d];
            }
            double w = std::pow(std::sqrt(len2), -spec.spectral_slope);
            if (spec.kind == "stream") {
                // phi = A cos(k.x) + B sin(k.x), v = (-d2 phi, d1 phi)
                double A = w * normal(rng), B = w * normal(rng);
                // d_j phi = k_j (-A sin + B cos)
                md.a = {0, 0, 0};
                md.b = {0, 0, 0};
                md.a[0] = md.k[1] * A;   // sin coefficient of v1
                md.b[0] = -md.k[1] * B;  // cos coefficient of v1
                md.a[1] = -md.k[0] * A;
                md.b[1] = md.k[0] * B;
                // store as v = a sin(k.x) + b cos(k.x)
            } else {
                double kk = 0.0;
                for (int d = 0; d < g.n; ++d) kk += md.k[d] * md.k[d];
                std::array<double, 3> a{}, b{};
                for (int d = 0; d < g.n; ++d) {
                    a[d] = w * normal(rng);
                    b[d] = w * normal(rng);
                }
                double ka = 0.0, kb = 0.0;
                for (int d = 0; d < g.n; ++d) {
                    ka += md.k[d] * a[d];
                    kb += md.k[d] * b[d];
                }
                for (int d = 0; d < g.n; ++d) {
                    md.a[d] = a[d] - md.k[d] * ka / kk;
                    md.b[d] = b[d] - md.k[d] * kb / kk;
                }
            }
            md.phase = unif(rng);
            modes.push_back(md);
        }
    }

    for (std::size_t ti = 0; ti < v.time_nodes.size(); ++ti) {
        double t = v.time_nodes[ti];
        Components& comps = v.data[ti];
        for (const Mode& md : modes) {
            double amp = 1.0 + spec.modulation * std::cos(spec.time_frequency * t + md.phase);
            for (std::size_t i = 0; i < g.size(); ++i) {
                auto x = g.coords(i);
                double ph = 0.0;
                for (int d = 0; d < g.n; ++d) ph += md.k[d] * x[d];
                double s = std::sin(ph), c = std::cos(ph);
                for (int d = 0; d < g.n; ++d) comps[d][i] += amp * (md.a[d] * s + md.b[d] * c);
            }
        }
        if (spec.kind == "shear") {
            for (std::size_t i = 0; i < g.size(); ++i) {
                auto x = g.coords(i);
                comps[0][i] = (1.0 + spec.modulation * std::cos(spec.time_frequency * t)) *
                              std::sin(unit * spec.shear_mode * x[1]);
                for (int d = 1; d < g.n; ++d) comps[d][i] = 0.0;
            }
        }
    }

    attach_morrey_norm(v, profile);
    double scale = 1.0;
    if (spec.normalize == "morrey") {
        if (v.morrey_norm > 0.0) scale = spec.amplitude / v.morrey_norm;
    } else if (spec.normalize == "linf") {
        double m = v.max_speed();
        if (m > 0.0) scale = spec.amplitude / m;
    } else if (spec.normalize != "none") {
        throw PreconditionError("unknown drift normalization '" + spec.normalize + "'");
    } else {
        scale = spec.amplitude;
    }
    for (auto& comps : v.data)
        for (auto& c : comps)
            for (double& x : c) x *= scale;
    v.morrey_norm *= scale;
    return v;
}

double MollifierPair::time_bump(double t) const {
    static const double Z = canonical_bump_mass(1);
    return canonical_bump(t) / Z;
}

double MollifierPair::space_bump(const std::array<double, 3>& x, int n) const {
    double r2 = 0.0;
    for (int d = 0; d < n; ++d) r2 += x[d] * x[d];
    return canonical_bump(std::sqrt(r2)) / canonical_bump_mass(n);
}

namespace {

std::vector<double> space_kernel(const MollifierPair& m, const Grid& g, double* raw_mass) {
    std::vector<double> k(g.size());
    double sum = 0.0;
    const double eps = m.epsilon;
    for (std::size_t i = 0; i < g.size(); ++i) {
        auto x = g.coords(i);
        std::array<double, 3> y{0, 0, 0};
        for (int d = 0; d < g.n; ++d) y[d] = g.wrap(x[d]) / eps;
        k[i] = m.space_bump(y, g.n) / std::pow(eps, g.n);
        sum += k[i];
    }
    sum *= g.cell_volume();
    if (raw_mass) *raw_mass = sum;
    for (double& v : k) v /= sum;
    return k;
}

double time_integral(const MollifierPair& m, double a, double b) {
    auto f = [&](double s) { return m.time_bump(s / m.epsilon) / m.epsilon; };
    double s = 0.0;
    const int pieces = 8;
    for (int i = 0; i < pieces; ++i)
        s += Gauss16::integrate(f, a + (b - a) * i / pieces, a + (b - a) * (i + 1) / pieces);
    return s;
}

}  // namespace

MollifierMass mollifier_masses(const MollifierPair& m, const Grid& g) {
    MollifierMass out;
    out.time_mass = time_integral(m, -m.epsilon, m.epsilon);
    std::vector<double> k = space_kernel(m, g, &out.space_mass);
    double s = 0.0;
    double support = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        s += k[i];
        if (k[i] > 0.0) {
            auto x = g.coords(i);
            double r2 = 0.0;
            for (int d = 0; d < g.n; ++d) r2 += g.wrap(x[d]) * g.wrap(x[d]);
            support = std::max(support, std::sqrt(r2));
        }
    }
    out.space_mass = s * g.cell_volume();
    out.space_support = support / m.epsilon;
    return out;
}

VelocityField mollify_time(const VelocityField& v, const MollifierPair& m) {
    const auto& t = v.time_nodes;
    double spacing = 0.0;
    for (std::size_t i = 1; i < t.size(); ++i) spacing = std::max(spacing, t[i] - t[i - 1]);
    if (m.epsilon < spacing * (1.0 - 1e-12))
        throw PreconditionError("mollifier width below the drift time-node spacing");
    VelocityField out = v;
    const std::size_t K = t.size();
    for (std::size_t i = 0; i < K; ++i) {
        // weights on the nodes of the piecewise-linear drift
        std::vector<double> w(K, 0.0);
        double lo = t[i] - m.epsilon, hi = t[i] + m.epsilon;
        for (std::size_t j = 0; j + 1 < K; ++j) {
            double a = std::max(lo, t[j]), b = std::min(hi, t[j + 1]);
            if (b <= a) continue;
            double len = t[j + 1] - t[j];
            auto phi = [&](double s) { return m.time_bump((t[i] - s) / m.epsilon) / m.epsilon; };
            auto left = [&](double s) { return phi(s) * (t[j + 1] - s) / len; };
            auto right = [&](double s) { return phi(s) * (s - t[j]) / len; };
            const int pieces = 8;
            for (int q = 0; q < pieces; ++q) {
                double x0 = a + (b - a) * q / pieces, x1 = a + (b - a) * (q + 1) / pieces;
                w[j] += Gauss16::integrate(left, x0, x1);
                w[j + 1] += Gauss16::integrate(right, x0, x1);
            }
        }
        for (int c = 0; c < v.grid.n; ++c)
            for (std::size_t p = 0; p < v.grid.size(); ++p) {
                double s = 0.0;
                for (std::size_t j = 0; j < K; ++j)
                    if (w[j] != 0.0) s += w[j] * v.data[j][c][p];
                out.data[i][c][p] = s;
            }
    }
    out.generator = v.generator + "|time-mollified";
    return out;
}

VelocityField mollify_space(const VelocityField& v, const MollifierPair& m) {
    const Grid& g = v.grid;
    if (m.epsilon < g.spacing() * (1.0 - 1e-12)) throw PreconditionError("mollifier width below the grid spacing");
    std::vector<double> k = space_kernel(m, g, nullptr);
    std::vector<cplx> kh = fft_forward(g, k);
    const double vol = g.cell_volume();
    VelocityField out = v;
    for (auto& comps : out.data)
        for (auto& c : comps) {
            std::vector<cplx> s = fft_forward(g, c);
            for (std::size_t h = 0; h < s.size(); ++h) s[h] *= kh[h].real() * vol;
            c = fft_inverse(g, std::move(s));
        }
    out.generator = v.generator + "|space-mollified";
    return out;
}

VelocityField mollify(const VelocityField& v, const MollifierPair& m) {
    VelocityField out = mollify_space(mollify_time(v, m), m);
    if (v.morrey_params) attach_morrey_norm(out, *v.morrey_params);
    return out;
}

MollifierSweep mollifier_linf_sweep(const VelocityField& v, const std::vector<double>& widths,
                                    const MorreyParams& params) {
    MollifierSweep out;
    VelocityField base = v;
    attach_morrey_norm(base, params);
    out.morrey_before = base.morrey_norm;
    double lo = HUGE_VAL;
    for (double e : widths) {
        MollifierPair m{e};
        VelocityField s = mollify_space(base, m);
        attach_morrey_norm(s, params);
        double linf = s.max_speed();
        double ratio = linf * std::pow(e, v.grid.n / params.q) / base.morrey_norm;
        out.eps.push_back(e);
        out.linf.push_back(linf);
        out.ratio.push_back(ratio);
        out.morrey_after.push_back(s.morrey_norm);
        out.fitted_C = std::max(out.fitted_C, ratio);
        lo = std::min(lo, ratio);
    }
    out.spread = lo > 0.0 ? out.fitted_C / lo : HUGE_VAL;
    return out;
}

DriftCutoffReport verify_drift_cutoff_bound(const Components& v, const SampledField& A, double M,
                                            const std::vector<double>& radii, double p, double alpha,
                                            const MorreyParams& params, double v_norm) {
    const Grid& g = A.grid;
    if (alpha > 1.0 && params.q < p) throw PreconditionError("the alpha > 1 regime needs q >= p");
    DriftCutoffReport rep;
    std::array<double, 3> c{0.5 * g.side_length, 0.5 * g.side_length, 0.5 * g.side_length};
    double a_inf = lp_norm(A, HUGE_VAL);
    double lo = HUGE_VAL;
    for (double R : radii) {
        if (2.0 * R > 0.5 * g.side_length) throw PreconditionError("cutoff support exceeds half the torus");
        SampledField phi = make_cutoff(g, R, c);
        SampledField prod(g);
        std::vector<std::vector<double>> grad;
        for (int d = 0; d < g.n; ++d) grad.push_back(spectral_derivative(g, phi.values, d));
        for (std::size_t i = 0; i < g.size(); ++i) {
            double vg = 0.0;
            for (int d = 0; d < g.n; ++d) vg += v[d][i] * grad[d][i];
            prod.values[i] = (A.values[i] - 0.5 * M) * vg;
        }
        double lhs = lp_norm(prod, p);
        double shape = std::pow(R, -1.0 + g.n / p) * (a_inf + 0.5 * M) * v_norm;
        if (alpha > 1.0) shape *= std::pow(R, (params.a - g.n) / params.q);
        rep.R.push_back(R);
        rep.lhs.push_back(lhs);
        rep.shape.push_back(shape);
        rep.ratio.push_back(shape > 0.0 ? lhs / shape : 0.0);
        rep.fitted_C = std::max(rep.fitted_C, rep.ratio.back());
        lo = std::min(lo, rep.ratio.back());
    }
    rep.spread = lo > 0.0 ? rep.fitted_C / lo : HUGE_VAL;
    return rep;
}

}  // namespace levylab
