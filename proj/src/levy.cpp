#include "levylab/levy.hpp"

#include <boost/math/quadrature/gauss.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

#include "levylab/bump.hpp"
#include "levylab/errors.hpp"
#include "levylab/fourier.hpp"
#include "levylab/parallel.hpp"

namespace levylab {

namespace {

using Gauss16 = boost::math::quadrature::gauss<double, 16>;

template <class F>
double gauss(F&& f, double a, double b) {
    return Gauss16::integrate(f, a, b);
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// Gamma(n/2) (2/x)^nu J_nu(x), the sphere average of cos(x e . w).
double angular_mean_cos(int n, double x) {
    if (x == 0.0) return 1.0;
    switch (n) {
        case 1: return std::cos(x);
        case 2: return std::cyl_bessel_j(0.0, x);
        case 3: return std::sin(x) / x;
        default: {
            double nu = 0.5 * n - 1.0;
            return std::tgamma(0.5 * n) * std::pow(2.0 / x, nu) * std::cyl_bessel_j(nu, x);
        }
    }
}

double wynn_epsilon(const std::vector<double>& s) {
    const std::size_t K = std::min<std::size_t>(s.size(), 21);
    if (K < 3) return s.back();
    std::vector<double> prev(K + 1, 0.0);
    std::vector<double> cur(s.end() - static_cast<long>(K), s.end());
    double best = cur.back();
    for (std::size_t col = 1; cur.size() > 1; ++col) {
        std::vector<double> next(cur.size() - 1);
        for (std::size_t j = 0; j + 1 < cur.size(); ++j) {
            double d = cur[j + 1] - cur[j];
            if (d == 0.0) return (col % 2 == 1) ? cur[j + 1] : best;
            next[j] = prev[j + 1] + 1.0 / d;
        }
        prev = cur;
        cur = next;
        if (col % 2 == 0) best = cur.back();
    }
    return best;
}

double near_integral(const LevyKernel& k, double xi, const QuadratureConfig& cfg) {
    const int n = k.n;
    auto f = [&](double r) { return k.near_profile(r) * std::pow(r, n - 1) * angular_one_minus_cos(n, xi * r); };
    std::vector<std::pair<double, double>> panels;
    const double half_period = M_PI / xi;
    double a = cfg.r_min;
    while (a < 1.0) {
        double b = std::min(1.0, 2.0 * a);
        int pieces = std::max(1, static_cast<int>(std::ceil((b - a) / half_period)));
        for (int p = 0; p < pieces; ++p)
            panels.emplace_back(a + (b - a) * p / pieces, a + (b - a) * (p + 1) / pieces);
        a = b;
    }
    auto total = [&](int split) {
        double s = 0.0;
        for (auto [lo, hi] : panels)
            for (int q = 0; q < split; ++q)
                s += gauss(f, lo + (hi - lo) * q / split, lo + (hi - lo) * (q + 1) / split);
        return s;
    };
    double previous = total(1);
    int split = 1;
    for (int it = 0; it < cfg.max_doublings; ++it) {
        split *= 2;
        double current = total(split);
        if (std::abs(current - previous) <= cfg.rel_tol * std::abs(current)) return current;
        previous = current;
        if (it + 1 == cfg.max_doublings)
            throw QuadratureError("near-field symbol quadrature did not converge", current, previous);
    }
    return previous;
}

double origin_cap(const LevyKernel& k, double xi, const QuadratureConfig& cfg) {
    const double rm = cfg.r_min;
    const int n = k.n;
    double c = k.near_profile(rm) * std::pow(rm, n + k.alpha);
    return c * unit_sphere_area(n) * xi * xi / (2.0 * n) * std::pow(rm, 2.0 - k.alpha) / (2.0 - k.alpha);
}

double far_mean(const LevyKernel& k, const QuadratureConfig& cfg) {
    const int n = k.n;
    auto f = [&](double u) { return k.far_profile(std::exp(u)) * std::exp(n * u); };
    double total = 0.0;
    double tail = 0.0;
    int zero_run = 0;
    for (int U = 1; U <= 700; ++U) {
        double piece = gauss(f, U - 1.0, static_cast<double>(U));
        total += piece;
        double f1 = f(U - 1.0), f2 = f(static_cast<double>(U));
        if (f2 == 0.0) {
            if (piece == 0.0 && ++zero_run >= 3) return total * unit_sphere_area(n);
            tail = 0.0;
            continue;
        }
        zero_run = 0;
        double lambda = f1 > 0.0 ? std::log(f1 / f2) : 0.0;
        tail = lambda > 0.0 ? f2 / lambda : HUGE_VAL;
        if (U >= 10 && tail <= cfg.far_tol * std::abs(total)) return (total + tail) * unit_sphere_area(n);
    }
    throw QuadratureError("far-field mass quadrature did not converge", total + tail, total);
}

double far_oscillatory(const LevyKernel& k, double xi, double scale, const QuadratureConfig& cfg) {
    const int n = k.n;
    const double nu = 0.5 * n - 1.0;
    auto f = [&](double x) {
        double r = x / xi;
        return k.far_profile(r) * std::pow(r, n - 1) * angular_mean_cos(n, x);
    };
    auto panel = [&](double a, double b) {
        double s = 0.0;
        while (b > 2.0 * a) {
            s += gauss(f, a, 2.0 * a);
            a *= 2.0;
        }
        return s + gauss(f, a, b);
    };
    int m = 1;
    while ((m + 0.5 * nu - 0.25) * M_PI <= xi) ++m;
    double a = xi;
    double partial = 0.0;
    std::vector<double> sums;
    double last_est = 0.0;
    int stable = 0;
    bool all_zero = true;
    for (int count = 0; count < cfg.max_far_panels; ++count, ++m) {
        double b = (m + 0.5 * nu - 0.25) * M_PI;
        double piece = panel(a, b);
        if (piece != 0.0) all_zero = false;
        partial += piece;
        a = b;
        sums.push_back(partial);
        if (all_zero && count >= 4) return 0.0;
        double est = wynn_epsilon(sums);
        if (count >= 8 && std::abs(est - last_est) <= cfg.far_tol * scale) {
            if (++stable >= 4) return est * unit_sphere_area(n) / xi;
        } else {
            stable = 0;
        }
        last_est = est;
    }
    throw QuadratureError("far-field oscillatory quadrature did not converge", last_est,
                          sums.size() > 1 ? sums[sums.size() - 2] : 0.0);
}

}  // namespace

double LevyKernel::density(const std::array<double, 3>& y) const {
    double s = 0.0;
    for (int d = 0; d < n; ++d) s += y[d] * y[d];
    return radial(std::sqrt(s));
}

std::string LevyKernel::id() const {
    return profile + "(n=" + std::to_string(n) + ",alpha=" + fmt(alpha) + ",delta=" + fmt(delta) +
           ",amp=" + fmt(amplitude) + ",cbar1=" + fmt(cbar1) + ",cbar2=" + fmt(cbar2) + ")";
}

LevyKernel LevyKernel::scaled(double s) const {
    LevyKernel out = *this;
    auto nf = near_profile;
    auto ff = far_profile;
    out.near_profile = [nf, s](double r) { return s * nf(r); };
    out.far_profile = [ff, s](double r) { return s * ff(r); };
    out.amplitude = amplitude * s;
    out.profile = profile + "*" + fmt(s);
    return out;
}

void validate_exponents(double alpha, double delta) {
    if (!(alpha > 0.0 && alpha < 2.0) || alpha == 1.0)
        throw PreconditionError("alpha must lie in (0,1) or (1,2)");
    if (!(delta > 0.0 && delta < alpha))
        throw PreconditionError("delta must lie in (0, alpha)");
    if (alpha > 1.0 && delta <= 1.0)
        throw PreconditionError("for 1 < alpha < 2 the far exponent must satisfy 1 < delta < alpha");
}

LevyKernel make_custom_kernel(int n, double alpha, double delta, double cbar1, double cbar2,
                              const std::string& name, std::function<double(double)> near,
                              std::function<double(double)> far) {
    validate_exponents(alpha, delta);
    if (n < 1 || n > 3) throw PreconditionError("kernel dimension must be 1, 2 or 3");
    if (!(cbar1 > 0.0) || cbar2 < cbar1) throw PreconditionError("need 0 < cbar1 <= cbar2");
    LevyKernel k;
    k.n = n;
    k.alpha = alpha;
    k.delta = delta;
    k.cbar1 = cbar1;
    k.cbar2 = cbar2;
    k.profile = name;
    k.near_profile = std::move(near);
    k.far_profile = std::move(far);
    return k;
}

LevyKernel make_kernel(int n, double alpha, double delta, double cbar1, double cbar2,
                       const std::string& profile, double amplitude) {
    double c = amplitude > 0.0 ? amplitude : cbar1;
    std::function<double(double)> near = [n, alpha, c](double r) { return c * std::pow(r, -n - alpha); };
    std::function<double(double)> far;
    if (profile == "stable") {
        far = near;
    } else if (profile == "truncated-stable") {
        far = [](double) { return 0.0; };
    } else if (profile == "two-exponent") {
        far = [n, delta, c](double r) { return c * std::pow(r, -n - delta); };
    } else {
        throw PreconditionError("unknown kernel profile '" + profile + "'");
    }
    LevyKernel k = make_custom_kernel(n, alpha, delta, cbar1, cbar2, profile, near, far);
    k.amplitude = c;
    return k;
}

double unit_sphere_area(int n) { return 2.0 * std::pow(M_PI, 0.5 * n) / std::tgamma(0.5 * n); }
double unit_ball_volume(int n) { return std::pow(M_PI, 0.5 * n) / std::tgamma(0.5 * n + 1.0); }

double stable_symbol_constant(int n, double alpha) {
    return std::pow(M_PI, 0.5 * n) * std::abs(std::tgamma(-0.5 * alpha)) /
           (std::pow(2.0, alpha) * std::tgamma(0.5 * (n + alpha)));
}

double angular_one_minus_cos(int n, double x) {
    const double S = unit_sphere_area(n);
    if (std::abs(x) < 0.5) {
        // 1 - Gamma(n/2) (2/x)^nu J_nu(x) as a power series
        double h = 0.5 * n;
        double term = 1.0;
        double sum = 0.0;
        double z = 0.25 * x * x;
        for (int m = 1; m < 12; ++m) {
            term *= -z / (m * (h + m - 1.0));
            sum -= term;
        }
        return S * sum;
    }
    return S * (1.0 - angular_mean_cos(n, x));
}

double symbol_radial(const LevyKernel& k, double xi, const QuadratureConfig& cfg) {
    xi = std::abs(xi);
    if (xi == 0.0) return 0.0;
    double cap = origin_cap(k, xi, cfg);
    double near = near_integral(k, xi, cfg);
    double mean = far_mean(k, cfg);
    double scale = std::max({std::abs(near), std::abs(mean) / unit_sphere_area(k.n), 1e-300});
    double osc = far_oscillatory(k, xi, scale * xi, cfg);
    return std::max(0.0, cap + near + mean - osc);
}

double symbol_eval(const LevyKernel& k, const std::vector<double>& xi, const QuadratureConfig& cfg) {
    if (static_cast<int>(xi.size()) != k.n) throw PreconditionError("frequency vector has wrong dimension");
    double s = 0.0;
    for (double v : xi) s += v * v;
    return symbol_radial(k, std::sqrt(s), cfg);
}

double LevySymbol::at_half(std::size_t h) const { return values[half_lattice(grid).full_index[h]]; }

LevySymbol tabulate_symbol(const LevyKernel& k, const Grid& g, const QuadratureConfig& cfg) {
    if (k.n != g.n) throw GridMismatch("kernel and grid dimensions differ");
    LevySymbol s;
    s.grid = g;
    s.kernel_id = k.id();
    s.alpha = k.alpha;
    s.delta = k.delta;
    s.values.assign(g.size(), 0.0);
    std::vector<long long> keys(g.size());
    std::map<long long, std::size_t> unique;
    for (std::size_t i = 0; i < g.size(); ++i) {
        auto ijk = g.unflatten(i);
        long long m2 = 0;
        for (int d = 0; d < g.n; ++d) {
            long long m = g.signed_mode(ijk[d]);
            m2 += m * m;
        }
        keys[i] = m2;
        unique.emplace(m2, 0);
    }
    std::vector<long long> list;
    for (auto& [key, slot] : unique) {
        slot = list.size();
        list.push_back(key);
    }
    std::vector<double> vals(list.size());
    const double unit = g.wavenumber_unit();
    parallel_for(list.size(), [&](std::size_t j) {
        vals[j] = symbol_radial(k, unit * std::sqrt(static_cast<double>(list[j])), cfg);
    });
    for (std::size_t i = 0; i < g.size(); ++i) s.values[i] = vals[unique[keys[i]]];
    return s;
}

LevySymbol zero_symbol(const Grid& g) {
    LevySymbol s;
    s.grid = g;
    s.values.assign(g.size(), 0.0);
    s.kernel_id = "zero";
    return s;
}

std::vector<std::array<double, 3>> default_nd_lattice(int n) {
    std::vector<std::array<double, 3>> dirs;
    if (n == 1) {
        dirs = {{1, 0, 0}, {-1, 0, 0}};
    } else if (n == 2) {
        for (int a = 0; a < 8; ++a) dirs.push_back({std::cos(a * M_PI / 4), std::sin(a * M_PI / 4), 0});
    } else {
        const double s = 1.0 / std::sqrt(3.0);
        dirs = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}, {s, s, s}, {-s, -s, -s}};
    }
    std::vector<std::array<double, 3>> out;
    for (int i = 0; i <= 60; ++i) {
        double r = std::pow(10.0, -3.0 + 0.1 * i);
        for (auto d : dirs) out.push_back({r * d[0], r * d[1], r * d[2]});
    }
    return out;
}

NondegeneracyReport check_nondegeneracy(const LevyKernel& k, const std::vector<std::array<double, 3>>& lattice) {
    if (lattice.empty()) throw PreconditionError("nondegeneracy lattice is empty");
    NondegeneracyReport rep;
    rep.near_min = rep.far_min = HUGE_VAL;
    rep.near_max = rep.far_max = -HUGE_VAL;
    const double tol = 1e-12;
    for (const auto& y : lattice) {
        double r2 = 0.0;
        for (int d = 0; d < k.n; ++d) r2 += y[d] * y[d];
        if (r2 == 0.0) throw PreconditionError("nondegeneracy lattice must exclude y = 0");
        double r = std::sqrt(r2);
        double p = k.density(y);
        std::array<double, 3> my{-y[0], -y[1], -y[2]};
        if (k.density(my) != p) {
            rep.symmetric = false;
            rep.pass = false;
            rep.violations.push_back({y, p, "symmetry"});
        }
        if (r <= 1.0) {
            double q = p * std::pow(r, k.n + k.alpha);
            rep.near_min = std::min(rep.near_min, q);
            rep.near_max = std::max(rep.near_max, q);
            ++rep.near_count;
            if (q < k.cbar1 * (1.0 - tol) || q > k.cbar2 * (1.0 + tol)) {
                rep.pass = false;
                rep.violations.push_back({y, q, q < k.cbar1 ? "near lower" : "near upper"});
            }
        } else {
            double q = p * std::pow(r, k.n + k.delta);
            rep.far_min = std::min(rep.far_min, q);
            rep.far_max = std::max(rep.far_max, q);
            ++rep.far_count;
            if (p < 0.0 || q > k.cbar2 * (1.0 + tol)) {
                rep.pass = false;
                rep.violations.push_back({y, q, p < 0.0 ? "far sign" : "far upper"});
            }
        }
    }
    if (rep.near_count == 0) rep.near_min = rep.near_max = 0.0;
    if (rep.far_count == 0) rep.far_min = rep.far_max = 0.0;
    return rep;
}

SampledField apply_operator(const SampledField& f, const LevySymbol& s) {
    require_same_grid(f.grid, s.grid, "apply_operator");
    const HalfLattice& hl = half_lattice(f.grid);
    return apply_multiplier(f, [&](std::size_t h) { return s.values[hl.full_index[h]]; });
}

SampledField apply_commutator(const SampledField& cutoff, const SampledField& f, const LevySymbol& s) {
    require_same_grid(cutoff.grid, f.grid, "apply_commutator");
    require_same_grid(f.grid, s.grid, "apply_commutator");
    SampledField a = apply_operator(pointwise(cutoff, f), s);
    SampledField b = pointwise(cutoff, apply_operator(f, s));
    return a - b;
}

SampledField make_cutoff(const Grid& g, double R, const std::array<double, 3>& center) {
    return sample(g, [&](const std::array<double, 3>& x) { return canonical_cutoff(g.torus_distance(x, center) / R); });
}

CommutatorSweep commutator_bound_sweep(const SampledField& f, const LevySymbol& s,
                                       const std::vector<double>& radii, double p) {
    CommutatorSweep out;
    out.p = p;
    const Grid& g = f.grid;
    std::array<double, 3> c{0.5 * g.side_length, 0.5 * g.side_length, 0.5 * g.side_length};
    double fn = lp_norm(f, p);
    double lo = HUGE_VAL;
    for (double R : radii) {
        if (2.0 * R > 0.5 * g.side_length) throw PreconditionError("cutoff support exceeds half the torus");
        SampledField comm = apply_commutator(make_cutoff(g, R, c), f, s);
        double lhs = lp_norm(comm, p);
        double shape = (std::pow(R, -s.alpha) + std::pow(R, -s.delta)) * fn;
        out.R.push_back(R);
        out.lhs.push_back(lhs);
        out.shape.push_back(shape);
        out.ratio.push_back(shape > 0 ? lhs / shape : 0.0);
        if (out.lhs.size() > 1) out.decay.push_back(lhs / out.lhs[out.lhs.size() - 2]);
        out.fitted_C = std::max(out.fitted_C, out.ratio.back());
        lo = std::min(lo, out.ratio.back());
    }
    out.spread = lo > 0.0 ? out.fitted_C / lo : HUGE_VAL;
    return out;
}

DecomposedKernel decompose_kernel(const LevyKernel& k) {
    DecomposedKernel d;
    d.tilde = k;
    const double edge = k.near_profile(1.0);
    const int n = k.n;
    const double alpha = k.alpha;
    d.tilde.far_profile = [edge, n, alpha](double r) { return edge * std::pow(r, -n - alpha); };
    d.tilde.profile = k.profile + "~tilde";
    auto far = k.far_profile;
    auto tf = d.tilde.far_profile;
    d.under = [far, tf](double r) { return r <= 1.0 ? 0.0 : far(r) - tf(r); };
    return d;
}

HeatL1Result heat_levy_l1_check(const LevySymbol& s, double t, double beta) {
    const Grid& g = s.grid;
    if (!(t > 0.0)) throw PreconditionError("heat time must be positive");
    if (beta < 0.0 || beta > 2.0) throw PreconditionError("beta must lie in [0,2]");
    if (std::sqrt(2.0 * t) < 3.0 * g.spacing())
        throw PreconditionError("heat kernel under-resolved: width sqrt(2t) below three grid cells");
    const HalfLattice& hl = half_lattice(g);
    std::vector<cplx> spec(hl.size);
    const double norm = static_cast<double>(g.size()) / std::pow(g.side_length, g.n);
    for (std::size_t h = 0; h < hl.size; ++h) {
        if (hl.nyquist[h]) {
            spec[h] = 0.0;
            continue;
        }
        double k2 = hl.k2[h];
        double m = s.values[hl.full_index[h]] * (beta == 0.0 ? 1.0 : std::pow(k2, 0.5 * beta)) * std::exp(-t * k2);
        spec[h] = m * norm;
    }
    SampledField field(g, fft_inverse(g, std::move(spec)));
    HeatL1Result r;
    r.t = t;
    r.beta = beta;
    r.lhs = lp_norm(field, 1.0);
    r.rhs_shape = std::pow(t, -0.5 * (s.alpha + beta)) + std::pow(t, -0.5 * (s.delta + beta));
    r.ratio = r.lhs / r.rhs_shape;
    return r;
}

double canonical_bump_mass(int n) {
    auto f = [n](double r) { return canonical_bump(r) * std::pow(r, n - 1); };
    double radial = 0.0;
    for (int i = 0; i < 64; ++i) radial += gauss(f, i / 64.0, (i + 1) / 64.0);
    return unit_sphere_area(n) * radial;
}

}  // namespace levylab
