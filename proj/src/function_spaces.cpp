#include "levylab/function_spaces.hpp"

#include <algorithm>
#include <cmath>

#include "levylab/errors.hpp"
#include "levylab/fourier.hpp"
#include "levylab/parallel.hpp"

namespace levylab {

namespace {

double pow_q(double x, double q) {
    if (q == 1.0) return x;
    if (q == 2.0) return x * x;
    if (q == std::floor(q) && q <= 64.0) {
        unsigned e = static_cast<unsigned>(q);
        double r = 1.0;
        while (e) {
            if (e & 1u) r *= x;
            x *= x;
            e >>= 1u;
        }
        return r;
    }
    return std::pow(x, q);
}

// Residue offsets with wrapped length in [lo, hi], each point of the torus counted once.
std::vector<std::array<int, 3>> offsets_in_shell(const Grid& g, double lo, double hi) {
    const int N = g.points_per_dim;
    const double h = g.spacing();
    const double eps = 1e-9 * h;
    std::vector<std::array<int, 3>> out;
    std::array<int, 3> m{0, 0, 0};
    std::size_t total = g.size();
    for (std::size_t idx = 0; idx < total; ++idx) {
        m = g.unflatten(idx);
        double s = 0.0;
        std::array<int, 3> d{0, 0, 0};
        for (int k = 0; k < g.n; ++k) {
            int w = m[k] <= N / 2 ? m[k] : m[k] - N;
            d[k] = w;
            s += double(w) * w;
        }
        double r = std::sqrt(s) * h;
        if (r >= lo - eps && r <= hi + eps) out.push_back(d);
    }
    return out;
}

inline std::size_t shifted(const Grid& g, const std::array<int, 3>& base, const std::array<int, 3>& d) {
    const int N = g.points_per_dim;
    std::size_t idx = 0;
    for (int k = 0; k < g.n; ++k) {
        int i = base[k] + d[k];
        i %= N;
        if (i < 0) i += N;
        idx = idx * N + static_cast<std::size_t>(i);
    }
    return idx;
}

template <class Osc, class Plain>
double morrey_sup(const Grid& g, const MorreyParams& params, Osc&& osc, Plain&& plain) {
    params.validate(g.n);
    const auto radii = dyadic_radii(g);
    std::vector<std::vector<std::array<int, 3>>> balls;
    for (double r : radii) balls.push_back(ball_offsets(g, r));
    // from N = 128 on, balls of radius R cells are centered on a stride floor(R/4) sublattice
    std::vector<int> stride;
    for (double r : radii)
        stride.push_back(g.points_per_dim < 128 ? 1 : std::max(1, static_cast<int>(r / g.spacing() + 1e-9) / 4));
    std::vector<double> best(g.size(), 0.0);
    parallel_for(g.size(), [&](std::size_t c) {
        auto base = g.unflatten(c);
        double m = 0.0;
        for (std::size_t j = 0; j < radii.size(); ++j) {
            double r = radii[j];
            bool on = true;
            for (int k = 0; k < g.n; ++k) on = on && base[k] % stride[j] == 0;
            if (!on) continue;
            bool plain_branch = params.local && r >= 1.0;
            double integral = plain_branch ? plain(base, balls[j]) : osc(base, balls[j]);
            double v = std::pow(std::pow(r, -params.a) * integral, 1.0 / params.q);
            m = std::max(m, v);
        }
        best[c] = m;
    }, 16);
    return *std::max_element(best.begin(), best.end());
}

}  // namespace

void MorreyParams::validate(int n) const {
    if (!(q >= 1.0)) throw PreconditionError("Morrey exponent q must be >= 1");
    if (!(a >= 0.0 && a < n + q)) throw PreconditionError("Morrey exponent a must lie in [0, n+q)");
}

std::vector<double> dyadic_radii(const Grid& g) {
    std::vector<double> r;
    const double h = g.spacing();
    for (double x = h; x <= 0.5 * g.side_length * (1.0 + 1e-12); x *= 2.0) r.push_back(x);
    return r;
}

std::vector<std::array<int, 3>> ball_offsets(const Grid& g, double r) { return offsets_in_shell(g, 0.0, r); }

double morrey_norm(const SampledField& f, const MorreyParams& params) {
    const Grid& g = f.grid;
    const double vol = g.cell_volume();
    const auto& v = f.values;
    auto osc = [&](const std::array<int, 3>& base, const std::vector<std::array<int, 3>>& ball) {
        double s = 0.0;
        for (const auto& d : ball) s += v[shifted(g, base, d)];
        double m = s / static_cast<double>(ball.size());
        double acc = 0.0;
        for (const auto& d : ball) acc += pow_q(std::abs(v[shifted(g, base, d)] - m), params.q);
        return acc * vol;
    };
    auto plain = [&](const std::array<int, 3>& base, const std::vector<std::array<int, 3>>& ball) {
        double acc = 0.0;
        for (const auto& d : ball) acc += pow_q(std::abs(v[shifted(g, base, d)]), params.q);
        return acc * vol;
    };
    return morrey_sup(g, params, osc, plain);
}

double morrey_norm(const std::vector<std::vector<double>>& comps, const Grid& g, const MorreyParams& params) {
    const double vol = g.cell_volume();
    const std::size_t nc = comps.size();
    auto osc = [&](const std::array<int, 3>& base, const std::vector<std::array<int, 3>>& ball) {
        std::array<double, 3> m{0, 0, 0};
        for (const auto& d : ball) {
            std::size_t i = shifted(g, base, d);
            for (std::size_t c = 0; c < nc; ++c) m[c] += comps[c][i];
        }
        for (std::size_t c = 0; c < nc; ++c) m[c] /= static_cast<double>(ball.size());
        double acc = 0.0;
        for (const auto& d : ball) {
            std::size_t i = shifted(g, base, d);
            double s = 0.0;
            for (std::size_t c = 0; c < nc; ++c) s += (comps[c][i] - m[c]) * (comps[c][i] - m[c]);
            acc += pow_q(std::sqrt(s), params.q);
        }
        return acc * vol;
    };
    auto plain = [&](const std::array<int, 3>& base, const std::vector<std::array<int, 3>>& ball) {
        double acc = 0.0;
        for (const auto& d : ball) {
            std::size_t i = shifted(g, base, d);
            double s = 0.0;
            for (std::size_t c = 0; c < nc; ++c) s += comps[c][i] * comps[c][i];
            acc += pow_q(std::sqrt(s), params.q);
        }
        return acc * vol;
    };
    return morrey_sup(g, params, osc, plain);
}

double ball_average(const SampledField& f, const std::array<double, 3>& center, double r) {
    return ball_average(std::vector<std::vector<double>>{f.values}, f.grid, center, r)[0];
}

std::vector<double> ball_average(const std::vector<std::vector<double>>& comps, const Grid& g,
                                 const std::array<double, 3>& center, double r) {
    const double h = g.spacing();
    const int N = g.points_per_dim;
    if (r < h) throw PreconditionError("ball radius below one grid cell");
    if (r > 0.5 * g.side_length) throw PreconditionError("ball radius exceeds half the torus");
    // scan the bounding box of the ball around the nearest lower grid node
    std::array<int, 3> lo{0, 0, 0}, hi{0, 0, 0};
    int span = static_cast<int>(std::ceil(r / h)) + 1;
    for (int k = 0; k < g.n; ++k) {
        int c = static_cast<int>(std::floor(center[k] / h));
        lo[k] = c - span;
        hi[k] = c + span;
    }
    std::vector<double> acc(comps.size(), 0.0);
    std::size_t count = 0;
    std::array<int, 3> ijk{0, 0, 0};
    const double eps = 1e-12 * h;
    std::vector<unsigned char> seen(g.size(), 0);
    auto visit = [&]() {
        double s = 0.0;
        for (int k = 0; k < g.n; ++k) {
            double w = g.wrap(ijk[k] * h - center[k]);
            s += w * w;
        }
        if (std::sqrt(s) > r + eps) return;
        std::size_t idx = g.flatten(ijk);
        if (seen[idx]) return;
        seen[idx] = 1;
        for (std::size_t c = 0; c < comps.size(); ++c) acc[c] += comps[c][idx];
        ++count;
    };
    (void)N;
    for (ijk[0] = lo[0]; ijk[0] <= hi[0]; ++ijk[0]) {
        if (g.n == 1) { visit(); continue; }
        for (ijk[1] = lo[1]; ijk[1] <= hi[1]; ++ijk[1]) {
            if (g.n == 2) { visit(); continue; }
            for (ijk[2] = lo[2]; ijk[2] <= hi[2]; ++ijk[2]) visit();
        }
    }
    if (count == 0) throw PreconditionError("empty ball");
    for (double& a : acc) a /= static_cast<double>(count);
    return acc;
}

double besov_seminorm(const SampledField& f, double s, double p) {
    const Grid& g = f.grid;
    if (!(s > 0.0 && s < 1.0)) throw PreconditionError("Besov smoothness must lie in (0,1)");
    if (!(p >= 1.0)) throw PreconditionError("Besov integrability must be >= 1");
    const double h = g.spacing();
    auto offs = offsets_in_shell(g, h, 0.5 * g.side_length);
    std::vector<double> partial(offs.size(), 0.0);
    const auto& v = f.values;
    parallel_for(offs.size(), [&](std::size_t j) {
        const auto& d = offs[j];
        double len2 = 0.0;
        for (int k = 0; k < g.n; ++k) len2 += double(d[k]) * d[k];
        double len = std::sqrt(len2) * h;
        std::array<int, 3> neg{-d[0], -d[1], -d[2]};
        double acc = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) {
            double diff = std::abs(v[i] - v[shifted(g, g.unflatten(i), neg)]);
            acc += pow_q(diff, p);
        }
        partial[j] = acc / std::pow(len, g.n + s * p);
    }, 4);
    double total = 0.0;
    for (double x : partial) total += x;
    total *= g.cell_volume() * g.cell_volume();
    return std::pow(total, 1.0 / p);
}

double holder_seminorm(const SampledField& f, double gamma) {
    const Grid& g = f.grid;
    if (!(gamma > 0.0 && gamma < 1.0)) throw PreconditionError("Hoelder exponent must lie in (0,1)");
    const double h = g.spacing();
    auto offs = offsets_in_shell(g, 0.5 * h, 0.5 * g.side_length);
    std::vector<double> best(offs.size(), 0.0);
    const auto& v = f.values;
    parallel_for(offs.size(), [&](std::size_t j) {
        const auto& d = offs[j];
        double len2 = 0.0;
        for (int k = 0; k < g.n; ++k) len2 += double(d[k]) * d[k];
        double w = std::pow(std::sqrt(len2) * h, -gamma);
        double m = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i)
            m = std::max(m, std::abs(v[i] - v[shifted(g, g.unflatten(i), d)]));
        best[j] = m * w;
    }, 4);
    return best.empty() ? 0.0 : *std::max_element(best.begin(), best.end());
}

double holder_norm(const SampledField& f, double gamma) { return lp_norm(f, HUGE_VAL) + holder_seminorm(f, gamma); }

OscillationReport dyadic_oscillation_check(const SampledField& f, const MorreyParams& params,
                                           const std::array<double, 3>& center, double rho, int k,
                                           std::optional<double> precomputed_norm) {
    const Grid& g = f.grid;
    if (k < 1) throw PreconditionError("dyadic level must be >= 1");
    double big = std::ldexp(rho, k);
    if (big > 0.5 * g.side_length * (1.0 + 1e-12)) throw PreconditionError("radius overflow: 2^k rho > L/2");
    OscillationReport rep;
    rep.morrey = precomputed_norm ? *precomputed_norm : morrey_norm(f, params);
    rep.lhs = std::abs(ball_average(f, center, big) - ball_average(f, center, rho));
    double e = (params.a - g.n) / params.q;
    if (params.a <= g.n) {
        rep.regime = "a<=n";
        rep.rhs_shape = std::pow(rho, e) * rep.morrey;
    } else {
        rep.regime = "a>n";
        rep.rhs_shape = std::pow(big, e) * rep.morrey;
    }
    rep.ratio = rep.rhs_shape > 0.0 ? rep.lhs / rep.rhs_shape : 0.0;
    return rep;
}

SampledField fractional_laplacian(const SampledField& f, double s) {
    const HalfLattice& hl = half_lattice(f.grid);
    return apply_multiplier(f, [&](std::size_t h) { return std::pow(std::sqrt(hl.k2[h]), s); });
}

double sobolev_norm(const SampledField& f, double s, double p) {
    if (!(p >= 1.0)) throw PreconditionError("Sobolev integrability must be >= 1");
    return lp_norm(f, p) + lp_norm(fractional_laplacian(f, s), p);
}

}  // namespace levylab
