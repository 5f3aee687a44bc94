#include "levylab/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "levylab/errors.hpp"
#include "levylab/fourier.hpp"
#include "levylab/parallel.hpp"

namespace levylab {

namespace {

using Spectrum = std::vector<cplx>;

double spectrum_l2(const Grid& g, const HalfLattice& hl, const Spectrum& s) {
    double acc = 0.0;
    for (std::size_t i = 0; i < hl.size; ++i) acc += hl.weight[i] * std::norm(s[i]);
    return std::sqrt(acc * g.cell_volume() / static_cast<double>(g.size()));
}

bool drift_is_zero(const ViscousProblem& p) {
    for (const auto& node : p.v.data)
        for (const auto& c : node)
            for (double x : c)
                if (x != 0.0) return false;
    return true;
}

std::array<double, 4> grid_norms(const SampledField& f) {
    return {lp_norm(f, 1.0), lp_norm(f, 2.0), lp_norm(f, 4.0), lp_norm(f, INFINITY)};
}

// exp(-eps k^2 h) and (1 - exp(-eps k^2 h)) / (eps k^2)
struct HeatWeights {
    std::vector<double> decay, phi;
};

HeatWeights heat_weights(const HalfLattice& hl, double eps, double h) {
    HeatWeights w;
    w.decay.resize(hl.size);
    w.phi.resize(hl.size);
    for (std::size_t i = 0; i < hl.size; ++i) {
        double mu = eps * hl.k2[i];
        w.decay[i] = std::exp(-mu * h);
        w.phi[i] = mu * h < 1e-8 ? h * (1.0 - 0.5 * mu * h) : -std::expm1(-mu * h) / mu;
    }
    return w;
}

std::vector<double> symbol_half(const LevySymbol& s, const HalfLattice& hl) {
    std::vector<double> a(hl.size);
    for (std::size_t i = 0; i < hl.size; ++i) a[i] = s.at_half(i);
    return a;
}

// One window of the Duhamel map: sources at midpoints of the given node states.
struct WindowOperator {
    const ViscousProblem& p;
    const Grid& g;
    const HalfLattice& hl;
    std::vector<double> a;
    HeatWeights w;
    std::vector<Components> drift_mid;
    bool with_drift;
    bool dealias;
    double h;

    WindowOperator(const ViscousProblem& prob, double t0, double step, int steps, bool dealias_)
        : p(prob), g(prob.grid()), hl(half_lattice(g)), a(symbol_half(*prob.symbol, hl)),
          w(heat_weights(hl, prob.epsilon_visc, step)), with_drift(!drift_is_zero(prob)), dealias(dealias_), h(step) {
        if (with_drift) {
            drift_mid.resize(steps);
            for (int j = 0; j < steps; ++j) drift_mid[j] = p.drift_at(t0 + (j + 0.5) * step);
        }
    }

    std::vector<Spectrum> sources(const std::vector<Spectrum>& nodes) const {
        std::size_t steps = nodes.size() - 1;
        std::vector<Spectrum> S(steps);
        parallel_for(steps, [&](std::size_t j) {
            Spectrum avg(hl.size);
            for (std::size_t i = 0; i < hl.size; ++i) avg[i] = 0.5 * (nodes[j][i] + nodes[j + 1][i]);
            Spectrum s(hl.size);
            if (with_drift) {
                std::vector<double> real = fft_inverse(g, avg);
                s = flux_divergence_spectrum(g, real, drift_mid[j], dealias);
            } else {
                std::fill(s.begin(), s.end(), cplx(0.0));
            }
            for (std::size_t i = 0; i < hl.size; ++i) s[i] -= a[i] * avg[i];
            S[j] = std::move(s);
        });
        return S;
    }

    // nodes[0] fixed, the rest rebuilt from the recursion
    std::vector<Spectrum> apply(const std::vector<Spectrum>& nodes, bool homogeneous) const {
        std::vector<Spectrum> S = sources(nodes);
        std::vector<Spectrum> out(nodes.size(), Spectrum(hl.size));
        if (homogeneous)
            std::fill(out[0].begin(), out[0].end(), cplx(0.0));
        else
            out[0] = nodes[0];
        for (std::size_t j = 0; j + 1 < nodes.size(); ++j)
            for (std::size_t i = 0; i < hl.size; ++i) out[j + 1][i] = w.decay[i] * out[j][i] + w.phi[i] * S[j][i];
        return out;
    }

    double norm(const std::vector<Spectrum>& nodes) const {
        double m = 0.0;
        for (const auto& s : nodes) m = std::max(m, spectrum_l2(g, hl, s));
        return m;
    }
};

}  // namespace

Components ViscousProblem::drift_at(double s) const {
    double u = time_offset + s;
    Components c = v.at(drift_reversed ? drift_ref - u : u);
    if (drift_sign != 1.0)
        for (auto& comp : c)
            for (double& x : comp) x *= drift_sign;
    return c;
}

const SampledField& TrajectorySolution::at_time(double t, double tol) const {
    for (std::size_t i = 0; i < times.size(); ++i)
        if (std::abs(times[i] - t) <= tol) return fields[i];
    throw PreconditionError("no stored field at requested time");
}

SampledField heat_semigroup(const SampledField& f, double tau) {
    if (tau < 0.0) throw PreconditionError("heat semigroup needs tau >= 0");
    if (tau == 0.0) return f;
    const HalfLattice& hl = half_lattice(f.grid);
    return apply_multiplier(f, [&](std::size_t i) { return std::exp(-tau * hl.k2[i]); });
}

double contraction_shape(double Tp, double eps, double width, int n, double q, double v_norm, double alpha,
                         double delta) {
    if (eps <= 0.0) throw PreconditionError("contraction constant needs eps > 0");
    if (Tp < 0.0) throw PreconditionError("window length must be nonnegative");
    double drift = v_norm > 0.0 ? std::sqrt(Tp / eps) * std::pow(width, -n / q) * v_norm : 0.0;
    return drift + std::pow(Tp, 1.0 - alpha / 2.0) * std::pow(eps, -alpha / 2.0) +
           std::pow(Tp, 1.0 - delta / 2.0) * std::pow(eps, -delta / 2.0);
}

double contraction_shape(const ViscousProblem& p, double Tp) {
    double width = p.mollifier_width > 0.0 ? p.mollifier_width : p.epsilon_visc;
    return contraction_shape(Tp, p.epsilon_visc, width, p.grid().n, p.q, p.drift_norm, p.symbol->alpha,
                             p.symbol->delta);
}

double contraction_constant(const ViscousProblem& p, double Tp, double prefactor) {
    return prefactor * contraction_shape(p, Tp);
}

double local_window(const ViscousProblem& p, double prefactor) {
    if (prefactor <= 0.0) return std::numeric_limits<double>::infinity();
    double hi = 1.0;
    while (contraction_constant(p, hi, prefactor) <= 0.5) {
        hi *= 2.0;
        if (hi > 1e12) return std::numeric_limits<double>::infinity();
    }
    double lo = 0.0;
    for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
        double mid = 0.5 * (lo + hi);
        (contraction_constant(p, mid, prefactor) <= 0.5 ? lo : hi) = mid;
    }
    return lo;
}

double duhamel_lipschitz(const ViscousProblem& p, double Tp, int steps, bool dealias) {
    if (steps < 1) throw PreconditionError("need at least one step");
    const Grid& g = p.grid();
    WindowOperator op(p, 0.0, Tp / steps, steps, dealias);
    const HalfLattice& hl = op.hl;
    std::mt19937_64 rng(0x5eed);
    std::normal_distribution<double> gauss;

    std::vector<std::vector<Spectrum>> starts;
    // white noise, independent per node
    {
        std::vector<Spectrum> s(steps + 1);
        for (auto& node : s) {
            std::vector<double> x(g.size());
            for (double& y : x) y = gauss(rng);
            node = fft_forward(g, x);
        }
        starts.push_back(std::move(s));
    }
    // smooth random, constant in time
    {
        Spectrum base(hl.size);
        for (std::size_t i = 0; i < hl.size; ++i)
            base[i] = hl.nyquist[i] ? 0.0 : cplx(gauss(rng), gauss(rng)) / (1.0 + hl.k2[i]);
        base[0] = 0.0;
        starts.emplace_back(steps + 1, base);
    }
    // mode of largest symbol, constant in time
    {
        std::size_t best = 1 % hl.size;
        for (std::size_t i = 1; i < hl.size; ++i)
            if (!hl.nyquist[i] && op.a[i] > op.a[best]) best = i;
        Spectrum base(hl.size, cplx(0.0));
        base[best] = 1.0;
        starts.emplace_back(steps + 1, base);
    }

    double L = 0.0;
    for (auto& w : starts) {
        for (int it = 0; it < 8; ++it) {
            double nw = op.norm(w);
            if (nw == 0.0) break;
            auto dw = op.apply(w, true);
            double nd = op.norm(dw);
            L = std::max(L, nd / nw);
            if (nd == 0.0) break;
            for (auto& s : dw)
                for (auto& c : s) c /= nd;
            w = std::move(dw);
        }
    }
    return L;
}

C0Calibration calibrate_c0(const ViscousProblem& p, const SolverConfig& cfg) {
    constexpr double target = 0.45;
    C0Calibration cal;
    auto measure = [&](double Tp) {
        int steps = std::max(8, static_cast<int>(std::lround(Tp / cfg.dt)));
        double L = duhamel_lipschitz(p, Tp, steps, cfg.dealias);
        cal.Tprime.push_back(Tp);
        cal.lipschitz.push_back(L);
        cal.shape.push_back(contraction_shape(p, Tp));
        return L;
    };
    // geometric ladder up to the first T' whose measured constant exceeds the target
    double lo = 0.0, hi = 0.0;
    for (double Tp = std::min(p.T, 0.25 * cfg.dt); Tp <= 2.0 * p.T; Tp *= 2.0) {
        if (measure(Tp) > target) {
            hi = Tp;
            break;
        }
        lo = Tp;
    }
    double Tstar = std::numeric_limits<double>::infinity();
    if (hi > 0.0) {
        if (lo == 0.0) {
            lo = hi;
            while (lo > 1e-12 * p.T && measure(lo *= 0.5) > target) hi = lo;
        }
        for (int it = 0; it < 6 && lo > 0.0; ++it) {
            double mid = std::sqrt(lo * hi);
            (measure(mid) > target ? hi : lo) = mid;
        }
        Tstar = lo;
    }
    double C = 0.0;
    for (std::size_t j = 0; j < cal.Tprime.size(); ++j)
        if (cal.Tprime[j] <= Tstar) C = std::max(C, cal.lipschitz[j] / cal.shape[j]);
    if (std::isfinite(Tstar)) C = std::max(C, 0.5 / contraction_shape(p, Tstar));
    cal.prefactor = C;
    return cal;
}

TrajectorySolution picard_solve(const ViscousProblem& p, const SolverConfig& cfg) {
    if (p.epsilon_visc <= 0.0) throw PreconditionError("picard path needs eps > 0");
    if (cfg.dt <= 0.0 || cfg.picard_tol <= 0.0) throw PreconditionError("dt and picard_tol must be positive");
    if (p.T <= 0.0) throw PreconditionError("horizon must be positive");
    if (!p.symbol || !(p.symbol->grid == p.grid())) throw GridMismatch("symbol grid differs from data grid");
    if (!drift_is_zero(p) && !(p.v.grid == p.grid())) throw GridMismatch("drift grid differs from data grid");

    const Grid& g = p.grid();
    const HalfLattice& hl = half_lattice(g);
    TrajectorySolution sol;
    sol.scheme = "picard-duhamel";

    double C = cfg.c0_prefactor > 0.0 ? cfg.c0_prefactor : calibrate_c0(p, cfg).prefactor;
    double Tp = cfg.local_window_rule ? local_window(p, C) : (cfg.fixed_window > 0.0 ? cfg.fixed_window : p.T);
    if (Tp < cfg.dt) throw PreconditionError("local window degenerates below dt");
    Tp = std::min(Tp, p.T);
    sol.c0_prefactor = C;
    sol.window = Tp;
    sol.c0 = C * contraction_shape(p, Tp);

    double hstep = std::min(cfg.dt, Tp / 8.0);
    long K = static_cast<long>(std::ceil(p.T / hstep - 1e-9));
    K = ((K + 7) / 8) * 8;
    hstep = p.T / static_cast<double>(K);
    long M = std::max<long>(8, static_cast<long>(std::floor(Tp / hstep + 1e-9)));
    sol.step = hstep;

    auto store = [&](long idx, const Spectrum& s) {
        SampledField f(g, fft_inverse(g, s));
        f.time = idx * hstep;
        sol.times.push_back(idx * hstep);
        sol.lp_norms.push_back(grid_norms(f));
        sol.fields.push_back(std::move(f));
    };

    Spectrum current = fft_forward(g, p.theta0.values);
    store(0, current);
    sol.fields[0].values = p.theta0.values;
    sol.lp_norms[0] = grid_norms(sol.fields[0]);
    int every = std::max(1, cfg.store_every);
    long done = 0;
    while (done < K) {
        long steps = std::min(M, K - done);
        double t0 = done * hstep;
        WindowOperator op(p, t0, hstep, static_cast<int>(steps), cfg.dealias);
        std::vector<Spectrum> nodes(steps + 1, current);
        WindowDiagnostics wd;
        wd.t_start = t0;
        wd.t_end = t0 + steps * hstep;
        wd.steps = static_cast<int>(steps);
        bool converged = false;
        for (int it = 1; it <= cfg.max_iters; ++it) {
            auto next = op.apply(nodes, false);
            double res = 0.0, scale = 0.0;
            for (long j = 0; j <= steps; ++j) {
                Spectrum d(hl.size);
                for (std::size_t i = 0; i < hl.size; ++i) d[i] = next[j][i] - nodes[j][i];
                res = std::max(res, spectrum_l2(g, hl, d));
                scale = std::max(scale, spectrum_l2(g, hl, next[j]));
            }
            nodes = std::move(next);
            wd.residuals.push_back(res);
            wd.iterations = it;
            if (res <= cfg.picard_tol * std::max(scale, 1e-300) || res == 0.0) {
                converged = true;
                break;
            }
        }
        if (!converged)
            throw ConvergenceError("picard iteration did not converge on window starting at " + std::to_string(t0),
                                   wd.residuals.empty() ? 0.0 : wd.residuals.back());
        sol.windows.push_back(std::move(wd));
        for (long j = 1; j <= steps; ++j) {
            long idx = done + j;
            if (idx % every == 0 || idx == K) store(idx, nodes[j]);
        }
        current = nodes[steps];
        done += steps;
    }
    return sol;
}

SampledField imex_step(const SampledField& state, double t, double dt, const ViscousProblem& p, bool dealias) {
    const Grid& g = state.grid;
    if (dt <= 0.0) throw PreconditionError("dt must be positive");
    if (p.epsilon_visc < 0.0) throw PreconditionError("eps must be nonnegative");
    const HalfLattice& hl = half_lattice(g);
    Spectrum s = fft_forward(g, state.values);
    if (!drift_is_zero(p)) {
        Components v = p.drift_at(t);
        double vmax = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) {
            double m = 0.0;
            for (const auto& c : v) m += c[i] * c[i];
            vmax = std::max(vmax, std::sqrt(m));
        }
        if (vmax > 0.0 && dt > g.spacing() / (2.0 * vmax))
            throw PreconditionError("CFL violation: dt > h / (2 max|v|)");
        Spectrum f = flux_divergence_spectrum(g, state.values, v, dealias);
        for (std::size_t i = 0; i < hl.size; ++i) s[i] += dt * f[i];
    }
    for (std::size_t i = 0; i < hl.size; ++i)
        s[i] *= std::exp(-dt * (p.symbol->at_half(i) + p.epsilon_visc * hl.k2[i]));
    SampledField out(g, fft_inverse(g, std::move(s)));
    out.time = t + dt;
    return out;
}

TrajectorySolution imex_solve(const ViscousProblem& p, const SolverConfig& cfg) {
    if (cfg.dt <= 0.0) throw PreconditionError("dt must be positive");
    if (p.T <= 0.0) throw PreconditionError("horizon must be positive");
    if (!p.symbol || !(p.symbol->grid == p.grid())) throw GridMismatch("symbol grid differs from data grid");
    TrajectorySolution sol;
    sol.scheme = "imex-spectral";
    long K = static_cast<long>(std::ceil(p.T / cfg.dt - 1e-9));
    double h = p.T / static_cast<double>(K);
    sol.step = h;
    int every = std::max(1, cfg.store_every);
    SampledField cur = p.theta0;
    cur.time = 0.0;
    auto store = [&](long idx) {
        sol.times.push_back(idx * h);
        sol.lp_norms.push_back(grid_norms(cur));
        sol.fields.push_back(cur);
    };
    store(0);
    for (long k = 0; k < K; ++k) {
        cur = imex_step(cur, k * h, h, p, cfg.dealias);
        cur.time = (k + 1) * h;
        if ((k + 1) % every == 0 || k + 1 == K) store(k + 1);
    }
    return sol;
}

TrajectorySolution solve(const ViscousProblem& p, const SolverConfig& cfg) {
    if (cfg.scheme == "picard-duhamel") return picard_solve(p, cfg);
    if (cfg.scheme == "imex-spectral") return imex_solve(p, cfg);
    throw PreconditionError("unknown scheme " + cfg.scheme);
}

VanishingViscosityReport vanishing_viscosity(const ViscousProblem& tmpl, const std::vector<double>& eps_list,
                                             const SolverConfig& cfg) {
    if (eps_list.size() < 3) throw PreconditionError("eps_list needs at least 3 entries");
    for (std::size_t i = 1; i < eps_list.size(); ++i)
        if (!(eps_list[i] < eps_list[i - 1])) throw PreconditionError("eps_list must be descending");
    VanishingViscosityReport rep;
    rep.eps = eps_list;
    std::vector<SampledField> finals;
    for (double e : eps_list) {
        ViscousProblem p = tmpl;
        p.epsilon_visc = e;
        TrajectorySolution s = solve(p, cfg);
        finals.push_back(s.fields.back());
    }
    for (std::size_t i = 0; i + 1 < finals.size(); ++i) rep.distances.push_back(lp_norm(finals[i] - finals[i + 1], 2.0));
    for (std::size_t i = 0; i + 1 < rep.distances.size(); ++i) {
        rep.trend.push_back(rep.distances[i] > 0.0 ? rep.distances[i + 1] / rep.distances[i] : 0.0);
        if (rep.distances[i + 1] > rep.distances[i]) rep.monotone = false;
    }
    rep.limit = finals.back();
    return rep;
}

TrajectorySolution backward_dual_solve(const VelocityField& v, std::shared_ptr<const LevySymbol> symbol,
                                       const SampledField& psi0, double t_final, const SolverConfig& cfg,
                                       double eps_visc, double mollifier_width, double drift_norm, double q) {
    ViscousProblem p;
    p.symbol = std::move(symbol);
    p.v = v;
    p.epsilon_visc = eps_visc;
    p.mollifier_width = mollifier_width;
    p.theta0 = psi0;
    p.T = t_final;
    p.drift_norm = drift_norm;
    p.q = q;
    p.drift_sign = -1.0;
    p.drift_reversed = true;
    p.drift_ref = t_final;
    SolverConfig c = cfg;
    if (eps_visc <= 0.0) c.scheme = "imex-spectral";
    return solve(p, c);
}

}  // namespace levylab
