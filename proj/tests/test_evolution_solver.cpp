#include <cmath>
#include <random>

#include "doctest.h"
#include "levylab/errors.hpp"
#include "levylab/fourier.hpp"
#include "levylab/solver.hpp"

using namespace levylab;

namespace {

SampledField smooth(const Grid& g, std::uint64_t seed, int modes) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    const double w = g.wavenumber_unit();
    std::vector<std::array<double, 4>> terms;
    for (int a = -modes; a <= modes; ++a)
        for (int b = 0; b <= modes; ++b) terms.push_back({double(a), double(b), nd(rng), nd(rng)});
    return sample(g, [&](const std::array<double, 3>& x) {
        double s = 0;
        for (auto& t : terms) {
            double ph = w * (t[0] * x[0] + t[1] * x[1]);
            s += t[2] * std::cos(ph) + t[3] * std::sin(ph);
        }
        return s / std::sqrt(double(terms.size()));
    });
}

struct Setup {
    Grid g;
    std::shared_ptr<const LevySymbol> symbol;
    LevyKernel kernel;
    VelocityField v;
    double width = 0.0;
};

Setup setup(int N, double alpha, double delta, bool drift, std::uint64_t seed = 2) {
    Setup s;
    s.g = Grid(2, N, 2 * M_PI);
    s.kernel = make_kernel(2, alpha, delta, 1, 1, "two-exponent");
    s.symbol = std::make_shared<LevySymbol>(tabulate_symbol(s.kernel, s.g));
    s.width = 2 * s.g.spacing();
    if (drift) {
        DriftSpec d;
        d.kind = "leray";
        d.seed = seed;
        d.horizon = 1.0;
        d.normalize = "linf";
        s.v = mollify(make_divfree(d, s.g, MorreyParams{20.0, 2.0 + 20 * (1 - alpha), false}), MollifierPair{s.width});
        attach_morrey_norm(s.v, MorreyParams{20.0, 2.0 + 20 * (1 - alpha), false});
    } else {
        s.v = zero_velocity(s.g, 1.0);
    }
    return s;
}

ViscousProblem problem(const Setup& s, const SampledField& theta0, double eps, double T) {
    ViscousProblem p;
    p.symbol = s.symbol;
    p.v = s.v;
    p.epsilon_visc = eps;
    p.mollifier_width = s.width > 0 ? s.width : 0.2;
    p.theta0 = theta0;
    p.T = T;
    p.drift_norm = s.v.morrey_norm;
    return p;
}

}  // namespace

TEST_CASE("heat semigroup") {
    Grid g(2, 32, 2 * M_PI);
    SampledField f = smooth(g, 1, 5);
    CHECK(lp_norm(heat_semigroup(f, 0.0) - f, INFINITY) < 1e-13);
    auto mode = sample(g, [](const std::array<double, 3>& x) { return std::cos(3 * x[0] - 2 * x[1]); });
    CHECK(lp_norm(heat_semigroup(mode, 0.1) - std::exp(-0.1 * 13) * mode, INFINITY) < 1e-13);
    for (double p : {1.0, 2.0, HUGE_VAL})
        CHECK(lp_norm(heat_semigroup(f, 0.05), p) <= lp_norm(f, p) * (1 + 1e-10));
}

TEST_CASE("contraction constant") {
    // v = 0 and delta = alpha collapse to 2 T'^{1-alpha/2} eps^{-alpha/2}
    const double a = 0.8, eps = 0.01;
    for (double Tp : {1e-3, 1e-2, 0.1})
        CHECK(contraction_shape(Tp, eps, 0.1, 2, 20, 0.0, a, a) ==
              doctest::Approx(2 * std::pow(Tp, 1 - a / 2) * std::pow(eps, -a / 2)).epsilon(1e-14));
    CHECK(contraction_shape(1e-14, eps, 0.1, 2, 20, 1.0, a, 0.6) < 1e-4);

    Setup s = setup(16, 0.8, 0.6, true);
    ViscousProblem p = problem(s, smooth(s.g, 1, 3), 0.01, 1.0);
    const double pref = 0.3;
    double w = local_window(p, pref);
    REQUIRE(std::isfinite(w));
    CHECK(contraction_constant(p, w, pref) <= 0.5 * (1 + 1e-9));
    CHECK(contraction_constant(p, 2 * w, pref) > 0.5);
}

TEST_CASE("Picard solve basics") {
    Setup s = setup(16, 0.8, 0.6, true);
    SolverConfig cfg;
    cfg.dt = 1e-3;
    SUBCASE("zero data stays zero") {
        auto tr = picard_solve(problem(s, SampledField(s.g), 0.01, 0.05), cfg);
        CHECK(lp_norm(tr.fields.back(), INFINITY) == 0.0);
    }
    SUBCASE("residual ratios, mass, max principle") {
        SampledField th = smooth(s.g, 4, 3);
        auto tr = picard_solve(problem(s, th, 0.01, 0.1), cfg);
        for (const auto& w : tr.windows)
            for (std::size_t i = 1; i < w.residuals.size(); ++i)
                if (w.residuals[i - 1] > 1e-13) CHECK(w.residuals[i] / w.residuals[i - 1] <= 0.55);
        for (const auto& f : tr.fields) CHECK(std::abs(integral(f) - integral(th)) <= 1e-10 * lp_norm(th, 1.0));
        for (std::size_t k = 1; k < tr.lp_norms.size(); ++k)
            for (int j = 0; j < 3; ++j) CHECK(tr.lp_norms[k][j] <= tr.lp_norms[k - 1][j] * (1 + 1e-6));
    }
    SUBCASE("the Picard path needs viscosity") {
        CHECK_THROWS_AS(picard_solve(problem(s, smooth(s.g, 4, 3), 0.0, 0.1), cfg), PreconditionError);
    }
}

TEST_CASE("single mode without drift follows the closed-form multiplier") {
    Setup s = setup(16, 0.8, 0.6, false);
    auto mode = sample(s.g, [](const std::array<double, 3>& x) { return std::cos(2 * x[0] + x[1]); });
    const double eps = 0.01, T = 0.1;
    const double m = std::exp(-T * (symbol_eval(s.kernel, {2.0, 1.0}) + eps * 5));
    for (std::string scheme : {"picard-duhamel", "imex-spectral"}) {
        SolverConfig cfg;
        cfg.scheme = scheme;
        cfg.dt = 1e-4;
        auto tr = solve(problem(s, mode, eps, T), cfg);
        CHECK(lp_norm(tr.fields.back() - m * mode, INFINITY) <= 1e-6 * m);
    }
    // one IMEX step is the exact multiplier
    auto one = imex_step(mode, 0.0, 0.05, problem(s, mode, eps, T));
    CHECK(lp_norm(one - std::exp(-0.05 * (symbol_eval(s.kernel, {2.0, 1.0}) + eps * 5)) * mode, INFINITY) < 1e-10);
}

TEST_CASE("IMEX first order and agreement with Picard") {
    Setup s = setup(32, 0.8, 0.6, true);
    SampledField th = smooth(s.g, 8, 3);
    ViscousProblem p = problem(s, th, 0.01, 0.2);
    auto run = [&](const std::string& scheme, double dt) {
        SolverConfig cfg;
        cfg.scheme = scheme;
        cfg.dt = dt;
        return solve(p, cfg).fields.back();
    };
    SampledField ref = run("imex-spectral", 0.2 / 1024);
    double e1 = lp_norm(run("imex-spectral", 0.2 / 32) - ref, 2.0);
    double e2 = lp_norm(run("imex-spectral", 0.2 / 64) - ref, 2.0);
    double e3 = lp_norm(run("imex-spectral", 0.2 / 128) - ref, 2.0);
    CHECK(std::log2(e1 / e2) >= 0.9);
    CHECK(std::log2(e2 / e3) >= 0.9);
    CHECK(lp_norm(run("picard-duhamel", 2e-3) - run("imex-spectral", 2e-3), 2.0) <= 5e-3);
}

TEST_CASE("continuous dependence on the data") {
    Setup s = setup(16, 0.8, 0.6, true);
    SampledField a = smooth(s.g, 1, 3), b = a + 0.1 * smooth(s.g, 2, 3);
    SolverConfig cfg;
    cfg.dt = 1e-3;
    ViscousProblem pa = problem(s, a, 0.01, 0.05), pb = problem(s, b, 0.01, 0.05);
    auto ta = picard_solve(pa, cfg), tb = picard_solve(pb, cfg);
    double d0 = lp_norm(a - b, 2.0);
    for (std::size_t k = 0; k < ta.fields.size(); ++k) CHECK(lp_norm(ta.fields[k] - tb.fields[k], 2.0) <= 2 * d0);
}

TEST_CASE("vanishing viscosity") {
    SUBCASE("heat flow oracle: distances scale with eps") {
        Grid g(2, 32, 2 * M_PI);
        Setup s;
        s.g = g;
        s.symbol = std::make_shared<LevySymbol>(zero_symbol(g));
        s.v = zero_velocity(g, 1.0);
        SampledField th = smooth(g, 3, 3);
        ViscousProblem p = problem(s, th, 0.04, 0.5);
        SolverConfig cfg;
        cfg.dt = 5e-3;
        auto r = vanishing_viscosity(p, {0.04, 0.02, 0.01, 0.005}, cfg);
        REQUIRE(r.distances.size() >= 3);
        CHECK(r.monotone);
        for (std::size_t i = 1; i < r.distances.size(); ++i)
            CHECK(r.distances[i] / r.distances[i - 1] == doctest::Approx(0.5).epsilon(0.05));
        CHECK(lp_norm(r.limit - heat_semigroup(th, 0.005 * 0.5), INFINITY) < 1e-8);
    }
    SUBCASE("smooth drift and data, monotone distances") {
        Setup s = setup(16, 0.8, 0.6, true);
        ViscousProblem p = problem(s, smooth(s.g, 5, 3), 0.04, 0.1);
        SolverConfig cfg;
        cfg.dt = 2e-3;
        auto r = vanishing_viscosity(p, {0.04, 0.02, 0.01}, cfg);
        CHECK(r.monotone);
    }
    SUBCASE("zero data") {
        Setup s = setup(16, 0.8, 0.6, true);
        SolverConfig cfg;
        cfg.dt = 2e-3;
        auto r = vanishing_viscosity(problem(s, SampledField(s.g), 0.04, 0.05), {0.04, 0.02, 0.01}, cfg);
        for (double d : r.distances) CHECK(d == 0.0);
    }
}

TEST_CASE("backward dual solve") {
    SUBCASE("no drift gives the pure Levy semigroup") {
        Setup s = setup(16, 0.8, 0.6, false);
        SampledField psi0 = smooth(s.g, 2, 3);
        SolverConfig cfg;
        cfg.dt = 1e-3;
        auto tr = backward_dual_solve(s.v, s.symbol, psi0, 0.05, cfg);
        const HalfLattice& hl = half_lattice(s.g);
        auto expected = apply_multiplier(psi0, [&](std::size_t h) { return std::exp(-0.05 * s.symbol->values[hl.full_index[h]]); });
        CHECK(lp_norm(tr.fields.back() - expected, INFINITY) < 1e-10 * lp_norm(psi0, INFINITY));
    }
    SUBCASE("transfer identity and zero mean") {
        Setup s = setup(32, 0.8, 0.6, true);
        SampledField th = smooth(s.g, 6, 3), psi0 = smooth(s.g, 7, 3);
        psi0 = psi0 - SampledField(s.g, mean(psi0));
        const double T = 0.1;
        SolverConfig cfg;
        cfg.dt = 1e-3;
        auto fwd = solve(problem(s, th, 0.01, T), cfg);
        auto bwd = backward_dual_solve(s.v, s.symbol, psi0, T, cfg, 0.01, s.width, s.v.morrey_norm);
        double lhs = inner(fwd.fields.back(), psi0), rhs = inner(th, bwd.fields.back());
        CHECK(std::abs(lhs - rhs) <= 1e-5 * std::abs(lhs));
        for (const auto& f : bwd.fields) CHECK(std::abs(mean(f)) <= 1e-10 * lp_norm(psi0, INFINITY));
    }
}
