#include <cmath>
#include <random>

#include "doctest.h"
#include "levylab/errors.hpp"
#include "levylab/fourier.hpp"
#include "levylab/levy.hpp"

using namespace levylab;

namespace {

SampledField noise(const Grid& g, std::uint64_t seed, int modes) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    const double w = g.wavenumber_unit();
    std::vector<std::array<double, 4>> terms;
    for (int a = -modes; a <= modes; ++a)
        for (int b = 0; b <= modes; ++b) terms.push_back({double(a), double(b), nd(rng), nd(rng)});
    return sample(g, [&](const std::array<double, 3>& x) {
        double s = 0;
        for (auto& t : terms) s += t[2] * std::cos(w * (t[0] * x[0] + t[1] * x[1])) + t[3] * std::sin(w * (t[0] * x[0] + t[1] * x[1]));
        return s;
    });
}

}  // namespace

TEST_CASE("exponent validation") {
    CHECK_THROWS_AS(make_kernel(2, 1.0, 0.5, 1, 1, "stable"), PreconditionError);
    CHECK_THROWS_AS(make_kernel(2, 0.8, 0.8, 1, 1, "stable"), PreconditionError);
    CHECK_THROWS_AS(make_kernel(2, 1.5, 0.8, 1, 1, "stable"), PreconditionError);
    CHECK_THROWS_AS(make_kernel(2, 0.8, 0.6, 1, 1, "nope"), PreconditionError);
    CHECK_NOTHROW(make_kernel(2, 1.5, 1.2, 1, 1, "two-exponent"));
}

TEST_CASE("symbol vanishes at zero and is even") {
    LevyKernel k = make_kernel(2, 0.8, 0.6, 1, 1, "two-exponent");
    CHECK(symbol_eval(k, {0.0, 0.0}) == 0.0);
    CHECK(symbol_eval(k, {1.3, -0.4}) == doctest::Approx(symbol_eval(k, {-1.3, 0.4})).epsilon(1e-12));
}

TEST_CASE("stable symbol matches the closed form and is homogeneous") {
    for (double alpha : {0.5, 1.5}) {
        LevyKernel k = make_kernel(2, alpha, alpha > 1 ? 1.2 : 0.3, 1, 1, "stable");
        const double c = stable_symbol_constant(2, alpha);
        for (double xi : {0.5, 1.0, 3.0, 10.0}) {
            CHECK(symbol_radial(k, xi) == doctest::Approx(c * std::pow(xi, alpha)).epsilon(1e-6));
            CHECK(symbol_radial(k, 2 * xi) / symbol_radial(k, xi) == doctest::Approx(std::pow(2.0, alpha)).epsilon(1e-6));
        }
    }
}

TEST_CASE("closed-form stable constant, one dimension, alpha = 1/2 oracle") {
    // int (1 - cos y) |y|^{-3/2} dy over R = 2 sqrt(2 pi)
    CHECK(stable_symbol_constant(1, 0.5) == doctest::Approx(2.0 * std::sqrt(2.0 * M_PI)).epsilon(1e-12));
}

TEST_CASE("nondegeneracy checks") {
    auto lattice = default_nd_lattice(2);
    SUBCASE("stable kernel, ratios identically one") {
        auto rep = check_nondegeneracy(make_kernel(2, 0.8, 0.6, 1, 1, "stable"), lattice);
        CHECK(rep.pass);
        CHECK(rep.near_min == doctest::Approx(1.0));
        CHECK(rep.near_max == doctest::Approx(1.0));
    }
    SUBCASE("scaled past cbar2 fails with a reported sample") {
        LevyKernel k = make_kernel(2, 0.8, 0.6, 1, 1, "stable").scaled(2.0);
        auto rep = check_nondegeneracy(k, lattice);
        CHECK_FALSE(rep.pass);
        CHECK_FALSE(rep.violations.empty());
    }
    SUBCASE("truncated kernel passes") {
        CHECK(check_nondegeneracy(make_kernel(2, 0.8, 0.6, 1, 1, "truncated-stable"), lattice).pass);
    }
}

TEST_CASE("operator on constants and single modes") {
    Grid g(2, 32, 2 * M_PI);
    LevyKernel k = make_kernel(2, 0.8, 0.6, 1, 1, "two-exponent");
    LevySymbol s = tabulate_symbol(k, g);
    auto Lc = apply_operator(SampledField(g, 3.0), s);
    CHECK(lp_norm(Lc, INFINITY) < 1e-12);
    auto f = sample(g, [](const std::array<double, 3>& x) { return std::cos(2 * x[0] + 3 * x[1]); });
    auto Lf = apply_operator(f, s);
    const double a = symbol_eval(k, {2.0, 3.0});
    CHECK(lp_norm(Lf - a * f, INFINITY) < 1e-8 * a);
}

TEST_CASE("operator on a bump matches real-space principal value quadrature") {
    // truncated kernel, so the integral only sees |y| <= 1; f is a periodized gaussian
    Grid g(2, 32, 8.0);
    const double alpha = 0.5, sigma = 0.8, L = g.side_length;
    LevyKernel k = make_kernel(2, alpha, 0.3, 1, 1, "truncated-stable");
    auto f_exact = [&](double x, double y) {
        double s = 0;
        for (int i = -2; i <= 2; ++i)
            for (int j = -2; j <= 2; ++j) {
                double dx = x - 4.0 + i * L, dy = y - 4.0 + j * L;
                s += std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma));
            }
        return s;
    };
    SampledField f = sample(g, [&](const std::array<double, 3>& x) { return f_exact(x[0], x[1]); });
    auto Lf = apply_operator(f, tabulate_symbol(k, g));
    const int nu = 3000, nth = 48;
    for (std::size_t idx : {g.flatten({16, 16, 0}), g.flatten({12, 17, 0}), g.flatten({5, 9, 0}), g.flatten({20, 28, 0})}) {
        auto x = g.coords(idx);
        const double f0 = f_exact(x[0], x[1]);
        double total = 0;
        for (int iu = 0; iu < nu; ++iu) {
            double u = (iu + 0.5) / nu, rho = u * u;
            double ang = 0;
            for (int it = 0; it < nth; ++it) {
                double th = M_PI * (it + 0.5) / nth;
                double yx = rho * std::cos(th), yy = rho * std::sin(th);
                ang += 2 * f0 - f_exact(x[0] + yx, x[1] + yy) - f_exact(x[0] - yx, x[1] - yy);
            }
            ang *= M_PI / nth;  // half circle, each pair counted once
            total += ang * std::pow(rho, -1 - alpha) * 2 * u / nu;
        }
        // (1/2) int over the full circle of the symmetric difference = integral over the half circle
        CHECK(Lf.values[idx] == doctest::Approx(total).epsilon(1e-3));
    }
}

TEST_CASE("linearity, symmetry and positivity of the operator") {
    Grid g(2, 32, 2 * M_PI);
    LevySymbol s = tabulate_symbol(make_kernel(2, 1.4, 1.2, 1, 1, "two-exponent"), g);
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        SampledField f = noise(g, seed, 6), h = noise(g, seed + 100, 6);
        auto lin = apply_operator(2.0 * f + (-0.5) * h, s) - (2.0 * apply_operator(f, s) + (-0.5) * apply_operator(h, s));
        CHECK(lp_norm(lin, INFINITY) < 1e-10 * lp_norm(apply_operator(f, s), INFINITY));
        double a = inner(apply_operator(f, s), h), b = inner(f, apply_operator(h, s));
        CHECK(std::abs(a - b) <= 1e-10 * std::max(std::abs(a), 1.0));
        CHECK(inner(apply_operator(f, s), f) >= 0.0);
    }
}

TEST_CASE("commutator identities") {
    Grid g(2, 32, 16.0);
    LevySymbol s = tabulate_symbol(make_kernel(2, 0.8, 0.6, 1, 1, "two-exponent"), g);
    SampledField f = noise(g, 9, 4);
    CHECK(lp_norm(apply_commutator(SampledField(g, 1.0), f, s), INFINITY) < 1e-10);
    auto phi = make_cutoff(g, 2.0, {8, 8, 0});
    auto lhs = apply_commutator(phi, SampledField(g, 2.5), s);
    CHECK(lp_norm(lhs - 2.5 * apply_operator(phi, s), INFINITY) < 1e-10);
}

TEST_CASE("commutator decays with the cutoff radius") {
    Grid g(2, 64, 32.0);
    LevySymbol s = tabulate_symbol(make_kernel(2, 0.8, 0.6, 1, 1, "two-exponent"), g);
    SampledField f = noise(g, 4, 3);
    auto sw = commutator_bound_sweep(f, s, {1.0, 2.0, 4.0}, INFINITY);
    REQUIRE(sw.decay.size() == 2);
    for (double d : sw.decay) CHECK(d <= 1.0);
    CHECK(sw.spread < 4.0);
}

TEST_CASE("kernel decomposition") {
    SUBCASE("stable kernel has no residual") {
        auto d = decompose_kernel(make_kernel(2, 0.8, 0.6, 1, 1, "stable"));
        for (double r : {0.5, 2.0, 8.0}) CHECK(d.under(r) == 0.0);
    }
    SUBCASE("generic kernel sums back and the residual has the far exponent") {
        LevyKernel k = make_kernel(2, 0.8, 0.6, 1, 1, "two-exponent");
        auto d = decompose_kernel(k);
        double lo = INFINITY, hi = 0;
        for (double r : {0.3, 1.0, 2.0, 4.0, 8.0}) {
            double tilde = r <= 1 ? d.tilde.near_profile(r) : d.tilde.far_profile(r);
            CHECK(tilde + d.under(r) == doctest::Approx(k.radial(r)).epsilon(1e-14));
            if (r > 1) {
                double v = std::abs(d.under(r)) * std::pow(r, 2 + k.delta);
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
        }
        CHECK(hi <= 1.0);
        CHECK(lo > 0.0);
    }
}

TEST_CASE("heat-Levy L1 ratio stays bounded over a dyadic sweep") {
    Grid g(2, 128, 8.0);
    LevySymbol s = tabulate_symbol(make_kernel(2, 0.8, 0.6, 1, 1, "two-exponent"), g);
    for (double beta : {0.0, 2.0}) {
        double lo = INFINITY, hi = 0;
        for (double t : {0.32, 0.16, 0.08, 0.04}) {
            auto r = heat_levy_l1_check(s, t, beta);
            lo = std::min(lo, r.ratio);
            hi = std::max(hi, r.ratio);
        }
        CHECK(hi / lo < 1.25);
    }
    CHECK(heat_levy_l1_check(s, 0.04, 0.0).lhs > heat_levy_l1_check(s, 0.16, 0.0).lhs);
    CHECK_THROWS_AS(heat_levy_l1_check(s, 1e-3, 0.0), PreconditionError);
}
