#include <algorithm>
#include <cmath>
#include <map>

#include "doctest.h"
#include "levylab/drift.hpp"
#include "levylab/errors.hpp"
#include "levylab/fourier.hpp"
#include "levylab/molecule.hpp"

using namespace levylab;

namespace {

const std::array<double, 3> kMid{0.5, 0.5, 0.0};

ConstantBundle alpha_lt_one_bundle() {
    ConstantParams P;
    P.alpha = 0.8;
    P.delta = 0.6;
    P.gamma = 0.2;
    P.omega = 0.5;
    P.q = 20.0;
    try {
        return compute_constants(P);
    } catch (const InfeasibleConstants& e) {
        return e.best;
    }
}

// tabulation on unit-side grids is the slow part, keep one per size
std::shared_ptr<const LevySymbol> symbol_for(const Grid& g) {
    static std::map<int, std::shared_ptr<const LevySymbol>> cache;
    auto& s = cache[g.points_per_dim];
    if (!s) s = std::make_shared<LevySymbol>(tabulate_symbol(make_kernel(2, 0.8, 0.6, 1, 1, "two-exponent"), g));
    return s;
}

}  // namespace

TEST_CASE("ball volume and frakc") {
    CHECK(unit_ball_volume(2) == doctest::Approx(M_PI).epsilon(1e-14));
    const double expect = (M_PI * 24 - std::sqrt(2 * M_PI) * std::pow(5.0, 1.7)) / (2 * std::pow(5.0, 2.5));
    CHECK(frakc(2, 0.3, 0.5) == doctest::Approx(expect).epsilon(1e-13));
    CHECK(frakc(2, 0.3, 0.5) > 0.0);
    CHECK(l1_bound_constant(2, 0.5) == doctest::Approx(2 * std::pow(M_PI, 0.2)).epsilon(1e-14));
}

TEST_CASE("constructed molecules are admissible") {
    Grid g(2, 128, 1.0);
    for (std::string prof : {"bumps", "dipole"}) {
        Molecule m = make_molecule(0.0625, kMid, 0.2, 0.5, 2.0, g, prof);
        MoleculeCheck c = check_molecule(m);
        CHECK_MESSAGE(c.pass, prof);
        CHECK(c.moment_checked);
        CHECK(c.concentration_margin() > 0.0);
        CHECK(c.height_margin() > 0.0);
        CHECK(c.moment <= 1e-10 * c.l1);
    }
    SUBCASE("big molecules skip the moment condition") {
        Grid big(2, 64, 16.0);
        Molecule m = make_molecule(1.5, {8, 8, 0}, 0.2, 0.5, 2.0, big);
        MoleculeCheck c = check_molecule(m);
        CHECK_FALSE(c.moment_checked);
        CHECK(m.profile == "bump");
        CHECK(c.pass);
    }
    SUBCASE("halving r scales the height bound by 2^{n+gamma}") {
        auto a = check_molecule(make_molecule(0.0625, kMid, 0.2, 0.5, 2.0, g));
        auto b = check_molecule(make_molecule(0.03125, kMid, 0.2, 0.5, 2.0, g));
        CHECK(b.height_bound / a.height_bound == doctest::Approx(std::pow(2.0, 2.2)).epsilon(1e-12));
    }
    SUBCASE("zero field is admissible, tenfold amplitude breaks the height bound") {
        Molecule m = make_molecule(0.0625, kMid, 0.2, 0.5, 2.0, g);
        Molecule z = m;
        z.field = SampledField(g, 0.0);
        CHECK(check_molecule(z).pass);
        Molecule big = m;
        big.field = 10.0 * m.field;
        auto c = check_molecule(big);
        CHECK_FALSE(c.pass);
        CHECK(std::find(c.violations.begin(), c.violations.end(), "height") != c.violations.end());
        CHECK(c.height_margin() == doctest::Approx((c.height_bound - c.height) / c.height_bound));
        CHECK(c.height_margin() < 0.0);
    }
    CHECK_THROWS_AS(make_molecule(0.01, kMid, 0.2, 0.5, 2.0, Grid(2, 32, 1.0)), PreconditionError);
    CHECK_THROWS_AS(make_molecule(0.0625, kMid, 0.6, 0.5, 2.0, g), PreconditionError);
}

TEST_CASE("alpha < 1 constants") {
    ConstantParams P;
    bool threw = false;
    ConstantBundle b;
    try {
        b = compute_constants(P);
    } catch (const InfeasibleConstants& e) {
        threw = true;
        b = e.best;
        CHECK(e.blocking.find("K") != std::string::npos);
    }
    CHECK(b.regime == "alpha<1");
    CHECK(b.frakc > 0.0);
    CHECK(b.all_negative());
    for (const auto& e : b.exponent_certificates) CHECK_MESSAGE(e.value < 0.0, e.name);
    CHECK(reverify(b));
    CHECK(b.K_target == doctest::Approx(0.8 / 2.2 * b.frakc).epsilon(1e-14));
    if (!threw) CHECK(b.K_ok);
    ConstantBundle tampered = b;
    tampered.beta0 = 2.0;
    CHECK_FALSE(reverify(tampered));

    ConstantParams bad = P;
    bad.q = 2.0;
    CHECK_THROWS_AS(compute_constants(bad), PreconditionError);
}

TEST_CASE("center ODE") {
    Grid g(2, 64, 1.0);
    const double rho = 0.1;
    SUBCASE("zero drift leaves the center fixed") {
        auto p = evolve_center(zero_velocity(g, 1.0), {0.3, 0.4, 0}, rho, 0.0, 1.0, 8);
        CHECK(p.x.back()[0] == doctest::Approx(0.3).epsilon(1e-14));
        CHECK(p.x.back()[1] == doctest::Approx(0.4).epsilon(1e-14));
    }
    SUBCASE("constant drift translates") {
        auto p = evolve_center(constant_velocity(g, {0.2, -0.1, 0}, 1.0, 3), {0.3, 0.4, 0}, rho, 0.0, 0.5, 8);
        CHECK(p.x.back()[0] == doctest::Approx(0.4).epsilon(1e-10));
        CHECK(p.x.back()[1] == doctest::Approx(0.35).epsilon(1e-10));
    }
    SUBCASE("RK4 converges at fourth order on a pulsating shear") {
        // shear odd about the center row, so only the uniform pulsation survives the ball average
        const double y0 = 0.5;
        Components v(2, std::vector<double>(g.size(), 0.0));
        for (std::size_t i = 0; i < g.size(); ++i) v[0][i] = 1.0 + std::sin(2 * M_PI * (g.coords(i)[1] - y0));
        VelocitySampler w = [&](double s) {
            Components c = v;
            for (double& x : c[0]) x *= std::cos(3 * s);
            return c;
        };
        auto end = [&](int steps) { return evolve_center(g, w, {0.3, y0, 0}, rho, 0.0, 2.0, steps).x.back()[0]; };
        const double exact = 0.3 + std::sin(6.0) / 3 + 1.0;
        double ref = end(512);
        CHECK(std::abs(std::fmod(ref - exact + 10.5, 1.0) - 0.5) <= 1e-9);
        double e4 = std::abs(end(4) - ref), e8 = std::abs(end(8) - ref), e16 = std::abs(end(16) - ref);
        CHECK(std::log2(e4 / e8) >= 3.5);
        CHECK(std::log2(e8 / e16) >= 3.5);
    }
    CHECK_THROWS_AS(evolve_center(zero_velocity(g, 1.0), kMid, 0.5 * g.spacing(), 0, 1, 2), PreconditionError);
}

TEST_CASE("concentration integrals") {
    Grid g(2, 128, 1.0);
    auto sym = symbol_for(g);
    ConstantBundle b = alpha_lt_one_bundle();
    SUBCASE("constant drift has no oscillation term") {
        Molecule m = make_molecule(0.0625, kMid, 0.2, 0.5, 2.0, g);
        Components v(2, std::vector<double>(g.size(), 0.7));
        auto ci = concentration_integrals(m.field, v, kMid, 0.1, m.r, *sym, b, 1.0);
        CHECK(ci.I1 == doctest::Approx(0.0).scale(1.0));
        CHECK(ci.I2 > 0.0);
        CHECK(ci.bound2 > 0.0);
    }
    SUBCASE("I2 against its shape is stable over r and r/2") {
        Components v(2, std::vector<double>(g.size(), 0.0));
        auto ratio = [&](double r) {
            Molecule m = make_molecule(r, kMid, 0.2, 0.5, 2.0, g);
            return concentration_integrals(m.field, v, kMid, 0.1, r, *sym, b, 1.0).ratio2;
        };
        double a = ratio(0.0625), c = ratio(0.03125);
        CHECK(a > 0.0);
        CHECK(c / a == doctest::Approx(1.0).epsilon(0.5));
    }
}

TEST_CASE("schedule") {
    SUBCASE("nothing to do when the molecule is already large") {
        CHECK(schedule_iterations(0.25, 0.8, 0.1, 0.5, 2.0, 0.1).empty());
    }
    SUBCASE("K = 0 gives the capped uniform ladder") {
        const double r = 0.05, a = 0.8, eps = 0.1, T0 = 10.0;
        auto sc = schedule_iterations(r, a, eps, T0, 2.0, 0.0);
        CHECK_FALSE(sc.stopped_by_size);
        CHECK(sc.s.size() == std::size_t(std::ceil(T0 / (eps * std::pow(r, a)))) + 1);
        for (std::size_t i = 1; i < sc.s.size(); ++i) {
            CHECK(sc.s[i] - sc.s[i - 1] == doctest::Approx(eps * std::pow(r, a)).epsilon(1e-12));
            CHECK(sc.r[i] == doctest::Approx(r));
        }
    }
    SUBCASE("radii grow and the last size reaches T0/2") {
        const double r = 0.0625, a = 0.8, z = 2.0, K = 0.1;
        const double T0 = 2.4 * std::pow(z * r, a);
        auto sc = schedule_iterations(r, a, 0.1, T0, z, K);
        REQUIRE(sc.s.size() > 2);
        CHECK(sc.stopped_by_size);
        for (std::size_t i = 1; i < sc.r.size(); ++i) {
            CHECK(sc.r[i] >= sc.r[i - 1] * (1 - 1e-14));
            CHECK(sc.s[i] - sc.s[i - 1] <= 0.1 * std::pow(sc.r[i], a) * (1 + 1e-12));
        }
        CHECK(std::pow(z * r, a) + K * sc.s.back() >= 0.5 * T0);
    }
    CHECK_THROWS_AS(schedule_iterations(1.5, 0.8, 0.1, 1.0, 2.0, 0.1), PreconditionError);
    CHECK_THROWS_AS(schedule_iterations(0.1, 0.8, 0.1, 1.0, 2.0, -1.0), PreconditionError);
}

TEST_CASE("deformation tracking") {
    Grid g(2, 64, 1.0);
    auto sym = symbol_for(g);
    ConstantBundle b = alpha_lt_one_bundle();
    const double r = 0.0625, z = 2.0;
    Molecule m = make_molecule(r, kMid, 0.2, 0.5, z, g);
    const double K = b.K_target, T0 = 2.4 * std::pow(z * r, 0.8);
    Schedule sc = schedule_iterations(r, 0.8, 0.1, T0, z, K);
    REQUIRE_FALSE(sc.empty());
    DeformationOptions o;
    o.K = K;
    o.bundle = b;

    SUBCASE("no drift") {
        auto tr = track_deformation(m, zero_velocity(g, 1.0), sym, sc, o);
        CHECK(tr.pass);
        for (std::size_t i = 0; i < tr.s.size(); ++i) {
            CHECK(tr.l1[i] <= tr.l1_bound[i]);
            CHECK(tr.concentration[i] < tr.concentration_bound[i]);
            CHECK(tr.sup[i] < tr.sup_bound[i]);
        }
        auto c = check_molecule(m);
        CHECK(tr.concentration[0] == doctest::Approx(c.concentration).epsilon(1e-14));
        CHECK(tr.sup[0] == doctest::Approx(c.height).epsilon(1e-14));
        CHECK(tr.l1[0] == doctest::Approx(c.l1).epsilon(1e-14));
        CHECK(tr.center.back()[0] == doctest::Approx(0.5));
        CHECK(tr.integrals.size() == tr.s.size());
    }
    SUBCASE("sign split is linear") {
        DriftSpec d;
        d.kind = "leray";
        d.seed = 7;
        d.horizon = 2.0;
        d.time_nodes = 9;
        d.normalize = "linf";
        VelocityField v = make_divfree(d, g, MorreyParams{20.0, 6.0, false});
        o.split_signs = true;
        auto tr = track_deformation(m, v, sym, sc, o);
        CHECK(tr.split_difference <= 1e-6);
    }
    SUBCASE("big molecules and oversized steps are rejected") {
        Molecule big = m;
        big.r = 1.5;
        CHECK_THROWS_AS(track_deformation(big, zero_velocity(g, 1.0), sym, sc, o), PreconditionError);
        Schedule bad = sc;
        bad.s[1] *= 10;
        CHECK_THROWS_AS(track_deformation(m, zero_velocity(g, 1.0), sym, bad, o), PreconditionError);
    }
}
