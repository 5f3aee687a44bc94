#include <cmath>
#include <random>

#include "doctest.h"
#include "levylab/errors.hpp"
#include "levylab/holder.hpp"

using namespace levylab;

namespace {

SampledField white(const Grid& g, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    SampledField f(g);
    for (double& x : f.values) x = nd(rng);
    return f;
}

SampledField cusp(const Grid& g, double e) {
    return sample(g, [&](const std::array<double, 3>& x) { return std::pow(g.torus_distance(x, {0.5, 0.5, 0}), e); });
}

}  // namespace

TEST_CASE("duality pairing") {
    Grid g(2, 64, 1.0);
    Molecule m = make_molecule(0.0625, {0.5, 0.5, 0}, 0.2, 0.5, 2.0, g, "dipole");
    SUBCASE("constants see nothing") {
        CHECK(std::abs(duality_pairing(SampledField(g, 3.0), m)) <= 1e-12 * lp_norm(m.field, 1.0));
    }
    SUBCASE("self pairing is the squared L2 norm") {
        double l2 = lp_norm(m.field, 2.0);
        CHECK(duality_pairing(m.field, m) == doctest::Approx(l2 * l2).epsilon(1e-12));
        double raw = 0;
        for (double x : m.field.values) raw += x * x;
        CHECK(duality_pairing(m.field, m) == doctest::Approx(raw * g.cell_volume()).epsilon(1e-12));
    }
    SUBCASE("generic field against a reversed-order sum") {
        SampledField th = white(g, 3);
        double acc = 0;
        for (std::size_t i = g.size(); i-- > 0;) acc += th.values[i] * m.field.values[i];
        CHECK(duality_pairing(th, m) == doctest::Approx(acc * g.cell_volume()).epsilon(1e-12));
    }
    CHECK_THROWS_AS(duality_pairing(SampledField(Grid(2, 32, 1.0)), m), GridMismatch);
}

TEST_CASE("molecule family") {
    Grid g(2, 64, 1.0);
    MoleculeFamily fam = make_family(g);
    REQUIRE(fam.scales.size() >= 2);
    for (std::size_t j = 1; j < fam.scales.size(); ++j) CHECK(fam.scales[j] == doctest::Approx(0.5 * fam.scales[j - 1]));
    CHECK(fam.zeta * fam.scales.back() >= 4 * g.spacing());
    CHECK(fam.centers.size() == std::size_t(16 * 16));
    for (double r : fam.scales) CHECK(check_molecule(make_molecule(r, {0.25, 0.75, 0}, 0.2, 0.5, 2.0, g, "dipole")).pass);
    CHECK_THROWS_AS(make_family(g, 0.2, 0.5, 2.0, "dipole", 0), PreconditionError);
    CHECK_THROWS_AS(make_family(Grid(2, 8, 1.0)), PreconditionError);
}

TEST_CASE("pairing profile matches per-center molecules") {
    Grid g(2, 32, 1.0);
    MoleculeFamily fam = make_family(g, 0.2, 0.5, 2.0, "dipole", 8);
    SampledField th = white(g, 5);
    auto prof = pairing_profile(th, fam);
    REQUIRE(prof.size() == fam.scales.size());
    for (std::size_t j = 0; j < fam.scales.size(); ++j) {
        double best = 0;
        for (const auto& c : fam.centers)
            best = std::max(best, std::abs(duality_pairing(th, make_molecule(fam.scales[j], c, 0.2, 0.5, 2.0, g, "dipole"))));
        CHECK(prof[j] == doctest::Approx(best).epsilon(1e-9));
    }
}

TEST_CASE("Hoelder exponent estimates") {
    HolderOptions opt;
    opt.T0 = 1e-4;
    SUBCASE("constant field is flat") {
        Grid g(2, 64, 1.0);
        auto rep = estimate_holder_exponent(SampledField(g, 2.0), make_family(g), 1e-4, opt);
        CHECK(rep.verdict == "flat");
        CHECK(std::isnan(rep.gamma_dual));
    }
    SUBCASE("cusp of exponent 0.4") {
        Grid g(2, 128, 1.0);
        auto rep = estimate_holder_exponent(cusp(g, 0.4), make_family(g), 1e-4, opt);
        CHECK(rep.gamma_direct == doctest::Approx(0.4).epsilon(0.25));
        CHECK(rep.fit_r2 >= 0.9);
        CHECK(rep.verdict == "consistent");
        CHECK(rep.direct_in_range);
        CHECK(rep.regime_bound == doctest::Approx(0.6));
    }
    SUBCASE("preconditions") {
        Grid g(2, 64, 1.0);
        CHECK_THROWS_AS(estimate_holder_exponent(SampledField(g, 1.0), make_family(g), 5e-5, opt), PreconditionError);
        HolderOptions none;
        CHECK_THROWS_AS(estimate_holder_exponent(SampledField(g, 1.0), make_family(g), 1.0, none), PreconditionError);
    }
}

TEST_CASE("pairing bound ratio") {
    Grid g(2, 32, 1.0);
    for (std::uint64_t s = 1; s <= 10; ++s) CHECK(pairing_bound_ratio(white(g, s), white(g, s + 50)) <= 1.0);
    SampledField psi = white(g, 9), sgn = psi;
    for (double& x : sgn.values) x = x > 0 ? 2.0 : -2.0;
    CHECK(pairing_bound_ratio(sgn, psi) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(pairing_bound_ratio(SampledField(g, 0.0), psi) == 0.0);
}
