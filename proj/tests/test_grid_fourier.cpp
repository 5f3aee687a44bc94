#include <cmath>
#include <random>

#include "doctest.h"
#include "levylab/errors.hpp"
#include "levylab/field_io.hpp"
#include "levylab/fourier.hpp"
#include "levylab/grid.hpp"

using namespace levylab;

TEST_CASE("grid flatten and unflatten round trip") {
    Grid g(3, 8, 2.0);
    for (std::size_t i = 0; i < g.size(); ++i) CHECK(g.flatten(g.unflatten(i)) == i);
    CHECK(g.size() == 512);
    CHECK(g.cell_volume() == doctest::Approx(std::pow(0.25, 3)));
}

TEST_CASE("torus distance wraps") {
    Grid g(2, 16, 1.0);
    CHECK(g.torus_distance({0.05, 0.0, 0.0}, {0.95, 0.0, 0.0}) == doctest::Approx(0.1));
    CHECK(g.torus_distance({0.5, 0.5, 0}, {0.5, 0.5, 0}) == 0.0);
    CHECK(g.wrap(0.7) == doctest::Approx(-0.3));
}

TEST_CASE("lp norms of a constant") {
    Grid g(2, 16, 2.0);
    SampledField f(g, 3.0);
    CHECK(lp_norm(f, 1.0) == doctest::Approx(3.0 * 4.0));
    CHECK(lp_norm(f, 2.0) == doctest::Approx(3.0 * 2.0));
    CHECK(lp_norm(f, INFINITY) == doctest::Approx(3.0));
    CHECK(integral(f) == doctest::Approx(12.0));
    CHECK(mean(f) == doctest::Approx(3.0));
}

TEST_CASE("fft round trip and Parseval") {
    Grid g(2, 32, 6.283185307179586);
    std::mt19937_64 rng(3);
    std::normal_distribution<double> nd;
    SampledField f(g);
    for (double& x : f.values) x = nd(rng);
    auto back = fft_inverse(g, fft_forward(g, f.values));
    double err = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) err = std::max(err, std::abs(back[i] - f.values[i]));
    CHECK(err < 1e-12);

    const HalfLattice& hl = half_lattice(g);
    auto s = fft_forward(g, f.values);
    double spec = 0.0;
    for (std::size_t i = 0; i < hl.size; ++i) spec += hl.weight[i] * std::norm(s[i]);
    double phys = 0.0;
    for (double x : f.values) phys += x * x;
    CHECK(spec / g.size() == doctest::Approx(phys).epsilon(1e-12));
}

TEST_CASE("spectral derivative of a single mode") {
    Grid g(2, 32, 2.0);
    const double w = g.wavenumber_unit();
    auto f = sample(g, [&](const std::array<double, 3>& x) { return std::sin(3 * w * x[1]); });
    auto d = spectral_derivative(g, f.values, 1);
    double err = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i)
        err = std::max(err, std::abs(d[i] - 3 * w * std::cos(3 * w * g.coords(i)[1])));
    CHECK(err < 1e-10);
    auto d0 = spectral_derivative(g, f.values, 0);
    for (double x : d0) CHECK(std::abs(x) < 1e-10);
}

TEST_CASE("upsampling keeps samples and sup") {
    Grid g(1, 16, 1.0);
    auto f = sample(g, [&](const std::array<double, 3>& x) { return std::cos(2 * M_PI * x[0]); });
    auto u = spectral_upsample(f, 4);
    for (std::size_t i = 0; i < g.size(); ++i) CHECK(u.values[4 * i] == doctest::Approx(f.values[i]).epsilon(1e-12));
    CHECK(spectral_sup(f) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("field file round trip and grid mismatch") {
    Grid g(2, 8, 1.5);
    SampledField f(g);
    for (std::size_t i = 0; i < g.size(); ++i) f.values[i] = std::sin(double(i));
    const std::string path = "test_field_roundtrip.lvlf";
    write_field(path, f);
    SampledField r = read_field(path);
    CHECK(r.grid == g);
    CHECK(r.values == f.values);
    std::remove(path.c_str());
    CHECK_THROWS_AS(require_same_grid(g, Grid(2, 16, 1.5), "test"), GridMismatch);
    CHECK_THROWS_AS(inner(f, SampledField(Grid(2, 16, 1.5))), GridMismatch);
}
