#include <cmath>
#include <random>

#include "doctest.h"
#include "levylab/errors.hpp"
#include "levylab/function_spaces.hpp"

using namespace levylab;

namespace {

SampledField noise(const Grid& g, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    SampledField f(g);
    for (double& x : f.values) x = nd(rng);
    return f;
}

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
            double ph = w * (t[0] * x[0] + (g.n > 1 ? t[1] * x[1] : 0.0));
            s += t[2] * std::cos(ph) + t[3] * std::sin(ph);
        }
        return s;
    });
}

// every center, every ladder radius, membership by an independent distance loop
double morrey_brute(const SampledField& f, double q, double a) {
    const Grid& g = f.grid;
    double best = 0;
    for (double r = g.spacing(); r <= 0.5 * g.side_length + 1e-12; r *= 2) {
        for (std::size_t c = 0; c < g.size(); ++c) {
            std::vector<double> ball;
            for (std::size_t i = 0; i < g.size(); ++i)
                if (g.torus_distance(g.coords(c), g.coords(i)) <= r * (1 + 1e-12)) ball.push_back(f.values[i]);
            double m = 0;
            for (double x : ball) m += x;
            m /= ball.size();
            double acc = 0;
            for (double x : ball) acc += std::pow(std::abs(x - m), q);
            best = std::max(best, std::pow(std::pow(r, -a) * acc * g.cell_volume(), 1 / q));
        }
    }
    return best;
}

double holder_brute(const SampledField& f, double gamma) {
    const Grid& g = f.grid;
    double best = 0;
    for (std::size_t i = 0; i < g.size(); ++i)
        for (std::size_t j = 0; j < g.size(); ++j) {
            double d = g.torus_distance(g.coords(i), g.coords(j));
            if (d > 0 && d <= 0.5 * g.side_length + 1e-12)
                best = std::max(best, std::abs(f.values[i] - f.values[j]) / std::pow(d, gamma));
        }
    return best;
}

}  // namespace

TEST_CASE("Morrey norm of constants") {
    Grid g(2, 16, 8.0);
    CHECK(morrey_norm(SampledField(g, 2.0), MorreyParams{2.0, 1.0, false}) == 0.0);
    MorreyParams local{1.0, 0.0, true};
    // largest ladder ball, r = L/2 = 4
    std::size_t count = 0;
    for (std::size_t i = 0; i < g.size(); ++i)
        if (g.torus_distance(g.coords(0), g.coords(i)) <= 4.0 + 1e-12) ++count;
    CHECK(morrey_norm(SampledField(g, -1.5), local) == doctest::Approx(1.5 * count * g.cell_volume()).epsilon(1e-12));
}

TEST_CASE("Morrey norm equals an exhaustive brute force on 16x16") {
    Grid g(2, 16, 1.0);
    for (std::uint64_t seed : {1, 2}) {
        SampledField f = noise(g, seed);
        for (auto [q, a] : {std::pair{2.0, 1.0}, std::pair{3.0, 2.5}, std::pair{1.0, 0.0}})
            CHECK(morrey_norm(f, MorreyParams{q, a, false}) == doctest::Approx(morrey_brute(f, q, a)).epsilon(1e-12));
    }
}

TEST_CASE("Morrey parameters are validated") {
    Grid g(2, 16, 1.0);
    CHECK_THROWS_AS(morrey_norm(SampledField(g), MorreyParams{0.5, 0.0, false}), PreconditionError);
    CHECK_THROWS_AS(morrey_norm(SampledField(g), MorreyParams{2.0, 4.0, false}), PreconditionError);
}

TEST_CASE("Morrey with a = 0 and q = 2 stays below the L2 norm") {
    Grid g(2, 32, 1.0);
    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
        SampledField f = smooth(g, seed, 4);
        CHECK(morrey_norm(f, MorreyParams{2.0, 0.0, false}) <= lp_norm(f, 2.0) * (1 + 1e-12));
        CHECK(morrey_norm(f, MorreyParams{2.0, 0.0, true}) <= lp_norm(f, 2.0) * (1 + 1e-12));
    }
}

TEST_CASE("Besov seminorm") {
    Grid g(1, 256, 1.0);
    CHECK(besov_seminorm(SampledField(g, 4.0), 0.5, 2.0) == 0.0);
    auto mode = [&](int k) {
        return sample(g, [k](const std::array<double, 3>& x) { return std::sin(2 * M_PI * k * x[0]); });
    };
    for (double s : {0.3, 0.6}) {
        double ratio = besov_seminorm(mode(8), s, 2.0) / besov_seminorm(mode(4), s, 2.0);
        CHECK(std::log2(ratio) == doctest::Approx(s).epsilon(0.1));
    }
    Grid g2(2, 32, 1.0);
    auto a = sample(g2, [](const std::array<double, 3>& x) { return std::cos(2 * M_PI * x[0]); });
    auto b = sample(g2, [](const std::array<double, 3>& x) { return std::sin(6 * M_PI * x[1]); });
    CHECK(besov_seminorm(a + b, 0.5, 2.0) <= besov_seminorm(a, 0.5, 2.0) + besov_seminorm(b, 0.5, 2.0));
    CHECK_THROWS_AS(besov_seminorm(a, 1.0, 2.0), PreconditionError);
}

TEST_CASE("Hoelder norm") {
    Grid g(1, 64, 1.0);
    CHECK(holder_norm(SampledField(g, -2.0), 0.4) == doctest::Approx(2.0));
    // hat of height 1 and width w = 0.25 centered on a node
    const double w = 0.25;
    auto hat = sample(g, [&](const std::array<double, 3>& x) { return std::max(0.0, 1 - std::abs(x[0] - 0.5) / (w / 2)); });
    for (double gamma : {0.2, 0.5, 0.8}) {
        CHECK(holder_seminorm(hat, gamma) == doctest::Approx(std::pow(w / 2, -gamma)).epsilon(1e-12));
        CHECK(holder_seminorm(hat, gamma) == doctest::Approx(holder_brute(hat, gamma)).epsilon(1e-12));
    }
    Grid g2(2, 16, 1.0);
    SampledField f = noise(g2, 5);
    CHECK(holder_seminorm(f, 0.3) == doctest::Approx(holder_brute(f, 0.3)).epsilon(1e-12));
    CHECK(holder_norm(3.0 * f, 0.3) == doctest::Approx(3.0 * holder_norm(f, 0.3)).epsilon(1e-12));
}

TEST_CASE("Sobolev norm") {
    Grid g(2, 32, 2 * M_PI);
    CHECK(sobolev_norm(SampledField(g, 2.0), 0.7, 2.0) == doctest::Approx(lp_norm(SampledField(g, 2.0), 2.0)));
    auto f = sample(g, [](const std::array<double, 3>& x) { return 1.5 * std::cos(3 * x[0] + 4 * x[1]); });
    for (double p : {1.0, 2.0, 4.0})
        CHECK(sobolev_norm(f, 0.5, p) == doctest::Approx(lp_norm(f, p) * (1 + std::pow(5.0, 0.5))).epsilon(1e-10));
    SampledField h = smooth(g, 3, 5);
    CHECK(sobolev_norm(h, 0.0, 2.0) == doctest::Approx(2 * lp_norm(h, 2.0)).epsilon(1e-12));
}

TEST_CASE("norms are homogeneous and subadditive on random pairs") {
    Grid g(2, 16, 1.0);
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        SampledField f = smooth(g, seed, 3), h = smooth(g, seed + 50, 3);
        const double lam = 2.5;
        MorreyParams mp{2.0, 1.0, false};
        CHECK(morrey_norm(lam * f, mp) == doctest::Approx(lam * morrey_norm(f, mp)).epsilon(1e-12));
        CHECK(besov_seminorm(lam * f, 0.5, 3.0) == doctest::Approx(lam * besov_seminorm(f, 0.5, 3.0)).epsilon(1e-12));
        CHECK(sobolev_norm(lam * f, 0.5, 3.0) == doctest::Approx(lam * sobolev_norm(f, 0.5, 3.0)).epsilon(1e-12));
        CHECK(morrey_norm(f + h, mp) <= morrey_norm(f, mp) + morrey_norm(h, mp) + 1e-12);
        CHECK(besov_seminorm(f + h, 0.5, 3.0) <= besov_seminorm(f, 0.5, 3.0) + besov_seminorm(h, 0.5, 3.0) + 1e-12);
        CHECK(holder_norm(f + h, 0.4) <= holder_norm(f, 0.4) + holder_norm(h, 0.4) + 1e-12);
        CHECK(sobolev_norm(f + h, 0.5, 2.0) <= sobolev_norm(f, 0.5, 2.0) + sobolev_norm(h, 0.5, 2.0) + 1e-12);
    }
}

TEST_CASE("Morrey and Hoelder are comparable at matched parameters") {
    // n < a < n + q, lambda = (a - n)/q
    Grid g(2, 32, 1.0);
    const double q = 2.0, a = 3.0, lambda = (a - 2.0) / q;
    double lo = INFINITY, hi = 0;
    for (std::uint64_t seed = 1; seed <= 6; ++seed) {
        SampledField f = smooth(g, seed, 1 + static_cast<int>(seed % 4));
        double r = morrey_norm(f, MorreyParams{q, a, false}) / holder_seminorm(f, lambda);
        lo = std::min(lo, r);
        hi = std::max(hi, r);
    }
    CHECK(lo > 0);
    CHECK(hi / lo < 3.0);
}

TEST_CASE("dyadic oscillation lemma") {
    Grid g(2, 64, 1.0);
    const std::array<double, 3> c{0.5, 0.5, 0};
    SUBCASE("constant field") {
        auto rep = dyadic_oscillation_check(SampledField(g, 1.0), MorreyParams{2.0, 3.0, false}, c, 2 * g.spacing(), 2);
        CHECK(rep.lhs == 0.0);
    }
    SUBCASE("Lipschitz field, n < a < n + q, ratio bounded in k") {
        auto f = sample(g, [](const std::array<double, 3>& x) { return std::sin(2 * M_PI * x[0]) + 0.5 * std::cos(2 * M_PI * x[1]); });
        MorreyParams mp{2.0, 3.0, false};
        double norm = morrey_norm(f, mp);
        for (int k = 1; k <= 3; ++k) {
            auto rep = dyadic_oscillation_check(f, mp, {0.3, 0.6, 0}, 2 * g.spacing(), k, norm);
            CHECK(rep.regime == "a>n");
            CHECK(rep.ratio < 2.0);
        }
    }
    SUBCASE("a < n with a bump, ratio bounded in rho") {
        auto f = sample(g, [](const std::array<double, 3>& x) {
            double r2 = (x[0] - 0.5) * (x[0] - 0.5) + (x[1] - 0.5) * (x[1] - 0.5);
            return std::exp(-r2 / 0.005);
        });
        MorreyParams mp{2.0, 1.0, false};
        double norm = morrey_norm(f, mp);
        double lo = INFINITY, hi = 0;
        for (double rho : {g.spacing(), 2 * g.spacing(), 4 * g.spacing()}) {
            auto rep = dyadic_oscillation_check(f, mp, {0.52, 0.5, 0}, rho, 2, norm);
            CHECK(rep.regime == "a<=n");
            lo = std::min(lo, rep.ratio);
            hi = std::max(hi, rep.ratio);
        }
        CHECK(hi < 2.0);
        CHECK(hi / std::max(lo, 1e-300) < 10.0);
    }
    CHECK_THROWS_AS(dyadic_oscillation_check(SampledField(g, 1.0), MorreyParams{}, c, 0.25, 2), PreconditionError);
}
