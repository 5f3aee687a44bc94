#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <vector>

namespace levylab {

// Periodic box [0, L)^n sampled with N points per axis, last axis fastest.
struct Grid {
    int n = 2;
    int points_per_dim = 64;
    double side_length = 6.283185307179586;

    Grid() = default;
    Grid(int dim, int points, double length);

    std::size_t size() const;
    double spacing() const { return side_length / points_per_dim; }
    double cell_volume() const;
    std::vector<int> dims() const { return std::vector<int>(n, points_per_dim); }

    // Multi-index of a flat index and back.
    std::array<int, 3> unflatten(std::size_t idx) const;
    std::size_t flatten(const std::array<int, 3>& ijk) const;
    std::array<double, 3> coords(std::size_t idx) const;

    // Signed integer wavenumber for an FFT index in [0, N).
    int signed_mode(int i) const { return i <= points_per_dim / 2 ? i : i - points_per_dim; }
    double wavenumber_unit() const;

    // Shortest periodic displacement component.
    double wrap(double d) const;
    double torus_distance(const std::array<double, 3>& a, const std::array<double, 3>& b) const;

    bool operator==(const Grid& o) const {
        return n == o.n && points_per_dim == o.points_per_dim && side_length == o.side_length;
    }
    bool operator!=(const Grid& o) const { return !(*this == o); }
};

void require_same_grid(const Grid& a, const Grid& b, const char* where);

struct SampledField {
    Grid grid;
    std::vector<double> values;
    std::optional<double> time;

    SampledField() = default;
    explicit SampledField(const Grid& g, double fill = 0.0) : grid(g), values(g.size(), fill) {}
    SampledField(const Grid& g, std::vector<double> v);

    std::size_t size() const { return values.size(); }
    double& operator[](std::size_t i) { return values[i]; }
    double operator[](std::size_t i) const { return values[i]; }
    bool finite() const;
};

template <class F>
SampledField sample(const Grid& g, F&& f) {
    SampledField out(g);
    for (std::size_t i = 0; i < g.size(); ++i) out.values[i] = f(g.coords(i));
    return out;
}

// Grid quadrature norms; p = infinity gives the grid max.
double lp_norm(const SampledField& f, double p);
double lp_norm(const std::vector<std::vector<double>>& components, const Grid& g, double p);
double integral(const SampledField& f);
double mean(const SampledField& f);
double inner(const SampledField& f, const SampledField& g);

SampledField operator+(const SampledField& a, const SampledField& b);
SampledField operator-(const SampledField& a, const SampledField& b);
SampledField operator*(double s, const SampledField& a);
SampledField pointwise(const SampledField& a, const SampledField& b);

bool is_power_of_two(int v);

}  // namespace levylab
