#include "levylab/grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "levylab/errors.hpp"

namespace levylab {

bool is_power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }

Grid::Grid(int dim, int points, double length) : n(dim), points_per_dim(points), side_length(length) {
    if (n < 1 || n > 3) throw PreconditionError("grid dimension must be 1, 2 or 3");
    if (points < 8 || !is_power_of_two(points))
        throw PreconditionError("points_per_dim must be a power of two >= 8");
    if (!(length > 0.0)) throw PreconditionError("side_length must be positive");
}

std::size_t Grid::size() const {
    std::size_t s = 1;
    for (int d = 0; d < n; ++d) s *= static_cast<std::size_t>(points_per_dim);
    return s;
}

double Grid::cell_volume() const { return std::pow(spacing(), n); }

double Grid::wavenumber_unit() const { return 2.0 * M_PI / side_length; }

std::array<int, 3> Grid::unflatten(std::size_t idx) const {
    std::array<int, 3> ijk{0, 0, 0};
    for (int d = n - 1; d >= 0; --d) {
        ijk[d] = static_cast<int>(idx % points_per_dim);
        idx /= points_per_dim;
    }
    return ijk;
}

std::size_t Grid::flatten(const std::array<int, 3>& ijk) const {
    std::size_t idx = 0;
    for (int d = 0; d < n; ++d) {
        int i = ((ijk[d] % points_per_dim) + points_per_dim) % points_per_dim;
        idx = idx * points_per_dim + static_cast<std::size_t>(i);
    }
    return idx;
}

std::array<double, 3> Grid::coords(std::size_t idx) const {
    auto ijk = unflatten(idx);
    double h = spacing();
    return {ijk[0] * h, ijk[1] * h, ijk[2] * h};
}

double Grid::wrap(double d) const {
    double L = side_length;
    d = std::fmod(d, L);
    if (d > 0.5 * L) d -= L;
    if (d < -0.5 * L) d += L;
    return d;
}

double Grid::torus_distance(const std::array<double, 3>& a, const std::array<double, 3>& b) const {
    double s = 0.0;
    for (int d = 0; d < n; ++d) {
        double w = wrap(a[d] - b[d]);
        s += w * w;
    }
    return std::sqrt(s);
}

void require_same_grid(const Grid& a, const Grid& b, const char* where) {
    if (a != b) throw GridMismatch(std::string(where) + ": fields live on different grids");
}

SampledField::SampledField(const Grid& g, std::vector<double> v) : grid(g), values(std::move(v)) {
    if (values.size() != grid.size()) throw GridMismatch("value array does not match grid size");
}

bool SampledField::finite() const {
    return std::all_of(values.begin(), values.end(), [](double x) { return std::isfinite(x); });
}

double lp_norm(const SampledField& f, double p) {
    if (std::isinf(p)) {
        double m = 0.0;
        for (double v : f.values) m = std::max(m, std::abs(v));
        return m;
    }
    double s = 0.0;
    if (p == 2.0) {
        for (double v : f.values) s += v * v;
        return std::sqrt(s * f.grid.cell_volume());
    }
    if (p == 1.0) {
        for (double v : f.values) s += std::abs(v);
        return s * f.grid.cell_volume();
    }
    for (double v : f.values) s += std::pow(std::abs(v), p);
    return std::pow(s * f.grid.cell_volume(), 1.0 / p);
}

double lp_norm(const std::vector<std::vector<double>>& comps, const Grid& g, double p) {
    SampledField mag(g);
    for (std::size_t i = 0; i < g.size(); ++i) {
        double s = 0.0;
        for (const auto& c : comps) s += c[i] * c[i];
        mag.values[i] = std::sqrt(s);
    }
    return lp_norm(mag, p);
}

double integral(const SampledField& f) {
    double s = 0.0;
    for (double v : f.values) s += v;
    return s * f.grid.cell_volume();
}

double mean(const SampledField& f) {
    double s = 0.0;
    for (double v : f.values) s += v;
    return s / static_cast<double>(f.values.size());
}

double inner(const SampledField& f, const SampledField& g) {
    require_same_grid(f.grid, g.grid, "inner");
    double s = 0.0;
    for (std::size_t i = 0; i < f.values.size(); ++i) s += f.values[i] * g.values[i];
    return s * f.grid.cell_volume();
}

SampledField operator+(const SampledField& a, const SampledField& b) {
    require_same_grid(a.grid, b.grid, "operator+");
    SampledField out(a.grid);
    for (std::size_t i = 0; i < a.size(); ++i) out.values[i] = a.values[i] + b.values[i];
    return out;
}

SampledField operator-(const SampledField& a, const SampledField& b) {
    require_same_grid(a.grid, b.grid, "operator-");
    SampledField out(a.grid);
    for (std::size_t i = 0; i < a.size(); ++i) out.values[i] = a.values[i] - b.values[i];
    return out;
}

SampledField operator*(double s, const SampledField& a) {
    SampledField out(a.grid);
    for (std::size_t i = 0; i < a.size(); ++i) out.values[i] = s * a.values[i];
    out.time = a.time;
    return out;
}

SampledField pointwise(const SampledField& a, const SampledField& b) {
    require_same_grid(a.grid, b.grid, "pointwise");
    SampledField out(a.grid);
    for (std::size_t i = 0; i < a.size(); ++i) out.values[i] = a.values[i] * b.values[i];
    return out;
}

}  // namespace levylab
