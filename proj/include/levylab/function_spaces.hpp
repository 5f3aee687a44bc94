#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "levylab/grid.hpp"

namespace levylab {

struct MorreyParams {
    double q = 2.0;
    double a = 0.0;
    bool local = false;
    void validate(int n) const;
};

// r = h, 2h, 4h, ... <= L/2
std::vector<double> dyadic_radii(const Grid& g);

// Flat index offsets of the closed torus ball of radius r around a grid point.
std::vector<std::array<int, 3>> ball_offsets(const Grid& g, double r);

double morrey_norm(const SampledField& f, const MorreyParams& params);
// Vector version: oscillation measured with the Euclidean norm of v - mean.
double morrey_norm(const std::vector<std::vector<double>>& comps, const Grid& g, const MorreyParams& params);

// Average over grid points within torus distance r of an arbitrary point.
double ball_average(const SampledField& f, const std::array<double, 3>& center, double r);
std::vector<double> ball_average(const std::vector<std::vector<double>>& comps, const Grid& g,
                                 const std::array<double, 3>& center, double r);

double besov_seminorm(const SampledField& f, double s, double p);
double holder_seminorm(const SampledField& f, double gamma);
double holder_norm(const SampledField& f, double gamma);

struct OscillationReport {
    std::string regime;
    double lhs = 0.0;
    double rhs_shape = 0.0;
    double ratio = 0.0;
    double morrey = 0.0;
};

OscillationReport dyadic_oscillation_check(const SampledField& f, const MorreyParams& params,
                                           const std::array<double, 3>& center, double rho, int k,
                                           std::optional<double> precomputed_norm = std::nullopt);

// (-Delta)^{s/2} as the multiplier |k|^s, with |0|^0 = 1.
SampledField fractional_laplacian(const SampledField& f, double s);
double sobolev_norm(const SampledField& f, double s, double p);

}  // namespace levylab
