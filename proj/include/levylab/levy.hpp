#pragma once

#include <array>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "levylab/grid.hpp"

namespace levylab {

struct QuadratureConfig {
    double r_min = 1e-6;
    double rel_tol = 1e-8;
    int max_doublings = 10;
    double far_tol = 1e-11;
    int max_far_panels = 200000;
};

// Radial jump density pi(y) = rho(|y|) with near (|y| <= 1) and far (|y| > 1) parts.
struct LevyKernel {
    int n = 2;
    double alpha = 0.8;
    double delta = 0.6;
    double cbar1 = 1.0;
    double cbar2 = 1.0;
    std::string profile = "stable";
    double amplitude = 1.0;
    std::function<double(double)> near_profile;
    std::function<double(double)> far_profile;

    double radial(double r) const { return r <= 1.0 ? near_profile(r) : far_profile(r); }
    double density(const std::array<double, 3>& y) const;
    std::string id() const;
    LevyKernel scaled(double s) const;
};

void validate_exponents(double alpha, double delta);

// profile: "stable" | "truncated-stable" | "two-exponent"; amplitude defaults to cbar1.
LevyKernel make_kernel(int n, double alpha, double delta, double cbar1, double cbar2,
                       const std::string& profile, double amplitude = -1.0);

LevyKernel make_custom_kernel(int n, double alpha, double delta, double cbar1, double cbar2,
                              const std::string& name, std::function<double(double)> near,
                              std::function<double(double)> far);

// Exact symbol constant of |y|^{-n-alpha}: a(xi) = c |xi|^alpha.
double stable_symbol_constant(int n, double alpha);
double unit_sphere_area(int n);
double unit_ball_volume(int n);

// Sphere average of 1 - cos(x e . w) times |S^{n-1}|.
double angular_one_minus_cos(int n, double x);

double symbol_radial(const LevyKernel& k, double xi_norm, const QuadratureConfig& cfg = {});
double symbol_eval(const LevyKernel& k, const std::vector<double>& xi, const QuadratureConfig& cfg = {});

struct LevySymbol {
    Grid grid;
    std::vector<double> values;  // full lattice, FFT index order
    std::string kernel_id;
    double alpha = 0.0;
    double delta = 0.0;

    double at_half(std::size_t h) const;
};

LevySymbol tabulate_symbol(const LevyKernel& k, const Grid& g, const QuadratureConfig& cfg = {});
LevySymbol zero_symbol(const Grid& g);

struct NondegeneracySample {
    std::array<double, 3> y{};
    double ratio = 0.0;
    std::string bound;
};

struct NondegeneracyReport {
    double near_min = 0.0, near_max = 0.0;
    double far_min = 0.0, far_max = 0.0;
    std::size_t near_count = 0, far_count = 0;
    bool symmetric = true;
    bool pass = true;
    std::vector<NondegeneracySample> violations;
};

std::vector<std::array<double, 3>> default_nd_lattice(int n);
NondegeneracyReport check_nondegeneracy(const LevyKernel& k, const std::vector<std::array<double, 3>>& lattice);

SampledField apply_operator(const SampledField& f, const LevySymbol& s);
SampledField apply_commutator(const SampledField& cutoff, const SampledField& f, const LevySymbol& s);

// phi_R(x) = cutoff(|x - center| / R) on the torus.
SampledField make_cutoff(const Grid& g, double R, const std::array<double, 3>& center);

struct CommutatorSweep {
    double p = 0.0;
    std::vector<double> R, lhs, shape, ratio, decay;
    double fitted_C = 0.0;
    double spread = 0.0;  // max/min ratio
};

CommutatorSweep commutator_bound_sweep(const SampledField& f, const LevySymbol& s,
                                       const std::vector<double>& radii, double p);

struct DecomposedKernel {
    LevyKernel tilde;
    std::function<double(double)> under;
};

DecomposedKernel decompose_kernel(const LevyKernel& k);

struct HeatL1Result {
    double t = 0.0, beta = 0.0;
    double lhs = 0.0, rhs_shape = 0.0, ratio = 0.0;
};

HeatL1Result heat_levy_l1_check(const LevySymbol& s, double t, double beta);

}  // namespace levylab
