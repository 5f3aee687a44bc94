#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "levylab/function_spaces.hpp"
#include "levylab/grid.hpp"

namespace levylab {

using Components = std::vector<std::vector<double>>;

struct VelocityField {
    Grid grid;
    std::vector<double> time_nodes;
    std::vector<Components> data;  // [node][component][point]
    std::string generator;
    std::optional<MorreyParams> morrey_params;
    double morrey_norm = 0.0;  // sup over time nodes

    int components() const { return grid.n; }
    double horizon() const { return time_nodes.empty() ? 0.0 : time_nodes.back(); }
    // Linear in time, clamped to the node range.
    Components at(double t) const;
    // Linear in time inside [t0, tK], zero outside.
    Components at_zero_extended(double t) const;
    double max_speed() const;
    // max over nodes of ||div v||_inf / (||grad v||_inf scale)
    double divergence_residual() const;
};

VelocityField zero_velocity(const Grid& g, double horizon, int nodes = 2);
VelocityField constant_velocity(const Grid& g, const std::array<double, 3>& c, double horizon, int nodes = 2);

struct DriftSpec {
    std::string kind = "stream";  // stream | leray | shear | zero | constant
    double amplitude = 1.0;
    std::string normalize = "morrey";  // morrey | linf | none
    int max_mode = 3;
    double spectral_slope = 1.0;
    double time_frequency = 1.0;
    double modulation = 0.3;
    int time_nodes = 9;
    double horizon = 1.0;
    std::uint64_t seed = 1;
    std::array<double, 3> constant{0, 0, 0};
    int shear_mode = 1;
};

VelocityField make_divfree(const DriftSpec& spec, const Grid& g, const MorreyParams& profile);

// Recompute and attach the Morrey norm sup over time nodes.
void attach_morrey_norm(VelocityField& v, const MorreyParams& params);

struct MollifierPair {
    double epsilon = 0.1;
    // unit-mass bumps supported in the unit ball
    double time_bump(double t) const;
    double space_bump(const std::array<double, 3>& x, int n) const;
};

struct MollifierMass {
    double time_mass = 0.0;
    double space_mass = 0.0;
    double space_support = 0.0;
};

MollifierMass mollifier_masses(const MollifierPair& m, const Grid& g);

VelocityField mollify_time(const VelocityField& v, const MollifierPair& m);
VelocityField mollify_space(const VelocityField& v, const MollifierPair& m);
VelocityField mollify(const VelocityField& v, const MollifierPair& m);

struct MollifierSweep {
    std::vector<double> eps, linf, ratio;
    double fitted_C = 0.0;
    double spread = 0.0;
    double morrey_before = 0.0;
    std::vector<double> morrey_after;
};

// Sup norm of the space mollification against eps^{-n/q} times the Morrey norm.
MollifierSweep mollifier_linf_sweep(const VelocityField& v, const std::vector<double>& widths,
                                    const MorreyParams& params);

struct DriftCutoffReport {
    std::vector<double> R, lhs, shape, ratio;
    double fitted_C = 0.0;
    double spread = 0.0;
};

// ||(A - M/2) v . grad phi_R||_p against R^{-1+n/p} (||A||_inf + M/2) ||v||, times R^{(a-n)/q} when alpha > 1.
DriftCutoffReport verify_drift_cutoff_bound(const Components& v, const SampledField& A, double M,
                                            const std::vector<double>& radii, double p, double alpha,
                                            const MorreyParams& params, double v_norm);

}  // namespace levylab
