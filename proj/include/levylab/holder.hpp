#pragma once

#include <array>
#include <string>
#include <vector>

#include "levylab/grid.hpp"
#include "levylab/molecule.hpp"
#include "levylab/solver.hpp"

namespace levylab {

struct MoleculeFamily {
    std::vector<double> scales;                    // dyadic ladder r_j
    std::vector<std::array<double, 3>> centers;    // grid subsample
    double gamma = 0.2, omega_exp = 0.5, zeta = 2.0;
    std::string profile = "dipole";
    int center_stride = 4;
};

// r_j = 2^{-j}, j >= 1, with zeta r_j >= 4h and support within a quarter of the torus
MoleculeFamily make_family(const Grid& g, double gamma = 0.2, double omega = 0.5, double zeta = 2.0,
                           const std::string& profile = "dipole", int center_stride = 4);

double duality_pairing(const SampledField& theta, const Molecule& m);

struct HolderOptions {
    double T0 = 0.0;
    double alpha = 0.8, delta = 0.6;
    double min_r2 = 0.9;
    double stability = 0.1;  // two-resolution relative agreement
    std::vector<double> probe;  // gamma probe grid, default 0.05..0.95
};

struct HolderReport {
    double t = 0.0;
    double gamma_dual = 0.0;   // NaN when flat or noisy
    double gamma_direct = 0.0;
    double fit_r2 = 0.0;
    double regime_bound = 0.0;
    bool dual_in_range = false, direct_in_range = false;
    std::string verdict;  // consistent | inconsistent | flat | noisy
    std::vector<double> scales, pairings;
    std::vector<double> probe, fine_norm, coarse_norm;
};

// sup over centers of |<theta, psi_{r,c}>| for every scale of the family
std::vector<double> pairing_profile(const SampledField& theta, const MoleculeFamily& family);

double direct_holder_exponent(const SampledField& theta, const HolderOptions& opt, std::vector<double>* fine = nullptr,
                              std::vector<double>* coarse = nullptr);

HolderReport estimate_holder_exponent(const TrajectorySolution& traj, const MoleculeFamily& family, double t,
                                      const HolderOptions& opt);
HolderReport estimate_holder_exponent(const SampledField& theta, const MoleculeFamily& family, double t,
                                      const HolderOptions& opt);

// |<theta0, psi(t)>| <= ||theta0||_inf ||psi(t)||_1 ; returns lhs / rhs
double pairing_bound_ratio(const SampledField& theta0, const SampledField& psi_t);

}  // namespace levylab
