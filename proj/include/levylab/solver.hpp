#pragma once

#include <array>
#include <memory>
#include <string>
#include <vector>

#include "levylab/drift.hpp"
#include "levylab/grid.hpp"
#include "levylab/levy.hpp"

namespace levylab {

struct ViscousProblem {
    std::shared_ptr<const LevySymbol> symbol;
    VelocityField v;  // already mollified
    double epsilon_visc = 1e-2;
    double mollifier_width = 0.0;  // enters the C0 drift term; 0 means epsilon_visc
    SampledField theta0;
    double T = 1.0;
    double drift_norm = 0.0;  // ||v||_{L^inf(M^{q,a})}
    double q = 20.0;
    // drift used at time s is drift_sign * v(reversed ? drift_ref - u : u), u = time_offset + s
    double drift_sign = 1.0;
    bool drift_reversed = false;
    double drift_ref = 0.0;
    double time_offset = 0.0;  // solver time s samples the drift at time_offset + s

    Components drift_at(double s) const;
    const Grid& grid() const { return theta0.grid; }
};

struct SolverConfig {
    double dt = 1e-3;
    std::string scheme = "picard-duhamel";  // or "imex-spectral"
    double picard_tol = 1e-12;
    int max_iters = 80;
    bool local_window_rule = true;
    double fixed_window = 0.0;
    double c0_prefactor = 0.0;  // <= 0: calibrate
    int store_every = 1;
    bool dealias = true;
};

struct WindowDiagnostics {
    double t_start = 0.0, t_end = 0.0;
    int steps = 0;
    int iterations = 0;
    std::vector<double> residuals;
};

struct TrajectorySolution {
    std::vector<double> times;
    std::vector<SampledField> fields;
    std::vector<std::array<double, 4>> lp_norms;  // p = 1, 2, 4, inf on the grid
    std::vector<WindowDiagnostics> windows;
    std::string scheme;
    double step = 0.0;
    double c0_prefactor = 0.0;
    double window = 0.0;
    double c0 = 0.0;

    const SampledField& at_time(double t, double tol = 1e-9) const;
};

SampledField heat_semigroup(const SampledField& f, double tau);

// T'^{1/2} eps^{-1/2} w^{-n/q} ||v|| + T'^{1-alpha/2} eps^{-alpha/2} + T'^{1-delta/2} eps^{-delta/2}
double contraction_shape(double Tprime, double eps, double width, int n, double q, double v_norm,
                         double alpha, double delta);
double contraction_shape(const ViscousProblem& p, double Tprime);
double contraction_constant(const ViscousProblem& p, double Tprime, double prefactor);
// Largest T' with C0 <= 1/2; infinity when C0 stays below 1/2 for all T'.
double local_window(const ViscousProblem& p, double prefactor);

struct C0Calibration {
    double prefactor = 0.0;
    std::vector<double> Tprime, lipschitz, shape;
};
C0Calibration calibrate_c0(const ViscousProblem& p, const SolverConfig& cfg);
// Measured Lipschitz constant of the Duhamel increment map on one window, L^inf(L^2) norm.
double duhamel_lipschitz(const ViscousProblem& p, double Tprime, int steps, bool dealias);

TrajectorySolution picard_solve(const ViscousProblem& p, const SolverConfig& cfg);
SampledField imex_step(const SampledField& state, double t, double dt, const ViscousProblem& p, bool dealias = true);
TrajectorySolution imex_solve(const ViscousProblem& p, const SolverConfig& cfg);
TrajectorySolution solve(const ViscousProblem& p, const SolverConfig& cfg);

struct VanishingViscosityReport {
    std::vector<double> eps;
    std::vector<double> distances;  // between consecutive eps at T
    std::vector<double> trend;      // distance ratios
    bool monotone = true;
    SampledField limit;
    std::string note = "empirical: smallest-eps solution, no convergence proof";
};

VanishingViscosityReport vanishing_viscosity(const ViscousProblem& tmpl, const std::vector<double>& eps_list,
                                             const SolverConfig& cfg);

// d/ds psi = -div(v(t - s) psi) - L psi (+ eps Laplacian when eps_visc > 0).
TrajectorySolution backward_dual_solve(const VelocityField& v, std::shared_ptr<const LevySymbol> symbol,
                                       const SampledField& psi0, double t_final, const SolverConfig& cfg,
                                       double eps_visc = 0.0, double mollifier_width = 0.0,
                                       double drift_norm = 0.0, double q = 20.0);

}  // namespace levylab
