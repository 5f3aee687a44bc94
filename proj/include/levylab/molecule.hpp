#pragma once

#include <array>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "levylab/drift.hpp"
#include "levylab/grid.hpp"
#include "levylab/levy.hpp"

namespace levylab {

struct Molecule {
    double r = 0.1;
    std::array<double, 3> x0{0, 0, 0};
    double gamma = 0.2;
    double omega_exp = 0.5;
    double zeta = 2.0;
    std::string profile = "bumps";  // bumps | dipole | bump (big molecules)
    SampledField field;

    bool small() const { return r < 1.0; }
    double scale() const { return zeta * r; }
};

// 2 v_n^{omega/(n+omega)}
double l1_bound_constant(int n, double omega);

// int |psi| |x - c|^omega over the torus
double concentration_moment(const SampledField& psi, const std::array<double, 3>& c, double omega);

// profile "bumps" (concentric difference) or "dipole"; r >= 1 always gives a single bump.
Molecule make_molecule(double r, const std::array<double, 3>& x0, double gamma, double omega, double zeta,
                       const Grid& g, const std::string& profile = "bumps", double saturation = 0.9);

struct MoleculeCheck {
    double concentration = 0.0, concentration_bound = 0.0;
    double height = 0.0, height_bound = 0.0;
    double moment = 0.0, l1 = 0.0;
    double l1_bound = 0.0;
    double l2 = 0.0, l2_bound = 0.0;
    bool moment_checked = true;
    bool pass = true;
    std::vector<std::string> violations;
    // (bound - value) / bound
    double concentration_margin() const;
    double height_margin() const;
};

MoleculeCheck check_molecule(const Molecule& m);

struct ExponentCertificate {
    std::string name;
    std::string expression;
    double value = 0.0;
    bool negative = false;
};

struct ConstantParams {
    int n = 2;
    double alpha = 0.8, delta = 0.6, gamma = 0.2, omega = 0.5;
    double q = 20.0;
    double mu = 1.0;
    double cbar1 = 1.0;
    double eta_prefactor = 1.0;  // the generic C in front of the eta bracket
    int zeta_max_log2 = 20;
};

struct ConstantBundle {
    int n = 2;
    double alpha = 0.0, delta = 0.0, gamma = 0.0, omega_exp = 0.0;
    double mu = 0.0, q = 0.0, a = 0.0;
    double nu0 = 0.0, nu1 = 0.0;
    double beta0 = 0.0, beta1 = 0.0;
    double p = 0.0, p_tilde = 0.0, q_bar = 0.0;
    double epsilon_exp = 0.0;
    double frakc = 0.0;
    double cbar1 = 1.0;
    double eta_prefactor = 1.0;
    double K_bound = 0.0;   // K at the chosen zeta
    double K_target = 0.0;  // (alpha/(n+gamma)) cbar1 frakc
    double zeta_chosen = 0.0;
    bool K_ok = false;
    std::string regime;  // "alpha<1" | "alpha>1"
    std::vector<std::string> notes;
    std::vector<ExponentCertificate> exponent_certificates;

    bool all_negative() const;
};

class InfeasibleConstants : public std::runtime_error {
public:
    InfeasibleConstants(const std::string& what, ConstantBundle best_bundle, std::string blocking_condition)
        : std::runtime_error(what), best(std::move(best_bundle)), blocking(std::move(blocking_condition)) {}
    ConstantBundle best;
    std::string blocking;
};

// (v_n (5^n - 1) - sqrt(2 v_n) 5^{n-omega}) / (2 5^{n+alpha})
double frakc(int n, double omega, double alpha);
// the epsilon exponent from zeta, beta0, beta1, p_tilde, omega, n
double epsilon_exponent(double zeta, double beta0, double beta1, double p_tilde, double omega, int n);

// Re-evaluates every exponent expression at the stored parameters.
std::vector<ExponentCertificate> evaluate_exponents(const ConstantBundle& b);
// Sum of zeta^{e_i} over the four eta exponents.
double eta_bracket(const ConstantBundle& b);
bool reverify(const ConstantBundle& b);

ConstantBundle compute_constants(const ConstantParams& params);

using VelocitySampler = std::function<Components(double)>;

struct CenterPath {
    std::vector<double> s;
    std::vector<std::array<double, 3>> x;
};

// x'(s) = average of v(s) over the torus ball B(x(s), rho); classical RK4.
CenterPath evolve_center(const Grid& g, const VelocitySampler& v, const std::array<double, 3>& x0, double rho,
                         double s0, double s1, int steps);
CenterPath evolve_center(const VelocityField& v, const std::array<double, 3>& x0, double rho, double s0, double s1,
                         int steps);

struct ConcentrationIntegrals {
    double I1 = 0.0, I2 = 0.0;
    double bound1 = 0.0, bound2 = 0.0;
    double ratio1 = 0.0, ratio2 = 0.0;
};

// I1 = int |x-c|^{omega-1} |v - vbar_rho| |psi|, I2 = int |L Omega| |psi| with Omega = |x-c|^omega,
// against their bound shapes at radius r_current.
ConcentrationIntegrals concentration_integrals(const SampledField& psi, const Components& v_t,
                                               const std::array<double, 3>& center, double rho, double r_current,
                                               const LevySymbol& symbol, const ConstantBundle& b, double v_norm);

struct Schedule {
    std::vector<double> s;  // s_0 = 0 first
    std::vector<double> r;  // r_i per the radius update
    bool stopped_by_size = false;
    bool empty() const { return s.empty(); }
};

// Increments eps_step r_i^alpha until (zeta r)^alpha + K s_i >= T0/2 or the step cap.
Schedule schedule_iterations(double r, double alpha, double eps_step, double T0, double zeta, double K);

struct DeformationOptions {
    double K = 0.0;
    double dt = 2e-3;
    double eps_visc = 0.0;
    std::string scheme = "imex-spectral";
    double eps_step = 0.1;
    bool reversed = false;  // transport velocity w(s) = v(t_ref - s) instead of v(s)
    double t_ref = 0.0;
    bool split_signs = false;
    int center_substeps = 4;
    double tolerance = 1e-6;
    std::optional<ConstantBundle> bundle;
    double v_norm = 0.0;
};

struct MoleculeTrace {
    std::vector<double> s, r;
    std::vector<std::array<double, 3>> center;
    std::vector<double> concentration, sup, l1;
    std::vector<double> concentration_bound, sup_bound, l1_bound;
    std::vector<int> concentration_ok, sup_ok, l1_ok;
    std::vector<ConcentrationIntegrals> integrals;
    double split_difference = 0.0;
    bool pass = true;
    SampledField final_field;
};

MoleculeTrace track_deformation(const Molecule& m, const VelocityField& v, std::shared_ptr<const LevySymbol> symbol,
                                const Schedule& schedule, const DeformationOptions& opt);

}  // namespace levylab
