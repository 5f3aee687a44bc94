#include "levylab/molecule.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "levylab/bump.hpp"
#include "levylab/errors.hpp"
#include "levylab/fourier.hpp"
#include "levylab/function_spaces.hpp"
#include "levylab/solver.hpp"

namespace levylab {

namespace {

double bump_derivative(double u) {
    if (u >= 1.0) return 0.0;
    double w = 1.0 - u * u;
    return canonical_bump(u) * (-2.0 * u / (w * w));
}

// composite Simpson on [a, b]
template <class F>
double simpson(F&& f, double a, double b, int m = 4000) {
    double h = (b - a) / m, acc = f(a) + f(b);
    for (int i = 1; i < m; ++i) acc += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
    return acc * h / 3.0;
}

// integral of |cos| over the unit sphere in R^n
double sphere_abs_cos(int n) {
    if (n == 1) return 2.0;
    return 2.0 * unit_sphere_area(n - 1) / (n - 1);
}

std::array<double, 3> displacement(const Grid& g, const std::array<double, 3>& x, const std::array<double, 3>& c) {
    std::array<double, 3> d{0, 0, 0};
    const double L = g.side_length;
    for (int k = 0; k < g.n; ++k) {
        double t = std::fmod(x[k] - c[k], L);
        if (t > 0.5 * L) t -= L;
        if (t < -0.5 * L) t += L;
        d[k] = t;
    }
    return d;
}

double norm3(const std::array<double, 3>& d) { return std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]); }

double conjugate(double p) { return std::isinf(p) ? 1.0 : p / (p - 1.0); }

std::string fmt(const char* f, double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, x);
    return buf;
}

}  // namespace

double l1_bound_constant(int n, double omega) { return 2.0 * std::pow(unit_ball_volume(n), omega / (n + omega)); }

double concentration_moment(const SampledField& psi, const std::array<double, 3>& c, double omega) {
    const Grid& g = psi.grid;
    double acc = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (psi.values[i] == 0.0) continue;
        acc += std::abs(psi.values[i]) * std::pow(norm3(displacement(g, g.coords(i), c)), omega);
    }
    return acc * g.cell_volume();
}

Molecule make_molecule(double r, const std::array<double, 3>& x0, double gamma, double omega, double zeta,
                       const Grid& g, const std::string& profile, double saturation) {
    if (!(r > 0.0)) throw PreconditionError("molecule size must be positive");
    if (!(0.0 < gamma && gamma < omega && omega < 1.0)) throw PreconditionError("need 0 < gamma < omega < 1");
    if (!(zeta > 1.0)) throw PreconditionError("zeta must exceed 1");
    if (!(saturation > 0.0 && saturation <= 1.0)) throw PreconditionError("saturation must lie in (0, 1]");
    const int n = g.n;
    const double s = zeta * r;
    const double h = g.spacing();
    if (s < 4.0 * h) throw PreconditionError("grid cannot resolve molecule scale zeta*r (needs >= 4 cells)");

    Molecule m;
    m.r = r;
    m.x0 = x0;
    m.gamma = gamma;
    m.omega_exp = omega;
    m.zeta = zeta;
    m.profile = r >= 1.0 ? "bump" : profile;
    if (m.profile != "bump" && m.profile != "bumps" && m.profile != "dipole")
        throw PreconditionError("unknown molecule profile '" + profile + "'");

    // unit-parameter profile: weighted moment J and sup M, then the inner radius rho1
    const double S = unit_sphere_area(n);
    double J = 0.0, M = 0.0, outer = 1.0;
    if (m.profile == "bump") {
        J = S * simpson([&](double u) { return canonical_bump(u) * std::pow(u, omega + n - 1); }, 0.0, 1.0);
        M = canonical_bump(0.0);
    } else if (m.profile == "bumps") {
        const double c = std::pow(2.0, -n);
        auto P = [&](double u) { return canonical_bump(u) - c * canonical_bump(0.5 * u); };
        J = S * simpson([&](double u) { return std::abs(P(u)) * std::pow(u, omega + n - 1); }, 0.0, 2.0, 8000);
        M = 0.0;
        for (int i = 0; i <= 4000; ++i) M = std::max(M, std::abs(P(2.0 * i / 4000.0)));
        outer = 2.0;
    } else {
        J = sphere_abs_cos(n) * simpson([&](double u) { return std::abs(bump_derivative(u)) * std::pow(u, omega + n - 1); }, 0.0, 1.0);
        for (int i = 0; i < 4000; ++i) M = std::max(M, std::abs(bump_derivative(i / 4000.0)));
    }
    const double rho1 = std::pow(0.8 * M / (saturation * J), 1.0 / (n + omega));
    const double R1 = rho1 * s;
    if (outer * R1 >= 0.5 * g.side_length) throw PreconditionError("molecule support does not fit in the torus");
    if (R1 < 2.0 * h) throw PreconditionError("grid cannot resolve the molecule profile");

    std::vector<double> v(g.size(), 0.0);
    std::vector<double> phi(g.size(), 0.0);
    for (std::size_t i = 0; i < g.size(); ++i) {
        auto d = displacement(g, g.coords(i), x0);
        double u = norm3(d) / R1;
        if (m.profile == "bump") {
            v[i] = canonical_bump(u);
        } else if (m.profile == "bumps") {
            phi[i] = canonical_bump(0.5 * u);
            v[i] = canonical_bump(u);
        } else {
            phi[i] = canonical_bump(u);
            v[i] = u > 0.0 ? bump_derivative(u) * d[0] / (u * R1) : 0.0;
        }
    }
    if (m.profile != "bump") {
        double sv = 0.0, sp = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) {
            sv += v[i];
            sp += phi[i];
        }
        double c = sv / sp;
        for (std::size_t i = 0; i < g.size(); ++i) v[i] -= c * phi[i];
    }
    double vmax = 0.0;
    for (double x : v) vmax = std::max(vmax, std::abs(x));
    double A = saturation * std::pow(s, -(n + gamma)) / vmax;
    for (double& x : v) x *= A;
    m.field = SampledField(g, std::move(v));
    return m;
}

double MoleculeCheck::concentration_margin() const {
    return concentration_bound > 0.0 ? (concentration_bound - concentration) / concentration_bound : 0.0;
}
double MoleculeCheck::height_margin() const {
    return height_bound > 0.0 ? (height_bound - height) / height_bound : 0.0;
}

MoleculeCheck check_molecule(const Molecule& m) {
    MoleculeCheck c;
    const Grid& g = m.field.grid;
    const int n = g.n;
    const double s = m.scale();
    c.concentration = concentration_moment(m.field, m.x0, m.omega_exp);
    c.concentration_bound = std::pow(s, m.omega_exp - m.gamma);
    c.height = lp_norm(m.field, INFINITY);
    c.height_bound = std::pow(s, -(n + m.gamma));
    c.moment = std::abs(integral(m.field));
    c.l1 = lp_norm(m.field, 1.0);
    double C1 = l1_bound_constant(n, m.omega_exp);
    c.l1_bound = C1 * std::pow(s, -m.gamma);
    c.l2 = lp_norm(m.field, 2.0);
    c.l2_bound = std::sqrt(C1) * std::pow(s, -0.5 * n - m.gamma);
    c.moment_checked = m.small();
    if (c.concentration > c.concentration_bound) c.violations.push_back("concentration");
    if (c.height > c.height_bound) c.violations.push_back("height");
    if (c.moment_checked && c.moment > 1e-10 * c.l1) c.violations.push_back("moment");
    if (c.l1 > c.l1_bound) c.violations.push_back("l1");
    if (c.l2 > c.l2_bound) c.violations.push_back("l2");
    c.pass = c.violations.empty();
    return c;
}

double frakc(int n, double omega, double alpha) {
    const double vn = unit_ball_volume(n);
    return (vn * (std::pow(5.0, n) - 1.0) - std::sqrt(2.0 * vn) * std::pow(5.0, n - omega)) /
           (2.0 * std::pow(5.0, n + alpha));
}

double epsilon_exponent(double zeta, double beta0, double beta1, double p_tilde, double omega, int n) {
    double E = p_tilde * (omega - 1.0) + n;
    if (!(E < 0.0)) return std::numeric_limits<double>::quiet_NaN();
    return std::log1p(-std::pow(zeta, (beta1 - beta0) * E)) / (E * beta0 * std::log(zeta));
}

bool ConstantBundle::all_negative() const {
    if (exponent_certificates.empty()) return false;
    for (const auto& e : exponent_certificates)
        if (!e.negative) return false;
    return true;
}

std::vector<ExponentCertificate> evaluate_exponents(const ConstantBundle& b) {
    const double n = b.n, al = b.alpha, om = b.omega_exp, q = b.q;
    const double b0 = b.beta0, b1 = b.beta1, pt = b.p_tilde, qb = b.q_bar;
    const double eps = epsilon_exponent(b.zeta_chosen, b0, b1, pt, om, b.n);
    std::vector<ExponentCertificate> out;
    auto add = [&](const std::string& name, const std::string& expr, double v) {
        out.push_back({name, expr, v, v < 0.0});
    };
    if (b.regime == "alpha<1") {
        const double p = b.p;
        add("eta1", "(beta0-1)(omega-alpha+n/p)+(1-alpha)(beta1-beta0)", (b0 - 1) * (om - al + n / p) + (1 - al) * (b1 - b0));
        add("eta2", "(1-beta0(1+eps))(alpha-omega-n/p_tilde)+(beta1-beta0(1+eps))(1-alpha)",
            (1 - b0 * (1 + eps)) * (al - om - n / pt) + (b1 - b0 * (1 + eps)) * (1 - al));
        add("eta3", "(beta1-1)(omega-alpha+n/q)", (b1 - 1) * (om - al + n / q));
        add("eta4", "(beta1-1)(omega-alpha+n/q_bar)", (b1 - 1) * (om - al + n / qb));
        add("p_window", "2-alpha-omega-n/p", 2 - al - om - n / p);
        add("p_above_one", "1-p", 1 - p);
        add("p_tilde_window", "alpha-omega-n/p_tilde", -(al - om - n / pt));
        add("regime_q", "n/(alpha-gamma)-q", n / (al - b.gamma) - q);
    } else {
        add("eta1", "(beta0-1)(omega-alpha+n)+(beta1-beta0)(1-alpha+n/q)",
            (b0 - 1) * (om - al + n) + (b1 - b0) * (1 - al + n / q));
        add("eta2", "beta1(1-alpha+n/q)+beta0(1+eps)(omega-1+n/p_tilde)-(n/q+n/p_tilde)+alpha-omega",
            b1 * (1 - al + n / q) + b0 * (1 + eps) * (om - 1 + n / pt) - (n / q + n / pt) + al - om);
        add("eta3", "(beta1-1)(omega-alpha+n/q)", (b1 - 1) * (om - al + n / q));
        add("eta4", "(beta1-1)(omega-alpha+n/q_bar)", (b1 - 1) * (om - al + n / qb));
        add("holder_z", "1/p_tilde+1/q-1", 1 / pt + 1 / q - 1);
        add("nu_order", "nu1-nu0", b.nu1 - b.nu0);
        add("regime_q", "n/(1-gamma)-q", n / (1 - b.gamma) - q);
    }
    add("q_bar_window", "omega-delta+n/q_bar", om - b.delta + n / qb);
    add("p_tilde_sign", "p_tilde(omega-1)+n", pt * (om - 1) + n);
    add("eps_positive", "-eps", std::isnan(eps) ? 1.0 : -eps);
    if (b.regime == "alpha<1") {
        add("beta_eps_1", "1-beta0(1+eps)", 1 - b0 * (1 + eps));
        add("beta_eps_2", "beta1-beta0(1+eps)", b1 - b0 * (1 + eps));
    }
    for (auto& e : out)
        if (std::isnan(e.value)) e.negative = false;
    return out;
}

double eta_bracket(const ConstantBundle& b) {
    double acc = 0.0;
    for (const auto& e : evaluate_exponents(b))
        if (e.name.rfind("eta", 0) == 0) acc += std::pow(b.zeta_chosen, e.value);
    return acc;
}

bool reverify(const ConstantBundle& b) {
    auto fresh = evaluate_exponents(b);
    if (fresh.size() != b.exponent_certificates.size()) return false;
    for (std::size_t i = 0; i < fresh.size(); ++i) {
        if (fresh[i].name != b.exponent_certificates[i].name) return false;
        if (fresh[i].negative != b.exponent_certificates[i].negative) return false;
    }
    return true;
}

ConstantBundle compute_constants(const ConstantParams& P) {
    const int n = P.n;
    const double al = P.alpha, de = P.delta, ga = P.gamma, om = P.omega, q = P.q;
    ConstantBundle b;
    b.n = n;
    b.alpha = al;
    b.delta = de;
    b.gamma = ga;
    b.omega_exp = om;
    b.mu = P.mu;
    b.q = q;
    b.cbar1 = P.cbar1;
    b.eta_prefactor = P.eta_prefactor;
    b.a = n + q * (1.0 - al);
    if (al < 1.0) {
        if (!(0 < ga && ga < om && om < de && de < al && al < 1))
            throw PreconditionError("alpha<1 regime needs 0 < gamma < omega < delta < alpha < 1");
        if (!(q > n / (al - ga))) throw PreconditionError("alpha<1 regime needs q > n/(alpha-gamma)");
        b.regime = "alpha<1";
        b.p = 0.5 * (1.0 + n / (2.0 - al - om));
        b.p_tilde = 2.0 * n / (al - om);
    } else if (al > 1.0 && al < 2.0) {
        if (!(1 < de && de < al && 0 < ga && ga < om && om < 2 - al && om < 1))
            throw PreconditionError("alpha>1 regime needs 1 < delta < alpha and 0 < gamma < omega < 2-alpha");
        if (!(q > n / (1.0 - ga))) throw PreconditionError("alpha>1 regime needs q > n/(1-gamma)");
        b.regime = "alpha>1";
        b.p = 0.0;
        b.p_tilde = 2.0 * n / (1.0 - om);
        b.notes.push_back("p unused in the alpha>1 chain");
    } else {
        throw PreconditionError("alpha must lie in (0,1) or (1,2)");
    }
    b.q_bar = 2.0 * n / (de - om);
    if (b.a < 0.0 || b.a >= n + q)
        b.notes.push_back("a = n + q(1-alpha) = " + fmt("%.6g", b.a) + " lies outside the Morrey range [0, n+q)");
    b.frakc = frakc(n, om, al);
    b.K_target = al / (n + ga) * P.cbar1 * b.frakc;
    const double front = 2.0 * al / (om - ga) * P.eta_prefactor * std::max(P.mu, 1.0);

    auto set_nu = [&](ConstantBundle& c, double nu) {
        if (c.regime == "alpha<1") {
            c.nu0 = nu;
            c.nu1 = nu;
        } else {
            c.nu0 = nu;
            c.nu1 = 0.1 * nu;
        }
        c.beta0 = 1.0 - c.nu0;
        c.beta1 = 1.0 + c.nu1;
        c.epsilon_exp = epsilon_exponent(c.zeta_chosen, c.beta0, c.beta1, c.p_tilde, c.omega_exp, c.n);
        c.exponent_certificates = evaluate_exponents(c);
        c.K_bound = front * eta_bracket(c);
        c.K_ok = c.K_bound <= c.K_target;
    };

    bool have_negative = false;
    ConstantBundle best = b, closest = b;
    double best_K = std::numeric_limits<double>::infinity();
    double closest_worst = std::numeric_limits<double>::infinity();
    for (int j = 1; j <= P.zeta_max_log2; ++j) {
        for (int k = 0; k <= 240; ++k) {
            double nu = std::pow(10.0, -8.0 + 8.0 * k / 240.0) * 0.5;
            ConstantBundle c = b;
            c.zeta_chosen = std::ldexp(1.0, j);
            set_nu(c, nu);
            if (c.all_negative()) {
                have_negative = true;
                if (c.K_bound < best_K) {
                    best_K = c.K_bound;
                    best = c;
                }
                if (c.K_ok && b.frakc > 0.0) return c;
            } else {
                double worst = -std::numeric_limits<double>::infinity();
                for (const auto& e : c.exponent_certificates)
                    worst = std::max(worst, std::isnan(e.value) ? 1e300 : e.value);
                if (worst < closest_worst) {
                    closest_worst = worst;
                    closest = c;
                }
            }
        }
    }
    if (b.frakc <= 0.0)
        throw InfeasibleConstants("frakc is not positive", have_negative ? best : closest, "frakc > 0");
    if (!have_negative) {
        std::string blocking = "exponent certificates";
        for (const auto& e : closest.exponent_certificates)
            if (!e.negative) {
                blocking = e.name + ": " + e.expression;
                break;
            }
        throw InfeasibleConstants("no zeta in the ladder makes every exponent negative", closest, blocking);
    }
    throw InfeasibleConstants("no zeta in the ladder satisfies the K condition", best,
                              "K = " + fmt("%.6g", best.K_bound) + " > (alpha/(n+gamma)) cbar1 frakc = " +
                                  fmt("%.6g", best.K_target));
}

CenterPath evolve_center(const Grid& g, const VelocitySampler& v, const std::array<double, 3>& x0, double rho,
                         double s0, double s1, int steps) {
    if (rho < g.spacing()) throw PreconditionError("center ball radius under-resolved (rho < h)");
    if (steps < 1) throw PreconditionError("need at least one step");
    CenterPath path;
    const double L = g.side_length;
    auto wrap = [&](std::array<double, 3> x) {
        for (int k = 0; k < g.n; ++k) x[k] -= L * std::floor(x[k] / L);
        return x;
    };
    auto f = [&](double s, const std::array<double, 3>& x) {
        std::vector<double> avg = ball_average(v(s), g, x, rho);
        std::array<double, 3> out{0, 0, 0};
        for (int k = 0; k < g.n; ++k) out[k] = avg[k];
        return out;
    };
    auto axpy = [&](const std::array<double, 3>& x, double a, const std::array<double, 3>& y) {
        std::array<double, 3> z = x;
        for (int k = 0; k < 3; ++k) z[k] += a * y[k];
        return z;
    };
    std::array<double, 3> x = x0;
    const double h = (s1 - s0) / steps;
    path.s.push_back(s0);
    path.x.push_back(wrap(x));
    for (int i = 0; i < steps; ++i) {
        double s = s0 + i * h;
        auto k1 = f(s, x);
        auto k2 = f(s + 0.5 * h, axpy(x, 0.5 * h, k1));
        auto k3 = f(s + 0.5 * h, axpy(x, 0.5 * h, k2));
        auto k4 = f(s + h, axpy(x, h, k3));
        for (int k = 0; k < 3; ++k) x[k] += h / 6.0 * (k1[k] + 2 * k2[k] + 2 * k3[k] + k4[k]);
        path.s.push_back(s + h);
        path.x.push_back(wrap(x));
    }
    return path;
}

CenterPath evolve_center(const VelocityField& v, const std::array<double, 3>& x0, double rho, double s0, double s1,
                         int steps) {
    return evolve_center(v.grid, [&](double s) { return v.at(s); }, x0, rho, s0, s1, steps);
}

ConcentrationIntegrals concentration_integrals(const SampledField& psi, const Components& v_t,
                                               const std::array<double, 3>& center, double rho, double r_current,
                                               const LevySymbol& symbol, const ConstantBundle& b, double v_norm) {
    const Grid& g = psi.grid;
    require_same_grid(g, symbol.grid, "concentration integrals");
    ConcentrationIntegrals out;
    const double om = b.omega_exp;
    std::vector<double> vbar = ball_average(v_t, g, center, rho);
    SampledField Omega(g, 0.0);
    const double dmin = 0.5 * g.spacing();
    double I1 = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        double d = norm3(displacement(g, g.coords(i), center));
        Omega.values[i] = std::pow(d, om);
        if (psi.values[i] == 0.0) continue;
        double dv = 0.0;
        for (int k = 0; k < g.n; ++k) dv += (v_t[k][i] - vbar[k]) * (v_t[k][i] - vbar[k]);
        I1 += std::pow(std::max(d, dmin), om - 1.0) * std::sqrt(dv) * std::abs(psi.values[i]);
    }
    out.I1 = I1 * g.cell_volume();
    SampledField LO = apply_operator(Omega, symbol);
    double I2 = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) I2 += std::abs(LO.values[i]) * std::abs(psi.values[i]);
    out.I2 = I2 * g.cell_volume();

    const double n = g.n, r = r_current, z = b.zeta_chosen, q = b.q, a = b.a;
    const double b0 = b.beta0, b1 = b.beta1, eps = b.epsilon_exp, pt = b.p_tilde;
    auto nrm = [&](double p) { return lp_norm(psi, p); };
    if (b.regime == "alpha<1") {
        out.bound1 = v_norm * (std::pow(std::pow(z, b1) * r, (a - n) / q) *
                                   (std::pow(std::pow(z, b0) * r, om - 1 + n / b.p) * nrm(conjugate(b.p)) +
                                    std::pow(std::pow(z, b0 * (1 + eps)) * r, om - 1 + n / pt) * nrm(conjugate(pt))) +
                               std::pow(std::pow(z, b1) * r, om - 1 + a / q) * nrm(conjugate(q)));
    } else {
        double zexp = 1.0 / (1.0 - 1.0 / pt - 1.0 / q);
        out.bound1 = v_norm * std::pow(std::pow(z, b1) * r, a / q) *
                     (std::pow(std::pow(z, b0) * r, om - 1 + n / conjugate(q)) * nrm(INFINITY) +
                      std::pow(std::pow(z, b0 * (1 + eps)) * r, om - 1 + n / pt) * nrm(zexp) +
                      std::pow(std::pow(z, b1) * r, om - 1) * nrm(conjugate(q)));
    }
    out.bound2 = std::pow(std::pow(z, b1) * r, om - b.alpha + n / b.q_bar) * nrm(conjugate(b.q_bar));
    out.ratio1 = out.bound1 > 0.0 ? out.I1 / out.bound1 : 0.0;
    out.ratio2 = out.bound2 > 0.0 ? out.I2 / out.bound2 : 0.0;
    return out;
}

Schedule schedule_iterations(double r, double alpha, double eps_step, double T0, double zeta, double K) {
    if (!(r > 0.0 && r < 1.0)) throw PreconditionError("schedule needs 0 < r < 1");
    if (!(T0 > 0.0)) throw PreconditionError("T0 must be positive");
    if (!(eps_step > 0.0)) throw PreconditionError("eps_step must be positive");
    if (K < 0.0) throw PreconditionError("K must be nonnegative");
    Schedule sc;
    const double size0 = std::pow(zeta * r, alpha);
    if (size0 >= 0.5 * T0) return sc;
    const long cap = static_cast<long>(std::ceil(T0 / (eps_step * std::pow(r, alpha))));
    sc.s.push_back(0.0);
    sc.r.push_back(r);
    for (long i = 1; i <= cap; ++i) {
        double ri = std::pow(std::pow(r, alpha) + K / std::pow(zeta, alpha) * sc.s.back(), 1.0 / alpha);
        double si = sc.s.back() + eps_step * std::pow(ri, alpha);
        sc.s.push_back(si);
        sc.r.push_back(ri);
        if (size0 + K * si >= 0.5 * T0) {  // (zeta r_{i+1})^alpha
            sc.stopped_by_size = true;
            break;
        }
    }
    return sc;
}

MoleculeTrace track_deformation(const Molecule& m, const VelocityField& v, std::shared_ptr<const LevySymbol> symbol,
                                const Schedule& schedule, const DeformationOptions& opt) {
    if (!m.small()) throw PreconditionError("deformation tracking needs a small molecule");
    const Grid& g = m.field.grid;
    const int n = g.n;
    const double al = symbol->alpha;
    const double zr_a = std::pow(m.scale(), al);
    const double beta1 = opt.bundle ? opt.bundle->beta1 : 1.0;
    const double C1 = l1_bound_constant(n, m.omega_exp);
    for (std::size_t i = 1; i < schedule.s.size(); ++i) {
        double ds = schedule.s[i] - schedule.s[i - 1];
        if (!(ds > 0.0) || ds > opt.eps_step * std::pow(schedule.r[i], al) * (1.0 + 1e-12))
            throw PreconditionError("schedule step " + std::to_string(i) + " violates s_i - s_{i-1} <= eps r_i^alpha");
    }
    VelocitySampler w = [&](double u) { return v.at(opt.reversed ? opt.t_ref - u : u); };

    MoleculeTrace tr;
    auto record = [&](double s, double r, const std::array<double, 3>& x, const SampledField& psi) {
        double B = zr_a + opt.K * s;
        double conc = concentration_moment(psi, x, m.omega_exp);
        double sup = lp_norm(psi, INFINITY);
        double l1 = lp_norm(psi, 1.0);
        double cb = std::pow(B, (m.omega_exp - m.gamma) / al);
        double sb = std::pow(B, -(n + m.gamma) / al);
        double lb = C1 * std::pow(B, -m.gamma / al);
        tr.s.push_back(s);
        tr.r.push_back(r);
        tr.center.push_back(x);
        tr.concentration.push_back(conc);
        tr.sup.push_back(sup);
        tr.l1.push_back(l1);
        tr.concentration_bound.push_back(cb);
        tr.sup_bound.push_back(sb);
        tr.l1_bound.push_back(lb);
        tr.concentration_ok.push_back(conc <= cb * (1 + opt.tolerance));
        tr.sup_ok.push_back(sup <= sb * (1 + opt.tolerance));
        tr.l1_ok.push_back(l1 <= lb * (1 + opt.tolerance));
        if (!tr.concentration_ok.back() || !tr.sup_ok.back() || !tr.l1_ok.back()) tr.pass = false;
        if (opt.bundle) {
            double rho = std::pow(opt.bundle->zeta_chosen, beta1) * r;
            tr.integrals.push_back(concentration_integrals(psi, w(s), x, std::max(rho, g.spacing()), r, *symbol,
                                                           *opt.bundle, opt.v_norm));
        }
    };

    SampledField psi = m.field;
    SampledField plus = psi, minus = psi;
    for (double& x : plus.values) x = std::max(x, 0.0);
    for (double& x : minus.values) x = std::max(-x, 0.0);
    std::array<double, 3> x = m.x0;
    if (schedule.empty()) {
        record(0.0, m.r, x, psi);
        tr.final_field = psi;
        return tr;
    }
    record(schedule.s[0], schedule.r[0], x, psi);

    auto advance = [&](const SampledField& f, double s0, double ds) {
        ViscousProblem p;
        p.symbol = symbol;
        p.v = v;
        p.epsilon_visc = opt.eps_visc;
        p.theta0 = f;
        p.T = ds;
        p.drift_norm = opt.v_norm;
        p.drift_sign = -1.0;
        p.drift_reversed = opt.reversed;
        p.drift_ref = opt.t_ref;
        p.time_offset = s0;
        SolverConfig c;
        c.scheme = opt.eps_visc > 0.0 ? opt.scheme : "imex-spectral";
        c.dt = std::min(opt.dt, ds);
        c.store_every = 1 << 30;
        return solve(p, c).fields.back();
    };

    for (std::size_t i = 1; i < schedule.s.size(); ++i) {
        double s0 = schedule.s[i - 1], s1 = schedule.s[i];
        psi = advance(psi, s0, s1 - s0);
        if (opt.split_signs) {
            plus = advance(plus, s0, s1 - s0);
            minus = advance(minus, s0, s1 - s0);
            double diff = 0.0, ref = lp_norm(psi, 1.0);
            for (std::size_t k = 0; k < g.size(); ++k)
                diff += std::abs(plus.values[k] - minus.values[k] - psi.values[k]);
            diff *= g.cell_volume();
            tr.split_difference = std::max(tr.split_difference, ref > 0.0 ? diff / ref : diff);
        }
        double rho = std::max(std::pow(m.zeta, beta1) * schedule.r[i], g.spacing());
        CenterPath cp = evolve_center(g, w, x, rho, s0, s1, std::max(1, opt.center_substeps));
        x = cp.x.back();
        record(s1, schedule.r[i], x, psi);
    }
    tr.final_field = psi;
    return tr;
}

}  // namespace levylab
