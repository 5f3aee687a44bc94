#include "levylab/certificates.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <limits>

#include "levylab/errors.hpp"
#include "levylab/fourier.hpp"
#include "levylab/function_spaces.hpp"

namespace levylab {

namespace {

constexpr double tiny = 1e-300;

std::string fmt(const char* f, double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, x);
    return buf;
}

SampledField map_values(const SampledField& f, double (*op)(double, double), double arg) {
    SampledField out = f;
    for (double& x : out.values) x = op(x, arg);
    return out;
}

double abs_pow(double x, double e) { return std::pow(std::abs(x), e); }
double signed_pow(double x, double e) { return x == 0.0 ? 0.0 : std::copysign(std::pow(std::abs(x), e), x); }

double field_norm(const SampledField& f, double p, bool spectral) {
    if (!spectral) return lp_norm(f, p);
    return std::isinf(p) ? spectral_sup(f) : spectral_lp_norm(f, p);
}

}  // namespace

void Certificate::add(const std::string& label, double lhs, double rhs, double scale) {
    add_margin(label, lhs, rhs, (rhs - lhs) / std::max(scale, tiny));
}

void Certificate::add_margin(const std::string& label, double lhs, double rhs, double margin) {
    samples.push_back({label, lhs, rhs, margin});
}

void Certificate::finalize() {
    pass = true;
    for (const auto& s : samples)
        if (!(s.margin >= -tolerance)) pass = false;
}

double Certificate::worst_margin() const {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& s : samples) m = std::min(m, s.margin);
    return m;
}

std::string digest(const std::vector<double>& values) {
    std::uint64_t h = 1469598103934665603ULL;
    for (double v : values) {
        unsigned char b[sizeof(double)];
        std::memcpy(b, &v, sizeof b);
        for (unsigned char c : b) {
            h ^= c;
            h *= 1099511628211ULL;
        }
    }
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string digest(const SampledField& f) { return digest(f.values); }

Certificate verify_max_principle(const TrajectorySolution& traj, const std::vector<double>& p_list,
                                 const MaxPrincipleOptions& opt) {
    Certificate c;
    c.name = "max_principle";
    c.tolerance = opt.tolerance;
    if (traj.fields.empty()) throw PreconditionError("empty trajectory");
    c.digest = digest(traj.fields.front());
    for (double p : p_list) {
        if (!(p >= 1.0)) throw PreconditionError("p must be >= 1");
        std::vector<double> norms(traj.fields.size());
        for (std::size_t k = 0; k < norms.size(); ++k) norms[k] = field_norm(traj.fields[k], p, opt.spectral);
        std::string tag = std::isinf(p) ? "inf" : fmt("%g", p);
        double worst = 1.0;
        for (std::size_t k = 1; k < norms.size(); ++k)
            if (norms[0] > 0.0) worst = std::max(worst, norms[k] / norms[0]);
        if (std::isinf(p)) {
            c.reported["C_inf"] = worst;
            if (!opt.strict_linf) continue;
        }
        for (std::size_t k = 1; k < norms.size(); ++k) {
            c.add("p=" + tag + " step " + std::to_string(k), norms[k], norms[k - 1], norms[k - 1]);
            c.add("p=" + tag + " vs initial " + std::to_string(k), norms[k], norms[0], norms[0]);
        }
        c.reported["final_ratio_p" + tag] = norms[0] > 0.0 ? norms.back() / norms[0] : 0.0;
    }
    c.finalize();
    return c;
}

Certificate verify_positivity(const TrajectorySolution& traj, double M, double tolerance) {
    if (traj.fields.empty()) throw PreconditionError("empty trajectory");
    if (!(M > 0.0)) throw PreconditionError("M must be positive");
    const auto& f0 = traj.fields.front().values;
    for (double x : f0)
        if (!(x >= 0.0 && x <= M)) throw PreconditionError("initial data outside [0, M]");
    Certificate c;
    c.name = "positivity";
    c.tolerance = tolerance;
    c.digest = digest(traj.fields.front());
    double lo = 0.0, hi = 0.0;
    for (std::size_t k = 0; k < traj.fields.size(); ++k) {
        const auto& v = traj.fields[k].values;
        auto [mn, mx] = std::minmax_element(v.begin(), v.end());
        c.add_margin("min step " + std::to_string(k), *mn, 0.0, *mn / M);
        c.add_margin("max step " + std::to_string(k), *mx, M, (M - *mx) / M);
        lo = std::min(lo, *mn);
        hi = std::max(hi, *mx);
    }
    c.reported["min"] = lo;
    c.reported["max"] = hi;
    c.reported["M"] = M;
    c.finalize();
    return c;
}

Certificate verify_stroock_varopoulos(const SampledField& f, const LevySymbol& s, double p, double tolerance) {
    if (!(p >= 2.0)) throw PreconditionError("p must be >= 2");
    require_same_grid(f.grid, s.grid, "field vs symbol");
    bool nonzero = std::any_of(f.values.begin(), f.values.end(), [](double x) { return x != 0.0; });
    if (!nonzero) throw PreconditionError("field is identically zero");
    Certificate c;
    c.name = "stroock_varopoulos";
    c.tolerance = tolerance;
    c.digest = digest(f);
    SampledField u = map_values(f, abs_pow, 0.5 * p);
    SampledField w = map_values(f, signed_pow, p - 1.0);
    SampledField Lf = apply_operator(f, s);
    double lhs = inner(apply_operator(u, s), u);
    double rhs = inner(Lf, w);
    double scale = std::max(lp_norm(Lf, 2.0) * lp_norm(w, 2.0), tiny);
    bool pos = std::all_of(f.values.begin(), f.values.end(), [](double x) { return x >= 0.0; });
    bool neg = std::all_of(f.values.begin(), f.values.end(), [](double x) { return x <= 0.0; });
    c.add_margin("rhs nonnegative", 0.0, rhs, rhs / scale);
    if (p == 2.0 && (pos || neg)) c.add_margin("p=2 equality", lhs, rhs, -std::abs(rhs - lhs) / scale);
    c.reported["lhs_pairing"] = lhs;
    c.reported["rhs_pairing"] = rhs;
    c.reported["scale"] = scale;
    c.reported["one_sign"] = (pos || neg) ? 1.0 : 0.0;
    if (lhs > 0.0) c.reported["C"] = rhs / lhs;
    c.finalize();
    return c;
}

double dissipation_rate(const SampledField& f, const LevySymbol& s, double eps) {
    require_same_grid(f.grid, s.grid, "field vs symbol");
    const HalfLattice& hl = half_lattice(f.grid);
    std::vector<cplx> sp = fft_forward(f.grid, f.values);
    double acc = 0.0;
    for (std::size_t i = 0; i < hl.size; ++i) acc += hl.weight[i] * (s.at_half(i) + eps * hl.k2[i]) * std::norm(sp[i]);
    return 2.0 * acc * f.grid.cell_volume() / static_cast<double>(f.grid.size());
}

BesovTerms besov_terms(const SampledField& f, const LevySymbol& s, double p) {
    if (!(p >= 2.0)) throw PreconditionError("p must be >= 2");
    require_same_grid(f.grid, s.grid, "field vs symbol");
    BesovTerms t;
    SampledField u = map_values(f, abs_pow, 0.5 * p);
    t.besov_p = std::pow(besov_seminorm(f, s.alpha / p, p), p);
    t.besov_2 = std::pow(besov_seminorm(u, s.alpha / 2.0, 2.0), 2.0);
    SampledField w = map_values(f, signed_pow, p - 1.0);
    t.energy = std::pow(lp_norm(u, 2.0), 2.0) + inner(w, apply_operator(f, s));
    return t;
}

BesovConstants fit_besov_constants(const std::vector<SampledField>& corpus, const LevySymbol& s, double p,
                                   double headroom) {
    BesovConstants k;
    k.headroom = headroom;
    for (const auto& f : corpus) {
        BesovTerms t = besov_terms(f, s, p);
        if (t.besov_2 > 0.0) k.c_first = std::max(k.c_first, t.besov_p / t.besov_2);
        if (t.energy > 0.0) k.c_second = std::max(k.c_second, t.besov_2 / t.energy);
    }
    k.c_first *= headroom;
    k.c_second *= headroom;
    return k;
}

Certificate verify_besov_regularity(const std::vector<SampledField>& fields, const LevySymbol& s, double p,
                                    const BesovConstants& frozen, double tolerance) {
    Certificate c;
    c.name = "besov_regularity";
    c.tolerance = tolerance;
    std::vector<double> all;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        BesovTerms t = besov_terms(fields[i], s, p);
        all.insert(all.end(), fields[i].values.begin(), fields[i].values.end());
        double r1 = frozen.c_first * t.besov_2;
        double r2 = frozen.c_second * t.energy;
        c.add("field " + std::to_string(i) + " first", t.besov_p, r1, std::max({r1, t.besov_p, tiny}));
        c.add("field " + std::to_string(i) + " second", t.besov_2, r2, std::max({r2, t.besov_2, tiny}));
    }
    c.digest = digest(all);
    c.reported["c_first"] = frozen.c_first;
    c.reported["c_second"] = frozen.c_second;
    c.reported["p"] = p;
    c.finalize();
    return c;
}

double besov_cross_term(const SampledField& f, const LevySymbol& s) {
    SampledField plus = f, minus = f;
    for (double& x : plus.values) x = std::max(x, 0.0);
    for (double& x : minus.values) x = std::max(-x, 0.0);
    return inner(apply_operator(plus, s), minus);
}

SymbolBoundConstants fit_symbol_bounds(const LevyKernel& k, double xi_max, double headroom, int samples) {
    if (!(xi_max > 0.0) || samples < 2) throw PreconditionError("bad sweep for symbol bound fit");
    SymbolBoundConstants c;
    c.headroom = headroom;
    double lo = std::log(1e-3 * xi_max), hi = std::log(1.05 * xi_max);
    std::vector<double> xi(samples), a(samples);
    for (int i = 0; i < samples; ++i) {
        xi[i] = std::exp(lo + (hi - lo) * i / (samples - 1));
        a[i] = symbol_radial(k, xi[i]);
    }
    for (int i = 0; i < samples; ++i)
        c.c_upper = std::max(c.c_upper, a[i] / (std::pow(xi[i], k.alpha) + std::pow(xi[i], k.delta)));
    c.c_upper *= headroom;
    c.c_scale = headroom * std::pow(xi.back(), k.alpha) / a.back();
    for (int i = 0; i < samples; ++i) c.c_offset = std::max(c.c_offset, std::pow(xi[i], k.alpha) - c.c_scale * a[i]);
    c.c_offset *= headroom;
    return c;
}

Certificate verify_symbol_bounds(const LevySymbol& s, const LevyKernel& k, const SymbolBoundConstants& frozen,
                                 double tolerance) {
    Certificate c;
    c.name = "symbol_bounds";
    c.tolerance = tolerance;
    c.digest = digest(s.values);
    const HalfLattice& hl = half_lattice(s.grid);
    CertificateSample w1{"upper worst", 0, 0, std::numeric_limits<double>::infinity()};
    CertificateSample w2{"lower worst", 0, 0, std::numeric_limits<double>::infinity()};
    for (std::size_t i = 0; i < hl.size; ++i) {
        double xi = std::sqrt(hl.k2[i]);
        double a = s.at_half(i);
        double xa = std::pow(xi, k.alpha);
        double r1 = frozen.c_upper * (xa + std::pow(xi, k.delta));
        double m1 = (r1 - a) / std::max({r1, a, tiny});
        if (m1 < w1.margin) w1 = {"upper worst at |xi|=" + fmt("%.6g", xi), a, r1, m1};
        double r2 = frozen.c_scale * a + frozen.c_offset;
        double m2 = (r2 - xa) / std::max({r2, xa, tiny});
        if (m2 < w2.margin) w2 = {"lower worst at |xi|=" + fmt("%.6g", xi), xa, r2, m2};
    }
    c.samples = {w1, w2};
    c.reported["c_upper"] = frozen.c_upper;
    c.reported["c_scale"] = frozen.c_scale;
    c.reported["c_offset"] = frozen.c_offset;
    c.reported["frequencies"] = static_cast<double>(hl.size);
    c.finalize();
    return c;
}

Certificate verify_transfer(const TrajectorySolution& forward, const TrajectorySolution& backward,
                            const std::vector<double>& s_fractions, double tolerance) {
    if (forward.fields.empty() || backward.fields.empty()) throw PreconditionError("empty trajectory");
    double t = forward.times.back();
    if (std::abs(backward.times.back() - t) > 1e-12 * std::max(1.0, t))
        throw PreconditionError("forward and backward horizons differ");
    require_same_grid(forward.fields.front().grid, backward.fields.front().grid, "transfer");
    Certificate c;
    c.name = "transfer";
    c.tolerance = tolerance;
    const SampledField& theta0 = forward.fields.front();
    const SampledField& psi0 = backward.fields.front();
    c.digest = digest(theta0.values) + digest(psi0.values);
    double lhs = inner(forward.fields.back(), psi0);
    double rhs = inner(theta0, backward.fields.back());
    double scale = std::max({std::abs(lhs), std::abs(rhs), 1e-12 * lp_norm(theta0, 2.0) * lp_norm(psi0, 2.0), tiny});
    c.add_margin("endpoint", lhs, rhs, -std::abs(lhs - rhs) / scale);
    for (double fr : s_fractions) {
        double s = fr * t;
        double mid = inner(forward.at_time(t - s, 1e-9 * std::max(1.0, t)), backward.at_time(s, 1e-9 * std::max(1.0, t)));
        c.add_margin("s=" + fmt("%g", fr) + "t", lhs, mid, -std::abs(lhs - mid) / scale);
    }
    c.reported["pairing"] = lhs;
    c.reported["mismatch"] = std::abs(lhs - rhs) / scale;
    c.finalize();
    return c;
}

}  // namespace levylab
