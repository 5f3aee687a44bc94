#include "levylab/runner.hpp"

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#include "levylab/bump.hpp"
#include "levylab/drift.hpp"
#include "levylab/errors.hpp"
#include "levylab/field_io.hpp"
#include "levylab/levy.hpp"
#include "levylab/solver.hpp"

namespace levylab {

namespace fs = std::filesystem;

namespace {

const char* kVerifiers[] = {"symbol_bounds",   "max_principle", "positivity",          "picard_contraction",
                            "stroock_varopoulos", "besov",       "transfer",            "vanishing_viscosity"};

json parse_file(const fs::path& p) {
    std::ifstream in(p);
    if (!in) throw ConfigError(p.string(), "cannot open config file");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(p.string(), std::string("parse error: ") + e.what());
    }
}

void merge_into(json& base, const json& over) {
    for (auto it = over.begin(); it != over.end(); ++it) {
        if (it->is_object() && base.contains(it.key()) && base[it.key()].is_object())
            merge_into(base[it.key()], *it);
        else
            base[it.key()] = *it;
    }
}

json resolve_includes(const json& raw, const fs::path& dir, int depth) {
    if (depth > 16) throw ConfigError("/include", "include depth exceeds 16 (cycle?)");
    if (!raw.is_object()) throw ConfigError("/", "config root must be an object");
    json acc = json::object();
    if (raw.contains("include")) {
        const json& inc = raw["include"];
        std::vector<std::string> files;
        if (inc.is_string())
            files.push_back(inc.get<std::string>());
        else if (inc.is_array()) {
            for (std::size_t i = 0; i < inc.size(); ++i) {
                if (!inc[i].is_string()) throw ConfigError("/include/" + std::to_string(i), "expected a file name");
                files.push_back(inc[i].get<std::string>());
            }
        } else {
            throw ConfigError("/include", "expected a string or a list of strings");
        }
        for (const auto& f : files) {
            fs::path p = dir / f;
            merge_into(acc, resolve_includes(parse_file(p), p.parent_path(), depth + 1));
        }
    }
    json body = raw;
    body.erase("include");
    merge_into(acc, body);
    return acc;
}

const char* type_name(const json& j) {
    if (j.is_object()) return "object";
    if (j.is_array()) return "list";
    if (j.is_string()) return "string";
    if (j.is_boolean()) return "boolean";
    if (j.is_number()) return "number";
    return "null";
}

void check_against(const json& cfg, const json& def, const std::string& path) {
    for (auto it = cfg.begin(); it != cfg.end(); ++it) {
        std::string p = path + "/" + it.key();
        if (!def.contains(it.key())) throw ConfigError(p, "unknown key");
        const json& d = def[it.key()];
        if (std::string(type_name(d)) != type_name(*it))
            throw ConfigError(p, std::string("expected ") + type_name(d) + ", got " + type_name(*it));
        if (d.is_object()) check_against(*it, d, p);
    }
}

double num(const json& cfg, const char* a, const char* b) { return cfg.at(a).at(b).get<double>(); }

double p_value(const json& j, const std::string& path) {
    if (j.is_number()) return j.get<double>();
    if (j.is_string() && (j.get<std::string>() == "inf" || j.get<std::string>() == "infinity")) return INFINITY;
    throw ConfigError(path, "expected a number or \"inf\"");
}

std::array<double, 3> point(const json& arr, const Grid& g) {
    std::array<double, 3> x{0, 0, 0};
    if (arr.empty()) {
        for (int k = 0; k < g.n; ++k) x[k] = 0.5 * g.side_length;
        return x;
    }
    if (static_cast<int>(arr.size()) != g.n) throw ConfigError("center", "expected " + std::to_string(g.n) + " coordinates");
    for (int k = 0; k < g.n; ++k) x[k] = arr[k].get<double>();
    return x;
}

std::string fmt(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

Certificate merge_certificates(const std::string& name, const std::vector<Certificate>& parts) {
    Certificate c;
    c.name = name;
    std::string dig;
    for (const auto& p : parts) {
        for (const auto& s : p.samples) {
            CertificateSample t = s;
            t.label = p.name + ":" + s.label;
            c.samples.push_back(t);
        }
        for (const auto& [k, v] : p.reported) c.reported[p.name + ":" + k] = v;
        c.tolerance = std::max(c.tolerance, p.tolerance);
        c.pass = c.pass && p.pass;
        dig += p.digest;
        if (!p.note.empty()) c.note += (c.note.empty() ? "" : "; ") + p.note;
    }
    c.digest = digest(std::vector<double>(dig.begin(), dig.end()));
    return c;
}

}  // namespace

const json& default_config() {
    static const json d = json::parse(R"({
  "seed": 1,
  "output_dir": "levylab_out",
  "grid": {"n": 2, "N": 64, "L": 6.283185307179586},
  "kernel": {"alpha": 0.8, "delta": 0.6, "cbar1": 1.0, "cbar2": 1.0, "profile": "two-exponent", "amplitude": -1.0},
  "drift": {"kind": "leray", "amplitude": 1.0, "normalize": "morrey", "max_mode": 3, "spectral_slope": 1.0,
            "time_frequency": 1.0, "modulation": 0.3, "time_nodes": 9, "horizon": 0.0, "q": 20.0, "a": -1.0,
            "mollifier_width": 0.0, "constant": [0.0, 0.0, 0.0], "shear_mode": 1},
  "theta0": {"kind": "random", "modes": 4, "slope": 1.0, "amplitude": 1.0, "range": [], "center": [],
             "exponent": 0.4, "width": 0.5, "path": ""},
  "solver": {"scheme": "picard-duhamel", "dt": 0.002, "T": 0.5, "epsilon_visc": 0.01, "picard_tol": 1e-12,
             "max_iters": 80, "c0_prefactor": 0.0, "store_every": 1, "dealias": true},
  "verifiers": [],
  "verifier_options": {"p_list": [1, 2, 4, "inf"], "strict_linf": false, "tolerance": 1e-6, "positivity_M": 0.0,
                       "sv_p": [2, 4], "besov_p": 2.0, "besov_corpus": 10, "vv_eps": [0.04, 0.02, 0.01],
                       "transfer_fractions": [0.25, 0.5, 0.75], "transfer_tolerance": 1e-5,
                       "contraction_bound": 0.55},
  "molecule": {"enabled": false, "r": 0.125, "center": [], "gamma": 0.2, "omega": 0.5, "zeta": 2.0,
               "profile": "bumps", "eps_step": 0.1, "T0": 0.0, "T0_kappa": 2.4, "K": 0.0, "q": 20.0, "mu": 1.0,
               "eta_prefactor": 1.0, "dt": 0.002, "split_signs": false, "tolerance": 1e-6},
  "holder": {"enabled": false, "T0": 0.0, "gamma": 0.2, "omega": 0.5, "zeta": 2.0, "profile": "dipole",
             "stride": 4}
})");
    return d;
}

void validate_config(const json& cfg) {
    check_against(cfg, default_config(), "");
    const json& g = cfg.at("grid");
    int n = g.at("n").get<int>(), N = g.at("N").get<int>();
    if (n < 1 || n > 3) throw ConfigError("/grid/n", "dimension must be 1, 2 or 3");
    if (N < 8 || N % 2 != 0) throw ConfigError("/grid/N", "need an even point count >= 8");
    if (!(g.at("L").get<double>() > 0.0)) throw ConfigError("/grid/L", "must be positive");
    const json& v = cfg.at("verifiers");
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!v[i].is_string()) throw ConfigError("/verifiers/" + std::to_string(i), "expected a verifier name");
        std::string name = v[i].get<std::string>();
        bool known = false;
        for (const char* k : kVerifiers) known = known || name == k;
        if (!known) throw ConfigError("/verifiers/" + std::to_string(i), "unknown verifier '" + name + "'");
    }
    const json& pl = cfg.at("verifier_options").at("p_list");
    for (std::size_t i = 0; i < pl.size(); ++i) p_value(pl[i], "/verifier_options/p_list/" + std::to_string(i));
    if (!(num(cfg, "solver", "dt") > 0.0)) throw ConfigError("/solver/dt", "must be positive");
    if (!(num(cfg, "solver", "T") > 0.0)) throw ConfigError("/solver/T", "must be positive");
    if (num(cfg, "solver", "epsilon_visc") < 0.0) throw ConfigError("/solver/epsilon_visc", "must be >= 0");
    std::string scheme = cfg.at("solver").at("scheme").get<std::string>();
    if (scheme != "picard-duhamel" && scheme != "imex-spectral")
        throw ConfigError("/solver/scheme", "expected picard-duhamel or imex-spectral");
}

json resolve_config(const json& raw, const std::string& base_dir) {
    json user = resolve_includes(raw, base_dir, 0);
    check_against(user, default_config(), "");
    json cfg = default_config();
    merge_into(cfg, user);
    validate_config(cfg);
    return cfg;
}

json load_config(const std::string& path) {
    fs::path p(path);
    return resolve_config(parse_file(p), p.parent_path().string());
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed * 0x9E3779B97F4A7C15ull + stream + 0x632BE59BD9B4E019ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

SampledField random_field(const Grid& g, std::uint64_t seed, int modes, double slope) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    const double w = g.wavenumber_unit();
    struct Mode {
        std::array<int, 3> k;
        double c, s;
    };
    std::vector<Mode> list;
    const int m1 = g.n > 1 ? modes : 0, m2 = g.n > 2 ? modes : 0;
    for (int a = -modes; a <= modes; ++a)
        for (int b = -m1; b <= m1; ++b)
            for (int c = -m2; c <= m2; ++c) {
                if (a == 0 && b == 0 && c == 0) continue;
                double k2 = double(a) * a + double(b) * b + double(c) * c;
                if (k2 > double(modes) * modes) continue;
                double amp = std::pow(1.0 + k2, -slope);
                list.push_back({{a, b, c}, amp * normal(rng), amp * normal(rng)});
            }
    return sample(g, [&](const std::array<double, 3>& x) {
        double s = 0.0;
        for (const auto& m : list) {
            double ph = w * (m.k[0] * x[0] + m.k[1] * x[1] + m.k[2] * x[2]);
            s += m.c * std::cos(ph) + m.s * std::sin(ph);
        }
        return s;
    });
}

SampledField make_theta0(const json& spec, const Grid& g, std::uint64_t seed) {
    std::string kind = spec.at("kind").get<std::string>();
    double amp = spec.at("amplitude").get<double>();
    SampledField f;
    if (kind == "random") {
        f = random_field(g, seed, spec.at("modes").get<int>(), spec.at("slope").get<double>());
    } else if (kind == "constant") {
        f = SampledField(g, 1.0);
    } else if (kind == "sine") {
        const double w = g.wavenumber_unit();
        f = sample(g, [&](const std::array<double, 3>& x) { return std::cos(w * x[0]); });
    } else if (kind == "bump") {
        auto c = point(spec.at("center"), g);
        double R = spec.at("width").get<double>();
        f = sample(g, [&](const std::array<double, 3>& x) { return canonical_bump(g.torus_distance(x, c) / R); });
    } else if (kind == "cusp") {
        auto c = point(spec.at("center"), g);
        double e = spec.at("exponent").get<double>();
        f = sample(g, [&](const std::array<double, 3>& x) { return std::pow(g.torus_distance(x, c), e); });
    } else if (kind == "file") {
        f = read_field(spec.at("path").get<std::string>());
        require_same_grid(f.grid, g, "theta0 file");
    } else {
        throw ConfigError("/theta0/kind", "unknown kind '" + kind + "'");
    }
    const json& range = spec.at("range");
    if (!range.empty()) {
        if (range.size() != 2) throw ConfigError("/theta0/range", "expected [lo, hi]");
        double lo = range[0].get<double>(), hi = range[1].get<double>();
        double mn = *std::min_element(f.values.begin(), f.values.end());
        double mx = *std::max_element(f.values.begin(), f.values.end());
        double span = mx > mn ? mx - mn : 1.0;
        for (double& x : f.values) x = lo + (hi - lo) * (x - mn) / span;
        return f;
    }
    return amp * f;
}

json to_json(const Certificate& c) {
    json j;
    j["name"] = c.name;
    j["pass"] = c.pass;
    j["tolerance"] = c.tolerance;
    j["digest"] = c.digest;
    j["samples"] = c.samples.size();
    j["worst_margin"] = c.samples.empty() ? 0.0 : c.worst_margin();
    const CertificateSample* worst = nullptr;
    for (const auto& s : c.samples)
        if (!worst || s.margin < worst->margin) worst = &s;
    if (worst) j["worst_sample"] = {{"label", worst->label}, {"lhs", worst->lhs}, {"rhs", worst->rhs}};
    j["reported"] = c.reported;
    if (!c.note.empty()) j["note"] = c.note;
    return j;
}

json to_json(const ConstantBundle& b) {
    json j;
    j["n"] = b.n;
    j["alpha"] = b.alpha;
    j["delta"] = b.delta;
    j["gamma"] = b.gamma;
    j["omega"] = b.omega_exp;
    j["mu"] = b.mu;
    j["q"] = b.q;
    j["a"] = b.a;
    j["nu0"] = b.nu0;
    j["nu1"] = b.nu1;
    j["beta0"] = b.beta0;
    j["beta1"] = b.beta1;
    j["p"] = b.p;
    j["p_tilde"] = b.p_tilde;
    j["q_bar"] = b.q_bar;
    j["epsilon"] = b.epsilon_exp;
    j["frakc"] = b.frakc;
    j["cbar1"] = b.cbar1;
    j["eta_prefactor"] = b.eta_prefactor;
    j["K"] = b.K_bound;
    j["K_target"] = b.K_target;
    j["K_ok"] = b.K_ok;
    j["zeta"] = b.zeta_chosen;
    j["regime"] = b.regime;
    j["notes"] = b.notes;
    json ex = json::array();
    for (const auto& e : b.exponent_certificates)
        ex.push_back({{"name", e.name}, {"expression", e.expression}, {"value", e.value}, {"negative", e.negative}});
    j["exponent_certificates"] = ex;
    return j;
}

ConstantBundle bundle_from_json(const json& j) {
    ConstantBundle b;
    b.n = j.at("n").get<int>();
    b.alpha = j.at("alpha").get<double>();
    b.delta = j.at("delta").get<double>();
    b.gamma = j.at("gamma").get<double>();
    b.omega_exp = j.at("omega").get<double>();
    b.mu = j.at("mu").get<double>();
    b.q = j.at("q").get<double>();
    b.a = j.at("a").get<double>();
    b.nu0 = j.at("nu0").get<double>();
    b.nu1 = j.at("nu1").get<double>();
    b.beta0 = j.at("beta0").get<double>();
    b.beta1 = j.at("beta1").get<double>();
    b.p = j.at("p").get<double>();
    b.p_tilde = j.at("p_tilde").get<double>();
    b.q_bar = j.at("q_bar").get<double>();
    b.epsilon_exp = j.at("epsilon").get<double>();
    b.frakc = j.at("frakc").get<double>();
    b.cbar1 = j.at("cbar1").get<double>();
    b.eta_prefactor = j.at("eta_prefactor").get<double>();
    b.K_bound = j.at("K").get<double>();
    b.K_target = j.at("K_target").get<double>();
    b.K_ok = j.at("K_ok").get<bool>();
    b.zeta_chosen = j.at("zeta").get<double>();
    b.regime = j.at("regime").get<std::string>();
    b.notes = j.at("notes").get<std::vector<std::string>>();
    for (const auto& e : j.at("exponent_certificates"))
        b.exponent_certificates.push_back({e.at("name").get<std::string>(), e.at("expression").get<std::string>(),
                                           e.at("value").get<double>(), e.at("negative").get<bool>()});
    return b;
}

json to_json(const MoleculeTrace& t) {
    json j;
    j["steps"] = t.s.size();
    j["pass"] = t.pass;
    j["split_difference"] = t.split_difference;
    if (!t.s.empty()) {
        j["s_final"] = t.s.back();
        j["r_final"] = t.r.back();
        j["l1_final"] = t.l1.back();
        j["l1_bound_final"] = t.l1_bound.back();
    }
    return j;
}

json to_json(const HolderReport& r) {
    json j;
    j["t"] = r.t;
    j["gamma_dual"] = r.gamma_dual;
    j["gamma_direct"] = r.gamma_direct;
    j["fit_r2"] = r.fit_r2;
    j["regime_bound"] = r.regime_bound;
    j["dual_in_range"] = r.dual_in_range;
    j["direct_in_range"] = r.direct_in_range;
    j["verdict"] = r.verdict;
    j["scales"] = r.scales;
    j["pairings"] = r.pairings;
    return j;
}

RunReport run_scenario(const json& cfg) {
    using clock = std::chrono::steady_clock;
    RunReport out;
    json& rep = out.report;
    json timing = json::object();
    // where the report lands is not part of the scenario
    json scenario = cfg;
    scenario.erase("output_dir");
    const std::string dump = scenario.dump();
    rep["scenario_digest"] = digest(std::vector<double>(dump.begin(), dump.end()));
    rep["config"] = scenario;
    json stages = json::array();
    json certs = json::array();
    std::map<std::string, bool> ok;

    auto stage = [&](const std::string& name, const std::vector<std::string>& deps, const std::function<void()>& body) {
        for (const auto& d : deps)
            if (!ok[d]) {
                stages.push_back({{"stage", name}, {"status", "skipped"}, {"reason", "depends on failed stage " + d}});
                ok[name] = false;
                return;
            }
        auto t0 = clock::now();
        try {
            body();
            stages.push_back({{"stage", name}, {"status", "ok"}});
            ok[name] = true;
        } catch (const std::exception& e) {
            stages.push_back({{"stage", name}, {"status", "error"}, {"error", e.what()}});
            ok[name] = false;
            out.pass = false;
        }
        timing[name] = std::chrono::duration<double>(clock::now() - t0).count();
    };
    auto add_cert = [&](const Certificate& c) {
        certs.push_back(to_json(c));
        out.pass = out.pass && c.pass;
    };

    const std::uint64_t seed = cfg.at("seed").get<std::uint64_t>();
    const json& gc = cfg.at("grid");
    const Grid g(gc.at("n").get<int>(), gc.at("N").get<int>(), gc.at("L").get<double>());
    const json& kc = cfg.at("kernel");
    const json& sc = cfg.at("solver");
    const json& vo = cfg.at("verifier_options");
    std::vector<std::string> verifiers = cfg.at("verifiers").get<std::vector<std::string>>();
    auto wants = [&](const char* v) { return std::find(verifiers.begin(), verifiers.end(), v) != verifiers.end(); };
    const bool mol_on = cfg.at("molecule").at("enabled").get<bool>();
    const bool hold_on = cfg.at("holder").at("enabled").get<bool>();
    const bool need_solve = wants("max_principle") || wants("positivity") || wants("picard_contraction") ||
                            wants("transfer") || wants("besov") || wants("stroock_varopoulos") ||
                            wants("vanishing_viscosity") || hold_on;
    const double eps = sc.at("epsilon_visc").get<double>();
    const double T = sc.at("T").get<double>();
    const double alpha = kc.at("alpha").get<double>();

    LevyKernel kernel;
    std::shared_ptr<LevySymbol> symbol;
    stage("kernel", {}, [&] {
        kernel = make_kernel(g.n, alpha, kc.at("delta").get<double>(), kc.at("cbar1").get<double>(),
                             kc.at("cbar2").get<double>(), kc.at("profile").get<std::string>(),
                             kc.at("amplitude").get<double>());
        symbol = std::make_shared<LevySymbol>(tabulate_symbol(kernel, g));
        rep["kernel"] = {{"id", kernel.id()}, {"symbol_digest", digest(symbol->values)}};
    });
    if (wants("symbol_bounds"))
        stage("symbol_bounds", {"kernel"}, [&] {
            double xi_max = std::sqrt(double(g.n)) * (g.points_per_dim / 2) * g.wavenumber_unit();
            auto fc = fit_symbol_bounds(kernel, xi_max);
            Certificate c = verify_symbol_bounds(*symbol, kernel, fc);
            c.name = "symbol_bounds";
            add_cert(c);
        });

    const json& dc = cfg.at("drift");
    const double q = dc.at("q").get<double>();
    double a_m = dc.at("a").get<double>();
    if (a_m < 0.0) a_m = g.n + q * (1.0 - alpha);
    VelocityField v_raw, v_solve;
    double width = 0.0;
    if (need_solve || mol_on)
        stage("drift", {}, [&] {
            DriftSpec ds;
            ds.kind = dc.at("kind").get<std::string>();
            ds.amplitude = dc.at("amplitude").get<double>();
            ds.normalize = dc.at("normalize").get<std::string>();
            ds.max_mode = dc.at("max_mode").get<int>();
            ds.spectral_slope = dc.at("spectral_slope").get<double>();
            ds.time_frequency = dc.at("time_frequency").get<double>();
            ds.modulation = dc.at("modulation").get<double>();
            ds.time_nodes = dc.at("time_nodes").get<int>();
            double hz = dc.at("horizon").get<double>();
            ds.horizon = hz > 0.0 ? hz : T;
            ds.seed = derive_seed(seed, 1);
            for (int k = 0; k < 3; ++k) ds.constant[k] = dc.at("constant")[k].get<double>();
            ds.shear_mode = dc.at("shear_mode").get<int>();
            MorreyParams mp;
            mp.q = q;
            mp.a = a_m;
            v_raw = make_divfree(ds, g, mp);
            v_solve = v_raw;
            if (eps > 0.0 && ds.kind != "zero") {
                double w = dc.at("mollifier_width").get<double>();
                width = w > 0.0 ? w : std::max(eps, 2.0 * g.spacing());
                MollifierPair mo;
                mo.epsilon = width;
                v_solve = mollify(v_raw, mo);
                attach_morrey_norm(v_solve, mp);
            }
            rep["drift"] = {{"morrey_norm", v_raw.morrey_norm},
                            {"mollified_morrey_norm", v_solve.morrey_norm},
                            {"max_speed", v_solve.max_speed()},
                            {"a", a_m},
                            {"mollifier_width", width}};
        });

    SampledField theta0;
    stage("theta0", {}, [&] {
        theta0 = make_theta0(cfg.at("theta0"), g, derive_seed(seed, 2));
        rep["theta0_digest"] = digest(theta0);
    });

    ViscousProblem prob;
    SolverConfig scfg;
    TrajectorySolution traj;
    if (need_solve)
        stage("solve", {"kernel", "drift", "theta0"}, [&] {
            prob.symbol = symbol;
            prob.v = v_solve;
            prob.epsilon_visc = eps;
            prob.mollifier_width = width;
            prob.theta0 = theta0;
            prob.T = T;
            prob.drift_norm = v_solve.morrey_norm;
            prob.q = q;
            scfg.dt = sc.at("dt").get<double>();
            scfg.scheme = sc.at("scheme").get<std::string>();
            scfg.picard_tol = sc.at("picard_tol").get<double>();
            scfg.max_iters = sc.at("max_iters").get<int>();
            scfg.c0_prefactor = sc.at("c0_prefactor").get<double>();
            scfg.store_every = sc.at("store_every").get<int>();
            scfg.dealias = sc.at("dealias").get<bool>();
            traj = solve(prob, scfg);
            std::ostringstream csv;
            csv << "t,L1,L2,L4,Linf\n";
            for (std::size_t i = 0; i < traj.times.size(); ++i)
                csv << fmt(traj.times[i]) << ',' << fmt(traj.lp_norms[i][0]) << ',' << fmt(traj.lp_norms[i][1]) << ','
                    << fmt(traj.lp_norms[i][2]) << ',' << fmt(traj.lp_norms[i][3]) << '\n';
            out.csv["norms.csv"] = csv.str();
            json sol = {{"scheme", traj.scheme},    {"step", traj.step},
                        {"stored", traj.times.size()}, {"windows", traj.windows.size()},
                        {"window", traj.window},    {"c0_prefactor", traj.c0_prefactor},
                        {"final_digest", digest(traj.fields.back())}};
            rep["solution"] = sol;
        });

    if (wants("max_principle"))
        stage("max_principle", {"solve"}, [&] {
            std::vector<double> ps;
            const json& pl = vo.at("p_list");
            for (std::size_t i = 0; i < pl.size(); ++i) ps.push_back(p_value(pl[i], "/verifier_options/p_list"));
            MaxPrincipleOptions o;
            o.tolerance = vo.at("tolerance").get<double>();
            o.strict_linf = vo.at("strict_linf").get<bool>();
            add_cert(verify_max_principle(traj, ps, o));
        });
    if (wants("positivity"))
        stage("positivity", {"solve"}, [&] {
            double M = vo.at("positivity_M").get<double>();
            if (M <= 0.0) M = *std::max_element(theta0.values.begin(), theta0.values.end());
            add_cert(verify_positivity(traj, M, vo.at("tolerance").get<double>()));
        });
    if (wants("picard_contraction"))
        stage("picard_contraction", {"solve"}, [&] {
            if (traj.windows.empty()) throw PreconditionError("picard_contraction needs the picard-duhamel scheme");
            Certificate c;
            c.name = "picard_contraction";
            double bound = vo.at("contraction_bound").get<double>();
            double worst = 0.0;
            for (std::size_t w = 0; w < traj.windows.size(); ++w) {
                const auto& r = traj.windows[w].residuals;
                for (std::size_t i = 1; i < r.size(); ++i) {
                    if (r[i - 1] <= 1e-13) continue;  // converged to roundoff
                    double ratio = r[i] / r[i - 1];
                    worst = std::max(worst, ratio);
                    c.add_margin("window " + std::to_string(w) + " iter " + std::to_string(i), ratio, bound,
                                 (bound - ratio) / bound);
                }
            }
            c.reported["worst_ratio"] = worst;
            c.reported["windows"] = static_cast<double>(traj.windows.size());
            c.finalize();
            add_cert(c);
        });
    if (wants("stroock_varopoulos"))
        stage("stroock_varopoulos", {"solve"}, [&] {
            std::vector<Certificate> parts;
            for (const auto& pj : vo.at("sv_p")) {
                double p = pj.get<double>();
                for (const SampledField* f : {&theta0, &traj.fields.back()}) {
                    Certificate c = verify_stroock_varopoulos(*f, *symbol, p);
                    c.name = (f == &theta0 ? "theta0" : "final") + std::string(" p=") + fmt(p);
                    parts.push_back(c);
                }
            }
            add_cert(merge_certificates("stroock_varopoulos", parts));
        });
    if (wants("besov"))
        stage("besov", {"solve"}, [&] {
            double p = vo.at("besov_p").get<double>();
            int count = vo.at("besov_corpus").get<int>();
            std::vector<SampledField> calib, test;
            for (int i = 0; i < count; ++i) calib.push_back(random_field(g, derive_seed(seed, 100 + i), 6));
            std::size_t stride = std::max<std::size_t>(1, traj.fields.size() / std::max(1, count));
            for (std::size_t i = 0; i < traj.fields.size() && static_cast<int>(test.size()) < count; i += stride)
                test.push_back(traj.fields[i]);
            auto frozen = fit_besov_constants(calib, *symbol, p);
            Certificate c = verify_besov_regularity(test, *symbol, p, frozen);
            c.name = "besov";
            add_cert(c);
        });
    if (wants("transfer"))
        stage("transfer", {"solve"}, [&] {
            SampledField psi0 = random_field(g, derive_seed(seed, 3), 4);
            auto bwd = backward_dual_solve(v_solve, symbol, psi0, T, scfg, eps, width, v_solve.morrey_norm, q);
            std::vector<double> fr = vo.at("transfer_fractions").get<std::vector<double>>();
            Certificate c = verify_transfer(traj, bwd, fr, vo.at("transfer_tolerance").get<double>());
            c.name = "transfer";
            add_cert(c);
        });
    if (wants("vanishing_viscosity"))
        stage("vanishing_viscosity", {"solve"}, [&] {
            auto r = vanishing_viscosity(prob, vo.at("vv_eps").get<std::vector<double>>(), scfg);
            Certificate c;
            c.name = "vanishing_viscosity";
            for (std::size_t i = 1; i < r.distances.size(); ++i)
                c.add_margin("d" + std::to_string(i) + " <= d" + std::to_string(i - 1), r.distances[i],
                             r.distances[i - 1],
                             r.distances[i - 1] > 0 ? (r.distances[i - 1] - r.distances[i]) / r.distances[i - 1] : 0.0);
            for (std::size_t i = 0; i < r.distances.size(); ++i) c.reported["distance_" + std::to_string(i)] = r.distances[i];
            c.note = r.note;
            c.finalize();
            add_cert(c);
            std::ostringstream csv;
            csv << "eps,distance_to_next\n";
            for (std::size_t i = 0; i < r.distances.size(); ++i) csv << fmt(r.eps[i]) << ',' << fmt(r.distances[i]) << '\n';
            out.csv["vanishing_viscosity.csv"] = csv.str();
        });

    if (mol_on) {
        const json& mc = cfg.at("molecule");
        ConstantBundle bundle;
        stage("constants", {"kernel"}, [&] {
            ConstantParams P;
            P.n = g.n;
            P.alpha = alpha;
            P.delta = kc.at("delta").get<double>();
            P.gamma = mc.at("gamma").get<double>();
            P.omega = mc.at("omega").get<double>();
            P.q = mc.at("q").get<double>();
            P.mu = mc.at("mu").get<double>();
            P.cbar1 = kc.at("cbar1").get<double>();
            P.eta_prefactor = mc.at("eta_prefactor").get<double>();
            Certificate c;
            c.name = "constants";
            std::string blocking;
            try {
                bundle = compute_constants(P);
            } catch (const InfeasibleConstants& e) {
                bundle = e.best;
                blocking = e.blocking;
                c.note = std::string(e.what()) + "; blocking: " + blocking;
            }
            for (const auto& e : bundle.exponent_certificates)
                c.add_margin(e.name, e.value, 0.0, e.negative ? 1.0 : -1.0);
            c.add_margin("K <= (alpha/(n+gamma)) cbar1 frakc", bundle.K_bound, bundle.K_target,
                         (bundle.K_target - bundle.K_bound) / bundle.K_target);
            c.reported["K"] = bundle.K_bound;
            c.reported["K_target"] = bundle.K_target;
            c.reported["zeta"] = bundle.zeta_chosen;
            c.finalize();
            add_cert(c);
            rep["constants"] = to_json(bundle);
            if (!blocking.empty()) rep["constants"]["blocking"] = blocking;
        });
        stage("molecule", {"kernel", "drift", "constants"}, [&] {
            const double r = mc.at("r").get<double>(), zeta = mc.at("zeta").get<double>();
            const double gamma = mc.at("gamma").get<double>(), omega = mc.at("omega").get<double>();
            Molecule m = make_molecule(r, point(mc.at("center"), g), gamma, omega, zeta, g,
                                       mc.at("profile").get<std::string>());
            MoleculeCheck chk = check_molecule(m);
            double K = mc.at("K").get<double>();
            if (K <= 0.0) K = bundle.K_target;
            double T0 = mc.at("T0").get<double>();
            if (T0 <= 0.0) T0 = mc.at("T0_kappa").get<double>() * std::pow(zeta * r, alpha);
            const double eps_step = mc.at("eps_step").get<double>();
            Schedule sched = schedule_iterations(r, alpha, eps_step, T0, zeta, K);
            DeformationOptions o;
            o.K = K;
            o.dt = mc.at("dt").get<double>();
            o.eps_step = eps_step;
            o.bundle = bundle;
            o.v_norm = v_raw.morrey_norm;
            o.split_signs = mc.at("split_signs").get<bool>();
            o.tolerance = mc.at("tolerance").get<double>();
            MoleculeTrace tr = track_deformation(m, v_raw, symbol, sched, o);

            Certificate c;
            c.name = "molecule_deformation";
            c.tolerance = o.tolerance;
            for (const auto& v : chk.violations) c.add_margin("initial " + v, 1.0, 0.0, -1.0);
            for (std::size_t i = 0; i < tr.s.size(); ++i) {
                std::string at = "s" + std::to_string(i);
                c.add(at + " concentration", tr.concentration[i], tr.concentration_bound[i], tr.concentration_bound[i]);
                c.add(at + " sup", tr.sup[i], tr.sup_bound[i], tr.sup_bound[i]);
                c.add(at + " l1", tr.l1[i], tr.l1_bound[i], tr.l1_bound[i]);
            }
            if (!sched.empty() && !sched.stopped_by_size)
                c.add_margin("stopped by the T0/2 size rule", 0.0, 1.0, -1.0);
            const double L1f = tr.l1.back();
            const double C1 = l1_bound_constant(g.n, omega);
            const double final_bound = C1 * std::pow(0.5 * T0, -gamma / alpha);
            c.add("final l1 <= 2 v_n^{w/(n+w)} (T0/2)^{-gamma/alpha}", L1f, final_bound, final_bound);
            if (o.split_signs) c.add_margin("split difference", tr.split_difference, 1e-6, (1e-6 - tr.split_difference) / 1e-6);
            c.reported["T0"] = T0;
            c.reported["K"] = K;
            c.reported["fitted_C"] = L1f * std::pow(T0, gamma);
            c.reported["steps"] = static_cast<double>(tr.s.size());
            c.finalize();
            add_cert(c);
            json mj = to_json(tr);
            mj["T0"] = T0;
            mj["K"] = K;
            mj["stopped_by_size"] = sched.stopped_by_size;
            mj["initial"] = {{"concentration", chk.concentration}, {"concentration_bound", chk.concentration_bound},
                             {"height", chk.height},               {"height_bound", chk.height_bound},
                             {"moment", chk.moment},               {"l1", chk.l1},
                             {"digest", digest(m.field)}};
            rep["molecule"] = mj;
            std::ostringstream csv;
            csv << "i,s,r,cx,cy,cz,concentration,concentration_bound,sup,sup_bound,l1,l1_bound,I1,I1_bound,I2,I2_bound\n";
            for (std::size_t i = 0; i < tr.s.size(); ++i) {
                csv << i << ',' << fmt(tr.s[i]) << ',' << fmt(tr.r[i]) << ',' << fmt(tr.center[i][0]) << ','
                    << fmt(tr.center[i][1]) << ',' << fmt(tr.center[i][2]) << ',' << fmt(tr.concentration[i]) << ','
                    << fmt(tr.concentration_bound[i]) << ',' << fmt(tr.sup[i]) << ',' << fmt(tr.sup_bound[i]) << ','
                    << fmt(tr.l1[i]) << ',' << fmt(tr.l1_bound[i]);
                if (i < tr.integrals.size())
                    csv << ',' << fmt(tr.integrals[i].I1) << ',' << fmt(tr.integrals[i].bound1) << ','
                        << fmt(tr.integrals[i].I2) << ',' << fmt(tr.integrals[i].bound2);
                else
                    csv << ",,,,";
                csv << '\n';
            }
            out.csv["trace.csv"] = csv.str();
        });
    }

    if (hold_on)
        stage("holder", {"solve"}, [&] {
            const json& hc = cfg.at("holder");
            MoleculeFamily fam = make_family(g, hc.at("gamma").get<double>(), hc.at("omega").get<double>(),
                                             hc.at("zeta").get<double>(), hc.at("profile").get<std::string>(),
                                             hc.at("stride").get<int>());
            HolderOptions o;
            double T0 = hc.at("T0").get<double>();
            o.T0 = T0 > 0.0 ? T0 : T;
            o.alpha = alpha;
            o.delta = kc.at("delta").get<double>();
            HolderReport hr = estimate_holder_exponent(traj, fam, traj.times.back(), o);
            rep["holder"] = to_json(hr);
            Certificate c;
            c.name = "holder_probe";
            c.note = "verdict " + hr.verdict;
            if (hr.verdict == "noisy") c.add_margin("fit R^2 >= 0.9", hr.fit_r2, 0.9, (hr.fit_r2 - 0.9) / 0.9);
            if (hr.verdict != "flat" && hr.verdict != "noisy") {
                double diff = std::abs(hr.gamma_dual - hr.gamma_direct);
                c.add_margin("|gamma_dual - gamma_direct| <= 0.15", diff, 0.15, (0.15 - diff) / 0.15);
                c.add_margin("gamma_dual < regime bound", hr.gamma_dual, hr.regime_bound,
                             (hr.regime_bound - hr.gamma_dual) / hr.regime_bound);
                c.add_margin("gamma_direct < regime bound", hr.gamma_direct, hr.regime_bound,
                             (hr.regime_bound - hr.gamma_direct) / hr.regime_bound);
            }
            c.reported["gamma_dual"] = hr.gamma_dual;
            c.reported["gamma_direct"] = hr.gamma_direct;
            c.finalize();
            add_cert(c);
            std::ostringstream csv;
            csv << "r,pairing\n";
            for (std::size_t j = 0; j < hr.scales.size(); ++j) csv << fmt(hr.scales[j]) << ',' << fmt(hr.pairings[j]) << '\n';
            out.csv["pairings.csv"] = csv.str();
        });

    rep["stages"] = stages;
    rep["certificates"] = certs;
    rep["pass"] = out.pass;
    out.timing = timing;
    for (const auto& [k, v] : out.csv) out.csv_names.push_back(k);
    return out;
}

void write_report(const RunReport& r, const std::string& out_dir) {
    fs::path out(out_dir);
    if (out.filename().empty()) out = out.parent_path();
    if (!out.parent_path().empty()) fs::create_directories(out.parent_path());
    fs::path tmp = out;
    tmp += ".tmp-" + std::to_string(::getpid());
    fs::remove_all(tmp);
    fs::create_directories(tmp);
    auto put = [&](const std::string& name, const std::string& content) {
        std::ofstream f(tmp / name, std::ios::binary);
        f << content;
        if (!f) throw std::runtime_error("cannot write " + (tmp / name).string());
    };
    put("report.json", r.report.dump(2) + "\n");
    put("timing.json", r.timing.dump(2) + "\n");
    json manifest = json::object();
    for (const auto& [name, content] : r.csv) {
        put(name, content);
        std::string header = content.substr(0, content.find('\n'));
        json cols = json::array();
        std::stringstream ss(header);
        for (std::string c; std::getline(ss, c, ',');) cols.push_back(c);
        manifest[name] = cols;
    }
    put("manifest.json", manifest.dump(2) + "\n");
    fs::remove_all(out);
    fs::rename(tmp, out);
}

RunReport run(const std::string& config_path) {
    json cfg = load_config(config_path);
    RunReport r = run_scenario(cfg);
    write_report(r, cfg.at("output_dir").get<std::string>());
    return r;
}

unsigned worker_count() {
    if (const char* env = std::getenv("LEVYLAB_WORKERS")) {
        long v = std::strtol(env, nullptr, 10);
        if (v > 0) return static_cast<unsigned>(v);
    }
    return 1;
}

SweepResult sweep(const std::string& config_path, const std::string& axis, const std::vector<std::string>& values,
                  unsigned workers) {
    if (values.empty()) throw ConfigError("--values", "empty value list");
    json base = load_config(config_path);
    json::json_pointer ptr("/" + [&] {
        std::string s = axis;
        std::replace(s.begin(), s.end(), '.', '/');
        return s;
    }());
    if (!base.contains(ptr)) throw ConfigError(axis, "axis does not address a config field");
    const json& target = base.at(ptr);
    if (!(target.is_number() || target.is_string() || target.is_boolean()))
        throw ConfigError(axis, "axis must address a scalar field");
    std::vector<json> cfgs;
    const std::string root = base.at("output_dir").get<std::string>();
    for (const auto& v : values) {
        json c = base;
        if (target.is_number()) {
            std::size_t used = 0;
            double x = 0.0;
            try {
                x = std::stod(v, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used != v.size()) throw ConfigError(axis, "value '" + v + "' is not a number");
            if (target.is_number_integer() && x == std::floor(x))
                c[ptr] = static_cast<long long>(x);
            else
                c[ptr] = x;
        } else if (target.is_boolean()) {
            if (v != "true" && v != "false") throw ConfigError(axis, "value '" + v + "' is not a boolean");
            c[ptr] = v == "true";
        } else {
            c[ptr] = v;
        }
        c["output_dir"] = (fs::path(root) / (axis + "=" + v)).string();
        validate_config(c);
        cfgs.push_back(c);
    }
    SweepResult res;
    res.runs.resize(cfgs.size());
    unsigned w = workers ? workers : worker_count();
    std::size_t next = 0;
    std::mutex mu;
    std::exception_ptr err;
    auto worker = [&] {
        for (;;) {
            std::size_t i;
            {
                std::lock_guard<std::mutex> lk(mu);
                if (next >= cfgs.size() || err) return;
                i = next++;
            }
            try {
                res.runs[i] = run_scenario(cfgs[i]);
                write_report(res.runs[i], cfgs[i].at("output_dir").get<std::string>());
            } catch (...) {
                std::lock_guard<std::mutex> lk(mu);
                if (!err) err = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < std::max(1u, std::min<unsigned>(w, cfgs.size())); ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (err) std::rethrow_exception(err);

    std::vector<std::string> names;
    for (const auto& r : res.runs)
        for (const auto& c : r.report.at("certificates")) {
            std::string n = c.at("name").get<std::string>();
            if (std::find(names.begin(), names.end(), n) == names.end()) names.push_back(n);
        }
    std::ostringstream csv;
    csv << "axis,value,pass";
    for (const auto& n : names) csv << ',' << n << "_pass," << n << "_worst_margin";
    csv << ",final_L2\n";
    for (std::size_t i = 0; i < res.runs.size(); ++i) {
        const json& rep = res.runs[i].report;
        csv << axis << ',' << values[i] << ',' << (rep.at("pass").get<bool>() ? 1 : 0);
        for (const auto& n : names) {
            const json* hit = nullptr;
            for (const auto& c : rep.at("certificates"))
                if (c.at("name") == n) hit = &c;
            if (hit)
                csv << ',' << ((*hit).at("pass").get<bool>() ? 1 : 0) << ',' << fmt((*hit).at("worst_margin").get<double>());
            else
                csv << ",,";
        }
        const auto& norms = res.runs[i].csv;
        std::string l2;
        if (auto it = norms.find("norms.csv"); it != norms.end()) {
            std::string s = it->second;
            s.pop_back();
            std::string last = s.substr(s.rfind('\n') + 1);
            std::stringstream ss(last);
            std::string col;
            for (int k = 0; k < 3 && std::getline(ss, col, ','); ++k) l2 = col;
        }
        csv << ',' << l2 << '\n';
        res.pass = res.pass && res.runs[i].pass;
    }
    res.csv = csv.str();
    fs::create_directories(root);
    {
        std::ofstream f(fs::path(root) / "sweep.csv");
        f << res.csv;
    }
    {
        json manifest;
        std::string header = res.csv.substr(0, res.csv.find('\n'));
        std::stringstream ss(header);
        json cols = json::array();
        for (std::string c; std::getline(ss, c, ',');) cols.push_back(c);
        manifest["sweep.csv"] = cols;
        std::ofstream f(fs::path(root) / "sweep_manifest.json");
        f << manifest.dump(2) << "\n";
    }
    return res;
}

}  // namespace levylab
