#include <cmath>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "levylab/certificates.hpp"
#include "levylab/field_io.hpp"
#include "levylab/function_spaces.hpp"
#include "levylab/levy.hpp"
#include "levylab/runner.hpp"

using namespace levylab;

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    for (std::string item; std::getline(ss, item, sep);)
        if (!item.empty()) out.push_back(item);
    return out;
}

double parse_number(const std::string& s, const std::string& ctx) {
    if (s == "inf") return INFINITY;
    std::size_t used = 0;
    double x = 0.0;
    try {
        x = std::stod(s, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != s.size() || s.empty()) throw ConfigError(ctx, "'" + s + "' is not a number");
    return x;
}

void print_summary(const RunReport& r) {
    for (const auto& st : r.report.at("stages")) {
        std::cout << "stage " << st.at("stage").get<std::string>() << ": " << st.at("status").get<std::string>();
        if (st.contains("error")) std::cout << " (" << st.at("error").get<std::string>() << ")";
        if (st.contains("reason")) std::cout << " (" << st.at("reason").get<std::string>() << ")";
        std::cout << "\n";
    }
    for (const auto& c : r.report.at("certificates"))
        std::cout << (c.at("pass").get<bool>() ? "PASS " : "FAIL ") << c.at("name").get<std::string>()
                  << " worst_margin=" << c.at("worst_margin").get<double>() << "\n";
    std::cout << (r.pass ? "all certificates pass" : "some certificates fail") << "\n";
}

// norm list such as "lp:2,lp:inf,besov:0.5:2,sobolev:0.5:2,holder:0.3,morrey:2:1"
json field_norms(const SampledField& f, const std::string& spec) {
    json out = json::object();
    for (const auto& item : split(spec, ',')) {
        auto parts = split(item, ':');
        const std::string& kind = parts[0];
        auto arg = [&](std::size_t i) {
            if (i >= parts.size()) throw ConfigError("--spec " + item, "missing parameter");
            return parse_number(parts[i], "--spec " + item);
        };
        double v = 0.0;
        if (kind == "lp")
            v = lp_norm(f, arg(1));
        else if (kind == "besov")
            v = besov_seminorm(f, arg(1), arg(2));
        else if (kind == "sobolev")
            v = sobolev_norm(f, arg(1), arg(2));
        else if (kind == "holder")
            v = holder_norm(f, arg(1));
        else if (kind == "morrey") {
            MorreyParams mp;
            mp.q = arg(1);
            mp.a = arg(2);
            mp.local = parts.size() > 3 && parts[3] == "local";
            v = morrey_norm(f, mp);
        } else
            throw ConfigError("--spec " + item, "unknown norm '" + kind + "'");
        out[item] = v;
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"levylab: Levy-driven transport-diffusion experiments"};
    app.require_subcommand(1);

    std::string config, out_dir, axis, values, field_file, spec;
    unsigned workers = 0;

    auto* run_cmd = app.add_subcommand("run", "run one scenario");
    run_cmd->add_option("config", config, "config file")->required();
    run_cmd->add_option("--out", out_dir, "output directory (overrides output_dir)");

    auto* sweep_cmd = app.add_subcommand("sweep", "run a scenario over values of one config field");
    sweep_cmd->add_option("config", config, "config file")->required();
    sweep_cmd->add_option("--axis", axis, "dotted config path, e.g. solver.epsilon_visc")->required();
    sweep_cmd->add_option("--values", values, "comma separated values")->required();
    sweep_cmd->add_option("--workers", workers, "worker count (default LEVYLAB_WORKERS or 1)");

    auto* kernel_cmd = app.add_subcommand("check-kernel", "check the kernel and symbol of a config");
    kernel_cmd->add_option("config", config, "config file")->required();

    auto* norms_cmd = app.add_subcommand("norms", "norms of a stored field");
    norms_cmd->add_option("field", field_file, "field file")->required();
    norms_cmd->add_option("--spec", spec, "e.g. lp:2,lp:inf,besov:0.5:2,holder:0.3,morrey:2:1")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run_cmd) {
            json cfg = load_config(config);
            if (!out_dir.empty()) cfg["output_dir"] = out_dir;
            RunReport r = run_scenario(cfg);
            write_report(r, cfg.at("output_dir").get<std::string>());
            print_summary(r);
            return r.pass ? 0 : 1;
        }
        if (*sweep_cmd) {
            SweepResult s = sweep(config, axis, split(values, ','), workers);
            std::cout << s.csv;
            return s.pass ? 0 : 1;
        }
        if (*kernel_cmd) {
            json cfg = load_config(config);
            const json& gc = cfg.at("grid");
            const json& kc = cfg.at("kernel");
            Grid g(gc.at("n").get<int>(), gc.at("N").get<int>(), gc.at("L").get<double>());
            LevyKernel k = make_kernel(g.n, kc.at("alpha").get<double>(), kc.at("delta").get<double>(),
                                       kc.at("cbar1").get<double>(), kc.at("cbar2").get<double>(),
                                       kc.at("profile").get<std::string>(), kc.at("amplitude").get<double>());
            NondegeneracyReport nd = check_nondegeneracy(k, default_nd_lattice(g.n));
            LevySymbol sym = tabulate_symbol(k, g);
            double xi_max = std::sqrt(double(g.n)) * (g.points_per_dim / 2) * g.wavenumber_unit();
            Certificate c = verify_symbol_bounds(sym, k, fit_symbol_bounds(k, xi_max));
            json out = {{"kernel", k.id()},
                        {"nondegeneracy", {{"pass", nd.pass}, {"near_min", nd.near_min}, {"near_max", nd.near_max},
                                           {"far_min", nd.far_min}, {"far_max", nd.far_max},
                                           {"symmetric", nd.symmetric}}},
                        {"symbol_bounds", to_json(c)}};
            std::cout << out.dump(2) << "\n";
            return nd.pass && c.pass ? 0 : 1;
        }
        if (*norms_cmd) {
            SampledField f = read_field(field_file);
            std::cout << field_norms(f, spec).dump(2) << "\n";
            return 0;
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
