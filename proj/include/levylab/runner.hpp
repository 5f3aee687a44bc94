#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "levylab/certificates.hpp"
#include "levylab/errors.hpp"
#include "levylab/holder.hpp"
#include "levylab/molecule.hpp"

namespace levylab {

using json = nlohmann::json;


// Every accepted key with its default; unknown keys are rejected.
const json& default_config();

// Reads a config file, resolves "include" (string or list, relative to the file; the including file wins),
// merges over the defaults and validates.
json load_config(const std::string& path);
json resolve_config(const json& raw, const std::string& base_dir);
void validate_config(const json& cfg);

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

// Smooth random field: Fourier modes |k| <= modes with amplitude (1+|k|^2)^{-slope}.
SampledField random_field(const Grid& g, std::uint64_t seed, int modes, double slope = 1.0);
SampledField make_theta0(const json& spec, const Grid& g, std::uint64_t seed);

json to_json(const Certificate& c);
json to_json(const ConstantBundle& b);
ConstantBundle bundle_from_json(const json& j);
json to_json(const MoleculeTrace& t);
json to_json(const HolderReport& r);

struct RunReport {
    json report;   // deterministic content
    json timing;   // wall clock, kept apart
    bool pass = true;
    std::vector<std::string> csv_names;
    std::map<std::string, std::string> csv;  // file name -> content
};

RunReport run_scenario(const json& cfg);
// Writes report.json, timing.json, CSVs and manifest.json into out_dir through a temp dir and rename.
void write_report(const RunReport& r, const std::string& out_dir);
RunReport run(const std::string& config_path);

struct SweepResult {
    std::vector<RunReport> runs;
    std::string csv;
    bool pass = true;
};

// axis is a dotted path to a scalar config field, e.g. "solver.epsilon_visc".
SweepResult sweep(const std::string& config_path, const std::string& axis, const std::vector<std::string>& values,
                  unsigned workers = 0);

unsigned worker_count();

}  // namespace levylab
