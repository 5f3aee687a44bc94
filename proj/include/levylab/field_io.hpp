#pragma once

#include <string>

#include "levylab/drift.hpp"
#include "levylab/grid.hpp"
#include "levylab/levy.hpp"

namespace levylab {

// Field: "LVLF", u32 version, u32 n, u32 dims[n], f64 L, u64 count, f64 values[count].
void write_field(const std::string& path, const SampledField& f);
SampledField read_field(const std::string& path);

// Symbol: "LVLS", u32 version, u32 n, u32 points_per_dim, f64 L, f64 alpha, f64 delta, f64 values[N^n].
void write_symbol(const std::string& path, const LevySymbol& s);
LevySymbol read_symbol(const std::string& path);

// Velocity: field header with magic "LVLV", then u32 components, u32 nodes, f64 times[nodes],
// then values ordered [node][component][point].
void write_velocity(const std::string& path, const VelocityField& v);
VelocityField read_velocity(const std::string& path);

}  // namespace levylab
