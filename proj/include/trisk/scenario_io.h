#pragma once

#include "trisk/simulate.h"

#include <iosfwd>
#include <string>

namespace trisk {

// Binary layout, little-endian:
//   char[8]  magic "TRSCN001"
//   u64 N, u32 K, u32 I, u32 J, u64 seed, f64 discount_rate
//   K times: u32 length, bytes of the line id
//   f64 cash flows, N*K*(I-1), scenario-major then line then period
inline constexpr char kScenarioMagic[8] = {'T', 'R', 'S', 'C', 'N', '0', '0', '1'};

void write_scenarios(const ScenarioSet& set, std::ostream& out);
ScenarioSet read_scenarios(std::istream& in);
void save_scenarios(const ScenarioSet& set, const std::string& path);
ScenarioSet load_scenarios(const std::string& path);

/// scenario,<line ids...>,aggregate with discounted losses.
void write_scenario_summary(const ScenarioSet& set, std::ostream& out);
void save_scenario_summary(const ScenarioSet& set, const std::string& path);

}  // namespace trisk
