#pragma once

#include "trisk/error.h"

#include <json.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace trisk::cli {

/// Everything a run can be configured with. Precedence: command-line flags,
/// then the JSON config file, then these defaults.
struct RunConfig {
  std::string input;             // portfolio CSV
  std::string output_dir = "out";
  std::string models_dir;        // defaults to <output_dir>/model
  std::string scenarios;         // defaults to <output_dir>/scenarios.bin
  std::string synth_output;      // CSV written by `synth`

  std::string p_mode = "grid";   // "grid" or "fixed"
  double p = 1.5;                // used when p_mode == "fixed" and no per-line value
  std::map<std::string, double> p_by_line;
  std::vector<std::pair<std::string, std::string>> pairs;  // empty: pair by region
  int gof_bootstrap = 1000;

  std::size_t n = 100000;
  int oversample = 10;
  std::uint64_t seed = 20190601;
  int threads = 0;               // 0: TRIANGLE_RISK_THREADS, else the OpenMP default
  int table_intervals = 1024;

  double alpha = 0.99;
  double ra_alpha = 0.87;
  double coc_rate = 0.05;
  double discount_rate = 0.02;
  std::vector<double> coc_rates = {0.04, 0.05, 0.06};

  std::string first_semester = "2003-1";              // synth only
  std::map<std::string, std::vector<double>> premiums;  // synth only; one value or one per semester
  double default_premium = 1000.0;

  std::string model_dir() const { return models_dir.empty() ? output_dir + "/model" : models_dir; }
  std::string scenario_path() const { return scenarios.empty() ? output_dir + "/scenarios.bin" : scenarios; }
  void validate() const;
};

/// Applies the keys present in `doc` on top of `config`.
void apply_json(RunConfig& config, const nlohmann::json& doc);

int exit_code(ErrorCode code);

int cmd_fit(const RunConfig& config);
int cmd_simulate(const RunConfig& config);
int cmd_report(const RunConfig& config);
int cmd_synth(const RunConfig& config);

/// Parses arguments, dispatches, and turns errors into `ERROR <code>: ...`
/// on stderr with a nonzero exit status.
int run(int argc, char** argv);

}  // namespace trisk::cli
