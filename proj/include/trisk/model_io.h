#pragma once

#include "trisk/dependence.h"
#include "trisk/marginal.h"

#include <json.hpp>

#include <string>
#include <vector>

namespace trisk {

/// A fitted line as stored on disk: the model plus the labels needed to
/// print it next to its data.
struct LineModelFile {
  MarginalModel model;
  std::string region;
  std::string coverage;
  std::vector<std::string> accident_semesters;
};

// Layout: {"line_id", "region", "coverage", "p", "rho", "accident_semesters",
//          "mean": {"intercept", "accident_semester": [...], "development_lag": [...]},
//          "dispersion": {"intercept", "development_lag": [...]}, "diagnostics": {...}}
// Effect arrays carry the fixed zero for the first level.
nlohmann::json to_json(const LineModelFile& line);
LineModelFile line_model_from_json(const nlohmann::json& doc);
LineModelFile load_line_model(const std::string& path);
void save_line_model(const LineModelFile& line, const std::string& path);

// Leaf = line id string; node = {"family": "t"|"independence", "nu", "rho",
// "children": [left, right], optional fit statistics}.
nlohmann::json to_json(const CopulaTree& tree);
CopulaTree tree_from_json(const nlohmann::json& doc);
CopulaTree load_tree(const std::string& path);
void save_tree(const CopulaTree& tree, const std::string& path);

nlohmann::json read_json_file(const std::string& path);
void write_json_file(const nlohmann::json& doc, const std::string& path);

}  // namespace trisk
