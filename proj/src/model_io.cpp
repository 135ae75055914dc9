#include "trisk/model_io.h"

#include "trisk/error.h"
#include "trisk/tweedie.h"

#include <cmath>
#include <algorithm>
#include <fstream>
#include <functional>

namespace trisk {

using nlohmann::json;

namespace {

template <class T>
T get(const json& doc, const char* key, const std::string& where) {
  if (!doc.is_object() || !doc.contains(key)) throw Error(ErrorCode::schema, where + ": missing '" + key + "'");
  try {
    return doc.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::schema, where + ": bad '" + key + "': " + e.what());
  }
}

std::vector<double> effects(const json& doc, const char* key, std::size_t size, const std::string& where) {
  auto v = get<std::vector<double>>(doc, key, where);
  if (v.size() != size) {
    throw Error(ErrorCode::schema, where + ": '" + key + "' has " + std::to_string(v.size()) + " entries, expected " +
                                       std::to_string(size));
  }
  if (v.front() != 0.0) throw Error(ErrorCode::schema, where + ": first entry of '" + key + "' must be 0");
  for (double x : v) {
    if (!std::isfinite(x)) throw Error(ErrorCode::schema, where + ": non-finite entry in '" + key + "'");
  }
  return v;
}

json spec_json(const CopulaSpec& s) {
  json j;
  if (s.family == CopulaFamily::student_t) {
    j["family"] = "t";
    j["nu"] = s.nu;
    j["rho"] = s.rho;
  } else {
    j["family"] = "independence";
  }
  if (s.n > 0) {
    json fit;
    fit["n"] = s.n;
    fit["log_likelihood"] = s.log_likelihood;
    fit["t_nu"] = s.t_nu;
    fit["t_rho"] = s.t_rho;
    fit["t_log_likelihood"] = s.t_log_likelihood;
    fit["rho_se"] = std::isfinite(s.rho_se) ? json(s.rho_se) : json(nullptr);
    fit["lr_statistic"] = s.lr_statistic;
    fit["lr_p_value"] = s.lr_p_value;
    if (s.gof_p_value) fit["gof_p_value"] = *s.gof_p_value;
    j["fit"] = fit;
  }
  return j;
}

CopulaSpec spec_from_json(const json& j) {
  const auto family = get<std::string>(j, "family", "copula node");
  CopulaSpec s;
  if (family == "t") {
    const int nu = get<int>(j, "nu", "copula node");
    const double rho = get<double>(j, "rho", "copula node");
    if (nu < 1 || !(std::abs(rho) < 1.0)) throw Error(ErrorCode::schema, "copula node: t needs nu >= 1 and |rho| < 1");
    s = CopulaSpec::student_t(nu, rho);
  } else if (family != "independence") {
    throw Error(ErrorCode::schema, "copula node: unknown family '" + family + "'");
  }
  if (j.contains("fit")) {
    const json& f = j.at("fit");
    s.n = f.value("n", std::size_t{0});
    s.log_likelihood = f.value("log_likelihood", 0.0);
    s.t_nu = f.value("t_nu", 0);
    s.t_rho = f.value("t_rho", 0.0);
    s.t_log_likelihood = f.value("t_log_likelihood", 0.0);
    s.rho_se = f.contains("rho_se") && f.at("rho_se").is_number() ? f.at("rho_se").get<double>() : 0.0;
    s.lr_statistic = f.value("lr_statistic", 0.0);
    s.lr_p_value = f.value("lr_p_value", 1.0);
    if (f.contains("gof_p_value")) s.gof_p_value = f.at("gof_p_value").get<double>();
  }
  return s;
}

}  // namespace

json to_json(const LineModelFile& line) {
  const MarginalModel& m = line.model;
  json doc;
  doc["line_id"] = m.line_id;
  doc["region"] = line.region;
  doc["coverage"] = line.coverage;
  doc["p"] = m.p;
  doc["rho"] = m.rho;
  if (!line.accident_semesters.empty()) doc["accident_semesters"] = line.accident_semesters;
  doc["mean"] = {{"intercept", m.mean.iota},
                 {"accident_semester", m.mean.alpha},
                 {"development_lag", m.mean.delta}};
  doc["dispersion"] = {{"intercept", m.dispersion.iota_d}, {"development_lag", m.dispersion.gamma}};
  const FitDiagnostics& d = m.diagnostics;
  if (d.iterations > 0) {
    doc["diagnostics"] = {{"iterations", d.iterations},
                          {"change", d.change},
                          {"log_likelihood", d.log_likelihood},
                          {"zero_weight_cells", d.zero_weight_cells}};
  }
  return doc;
}

LineModelFile line_model_from_json(const json& doc) {
  LineModelFile out;
  MarginalModel& m = out.model;
  m.line_id = get<std::string>(doc, "line_id", "line model");
  const std::string where = "line model '" + m.line_id + "'";
  out.region = doc.value("region", std::string());
  out.coverage = doc.value("coverage", std::string());
  m.p = get<double>(doc, "p", where);
  m.rho = get<double>(doc, "rho", where);
  if (!(std::abs(m.rho) < 1.0)) throw Error(ErrorCode::schema, where + ": rho must satisfy |rho| < 1");
  try {
    tweedie::check_index(m.p);
  } catch (const Error& e) {
    throw Error(ErrorCode::schema, where + ": " + e.what());
  }
  const json& mean = doc.contains("mean") ? doc.at("mean") : json();
  const json& disp = doc.contains("dispersion") ? doc.at("dispersion") : json();
  m.mean.iota = get<double>(mean, "intercept", where + " mean");
  const auto alpha = get<std::vector<double>>(mean, "accident_semester", where + " mean");
  if (alpha.empty()) throw Error(ErrorCode::schema, where + ": empty accident_semester effects");
  const std::size_t size = alpha.size();
  m.mean.alpha = effects(mean, "accident_semester", size, where + " mean");
  m.mean.delta = effects(mean, "development_lag", size, where + " mean");
  m.dispersion.iota_d = get<double>(disp, "intercept", where + " dispersion");
  m.dispersion.gamma = effects(disp, "development_lag", size, where + " dispersion");
  if (doc.contains("accident_semesters")) {
    out.accident_semesters = get<std::vector<std::string>>(doc, "accident_semesters", where);
    if (out.accident_semesters.size() != size) throw Error(ErrorCode::schema, where + ": accident_semesters length mismatch");
  }
  if (doc.contains("diagnostics")) {
    const json& d = doc.at("diagnostics");
    m.diagnostics.iterations = d.value("iterations", 0);
    m.diagnostics.change = d.value("change", 0.0);
    m.diagnostics.log_likelihood = d.value("log_likelihood", 0.0);
    m.diagnostics.zero_weight_cells = d.value("zero_weight_cells", 0);
  }
  return out;
}

LineModelFile load_line_model(const std::string& path) { return line_model_from_json(read_json_file(path)); }

void save_line_model(const LineModelFile& line, const std::string& path) { write_json_file(to_json(line), path); }

json to_json(const CopulaTree& tree) {
  std::function<json(int)> node_json = [&](int k) -> json {
    const CopulaTree::Node& n = tree.nodes.at(static_cast<std::size_t>(k));
    if (n.is_leaf()) return tree.lines.at(static_cast<std::size_t>(n.line));
    json j = spec_json(n.spec);
    if (n.spec.n > 0) j["fit"]["kendall_tau"] = n.tau;
    j["children"] = json::array({node_json(n.left), node_json(n.right)});
    return j;
  };
  return node_json(tree.root);
}

CopulaTree tree_from_json(const json& doc) {
  CopulaTree tree;
  std::function<int(const json&)> parse = [&](const json& j) -> int {
    CopulaTree::Node node;
    if (j.is_string()) {
      const auto id = j.get<std::string>();
      if (std::find(tree.lines.begin(), tree.lines.end(), id) != tree.lines.end()) {
        throw Error(ErrorCode::schema, "copula tree: line '" + id + "' appears twice");
      }
      node.line = static_cast<int>(tree.lines.size());
      tree.lines.push_back(id);
    } else {
      node.spec = spec_from_json(j);
      if (j.contains("fit")) node.tau = j.at("fit").value("kendall_tau", 0.0);
      if (!j.contains("children") || !j.at("children").is_array() || j.at("children").size() != 2) {
        throw Error(ErrorCode::schema, "copula tree: internal node needs two children");
      }
      node.left = parse(j.at("children")[0]);
      node.right = parse(j.at("children")[1]);
    }
    tree.nodes.push_back(node);
    return static_cast<int>(tree.nodes.size()) - 1;
  };
  tree.root = parse(doc);
  tree.validate();
  return tree;
}

CopulaTree load_tree(const std::string& path) { return tree_from_json(read_json_file(path)); }

void save_tree(const CopulaTree& tree, const std::string& path) { write_json_file(to_json(tree), path); }

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::schema, "'" + path + "' is not valid JSON: " + e.what());
  }
}

void write_json_file(const json& doc, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io, "cannot write '" + path + "'");
  out << doc.dump(1) << '\n';
  if (!out) throw Error(ErrorCode::io, "write failed for '" + path + "'");
}

}  // namespace trisk
