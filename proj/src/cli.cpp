#include "trisk/cli.h"

#include "trisk/ar_correlation.h"
#include "trisk/dependence.h"
#include "trisk/marginal.h"
#include "trisk/model_io.h"
#include "trisk/report.h"
#include "trisk/scenario_io.h"
#include "trisk/simulate.h"
#include "trisk/synthetic.h"
#include "trisk/triangles.h"
#include "trisk/tweedie.h"

#include <CLI11.hpp>
#include <omp.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace trisk::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

template <class T>
void take(const json& doc, const char* key, T& into) {
  if (!doc.contains(key)) return;
  try {
    into = doc.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::config, std::string("config key '") + key + "': " + e.what());
  }
}

void set_threads(const RunConfig& c) {
  int n = c.threads;
  if (n <= 0) {
    if (const char* env = std::getenv("TRIANGLE_RISK_THREADS")) {
      char* end = nullptr;
      const long v = std::strtol(env, &end, 10);
      if (end == env || *end != '\0' || v < 1) throw Error(ErrorCode::config, "TRIANGLE_RISK_THREADS must be a positive integer");
      n = static_cast<int>(v);
    }
  }
  if (n > 0) omp_set_num_threads(n);
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::io, "cannot create directory '" + dir + "': " + ec.message());
}

void write_text(const std::string& text, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io, "cannot write '" + path + "'");
  out << text;
  if (!out) throw Error(ErrorCode::io, "write failed for '" + path + "'");
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string node_label(const CopulaTree& tree, int node) {
  std::string out;
  for (int k : tree.leaves_under(node)) {
    if (!out.empty()) out += '+';
    out += tree.lines[static_cast<std::size_t>(k)];
  }
  return out;
}

// Removes the files of a failed run on scope exit unless released.
class OutputGuard {
public:
  ~OutputGuard() {
    if (committed_) return;
    for (const auto& p : files_) {
      std::error_code ec;
      fs::remove(p, ec);
    }
  }
  void add(const std::string& path) { files_.push_back(path); }
  void commit() { committed_ = true; }

private:
  std::vector<std::string> files_;
  bool committed_ = false;
};

std::vector<MarginalModel> load_models(const std::string& dir, const std::vector<std::string>& ids,
                                       std::vector<LineModelFile>* files = nullptr) {
  std::vector<MarginalModel> out;
  for (const auto& id : ids) {
    const std::string path = dir + "/" + id + ".json";
    if (!fs::exists(path)) throw Error(ErrorCode::config, "missing model file '" + path + "'");
    LineModelFile f = load_line_model(path);
    if (f.model.line_id != id) throw Error(ErrorCode::schema, "'" + path + "' holds line '" + f.model.line_id + "'");
    out.push_back(f.model);
    if (files) files->push_back(std::move(f));
  }
  return out;
}

CopulaTree load_tree_in(const std::string& dir) {
  const std::string path = dir + "/tree.json";
  if (!fs::exists(path)) throw Error(ErrorCode::config, "missing copula tree '" + path + "'");
  return load_tree(path);
}

}  // namespace

void RunConfig::validate() const {
  if (p_mode != "grid" && p_mode != "fixed") throw Error(ErrorCode::config, "p must be 'grid' or a number");
  if (n < 1) throw Error(ErrorCode::config, "n must be >= 1");
  if (oversample < 2) throw Error(ErrorCode::config, "oversample must be >= 2");
  if (table_intervals < 16) throw Error(ErrorCode::config, "table_intervals must be >= 16");
  for (double a : {alpha, ra_alpha}) {
    if (!(a > 0.0 && a < 1.0)) throw Error(ErrorCode::config, "alpha levels must lie in (0,1)");
  }
  if (!(discount_rate > -1.0) || !std::isfinite(discount_rate)) throw Error(ErrorCode::config, "discount_rate must be > -1");
  if (!std::isfinite(coc_rate)) throw Error(ErrorCode::config, "coc_rate must be finite");
  if (gof_bootstrap < 0) throw Error(ErrorCode::config, "gof_bootstrap must be >= 0");
}

void apply_json(RunConfig& c, const json& doc) {
  if (!doc.is_object()) throw Error(ErrorCode::config, "config must be a JSON object");
  take(doc, "input", c.input);
  take(doc, "output_dir", c.output_dir);
  take(doc, "models_dir", c.models_dir);
  take(doc, "scenarios", c.scenarios);
  take(doc, "synth_output", c.synth_output);
  if (doc.contains("p")) {
    const json& p = doc.at("p");
    if (p.is_string() && p.get<std::string>() == "grid") {
      c.p_mode = "grid";
    } else if (p.is_number()) {
      c.p_mode = "fixed";
      c.p = p.get<double>();
    } else if (p.is_object()) {
      c.p_mode = "fixed";
      for (const auto& [id, v] : p.items()) {
        if (!v.is_number()) throw Error(ErrorCode::config, "config key 'p': value for '" + id + "' is not a number");
        c.p_by_line[id] = v.get<double>();
      }
    } else {
      throw Error(ErrorCode::config, "config key 'p' must be \"grid\", a number or an object of numbers");
    }
  }
  take(doc, "pairs", c.pairs);
  take(doc, "gof_bootstrap", c.gof_bootstrap);
  take(doc, "n", c.n);
  take(doc, "oversample", c.oversample);
  take(doc, "seed", c.seed);
  take(doc, "threads", c.threads);
  take(doc, "table_intervals", c.table_intervals);
  take(doc, "alpha", c.alpha);
  take(doc, "ra_alpha", c.ra_alpha);
  take(doc, "coc_rate", c.coc_rate);
  take(doc, "discount_rate", c.discount_rate);
  take(doc, "coc_rates", c.coc_rates);
  take(doc, "first_semester", c.first_semester);
  take(doc, "default_premium", c.default_premium);
  if (doc.contains("premiums")) {
    const json& p = doc.at("premiums");
    if (!p.is_object()) throw Error(ErrorCode::config, "config key 'premiums' must be an object");
    for (const auto& [id, v] : p.items()) {
      if (v.is_number()) {
        c.premiums[id] = {v.get<double>()};
      } else if (v.is_array()) {
        take(p, id.c_str(), c.premiums[id]);
      } else {
        throw Error(ErrorCode::config, "premiums for '" + id + "' must be a number or an array");
      }
    }
  }
}

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::domain:
    case ErrorCode::config:
    case ErrorCode::ingestion:
    case ErrorCode::schema:
      return 2;
    case ErrorCode::io:
      return 4;
    default:
      return 3;
  }
}

int cmd_fit(const RunConfig& c) {
  if (c.input.empty()) throw Error(ErrorCode::config, "fit needs an input CSV");
  set_threads(c);
  const auto t0 = std::chrono::steady_clock::now();
  const Portfolio portfolio = load_csv(c.input);
  const std::size_t K = portfolio.lines.size();

  // p per line: explicit value, common value, or grid search.
  std::vector<double> p(K, c.p);
  std::vector<PSelection> selection(K);
  for (std::size_t k = 0; k < K; ++k) {
    const auto& id = portfolio.lines[k].line_id();
    if (c.p_mode == "grid") {
      selection[k] = select_p(portfolio.lines[k]);
      p[k] = selection[k].p;
    } else if (c.p_by_line.count(id)) {
      p[k] = c.p_by_line.at(id);
    }
    tweedie::check_index(p[k]);
  }

  std::vector<MarginalModel> models(K);
  std::vector<std::string> failures(K);
  std::vector<ErrorCode> codes(K, ErrorCode::convergence);
#pragma omp parallel for schedule(dynamic)
  for (std::size_t k = 0; k < K; ++k) {
    try {
      models[k] = fit(portfolio.lines[k], p[k]);
    } catch (const Error& e) {
      failures[k] = e.what();
      codes[k] = e.code();
    } catch (const std::exception& e) {
      failures[k] = e.what();
    }
  }
  for (std::size_t k = 0; k < K; ++k) {
    if (!failures[k].empty()) throw Error(codes[k], "fit of line '" + portfolio.lines[k].line_id() + "' failed: " + failures[k]);
  }

  std::vector<InnovationPanel> panels;
  for (std::size_t k = 0; k < K; ++k) panels.push_back(compute_innovations(models[k], portfolio.lines[k]));
  TreeOptions topt;
  topt.gof_bootstrap = c.gof_bootstrap;
  topt.seed = c.seed;
  const auto pairs = c.pairs.empty() ? pair_by_region(portfolio) : c.pairs;
  const CopulaTree tree = build_tree(panels, pairs, topt);

  const std::string dir = c.model_dir();
  ensure_dir(dir);
  ensure_dir(c.output_dir);
  OutputGuard guard;
  std::vector<std::string> labels;
  for (int i = 1; i <= portfolio.index.I(); ++i) labels.push_back(portfolio.semester_label(i));
  json report;
  report["input"] = c.input;
  std::ostringstream text;
  text << "Marginal fits\n";
  text << "line        p       rho  iterations  log-likelihood  zero-weight cells  notes\n";
  for (std::size_t k = 0; k < K; ++k) {
    LineModelFile f{models[k], portfolio.lines[k].region(), portfolio.lines[k].coverage(), labels};
    const std::string path = dir + "/" + models[k].line_id + ".json";
    guard.add(path);
    save_line_model(f, path);
    const auto& d = models[k].diagnostics;
    std::string notes;
    if (std::abs(models[k].rho) >= kMaxAbsRho) notes = "rho at clip bound";
    json line = {{"line_id", models[k].line_id},
                 {"p", models[k].p},
                 {"rho", models[k].rho},
                 {"iterations", d.iterations},
                 {"log_likelihood", d.log_likelihood},
                 {"zero_weight_cells", d.zero_weight_cells},
                 {"p_selected_by_grid", c.p_mode == "grid"}};
    if (!notes.empty()) line["notes"] = notes;
    report["lines"].push_back(line);
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-10s %5.3f  %7.4f  %10d  %14.3f  %17d  %s\n", models[k].line_id.c_str(), models[k].p,
                  models[k].rho, d.iterations, d.log_likelihood, d.zero_weight_cells, notes.c_str());
    text << buf;
  }
  const std::string tree_path = dir + "/tree.json";
  guard.add(tree_path);
  save_tree(tree, tree_path);

  text << "\nCopula tree\n";
  text << "node                                    family        nu     rho      se     tau   LR p   CvM p\n";
  for (int node : tree.post_order()) {
    const auto& n = tree.nodes[static_cast<std::size_t>(node)];
    const bool t = n.spec.family == CopulaFamily::student_t;
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-38s  %-12s  %4s  %6s  %6s  %6.3f  %5.3f  %6s\n", node_label(tree, node).c_str(),
                  t ? "t" : "independence", t ? std::to_string(n.spec.nu).c_str() : "-",
                  t ? fmt("%.3f", n.spec.rho).c_str() : "-", t ? fmt("%.3f", n.spec.rho_se).c_str() : "-", n.tau,
                  n.spec.lr_p_value, n.spec.gof_p_value ? fmt("%.3f", *n.spec.gof_p_value).c_str() : "-");
    text << buf;
  }
  report["tree"] = to_json(tree);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  report["seconds"] = secs;
  text << "\nelapsed " << fmt("%.1f", secs) << " s\n";
  const std::string rj = c.output_dir + "/fit_report.json";
  const std::string rt = c.output_dir + "/fit_report.txt";
  guard.add(rj);
  guard.add(rt);
  write_json_file(report, rj);
  write_text(text.str(), rt);
  guard.commit();
  std::cout << text.str();
  return 0;
}

int cmd_simulate(const RunConfig& c) {
  if (c.input.empty()) throw Error(ErrorCode::config, "simulate needs the input CSV (observed cells and premiums)");
  set_threads(c);
  const Portfolio portfolio = load_csv(c.input);
  std::vector<std::string> ids;
  for (const auto& t : portfolio.lines) ids.push_back(t.line_id());
  const std::vector<MarginalModel> models = load_models(c.model_dir(), ids);
  const CopulaTree tree = load_tree_in(c.model_dir());

  ScenarioConfig sc;
  sc.n_scenarios = c.n;
  sc.oversample = c.oversample;
  sc.seed = c.seed;
  sc.discount_rate = c.discount_rate;
  sc.table_intervals = c.table_intervals;
  const auto t0 = std::chrono::steady_clock::now();
  const ScenarioSet set = complete_triangles(portfolio, models, tree, sc);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  ensure_dir(c.output_dir);
  OutputGuard guard;
  const std::string bin = c.scenario_path();
  const std::string csv = c.output_dir + "/scenario_summary.csv";
  guard.add(bin);
  guard.add(csv);
  save_scenarios(set, bin);
  save_scenario_summary(set, csv);
  guard.commit();
  std::printf("simulated %zu scenarios for %d lines in %.1f s (%.0f scenarios/s, %d threads)\n", set.n, set.K, secs,
              static_cast<double>(set.n) / std::max(secs, 1e-9), omp_get_max_threads());
  std::printf("wrote %s and %s\n", bin.c_str(), csv.c_str());
  return 0;
}

int cmd_report(const RunConfig& c) {
  const std::string bin = c.scenario_path();
  if (!fs::exists(bin)) throw Error(ErrorCode::config, "missing scenario file '" + bin + "'");
  const ScenarioSet set = load_scenarios(bin);
  ReportOptions opt;
  opt.capital_alpha = c.alpha;
  opt.ra_alpha = c.ra_alpha;
  opt.coc.rate = c.coc_rate;
  opt.coc.discount_rate = c.discount_rate;
  opt.coc_rates = c.coc_rates;
  const CapitalReport report = build_report(set, opt);
  const std::string text = format_tables(report);
  ensure_dir(c.output_dir);
  OutputGuard guard;
  const std::string rj = c.output_dir + "/report.json";
  const std::string rt = c.output_dir + "/report.txt";
  guard.add(rj);
  guard.add(rt);
  write_json_file(to_json(report), rj);
  write_text(text, rt);
  guard.commit();
  std::cout << text;
  return 0;
}

int cmd_synth(const RunConfig& c) {
  if (c.models_dir.empty()) throw Error(ErrorCode::config, "synth needs --models (line models and tree.json)");
  if (c.synth_output.empty()) throw Error(ErrorCode::config, "synth needs --output");
  set_threads(c);
  const CopulaTree tree = load_tree_in(c.models_dir);
  std::vector<LineModelFile> files;
  const std::vector<MarginalModel> models = load_models(c.models_dir, tree.lines, &files);
  const int I = models.front().size();
  for (const auto& m : models) {
    if (m.size() != I) throw Error(ErrorCode::config, "synth: models have different triangle sizes");
  }

  Portfolio portfolio;
  portfolio.index = TriangleIndex(I);
  {
    int year = 0, half = 0;
    char dash = 0;
    std::istringstream in(c.first_semester);
    if (!(in >> year >> dash >> half) || dash != '-' || (half != 1 && half != 2)) {
      throw Error(ErrorCode::config, "first_semester must look like YYYY-1 or YYYY-2");
    }
    portfolio.first_year = year;
    portfolio.first_half = half;
  }
  const TriangleIndex& index = portfolio.index;
  const InnovationPool pool = simulate_innovation_matrix(tree, index.upper_count(), derive_seed(c.seed, StreamTag::synthetic));
  for (std::size_t k = 0; k < models.size(); ++k) {
    const std::string& id = models[k].line_id;
    std::vector<double> prem(static_cast<std::size_t>(I), c.default_premium);
    if (c.premiums.count(id)) {
      const auto& v = c.premiums.at(id);
      if (v.size() == 1) {
        prem.assign(static_cast<std::size_t>(I), v.front());
      } else if (v.size() == static_cast<std::size_t>(I)) {
        prem = v;
      } else {
        throw Error(ErrorCode::config, "premiums for '" + id + "' need 1 or " + std::to_string(I) + " values");
      }
    }
    LossTriangle tri = synthesize_line(models[k], prem, pool.column(static_cast<int>(k)));
    tri.set_labels(files[k].region, files[k].coverage);
    portfolio.lines.push_back(std::move(tri));
  }
  save_csv(portfolio, c.synth_output);
  std::printf("wrote %zu lines, %d accident semesters, to %s\n", portfolio.lines.size(), I, c.synth_output.c_str());
  return 0;
}

int run(int argc, char** argv) {
  CLI::App app{"Stochastic reserving and capital for dependent run-off triangles"};
  app.require_subcommand(1);

  RunConfig cfg;
  std::string config_path;
  // Flag values are parsed into strings and applied after the config file.
  std::map<std::string, std::string> flags;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file");
    for (const char* name : {"seed", "n", "alpha", "threads", "input", "out", "models", "scenarios", "p",
                             "oversample", "discount-rate", "coc-rate", "ra-alpha", "gof-bootstrap",
                             "table-intervals", "output"}) {
      sub->add_option(std::string("--") + name, flags[name]);
    }
  };
  CLI::App* fit_cmd = app.add_subcommand("fit", "fit marginal models and the copula tree");
  CLI::App* sim_cmd = app.add_subcommand("simulate", "complete the triangles by simulation");
  CLI::App* rep_cmd = app.add_subcommand("report", "capital and risk-adjustment tables");
  CLI::App* syn_cmd = app.add_subcommand("synth", "draw a synthetic portfolio from stored models");
  for (CLI::App* s : {fit_cmd, sim_cmd, rep_cmd, syn_cmd}) add_common(s);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "ERROR config: " << e.what() << '\n';
    return 2;
  }

  try {
    if (!config_path.empty()) {
      if (!fs::exists(config_path)) throw Error(ErrorCode::config, "config file '" + config_path + "' not found");
      apply_json(cfg, read_json_file(config_path));
    }
    auto num = [&](const std::string& key, auto& into) {
      const std::string& v = flags[key];
      if (v.empty()) return;
      json parsed;
      try {
        parsed = json::parse(v);
      } catch (const json::parse_error&) {
        throw Error(ErrorCode::config, "--" + key + ": not a number: '" + v + "'");
      }
      if (!parsed.is_number()) throw Error(ErrorCode::config, "--" + key + ": not a number: '" + v + "'");
      if constexpr (std::is_integral_v<std::remove_reference_t<decltype(into)>>) {
        if (!parsed.is_number_integer() || (parsed.is_number_integer() && parsed.get<long long>() < 0 &&
                                            std::is_unsigned_v<std::remove_reference_t<decltype(into)>>)) {
          throw Error(ErrorCode::config, "--" + key + ": expected a non-negative integer");
        }
      }
      into = parsed.get<std::remove_reference_t<decltype(into)>>();
    };
    num("seed", cfg.seed);
    num("n", cfg.n);
    num("alpha", cfg.alpha);
    num("threads", cfg.threads);
    num("oversample", cfg.oversample);
    num("discount-rate", cfg.discount_rate);
    num("coc-rate", cfg.coc_rate);
    num("ra-alpha", cfg.ra_alpha);
    num("gof-bootstrap", cfg.gof_bootstrap);
    num("table-intervals", cfg.table_intervals);
    if (!flags["input"].empty()) cfg.input = flags["input"];
    if (!flags["out"].empty()) cfg.output_dir = flags["out"];
    if (!flags["models"].empty()) cfg.models_dir = flags["models"];
    if (!flags["scenarios"].empty()) cfg.scenarios = flags["scenarios"];
    if (!flags["output"].empty()) cfg.synth_output = flags["output"];
    if (!flags["p"].empty()) {
      if (flags["p"] == "grid") {
        cfg.p_mode = "grid";
        cfg.p_by_line.clear();
      } else {
        double v = 0.0;
        num("p", v);
        cfg.p_mode = "fixed";
        cfg.p = v;
        cfg.p_by_line.clear();
      }
    }
    cfg.validate();

    if (*fit_cmd) return cmd_fit(cfg);
    if (*sim_cmd) return cmd_simulate(cfg);
    if (*rep_cmd) return cmd_report(cfg);
    return cmd_synth(cfg);
  } catch (const Error& e) {
    std::cerr << "ERROR " << to_string(e.code()) << ": " << e.what() << '\n';
    return exit_code(e.code());
  } catch (const std::bad_alloc&) {
    std::cerr << "ERROR resources: out of memory\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "ERROR internal: " << e.what() << '\n';
    return 3;
  }
}

}  // namespace trisk::cli
