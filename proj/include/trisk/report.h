#pragma once

#include "trisk/risk.h"
#include "trisk/simulate.h"

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace trisk {

struct ReportOptions {
  double capital_alpha = 0.99;  // economic capital, TVaR level
  double ra_alpha = 0.87;       // TVaR level of the risk-adjustment panel
  CoCAssumptions coc;
  std::vector<double> coc_rates = {0.04, 0.05, 0.06};
};

struct CapitalReport {
  std::vector<std::string> lines;
  std::size_t scenarios = 0;
  double discount_rate = 0.0;
  ReportOptions options;

  // Economic capital and its allocation.
  std::vector<double> allocation;  // Euler, E[X_k | S > VaR(S)]
  double allocation_total = 0.0;   // E[S | S > VaR(S)]
  double aggregate_tvar = 0.0;     // TVaR(S)
  std::vector<double> silo_tvar;
  double silo_total = 0.0;
  double diversification_benefit = 0.0;
  std::size_t conditioning_size = 0;

  // Risk adjustment.
  std::vector<double> expected;
  double expected_total = 0.0;
  std::vector<double> ra_aggregate;  // Euler allocation at ra_alpha minus E(X_k)
  double ra_aggregate_total = 0.0;
  std::vector<double> ra_silo;       // TVaR(X_k) - E(X_k)
  double ra_silo_total = 0.0;
  std::vector<double> coc;           // standalone per line
  double coc_total = 0.0;            // aggregate per-period losses
  std::vector<std::optional<double>> equivalent_alpha;
  std::optional<double> equivalent_alpha_total;

  // Cost-of-capital sensitivity, one row per rate.
  std::vector<std::vector<double>> coc_by_rate;
  std::vector<double> coc_total_by_rate;
};

CapitalReport build_report(const ScenarioSet& scenarios, const ReportOptions& options = {});

nlohmann::json to_json(const CapitalReport& report);

/// Three aligned text tables: capital and allocation, risk adjustment,
/// cost-of-capital sensitivity.
std::string format_tables(const CapitalReport& report);

}  // namespace trisk
