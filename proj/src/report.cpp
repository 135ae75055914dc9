#include "trisk/report.h"

#include "trisk/error.h"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace trisk {

using nlohmann::json;

namespace {

std::optional<double> try_equivalent_alpha(const std::vector<double>& sample, double target) {
  try {
    return equivalent_alpha(sample, target);
  } catch (const Error&) {
    return std::nullopt;
  }
}

std::string money(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.0f", std::abs(v));
  std::string digits(buf);
  std::string out;
  const int n = static_cast<int>(digits.size());
  for (int c = 0; c < n; ++c) {
    if (c > 0 && (n - c) % 3 == 0) out += ',';
    out += digits[static_cast<std::size_t>(c)];
  }
  if (v < 0 && out != "0") out = "-" + out;
  return out;
}

std::string percent(std::optional<double> a) {
  if (!a) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * *a);
  return buf;
}

struct Table {
  std::vector<std::vector<std::string>> rows;

  std::string render() const {
    std::vector<std::size_t> width;
    for (const auto& r : rows) {
      if (width.size() < r.size()) width.resize(r.size(), 0);
      for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], r[c].size());
    }
    std::ostringstream out;
    for (const auto& r : rows) {
      std::string line;
      for (std::size_t c = 0; c < r.size(); ++c) {
        const std::string pad(width[c] - r[c].size(), ' ');
        line += c == 0 ? r[c] + pad : "  " + pad + r[c];
      }
      while (!line.empty() && line.back() == ' ') line.pop_back();
      out << line << '\n';
    }
    return out.str();
  }
};

json nullable(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

CapitalReport build_report(const ScenarioSet& set, const ReportOptions& opt) {
  if (set.n < 1 || set.K < 1) throw Error(ErrorCode::schema, "report: empty scenario set");
  CapitalReport r;
  r.lines = set.lines;
  r.scenarios = set.n;
  r.discount_rate = set.discount_rate;
  r.options = opt;
  const int K = set.K;
  std::vector<std::vector<double>> by_line;
  for (int k = 0; k < K; ++k) by_line.push_back(set.discounted_line(k));
  const LossSample losses = LossSample::from_lines(set.lines, by_line);

  const EulerAllocation cap = euler_allocation(losses, opt.capital_alpha);
  r.allocation = cap.allocation;
  r.allocation_total = cap.tail_mean;
  r.conditioning_size = cap.conditioning_size;
  r.aggregate_tvar = tvar(losses.aggregate, opt.capital_alpha);
  for (const auto& x : losses.by_line) {
    r.silo_tvar.push_back(tvar(x, opt.capital_alpha));
    r.silo_total += r.silo_tvar.back();
  }
  r.diversification_benefit = r.silo_total - r.aggregate_tvar;

  for (const auto& x : losses.by_line) {
    r.expected.push_back(mean(x));
    r.expected_total += r.expected.back();
  }
  const EulerAllocation ra = euler_allocation(losses, opt.ra_alpha);
  for (int k = 0; k < K; ++k) {
    const auto kk = static_cast<std::size_t>(k);
    r.ra_aggregate.push_back(ra.allocation[kk] - r.expected[kk]);
    r.ra_aggregate_total += r.ra_aggregate.back();
    r.ra_silo.push_back(tvar(losses.by_line[kk], opt.ra_alpha) - r.expected[kk]);
    r.ra_silo_total += r.ra_silo.back();
  }

  // Per-period capitals are shared by every rate of the sensitivity panel.
  const int T = set.periods();
  std::vector<std::vector<double>> line_caps(static_cast<std::size_t>(K));
  std::vector<std::vector<double>> agg_periods;
  for (int t = 1; t <= T; ++t) agg_periods.push_back(set.period_flow(t));
  const std::vector<double> agg_caps = period_capitals(agg_periods, opt.coc.capital_alpha);
  for (int k = 0; k < K; ++k) {
    std::vector<std::vector<double>> periods;
    for (int t = 1; t <= T; ++t) periods.push_back(set.period_flow(t, k));
    line_caps[static_cast<std::size_t>(k)] = period_capitals(periods, opt.coc.capital_alpha);
  }
  for (int k = 0; k < K; ++k) {
    const auto kk = static_cast<std::size_t>(k);
    r.coc.push_back(coc_from_capitals(line_caps[kk], opt.coc.rate, opt.coc.discount_rate));
    r.equivalent_alpha.push_back(try_equivalent_alpha(losses.by_line[kk], r.coc.back()));
  }
  r.coc_total = coc_from_capitals(agg_caps, opt.coc.rate, opt.coc.discount_rate);
  r.equivalent_alpha_total = try_equivalent_alpha(losses.aggregate, r.coc_total);

  for (double rate : opt.coc_rates) {
    std::vector<double> row;
    for (int k = 0; k < K; ++k) row.push_back(coc_from_capitals(line_caps[static_cast<std::size_t>(k)], rate, opt.coc.discount_rate));
    r.coc_by_rate.push_back(row);
    r.coc_total_by_rate.push_back(coc_from_capitals(agg_caps, rate, opt.coc.discount_rate));
  }
  return r;
}

json to_json(const CapitalReport& r) {
  json j;
  j["lines"] = r.lines;
  j["scenarios"] = r.scenarios;
  j["discount_rate"] = r.discount_rate;
  j["economic_capital"] = {{"alpha", r.options.capital_alpha},
                           {"aggregate", {{"allocation", r.allocation}, {"total", r.allocation_total}}},
                           {"aggregate_tvar", r.aggregate_tvar},
                           {"conditioning_size", r.conditioning_size},
                           {"silo", {{"tvar", r.silo_tvar}, {"total", r.silo_total}}},
                           {"diversification_benefit", r.diversification_benefit}};
  json eq = json::array();
  for (const auto& a : r.equivalent_alpha) eq.push_back(nullable(a));
  j["risk_adjustment"] = {{"expected", r.expected},
                          {"expected_total", r.expected_total},
                          {"tvar_alpha", r.options.ra_alpha},
                          {"tvar_aggregate", {{"allocation", r.ra_aggregate}, {"total", r.ra_aggregate_total}}},
                          {"tvar_silo", {{"by_line", r.ra_silo}, {"total", r.ra_silo_total}}},
                          {"coc", {{"rate", r.options.coc.rate},
                                   {"discount_rate", r.options.coc.discount_rate},
                                   {"capital_alpha", r.options.coc.capital_alpha},
                                   {"by_line", r.coc},
                                   {"total", r.coc_total}}},
                          {"equivalent_alpha", {{"by_line", eq}, {"total", nullable(r.equivalent_alpha_total)}}}};
  json sens = json::array();
  for (std::size_t q = 0; q < r.options.coc_rates.size(); ++q) {
    sens.push_back({{"rate", r.options.coc_rates[q]}, {"by_line", r.coc_by_rate[q]}, {"total", r.coc_total_by_rate[q]}});
  }
  j["coc_sensitivity"] = sens;
  return j;
}

std::string format_tables(const CapitalReport& r) {
  std::vector<std::string> header = {"", ""};
  for (const auto& id : r.lines) header.push_back(id);
  header.push_back("Total");
  auto row = [&](std::string a, std::string b, const std::vector<double>& v, std::optional<double> total) {
    std::vector<std::string> out = {std::move(a), std::move(b)};
    for (double x : v) out.push_back(money(x));
    out.push_back(total ? money(*total) : "");
    return out;
  };
  char level[64];
  std::ostringstream out;

  std::snprintf(level, sizeof level, "TVaR %.4g%%", 100.0 * r.options.capital_alpha);
  Table t1;
  t1.rows.push_back(header);
  t1.rows.push_back(row(level, "Aggregate", r.allocation, r.allocation_total));
  t1.rows.push_back(row("", "Silo", r.silo_tvar, r.silo_total));
  out << "Economic capital and allocation to business lines\n" << t1.render();
  out << "Aggregate TVaR " << money(r.aggregate_tvar) << ", diversification benefit " << money(r.diversification_benefit)
      << ", tail scenarios " << r.conditioning_size << "\n\n";

  std::snprintf(level, sizeof level, "TVaR %.4g%% - E(X)", 100.0 * r.options.ra_alpha);
  Table t2;
  t2.rows.push_back(header);
  t2.rows.push_back(row("E(X)", "", r.expected, r.expected_total));
  t2.rows.push_back(row(level, "Aggregate", r.ra_aggregate, r.ra_aggregate_total));
  t2.rows.push_back(row("", "Silo", r.ra_silo, r.ra_silo_total));
  t2.rows.push_back(row("CoC", "", r.coc, r.coc_total));
  std::vector<std::string> eq = {"Equivalent alpha (%)", ""};
  for (const auto& a : r.equivalent_alpha) eq.push_back(percent(a));
  eq.push_back(percent(r.equivalent_alpha_total));
  t2.rows.push_back(eq);
  out << "Risk adjustment for non-financial risks\n" << t2.render() << '\n';

  Table t3;
  std::vector<std::string> h3 = {"Cost of capital rate"};
  for (const auto& id : r.lines) h3.push_back(id);
  h3.push_back("Total");
  t3.rows.push_back(h3);
  for (std::size_t q = 0; q < r.options.coc_rates.size(); ++q) {
    char rate[32];
    std::snprintf(rate, sizeof rate, "%.4g%%", 100.0 * r.options.coc_rates[q]);
    std::vector<std::string> line = {rate};
    for (double x : r.coc_by_rate[q]) line.push_back(money(x));
    line.push_back(money(r.coc_total_by_rate[q]));
    t3.rows.push_back(line);
  }
  out << "Sensitivity of the risk adjustment to the cost of capital rate\n" << t3.render();
  return out.str();
}

}  // namespace trisk
