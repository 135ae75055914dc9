#include "trisk/risk.h"

#include "trisk/error.h"

#include <algorithm>
#include <cmath>

namespace trisk {

namespace {

void check(const std::vector<double>& sample, double alpha) {
  if (sample.empty()) throw Error(ErrorCode::domain, "risk measure of an empty sample");
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorCode::domain, "confidence level must lie in (0,1)");
}

// 1-based rank of VaR_alpha; the slack keeps alpha N = 95.000000000001 at 95.
std::size_t var_rank(std::size_t n, double alpha) {
  const double x = alpha * static_cast<double>(n) - 1e-9;
  const auto k = static_cast<std::size_t>(std::max(1.0, std::ceil(x)));
  return std::min(k, n);
}

}  // namespace

LossSample LossSample::from_lines(std::vector<std::string> lines, std::vector<std::vector<double>> by_line) {
  if (by_line.empty()) throw Error(ErrorCode::domain, "loss sample needs at least one line");
  if (lines.size() != by_line.size()) throw Error(ErrorCode::domain, "loss sample: labels and columns differ");
  const std::size_t n = by_line.front().size();
  for (const auto& c : by_line) {
    if (c.size() != n) throw Error(ErrorCode::domain, "loss sample: columns differ in length");
  }
  LossSample out;
  out.lines = std::move(lines);
  out.by_line = std::move(by_line);
  out.aggregate.assign(n, 0.0);
  for (const auto& c : out.by_line) {
    for (std::size_t s = 0; s < n; ++s) out.aggregate[s] += c[s];
  }
  return out;
}

double var(const std::vector<double>& sample, double alpha) {
  check(sample, alpha);
  std::vector<double> x(sample);
  const std::size_t k = var_rank(x.size(), alpha);
  std::nth_element(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(k - 1), x.end());
  return x[k - 1];
}

double tvar(const std::vector<double>& sample, double alpha) {
  check(sample, alpha);
  std::vector<double> x(sample);
  std::sort(x.begin(), x.end());
  const std::size_t n = x.size();
  const double nn = static_cast<double>(n);
  const std::size_t k0 = var_rank(n, alpha);
  // VaR_u = x_(k) on ((k-1)/N, k/N]; the first bin is cut at alpha.
  const double boundary = std::max(0.0, static_cast<double>(k0) / nn - alpha);
  double acc = boundary * x[k0 - 1];
  double upper = 0.0;
  for (std::size_t k = k0 + 1; k <= n; ++k) upper += x[k - 1];
  acc += upper / nn;
  return std::max(acc / (1.0 - alpha), x[k0 - 1]);
}

double mean(const std::vector<double>& sample) {
  if (sample.empty()) throw Error(ErrorCode::domain, "mean of an empty sample");
  double s = 0.0;
  for (double v : sample) s += v;
  return s / static_cast<double>(sample.size());
}

EulerAllocation euler_allocation(const LossSample& losses, double alpha) {
  check(losses.aggregate, alpha);
  EulerAllocation out;
  out.var = var(losses.aggregate, alpha);
  out.allocation.assign(losses.by_line.size(), 0.0);
  for (std::size_t s = 0; s < losses.size(); ++s) {
    if (!(losses.aggregate[s] > out.var)) continue;
    ++out.conditioning_size;
    for (std::size_t k = 0; k < losses.by_line.size(); ++k) out.allocation[k] += losses.by_line[k][s];
  }
  if (out.conditioning_size == 0) {
    throw Error(ErrorCode::degenerate, "Euler allocation: no scenario exceeds VaR; increase the number of scenarios");
  }
  const double m = static_cast<double>(out.conditioning_size);
  for (double& a : out.allocation) {
    a /= m;
    out.tail_mean += a;
  }
  return out;
}

double diversification_benefit(const LossSample& losses, double alpha) {
  double silo = 0.0;
  for (const auto& c : losses.by_line) silo += tvar(c, alpha);
  return silo - tvar(losses.aggregate, alpha);
}

double coc_from_capitals(const std::vector<double>& capitals, double rate, double discount_rate) {
  if (!std::isfinite(rate) || !std::isfinite(discount_rate) || !(discount_rate > -1.0)) {
    throw Error(ErrorCode::domain, "cost-of-capital rates must be finite with d > -1");
  }
  double out = 0.0;
  for (std::size_t t = 1; t <= capitals.size(); ++t) {
    out += rate * capitals[t - 1] / std::pow(1.0 + discount_rate, static_cast<double>(t));
  }
  return out;
}

std::vector<double> period_capitals(const std::vector<std::vector<double>>& period_losses, double capital_alpha) {
  std::vector<double> out;
  out.reserve(period_losses.size());
  for (const auto& x : period_losses) out.push_back(var(x, capital_alpha) - mean(x));
  return out;
}

double coc_risk_adjustment(const std::vector<std::vector<double>>& period_losses, const CoCAssumptions& a) {
  if (period_losses.empty()) throw Error(ErrorCode::domain, "cost of capital needs at least one period");
  return coc_from_capitals(period_capitals(period_losses, a.capital_alpha), a.rate, a.discount_rate);
}

double equivalent_alpha(const std::vector<double>& sample, double target) {
  if (sample.empty()) throw Error(ErrorCode::domain, "equivalent alpha of an empty sample");
  std::vector<double> x(sample);
  std::sort(x.begin(), x.end());
  const double m = mean(sample);
  if (!(target >= x.front() - m && target <= x.back() - m)) {
    throw Error(ErrorCode::domain, "equivalent alpha: target outside the sample range");
  }
  // First order statistic with x_(k) - mean >= target.
  const auto it = std::lower_bound(x.begin(), x.end(), target, [&](double v, double t) { return v - m < t; });
  const auto k = static_cast<std::size_t>(it - x.begin()) + 1;
  return static_cast<double>(k) / static_cast<double>(x.size());
}

}  // namespace trisk
