#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace trisk {

/// N x K per-line losses and their row sums.
struct LossSample {
  std::vector<std::string> lines;
  std::vector<std::vector<double>> by_line;  // K vectors of length N
  std::vector<double> aggregate;             // sum over lines, in line order

  static LossSample from_lines(std::vector<std::string> lines, std::vector<std::vector<double>> by_line);
  std::size_t size() const noexcept { return aggregate.size(); }
  int line_count() const noexcept { return static_cast<int>(by_line.size()); }
};

/// Empirical generalized inverse: the ceil(alpha N)-th order statistic.
double var(const std::vector<double>& sample, double alpha);

/// (1/(1-alpha)) * integral of the empirical quantile over (alpha, 1).
double tvar(const std::vector<double>& sample, double alpha);

double mean(const std::vector<double>& sample);

struct EulerAllocation {
  std::vector<double> allocation;  // E[X_k | S > VaR_alpha(S)]
  double var = 0.0;
  double tail_mean = 0.0;          // E[S | S > VaR_alpha(S)] over the same scenarios
  std::size_t conditioning_size = 0;
};

EulerAllocation euler_allocation(const LossSample& losses, double alpha);

/// sum_k TVaR(X_k) - TVaR(S).
double diversification_benefit(const LossSample& losses, double alpha);

struct CoCAssumptions {
  double rate = 0.05;           // r_t, flat
  double discount_rate = 0.02;  // d_t, flat
  double capital_alpha = 0.99;  // C_t = VaR_alpha(X_t) - E(X_t)
};

/// sum_t r C_t / (1+d)^t for t = 1..capitals.size().
double coc_from_capitals(const std::vector<double>& capitals, double rate, double discount_rate);

/// Per-period capitals from per-period loss samples.
std::vector<double> period_capitals(const std::vector<std::vector<double>>& period_losses, double capital_alpha);

double coc_risk_adjustment(const std::vector<std::vector<double>>& period_losses, const CoCAssumptions& assumptions);

/// Smallest alpha = k/N with VaR_alpha(X) - E(X) >= target.
double equivalent_alpha(const std::vector<double>& sample, double target);

}  // namespace trisk
