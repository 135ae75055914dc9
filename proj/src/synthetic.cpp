#include "trisk/synthetic.h"

#include "trisk/ar_correlation.h"
#include "trisk/error.h"
#include "trisk/tweedie_table.h"

#include <random>

namespace trisk {

LossTriangle synthesize_line(const MarginalModel& truth, std::vector<double> premiums,
                             const std::vector<double>& u, int table_intervals) {
  const TriangleIndex index(truth.size());
  if (u.size() != index.upper_count()) throw Error(ErrorCode::domain, "innovation vector has wrong length");
  std::vector<double> ratios(index.upper_count());
  for (int i = 1; i <= index.I(); ++i) {
    const int n = index.observed_in_row(i);
    Eigen::VectorXd ui(n);
    for (int j = 1; j <= n; ++j) ui(j - 1) = u[index.upper_position(i, j)];
    const Eigen::VectorXd y = ARCorrelation(truth.rho, n).color(ui);
    for (int j = 1; j <= n; ++j) {
      const tweedie::TweedieParams prm(truth.mu(i, j), truth.phi(j), truth.p);
      const tweedie::InverseTable table(prm, table_intervals);
      ratios[index.upper_position(i, j)] = table.from_normal_score(y(j - 1));
    }
  }
  auto t = LossTriangle::from_ratios(truth.line_id, index, std::move(premiums), std::move(ratios));
  return t;
}

LossTriangle synthesize_line(const MarginalModel& truth, std::vector<double> premiums, Engine& rng,
                             int table_intervals) {
  const TriangleIndex index(truth.size());
  std::normal_distribution<double> normal;
  std::vector<double> u(index.upper_count());
  for (double& v : u) v = normal(rng);
  return synthesize_line(truth, std::move(premiums), u, table_intervals);
}

}  // namespace trisk
