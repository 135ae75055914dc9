#pragma once

#include "trisk/dependence.h"
#include "trisk/marginal.h"
#include "trisk/triangles.h"

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace trisk {

struct ScenarioConfig {
  std::size_t n_scenarios = 1000;
  int oversample = 10;          // pool size m = oversample * n_scenarios
  std::uint64_t seed = 1;
  double discount_rate = 0.02;  // per semester, flat
  int table_intervals = 1024;
  bool collect_cell_stats = false;
};

/// Row-major m x K pool of standard normal columns whose joint ranks follow
/// the hierarchical copula. Columns follow tree.lines.
struct InnovationPool {
  std::size_t rows = 0;
  int cols = 0;
  std::vector<double> values;

  double operator()(std::size_t r, int k) const { return values[r * static_cast<std::size_t>(cols) + static_cast<std::size_t>(k)]; }
  std::vector<double> column(int k) const;
};

/// out[r] = index of the entry of `values` whose rank equals the rank of
/// target[r]. Applying it to `values` gives the sample reordered to the
/// ranks of `target`.
std::vector<std::size_t> rank_matching_order(const std::vector<double>& values, const std::vector<double>& target);

/// Bottom-up rank reordering along the tree. Column generation runs in
/// parallel when `parallel` is set; the result is the same either way.
InnovationPool simulate_innovation_matrix(const CopulaTree& tree, std::size_t m, std::uint64_t seed,
                                          bool parallel = true);

/// Bijection of {0, .., n-1} keyed by a seed (cycle-walking Feistel network).
/// The first N images form the per-cell subsample of the pool.
class SeededPermutation {
public:
  SeededPermutation(std::uint64_t n, std::uint64_t key);
  std::uint64_t operator()(std::uint64_t x) const;
  std::uint64_t size() const noexcept { return n_; }

private:
  std::uint64_t round(int r, std::uint64_t half) const;

  std::uint64_t n_;
  int half_bits_;
  std::uint64_t mask_;
  std::uint64_t keys_[4];
};

/// Law of the unobserved lags of accident semester i given its observed
/// scaled innovations: mean M, covariance V and the lower factor of V.
struct ConditionalInnovation {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  Eigen::MatrixXd chol;
};

ConditionalInnovation conditional_innovation_params(double rho, int i, int I, const Eigen::VectorXd& observed);

/// Per-cell running sums gathered during completion (diagnostics and tests).
struct RowStats {
  int line = 0;
  int i = 0;
  std::size_t count = 0;
  std::vector<double> sum_ratio, sum_ratio_sq;  // per unobserved lag
  std::vector<double> zeros;
  std::vector<double> sum_z;                    // scaled innovations
  Eigen::MatrixXd cross_z;                      // sum z z'
  ConditionalInnovation law;
};

struct ScenarioSet {
  std::size_t n = 0;
  int K = 0;
  int I = 0;
  std::uint64_t seed = 0;
  double discount_rate = 0.0;
  std::vector<std::string> lines;
  /// Undiscounted cash flow of line k paid in period t (1..I-1);
  /// layout ((s * K) + k) * (I - 1) + (t - 1).
  std::vector<double> cash_flow;
  std::vector<RowStats> stats;  // only with collect_cell_stats

  int periods() const noexcept { return I - 1; }
  double flow(std::size_t s, int k, int t) const {
    return cash_flow[(s * static_cast<std::size_t>(K) + static_cast<std::size_t>(k)) * static_cast<std::size_t>(periods()) +
                     static_cast<std::size_t>(t - 1)];
  }
  /// Discounted loss per scenario for one line: sum_t flow / (1+d)^t.
  std::vector<double> discounted_line(int k) const;
  std::vector<double> discounted_aggregate() const;
  /// Undiscounted cash flow of period t; line k, or all lines when k < 0.
  std::vector<double> period_flow(int t, int k = -1) const;
  const RowStats& row_stats(int line, int i) const;
};

/// Completes all lower triangles. `models` are matched to portfolio lines by
/// line id; the tree must name the same lines. Output does not depend on the
/// number of OpenMP threads.
ScenarioSet complete_triangles(const Portfolio& portfolio, const std::vector<MarginalModel>& models,
                               const CopulaTree& tree, const ScenarioConfig& config);

/// Single-threaded reference of complete_triangles.
ScenarioSet complete_triangles_serial(const Portfolio& portfolio, const std::vector<MarginalModel>& models,
                                      const CopulaTree& tree, const ScenarioConfig& config);

}  // namespace trisk
