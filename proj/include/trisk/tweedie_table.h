#pragma once

#include "trisk/tweedie.h"

#include <vector>

namespace trisk::tweedie {

/// Tabulated CDF of one Tweedie law for fast repeated inversion.
///
/// The continuous branch is tabulated on a parameter t whose unit steps are
/// the table intervals. When the support starts at 0 the first segment is
/// graded, y = y_b (t/G1)^a, so that F is close to linear in t next to the
/// atom; the rest is uniform in y. Each interval stores F and dF/dt at both
/// ends and is inverted with a monotone cubic Hermite model.
class InverseTable {
public:
  explicit InverseTable(const TweedieParams& params, int intervals = 1024);

  const TweedieParams& params() const noexcept { return params_; }
  double zero_mass() const noexcept { return p0_; }
  int intervals() const noexcept { return static_cast<int>(F_.size()) - 1; }

  double cdf(double y) const;
  double quantile(double u) const;
  /// quantile(Phi(z)) with the normal CDF evaluated through erfc.
  double from_normal_score(double z) const;

  /// Continuous mass found by the table quadrature before renormalisation,
  /// plus the atom. Close to 1; exposed for diagnostics.
  double raw_total() const noexcept { return raw_total_; }

private:
  double y_of_t(double t) const;
  double dy_dt(double t) const;
  double t_of_y(double y) const;
  double local_cdf(int k, double s) const;
  double local_slope(int k, double s) const;

  TweedieParams params_;
  double p0_ = 1.0;
  bool degenerate_ = false;
  double lower_ = 0.0;
  double upper_ = 0.0;
  double y_break_ = 0.0;  // end of the graded segment
  double grade_ = 1.0;    // exponent a of the graded segment
  int graded_ = 0;        // G1, number of graded intervals
  int uniform_ = 0;       // G2
  double raw_total_ = 1.0;
  std::vector<double> F_;
  std::vector<double> dF_;
};

}  // namespace trisk::tweedie
