#pragma once

#include <Eigen/Dense>

namespace trisk {

inline constexpr double kMaxAbsRho = 0.999;

/// AR(1) correlation over `dim` consecutive development lags,
/// entry (a, b) = rho^|a-b|.
class ARCorrelation {
public:
  ARCorrelation(double rho, int dim);

  double rho() const noexcept { return rho_; }
  int dim() const noexcept { return dim_; }

  Eigen::MatrixXd matrix() const;
  /// Lower Cholesky factor, closed form.
  Eigen::MatrixXd cholesky() const;
  /// Tridiagonal inverse, closed form.
  Eigen::MatrixXd inverse() const;

  /// L^{-1} y without forming L.
  Eigen::VectorXd whiten(const Eigen::VectorXd& y) const;
  /// L u without forming L.
  Eigen::VectorXd color(const Eigen::VectorXd& u) const;

private:
  double rho_;
  int dim_;
};

/// Law of the unobserved tail of an AR(1) vector given its observed head:
/// lags 1..n_obs observed, lags n_obs+1..n_obs+n_new to be simulated.
struct ConditionalLaw {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  Eigen::MatrixXd chol;  // lower factor of cov
};

/// General block formula, solved with a Cholesky of the observed block.
ConditionalLaw conditional_law(double rho, const Eigen::VectorXd& observed, int n_new);

}  // namespace trisk
