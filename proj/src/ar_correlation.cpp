#include "trisk/ar_correlation.h"

#include "trisk/error.h"

#include <cmath>

namespace trisk {

ARCorrelation::ARCorrelation(double rho, int dim) : rho_(rho), dim_(dim) {
  if (!(std::abs(rho) < 1.0)) throw Error(ErrorCode::domain, "AR correlation needs |rho| < 1");
  if (dim < 1) throw Error(ErrorCode::domain, "AR correlation needs dim >= 1");
}

Eigen::MatrixXd ARCorrelation::matrix() const {
  Eigen::MatrixXd R(dim_, dim_);
  for (int a = 0; a < dim_; ++a) {
    for (int b = 0; b < dim_; ++b) R(a, b) = std::pow(rho_, std::abs(a - b));
  }
  return R;
}

Eigen::MatrixXd ARCorrelation::cholesky() const {
  const double c = std::sqrt(1.0 - rho_ * rho_);
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(dim_, dim_);
  for (int a = 0; a < dim_; ++a) {
    L(a, 0) = std::pow(rho_, a);
    for (int b = 1; b <= a; ++b) L(a, b) = c * std::pow(rho_, a - b);
  }
  return L;
}

Eigen::MatrixXd ARCorrelation::inverse() const {
  const double k = 1.0 / (1.0 - rho_ * rho_);
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(dim_, dim_);
  for (int a = 0; a < dim_; ++a) {
    const bool edge = a == 0 || a == dim_ - 1;
    P(a, a) = dim_ == 1 ? 1.0 : k * (edge ? 1.0 : 1.0 + rho_ * rho_);
    if (a + 1 < dim_) P(a, a + 1) = P(a + 1, a) = -k * rho_;
  }
  return P;
}

Eigen::VectorXd ARCorrelation::whiten(const Eigen::VectorXd& y) const {
  if (y.size() != dim_) throw Error(ErrorCode::domain, "whiten: dimension mismatch");
  const double c = std::sqrt(1.0 - rho_ * rho_);
  Eigen::VectorXd u(dim_);
  u(0) = y(0);
  for (int a = 1; a < dim_; ++a) u(a) = (y(a) - rho_ * y(a - 1)) / c;
  return u;
}

Eigen::VectorXd ARCorrelation::color(const Eigen::VectorXd& u) const {
  if (u.size() != dim_) throw Error(ErrorCode::domain, "color: dimension mismatch");
  const double c = std::sqrt(1.0 - rho_ * rho_);
  Eigen::VectorXd y(dim_);
  y(0) = u(0);
  for (int a = 1; a < dim_; ++a) y(a) = rho_ * y(a - 1) + c * u(a);
  return y;
}

ConditionalLaw conditional_law(double rho, const Eigen::VectorXd& observed, int n_new) {
  if (n_new < 1) throw Error(ErrorCode::domain, "conditional law needs at least one new lag");
  const int n_obs = static_cast<int>(observed.size());
  const ARCorrelation full(rho, n_obs + n_new);
  const Eigen::MatrixXd R = full.matrix();
  ConditionalLaw law;
  if (n_obs == 0) {
    law.mean = Eigen::VectorXd::Zero(n_new);
    law.cov = R;
  } else {
    const Eigen::MatrixXd R11 = R.topLeftCorner(n_obs, n_obs);
    const Eigen::MatrixXd R12 = R.topRightCorner(n_obs, n_new);
    const Eigen::MatrixXd R22 = R.bottomRightCorner(n_new, n_new);
    const Eigen::LLT<Eigen::MatrixXd> llt(R11);
    if (llt.info() != Eigen::Success) {
      throw Error(ErrorCode::singular, "observed AR block is not positive definite");
    }
    const Eigen::MatrixXd B = llt.solve(R12);  // R11^{-1} R12
    law.mean = B.transpose() * observed;
    law.cov = R22 - R12.transpose() * B;
    law.cov = 0.5 * (law.cov + law.cov.transpose());
  }
  const Eigen::LLT<Eigen::MatrixXd> llt(law.cov);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::singular, "conditional AR covariance is not positive definite");
  }
  law.chol = llt.matrixL();
  return law;
}

}  // namespace trisk
