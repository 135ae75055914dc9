#include "trisk/tweedie_table.h"

#include "trisk/error.h"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace trisk::tweedie {

namespace {

constexpr double kGLx[4] = {-0.8611363115940526, -0.3399810435848563, 0.3399810435848563,
                            0.8611363115940526};
constexpr double kGLw[4] = {0.3478548451374538, 0.6521451548625461, 0.6521451548625461,
                            0.3478548451374538};

constexpr double kMassTolerance = 1e-6;

double safe_density(const TweedieParams& prm, double y) {
  if (!(y > 0.0)) return 0.0;
  const double ld = log_density(prm, y);
  return std::isfinite(ld) ? std::exp(ld) : 0.0;
}

}  // namespace

InverseTable::InverseTable(const TweedieParams& params, int intervals) : params_(params) {
  if (intervals < 8) throw Error(ErrorCode::config, "inverse table needs at least 8 intervals");
  p0_ = params_.zero_mass();
  const Support sup = effective_support(params_);
  lower_ = sup.lower;
  upper_ = sup.upper;
  if (!(upper_ > lower_) || 1.0 - p0_ < 1e-15) {
    degenerate_ = true;
    F_ = {1.0, 1.0};
    dF_ = {0.0, 0.0};
    return;
  }

  const double s = params_.jump_shape();
  if (lower_ == 0.0) {
    grade_ = std::max(1.0, std::ceil(s)) / s;
    graded_ = intervals / 2;
    uniform_ = intervals - graded_;
    y_break_ = upper_ / 8.0;
  } else {
    graded_ = 0;
    uniform_ = intervals;
    y_break_ = lower_;
  }

  const int G = graded_ + uniform_;
  std::vector<double> cum(G + 1, 0.0);
  std::vector<double> slope(G + 1, 0.0);
  for (int k = 0; k < G; ++k) {
    double piece = 0.0;
    for (int q = 0; q < 4; ++q) {
      const double t = k + 0.5 * (1.0 + kGLx[q]);
      piece += kGLw[q] * safe_density(params_, y_of_t(t)) * dy_dt(t);
    }
    cum[k + 1] = cum[k] + 0.5 * piece;
  }
  for (int k = 0; k <= G; ++k) {
    const double t = k;
    if (k == 0 && graded_ > 0) {
      // Leading single-jump term of the density, in closed form at t = 0.
      if (std::ceil(s) <= 1.0) {
        const double lambda = params_.poisson_rate();
        slope[0] = lambda * p0_ * std::pow(y_break_ / params_.jump_scale(), s) /
                   std::tgamma(s + 1.0) / graded_;
      }
      continue;
    }
    slope[k] = safe_density(params_, y_of_t(t)) * dy_dt(t);
  }

  const double mass = cum[G];
  raw_total_ = p0_ + mass;
  if (!(std::abs(raw_total_ - 1.0) <= kMassTolerance)) {
    std::ostringstream os;
    os << "tweedie table mass " << raw_total_ << " for mu=" << params_.mu() << " phi=" << params_.phi()
       << " p=" << params_.p();
    throw Error(ErrorCode::accuracy, os.str());
  }
  const double scale = (1.0 - p0_) / mass;
  F_.resize(G + 1);
  dF_.resize(G + 1);
  for (int k = 0; k <= G; ++k) {
    F_[k] = p0_ + scale * cum[k];
    dF_[k] = scale * slope[k];
  }
  F_[G] = 1.0;
}

double InverseTable::y_of_t(double t) const {
  if (t <= graded_) {
    return y_break_ * std::pow(t / graded_, grade_);
  }
  const double w = (t - graded_) / uniform_;
  return w >= 1.0 ? upper_ : y_break_ + (upper_ - y_break_) * w;
}

double InverseTable::dy_dt(double t) const {
  if (t < graded_) {
    return y_break_ * grade_ * std::pow(t / graded_, grade_ - 1.0) / graded_;
  }
  return (upper_ - y_break_) / uniform_;
}

double InverseTable::t_of_y(double y) const {
  if (graded_ > 0 && y <= y_break_) {
    return graded_ * std::pow(y / y_break_, 1.0 / grade_);
  }
  return graded_ + uniform_ * (y - y_break_) / (upper_ - y_break_);
}

double InverseTable::local_cdf(int k, double s) const {
  const double f0 = F_[k];
  const double f1 = F_[k + 1];
  const double delta = f1 - f0;
  const double m0 = dF_[k];
  const double m1 = dF_[k + 1];
  const bool cubic = delta > 0.0 && std::isfinite(m0) && std::isfinite(m1) &&
                     (m0 * m0 + m1 * m1) <= 9.0 * delta * delta;
  if (!cubic) return f0 + s * delta;
  const double s2 = s * s;
  const double s3 = s2 * s;
  return (2 * s3 - 3 * s2 + 1) * f0 + (s3 - 2 * s2 + s) * m0 + (-2 * s3 + 3 * s2) * f1 +
         (s3 - s2) * m1;
}

double InverseTable::local_slope(int k, double s) const {
  const double f0 = F_[k];
  const double f1 = F_[k + 1];
  const double delta = f1 - f0;
  const double m0 = dF_[k];
  const double m1 = dF_[k + 1];
  const bool cubic = delta > 0.0 && std::isfinite(m0) && std::isfinite(m1) &&
                     (m0 * m0 + m1 * m1) <= 9.0 * delta * delta;
  if (!cubic) return delta;
  const double s2 = s * s;
  return (6 * s2 - 6 * s) * f0 + (3 * s2 - 4 * s + 1) * m0 + (6 * s - 6 * s2) * f1 +
         (3 * s2 - 2 * s) * m1;
}

double InverseTable::cdf(double y) const {
  if (y < 0.0) return 0.0;
  if (degenerate_) return 1.0;
  if (y <= lower_) return lower_ == 0.0 ? p0_ : 0.0;
  if (y >= upper_) return 1.0;
  const double t = t_of_y(y);
  const int G = intervals();
  const int k = std::clamp(static_cast<int>(std::floor(t)), 0, G - 1);
  return std::clamp(local_cdf(k, t - k), F_[k], F_[k + 1]);
}

double InverseTable::quantile(double u) const {
  if (degenerate_) return 0.0;
  if (lower_ == 0.0 && u <= p0_) return 0.0;
  if (u <= F_.front()) return lower_;
  if (u >= F_.back()) return upper_;

  const int G = intervals();
  const auto it = std::upper_bound(F_.begin(), F_.end(), u);
  const int k = std::clamp(static_cast<int>(it - F_.begin()) - 1, 0, G - 1);
  const double f0 = F_[k];
  const double delta = F_[k + 1] - f0;
  if (!(delta > 0.0)) return y_of_t(k);

  // Newton on the local cubic with a bisection safeguard.
  double lo = 0.0;
  double hi = 1.0;
  double s = std::clamp((u - f0) / delta, 0.0, 1.0);
  for (int iter = 0; iter < 60; ++iter) {
    const double g = local_cdf(k, s) - u;
    if (std::abs(g) <= 1e-16) break;
    if (g < 0.0) lo = s; else hi = s;
    const double d = local_slope(k, s);
    double next = d > 0.0 ? s - g / d : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - s) <= 1e-15) {
      s = next;
      break;
    }
    s = next;
  }
  return y_of_t(k + s);
}

double InverseTable::from_normal_score(double z) const {
  const double u = 0.5 * std::erfc(-z / std::sqrt(2.0));
  return quantile(u);
}

}  // namespace trisk::tweedie
