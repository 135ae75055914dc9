#pragma once

#include "trisk/rng.h"

namespace trisk::tweedie {

// Admissible Tweedie index range. Values close to 1 make the density
// multimodal; values close to 2 make the series expansion long.
inline constexpr double kMinIndex = 1.105;
inline constexpr double kMaxIndex = 1.900;

/// Tweedie TW_p(mu, phi) with 1 < p < 2, seen as a compound Poisson sum of
/// gamma jumps: N ~ Poisson(lambda), jumps ~ Gamma(shape, scale).
class TweedieParams {
public:
  TweedieParams(double mu, double phi, double p);

  double mu() const noexcept { return mu_; }
  double phi() const noexcept { return phi_; }
  double p() const noexcept { return p_; }

  /// Gamma shape of one jump, (2-p)/(p-1).
  double jump_shape() const noexcept { return (2.0 - p_) / (p_ - 1.0); }
  double jump_scale() const noexcept;
  double poisson_rate() const noexcept;
  double zero_mass() const noexcept;
  double variance_function() const noexcept;
  double variance() const noexcept { return phi_ * variance_function(); }

private:
  double mu_;
  double phi_;
  double p_;
};

/// Throws ErrorCode::config when p lies outside [kMinIndex, kMaxIndex].
void check_index(double p);

/// Atom at zero for y == 0, continuous density for y > 0.
double density(const TweedieParams& params, double y);

/// log of density(); -inf where the density vanishes.
double log_density(const TweedieParams& params, double y);

double cdf(const TweedieParams& params, double y);

/// Smallest y with cdf(y) >= u, solved on the u-scale to 1e-10.
double quantile(const TweedieParams& params, double u);

double sample(const TweedieParams& params, Engine& rng);

double unit_deviance(double y, double mu, double p);

inline double unit_deviance(const TweedieParams& params, double y) {
  return unit_deviance(y, params.mu(), params.p());
}

/// Interval outside of which each tail carries less than `tail` mass.
/// Derived from Poisson and gamma quantiles of the compound representation.
struct Support {
  double lower;
  double upper;
};

Support effective_support(const TweedieParams& params, double tail = 1e-15);

/// Integral of the continuous density over [a, b] (a >= 0).
double integrate_density(const TweedieParams& params, double a, double b);

}  // namespace trisk::tweedie
