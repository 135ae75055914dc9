#include "trisk/tweedie.h"

#include "trisk/error.h"

#include <boost/math/distributions/poisson.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace trisk::tweedie {

namespace {

constexpr double kSeriesRelTol = 1e-12;
constexpr long kMaxSeriesTerms = 50000;
constexpr int kSupportPieces = 64;
constexpr double kQuadTol = 1e-12;
constexpr unsigned kQuadDepth = 12;
constexpr double kQuadAbsFloor = 1e-14;

// log of sum_{n>=1} z^n / (n! Gamma(n s)), summed outward from the largest
// term until the next term drops below kSeriesRelTol of the running sum.
double log_series(double log_z, double s) {
  const double log_peak = (log_z - s * std::log(s)) / (1.0 + s);
  long n0 = 1;
  if (log_peak > 0.0) {
    n0 = static_cast<long>(std::llround(std::exp(std::min(log_peak, 60.0))));
    n0 = std::max(1L, n0);
  }
  auto log_term = [&](long n) {
    const double nd = static_cast<double>(n);
    return nd * log_z - std::lgamma(nd + 1.0) - std::lgamma(nd * s);
  };
  const double lmax = log_term(n0);
  double sum = 1.0;
  long terms = 1;
  for (long n = n0 + 1;; ++n) {
    const double t = std::exp(log_term(n) - lmax);
    sum += t;
    if (t < kSeriesRelTol * sum) break;
    if (++terms > kMaxSeriesTerms) {
      throw Error(ErrorCode::accuracy, "tweedie series did not truncate within 50000 terms");
    }
  }
  for (long n = n0 - 1; n >= 1; --n) {
    const double t = std::exp(log_term(n) - lmax);
    sum += t;
    if (t < kSeriesRelTol * sum) break;
    if (++terms > kMaxSeriesTerms) {
      throw Error(ErrorCode::accuracy, "tweedie series did not truncate within 50000 terms");
    }
  }
  return lmax + std::log(sum);
}

double continuous_density(const TweedieParams& prm, double y) {
  if (!(y > 0.0)) return 0.0;
  const double ld = log_density(prm, y);
  return std::isfinite(ld) ? std::exp(ld) : 0.0;
}

struct Piece {
  double value;
  double error;
};

template <class F>
Piece gk_once(F& f, double a, double b) {
  using boost::math::quadrature::gauss_kronrod;
  Piece out{0.0, 0.0};
  out.value = gauss_kronrod<double, 31>::integrate(f, a, b, 0, 0.0, &out.error);
  return out;
}

// Bisecting Gauss-Kronrod. Refinement stops at the tolerance, at an
// absolute floor, or when halving no longer shrinks the error estimate,
// which is the signature of rounding noise in the series density.
template <class F>
double gk_refine(F& f, double a, double b, Piece whole, unsigned depth) {
  if (depth == 0 || whole.error <= std::max(kQuadTol * std::abs(whole.value), kQuadAbsFloor)) {
    return whole.value;
  }
  const double mid = 0.5 * (a + b);
  const Piece left = gk_once(f, a, mid);
  const Piece right = gk_once(f, mid, b);
  if (left.error + right.error > 0.5 * whole.error) return left.value + right.value;
  return gk_refine(f, a, mid, left, depth - 1) + gk_refine(f, mid, b, right, depth - 1);
}

template <class F>
double gk(F& f, double a, double b) {
  return gk_refine(f, a, b, gk_once(f, a, b), kQuadDepth);
}

// Integral of the density over [0, c] after y = c v^a. The exponent makes
// the integrand polynomial in v near 0 so the y^(shape-1) singularity of
// the first jump disappears.
double integrate_from_zero(const TweedieParams& prm, double c) {
  const double s = prm.jump_shape();
  const double a = std::max(1.0, std::ceil(s)) / s;
  auto g = [&](double v) {
    if (v <= 0.0) return 0.0;
    const double y = c * std::pow(v, a);
    return continuous_density(prm, y) * c * a * std::pow(v, a - 1.0);
  };
  return gk(g, 0.0, 1.0);
}

}  // namespace

TweedieParams::TweedieParams(double mu, double phi, double p) : mu_(mu), phi_(phi), p_(p) {
  if (!(mu > 0.0) || !std::isfinite(mu)) {
    throw Error(ErrorCode::domain, "tweedie mean must be positive and finite");
  }
  if (!(phi > 0.0) || !std::isfinite(phi)) {
    throw Error(ErrorCode::domain, "tweedie dispersion must be positive and finite");
  }
  check_index(p);
}

void check_index(double p) {
  constexpr double slack = 1e-9;
  if (!(p >= kMinIndex - slack && p <= kMaxIndex + slack)) {
    std::ostringstream os;
    os << "tweedie index " << p << " outside [" << kMinIndex << ", " << kMaxIndex << "]";
    throw Error(ErrorCode::config, os.str());
  }
}

double TweedieParams::jump_scale() const noexcept {
  return phi_ * (p_ - 1.0) * std::pow(mu_, p_ - 1.0);
}

double TweedieParams::poisson_rate() const noexcept {
  return std::pow(mu_, 2.0 - p_) / (phi_ * (2.0 - p_));
}

double TweedieParams::zero_mass() const noexcept { return std::exp(-poisson_rate()); }

double TweedieParams::variance_function() const noexcept { return std::pow(mu_, p_); }

double log_density(const TweedieParams& prm, double y) {
  if (!std::isfinite(y)) throw Error(ErrorCode::domain, "tweedie density at non-finite y");
  if (y < 0.0) return -std::numeric_limits<double>::infinity();
  const double lambda = prm.poisson_rate();
  if (y == 0.0) return -lambda;
  const double s = prm.jump_shape();
  const double theta = prm.jump_scale();
  const double log_z = std::log(lambda) + s * std::log(y / theta);
  return -lambda - y / theta - std::log(y) + log_series(log_z, s);
}

double density(const TweedieParams& prm, double y) {
  if (!std::isfinite(y)) throw Error(ErrorCode::domain, "tweedie density at non-finite y");
  if (y < 0.0) throw Error(ErrorCode::domain, "tweedie density at negative y");
  return std::exp(log_density(prm, y));
}

Support effective_support(const TweedieParams& prm, double tail) {
  namespace bm = boost::math;
  const double lambda = prm.poisson_rate();
  const double s = prm.jump_shape();
  const double theta = prm.jump_scale();
  const double eps = 0.5 * tail;
  Support out{0.0, 0.0};

  if (!(lambda > 0.0) || std::exp(-lambda) >= 1.0) return out;

  const bm::poisson_distribution<double> pois(lambda);
  if (std::exp(-lambda) <= eps) {
    // P(N <= k) <= eps, so at least k + 1 jumps with probability 1 - eps.
    double k = std::floor(bm::quantile(pois, eps));
    while (k > 0.0 && bm::cdf(pois, k) > eps) k -= 1.0;
    const double n_lo = std::max(1.0, k + 1.0);
    out.lower = theta * bm::gamma_p_inv(n_lo * s, eps);
  }
  double k = std::ceil(bm::quantile(bm::complement(pois, eps)));
  while (bm::cdf(bm::complement(pois, k)) > eps) k += 1.0;
  const double n_hi = std::max(1.0, k);
  out.upper = theta * bm::gamma_q_inv(n_hi * s, eps);
  return out;
}

double integrate_density(const TweedieParams& prm, double a, double b) {
  const Support sup = effective_support(prm);
  a = std::max(a, std::max(0.0, sup.lower));
  b = std::min(b, sup.upper);
  if (!(b > a)) return 0.0;

  const double width = (sup.upper - sup.lower) / kSupportPieces;
  auto f = [&](double y) { return continuous_density(prm, y); };
  double total = 0.0;
  const int first = std::max(0, static_cast<int>(std::floor((a - sup.lower) / width)));
  for (int piece = first; piece < kSupportPieces; ++piece) {
    const double lo = sup.lower + piece * width;
    const double hi = piece + 1 == kSupportPieces ? sup.upper : lo + width;
    if (lo >= b) break;
    const double x0 = std::max(lo, a);
    const double x1 = std::min(hi, b);
    if (!(x1 > x0)) continue;
    if (x0 == 0.0) {
      total += integrate_from_zero(prm, x1);
    } else {
      total += gk(f, x0, x1);
    }
  }
  return total;
}

double cdf(const TweedieParams& prm, double y) {
  if (std::isnan(y)) throw Error(ErrorCode::domain, "tweedie cdf at NaN");
  if (y < 0.0) return 0.0;
  const double p0 = prm.zero_mass();
  if (y == 0.0) return p0;
  if (std::isinf(y)) return 1.0;
  return std::min(1.0, p0 + integrate_density(prm, 0.0, y));
}

double quantile(const TweedieParams& prm, double u) {
  if (!(u > 0.0 && u < 1.0)) throw Error(ErrorCode::domain, "tweedie quantile needs u in (0,1)");
  const double p0 = prm.zero_mass();
  if (u <= p0) return 0.0;

  const Support sup = effective_support(prm);
  // Bracket on the continuous branch; F is tracked incrementally from the
  // nearer bracket end so each step only integrates the gap.
  double xl = std::max(0.0, sup.lower);
  double fl = p0 - u;
  double xr = sup.upper;
  double fr = 1.0 - u;
  if (fr <= 0.0) return xr;

  constexpr double tol_u = 1e-12;
  // fl/fr are exact residuals at the bracket ends; wl/wr are the Illinois
  // weighted copies used only for the secant step.
  double wl = fl;
  double wr = fr;
  int side = 0;
  for (int iter = 0; iter < 400; ++iter) {
    double x = xl - wl * (xr - xl) / (wr - wl);
    if (!(x > xl && x < xr)) x = 0.5 * (xl + xr);

    const double fx = (x - xl <= xr - x) ? fl + integrate_density(prm, xl, x)
                                         : fr - integrate_density(prm, x, xr);
    if (std::abs(fx) <= tol_u) return x;
    if (fx < 0.0) {
      xl = x;
      fl = wl = fx;
      if (side == -1) wr *= 0.5;
      side = -1;
    } else {
      xr = x;
      fr = wr = fx;
      if (side == 1) wl *= 0.5;
      side = 1;
    }
    if (xr - xl <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, xr)) return xr;
  }
  throw Error(ErrorCode::accuracy, "tweedie quantile root search did not converge");
}

double sample(const TweedieParams& prm, Engine& rng) {
  std::poisson_distribution<long long> jumps(prm.poisson_rate());
  const long long n = jumps(rng);
  if (n == 0) return 0.0;
  std::gamma_distribution<double> total(static_cast<double>(n) * prm.jump_shape(), prm.jump_scale());
  return total(rng);
}

double unit_deviance(double y, double mu, double p) {
  if (!(y >= 0.0)) throw Error(ErrorCode::domain, "unit deviance needs y >= 0");
  const double mu2 = std::pow(mu, 2.0 - p);
  if (y == 0.0) return 2.0 * mu2 / (2.0 - p);
  const double d = 2.0 * (y * (std::pow(y, 1.0 - p) - std::pow(mu, 1.0 - p)) / (1.0 - p) -
                          (std::pow(y, 2.0 - p) - mu2) / (2.0 - p));
  return std::max(0.0, d);
}

}  // namespace trisk::tweedie
