#include "trisk/copula.h"

#include "trisk/error.h"

#include <boost/math/distributions/students_t.hpp>
#include <boost/math/tools/minima.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <tuple>

namespace trisk {

namespace {

constexpr double kRhoLimit = 0.995;

double t_quantile(double u, int nu) {
  return boost::math::quantile(boost::math::students_t_distribution<double>(nu), u);
}

double t_cdf(double x, int nu) {
  return boost::math::cdf(boost::math::students_t_distribution<double>(nu), x);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

// t quantiles of the rank grid k/(n+1), k = 1..n. Pseudo-observations
// without ties land on the grid exactly; anything else is inverted directly.
class RankQuantiles {
public:
  RankQuantiles(std::size_t n, int nu) : n_(n), nu_(nu), q_(n) {
    for (std::size_t k = 1; k <= n; ++k) q_[k - 1] = t_quantile(grid(k), nu);
  }
  double operator()(double u) const {
    const long k = std::lround(u * static_cast<double>(n_ + 1));
    if (k >= 1 && static_cast<std::size_t>(k) <= n_ && grid(static_cast<std::size_t>(k)) == u) {
      return q_[static_cast<std::size_t>(k) - 1];
    }
    return t_quantile(u, nu_);
  }

private:
  double grid(std::size_t k) const { return static_cast<double>(k) / static_cast<double>(n_ + 1); }
  std::size_t n_;
  int nu_;
  std::vector<double> q_;
};

// Pseudo-likelihood pieces for fixed nu, precomputed on the t scale.
struct TSample {
  int nu;
  double marginal_sum = 0.0;  // sum over cells of (nu+1)/2 [log(1+x1^2/nu) + log(1+x2^2/nu)]
  std::vector<double> a;      // x1^2 + x2^2
  std::vector<double> b;      // x1 x2

  TSample(const std::vector<double>& v1, const std::vector<double>& v2, int nu_,
          const RankQuantiles* quantiles = nullptr)
      : nu(nu_) {
    const std::size_t n = v1.size();
    a.resize(n);
    b.resize(n);
    for (std::size_t c = 0; c < n; ++c) {
      const double x1 = quantiles ? (*quantiles)(v1[c]) : t_quantile(v1[c], nu);
      const double x2 = quantiles ? (*quantiles)(v2[c]) : t_quantile(v2[c], nu);
      a[c] = x1 * x1 + x2 * x2;
      b[c] = x1 * x2;
      marginal_sum += 0.5 * (nu + 1.0) * (std::log1p(x1 * x1 / nu) + std::log1p(x2 * x2 / nu));
    }
  }

  double loglik(double rho) const {
    const double n = static_cast<double>(a.size());
    const double om = 1.0 - rho * rho;
    const double k2 = std::lgamma(0.5 * (nu + 2.0)) - std::lgamma(0.5 * nu) - std::log(nu * std::numbers::pi);
    const double k1 = std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) - 0.5 * std::log(nu * std::numbers::pi);
    double s = 0.0;
    for (std::size_t c = 0; c < a.size(); ++c) s += std::log1p((a[c] - 2.0 * rho * b[c]) / (nu * om));
    return n * (k2 - 2.0 * k1 - 0.5 * std::log(om)) - 0.5 * (nu + 2.0) * s + marginal_sum;
  }
};

std::pair<double, double> maximise_rho(const TSample& ts) {
  // Coarse scan to bracket the mode, then Brent inside the bracket.
  double best = -kRhoLimit;
  double best_ll = ts.loglik(best);
  const int steps = 40;
  for (int k = 1; k <= steps; ++k) {
    const double r = -kRhoLimit + 2.0 * kRhoLimit * k / steps;
    const double ll = ts.loglik(r);
    if (ll > best_ll) {
      best_ll = ll;
      best = r;
    }
  }
  const double h = 2.0 * kRhoLimit / steps;
  const double lo = std::max(-kRhoLimit, best - h);
  const double hi = std::min(kRhoLimit, best + h);
  auto neg = [&](double r) { return -ts.loglik(r); };
  const auto [r, v] = boost::math::tools::brent_find_minima(neg, lo, hi, 52);
  if (-v >= best_ll) return {r, -v};
  return {best, best_ll};
}

double t_log_density_at(double x1, double x2, int nu, double rho) {
  const double om = 1.0 - rho * rho;
  const double k2 = std::lgamma(0.5 * (nu + 2.0)) - std::lgamma(0.5 * nu) - std::log(nu * std::numbers::pi);
  const double k1 = std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) - 0.5 * std::log(nu * std::numbers::pi);
  const double q = (x1 * x1 - 2.0 * rho * x1 * x2 + x2 * x2) / (nu * om);
  return k2 - 2.0 * k1 - 0.5 * std::log(om) - 0.5 * (nu + 2.0) * std::log1p(q) +
         0.5 * (nu + 1.0) * (std::log1p(x1 * x1 / nu) + std::log1p(x2 * x2 / nu));
}

void check_pairs(const std::vector<double>& v1, const std::vector<double>& v2) {
  if (v1.size() != v2.size()) throw Error(ErrorCode::domain, "copula: sample sizes differ");
  for (std::size_t c = 0; c < v1.size(); ++c) {
    if (!(v1[c] > 0.0 && v1[c] < 1.0 && v2[c] > 0.0 && v2[c] < 1.0)) {
      throw Error(ErrorCode::domain, "copula: pseudo-observations must lie in (0,1)");
    }
  }
}

// Merge sort that counts exchanges (discordant pairs).
std::uint64_t sort_count(std::vector<double>& v, std::vector<double>& tmp, std::size_t lo, std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  std::uint64_t swaps = sort_count(v, tmp, lo, mid) + sort_count(v, tmp, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (v[j] < v[i]) {
      swaps += mid - i;
      tmp[k++] = v[j++];
    } else {
      tmp[k++] = v[i++];
    }
  }
  while (i < mid) tmp[k++] = v[i++];
  while (j < hi) tmp[k++] = v[j++];
  std::copy(tmp.begin() + lo, tmp.begin() + hi, v.begin() + lo);
  return swaps;
}

template <class Eq>
std::uint64_t tie_pairs(std::size_t n, Eq eq) {
  std::uint64_t total = 0;
  std::size_t run = 1;
  for (std::size_t c = 1; c <= n; ++c) {
    if (c < n && eq(c - 1, c)) {
      ++run;
    } else {
      total += run * (run - 1) / 2;
      run = 1;
    }
  }
  return total;
}

}  // namespace

CopulaSpec CopulaSpec::student_t(int nu, double rho) {
  if (nu < 1) throw Error(ErrorCode::domain, "t copula needs nu >= 1");
  if (!(std::abs(rho) < 1.0)) throw Error(ErrorCode::domain, "t copula needs |rho| < 1");
  CopulaSpec s;
  s.family = CopulaFamily::student_t;
  s.nu = nu;
  s.rho = rho;
  return s;
}

double t_copula_log_density(double u1, double u2, int nu, double rho) {
  return t_log_density_at(t_quantile(u1, nu), t_quantile(u2, nu), nu, rho);
}

double t_copula_density(double u1, double u2, int nu, double rho) {
  return std::exp(t_copula_log_density(u1, u2, nu, rho));
}

double bivariate_t_cdf(double dh, double dk, int nu, double r) {
  constexpr double eps = 1e-15;
  constexpr double pi = std::numbers::pi;
  constexpr double tpi = 2.0 * pi;
  if (nu < 1) throw Error(ErrorCode::domain, "bivariate t cdf needs nu >= 1");
  if (1.0 - r <= eps) return t_cdf(std::min(dh, dk), nu);
  if (r + 1.0 <= eps) return dh > -dk ? t_cdf(dh, nu) - t_cdf(-dk, nu) : 0.0;
  const double snu = std::sqrt(static_cast<double>(nu));
  const double ors = 1.0 - r * r;
  const double hrk = dh - r * dk;
  const double krh = dk - r * dh;
  double xnhk = 0.0;
  double xnkh = 0.0;
  if (std::abs(hrk) + ors > 0.0) {
    xnhk = hrk * hrk / (hrk * hrk + ors * (nu + dk * dk));
    xnkh = krh * krh / (krh * krh + ors * (nu + dh * dh));
  }
  const double hs = dh - r * dk < 0.0 ? -1.0 : 1.0;
  const double ks = dk - r * dh < 0.0 ? -1.0 : 1.0;
  double bvt;
  if (nu % 2 == 0) {
    bvt = std::atan2(std::sqrt(ors), -r) / tpi;
    double gmph = dh / std::sqrt(16.0 * (nu + dh * dh));
    double gmpk = dk / std::sqrt(16.0 * (nu + dk * dk));
    double btnckh = 2.0 * std::atan2(std::sqrt(xnkh), std::sqrt(1.0 - xnkh)) / pi;
    double btpdkh = 2.0 * std::sqrt(xnkh * (1.0 - xnkh)) / pi;
    double btnchk = 2.0 * std::atan2(std::sqrt(xnhk), std::sqrt(1.0 - xnhk)) / pi;
    double btpdhk = 2.0 * std::sqrt(xnhk * (1.0 - xnhk)) / pi;
    for (int j = 1; j <= nu / 2; ++j) {
      bvt += gmph * (1.0 + ks * btnckh);
      bvt += gmpk * (1.0 + hs * btnchk);
      btnckh += btpdkh;
      btpdkh = 2.0 * j * btpdkh * (1.0 - xnkh) / (2.0 * j + 1.0);
      btnchk += btpdhk;
      btpdhk = 2.0 * j * btpdhk * (1.0 - xnhk) / (2.0 * j + 1.0);
      gmph = gmph * (2.0 * j - 1.0) / (2.0 * j * (1.0 + dh * dh / nu));
      gmpk = gmpk * (2.0 * j - 1.0) / (2.0 * j * (1.0 + dk * dk / nu));
    }
  } else {
    const double qhrk = std::sqrt(dh * dh + dk * dk - 2.0 * r * dh * dk + nu * ors);
    const double hkrn = dh * dk + r * nu;
    const double hkn = dh * dk - nu;
    const double hpk = dh + dk;
    bvt = std::atan2(-snu * (hkn * qhrk + hpk * hkrn), hkn * hkrn - nu * hpk * qhrk) / tpi;
    if (bvt < -eps) bvt += 1.0;
    double gmph = dh / (tpi * snu * (1.0 + dh * dh / nu));
    double gmpk = dk / (tpi * snu * (1.0 + dk * dk / nu));
    double btnckh = std::sqrt(xnkh);
    double btpdkh = btnckh;
    double btnchk = std::sqrt(xnhk);
    double btpdhk = btnchk;
    for (int j = 1; j <= (nu - 1) / 2; ++j) {
      bvt += gmph * (1.0 + ks * btnckh);
      bvt += gmpk * (1.0 + hs * btnchk);
      btpdkh = (2.0 * j - 1.0) * btpdkh * (1.0 - xnkh) / (2.0 * j);
      btnckh += btpdkh;
      btpdhk = (2.0 * j - 1.0) * btpdhk * (1.0 - xnhk) / (2.0 * j);
      btnchk += btpdhk;
      gmph = 2.0 * j * gmph / ((2.0 * j + 1.0) * (1.0 + dh * dh / nu));
      gmpk = 2.0 * j * gmpk / ((2.0 * j + 1.0) * (1.0 + dk * dk / nu));
    }
  }
  return std::clamp(bvt, 0.0, 1.0);
}

double t_copula_cdf(double u1, double u2, int nu, double rho) {
  if (u1 <= 0.0 || u2 <= 0.0) return 0.0;
  if (u1 >= 1.0) return std::min(u2, 1.0);
  if (u2 >= 1.0) return u1;
  return bivariate_t_cdf(t_quantile(u1, nu), t_quantile(u2, nu), nu, rho);
}

double copula_cdf(const CopulaSpec& spec, double u1, double u2) {
  if (spec.family == CopulaFamily::independence) return std::clamp(u1, 0.0, 1.0) * std::clamp(u2, 0.0, 1.0);
  return t_copula_cdf(u1, u2, spec.nu, spec.rho);
}

std::pair<double, double> sample_latent(const CopulaSpec& spec, Engine& rng) {
  std::normal_distribution<double> normal;
  const double z1 = normal(rng);
  const double z2 = normal(rng);
  if (spec.family == CopulaFamily::independence) return {z1, z2};
  const double y2 = spec.rho * z1 + std::sqrt(1.0 - spec.rho * spec.rho) * z2;
  std::gamma_distribution<double> chi2(0.5 * spec.nu, 2.0);
  const double s = std::sqrt(chi2(rng) / spec.nu);
  return {z1 / s, y2 / s};
}

std::pair<double, double> sample_uniform(const CopulaSpec& spec, Engine& rng) {
  const auto [x1, x2] = sample_latent(spec, rng);
  if (spec.family == CopulaFamily::independence) return {normal_cdf(x1), normal_cdf(x2)};
  return {t_cdf(x1, spec.nu), t_cdf(x2, spec.nu)};
}

std::pair<double, double> fit_t_rho(const std::vector<double>& v1, const std::vector<double>& v2, int nu) {
  check_pairs(v1, v2);
  if (nu < 1) throw Error(ErrorCode::domain, "t copula needs nu >= 1");
  return maximise_rho(TSample(v1, v2, nu));
}

CopulaSpec fit_bivariate(const std::vector<double>& v1, const std::vector<double>& v2, int max_nu,
                         double level) {
  check_pairs(v1, v2);
  if (v1.size() < 30) throw Error(ErrorCode::domain, "copula fit needs at least 30 pairs");
  if (max_nu < 1) throw Error(ErrorCode::domain, "copula fit needs max_nu >= 1");
  int best_nu = 0;
  double best_rho = 0.0;
  double best_ll = -std::numeric_limits<double>::infinity();
  for (int nu = 1; nu <= max_nu; ++nu) {
    const TSample ts(v1, v2, nu);
    const auto [r, ll] = maximise_rho(ts);
    if (!std::isfinite(ll)) continue;
    if (ll > best_ll) {
      best_ll = ll;
      best_nu = nu;
      best_rho = r;
    }
  }
  if (best_nu == 0) throw Error(ErrorCode::convergence, "copula fit: no finite pseudo-likelihood on the nu grid");

  CopulaSpec spec;
  spec.n = v1.size();
  spec.t_nu = best_nu;
  spec.t_rho = best_rho;
  spec.t_log_likelihood = best_ll;
  {
    const TSample ts(v1, v2, best_nu);
    const double h = 1e-4;
    const double r = std::clamp(best_rho, -kRhoLimit + h, kRhoLimit - h);
    const double d2 = (ts.loglik(r + h) - 2.0 * ts.loglik(r) + ts.loglik(r - h)) / (h * h);
    spec.rho_se = d2 < 0.0 ? 1.0 / std::sqrt(-d2) : std::numeric_limits<double>::quiet_NaN();
  }
  spec.lr_statistic = std::max(0.0, 2.0 * best_ll);
  spec.lr_p_value = std::exp(-0.5 * spec.lr_statistic);  // chi-square, 2 df
  if (spec.lr_p_value < level) {
    spec.family = CopulaFamily::student_t;
    spec.nu = best_nu;
    spec.rho = best_rho;
    spec.log_likelihood = best_ll;
  } else {
    spec.family = CopulaFamily::independence;
    spec.log_likelihood = 0.0;
  }
  return spec;
}

double kendall_tau(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (y.size() != n) throw Error(ErrorCode::domain, "kendall tau: sample sizes differ");
  if (n < 2) throw Error(ErrorCode::domain, "kendall tau needs n >= 2");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return x[a] < x[b] || (x[a] == x[b] && y[a] < y[b]);
  });
  std::vector<double> xs(n), ys(n);
  for (std::size_t c = 0; c < n; ++c) {
    xs[c] = x[order[c]];
    ys[c] = y[order[c]];
  }
  const std::uint64_t n0 = static_cast<std::uint64_t>(n) * (n - 1) / 2;
  const std::uint64_t n1 = tie_pairs(n, [&](std::size_t a, std::size_t b) { return xs[a] == xs[b]; });
  const std::uint64_t n3 = tie_pairs(n, [&](std::size_t a, std::size_t b) { return xs[a] == xs[b] && ys[a] == ys[b]; });
  std::vector<double> tmp(n);
  const std::uint64_t swaps = sort_count(ys, tmp, 0, n);
  const std::uint64_t n2 = tie_pairs(n, [&](std::size_t a, std::size_t b) { return ys[a] == ys[b]; });
  const double num = static_cast<double>(n0) - static_cast<double>(n1) - static_cast<double>(n2) +
                     static_cast<double>(n3) - 2.0 * static_cast<double>(swaps);
  const double den = std::sqrt(static_cast<double>(n0 - n1) * static_cast<double>(n0 - n2));
  return den > 0.0 ? num / den : 0.0;
}

std::vector<double> pseudo_observations(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> v(n);
  std::size_t c = 0;
  while (c < n) {
    std::size_t e = c + 1;
    while (e < n && x[order[e]] == x[order[c]]) ++e;
    const double rank = 0.5 * static_cast<double>(c + 1 + e);  // average of ranks c+1..e
    for (std::size_t k = c; k < e; ++k) v[order[k]] = rank / static_cast<double>(n + 1);
    c = e;
  }
  return v;
}

namespace {

double cvm_impl(const CopulaSpec& spec, const std::vector<double>& v1, const std::vector<double>& v2,
                const RankQuantiles* quantiles) {
  check_pairs(v1, v2);
  const std::size_t n = v1.size();
  double s = 0.0;
  for (std::size_t a = 0; a < n; ++a) {
    std::size_t below = 0;
    for (std::size_t b = 0; b < n; ++b) below += (v1[b] <= v1[a] && v2[b] <= v2[a]) ? 1 : 0;
    const bool interior = v1[a] > 0.0 && v1[a] < 1.0 && v2[a] > 0.0 && v2[a] < 1.0;
    const double model = quantiles && spec.family == CopulaFamily::student_t && interior
                             ? bivariate_t_cdf((*quantiles)(v1[a]), (*quantiles)(v2[a]), spec.nu, spec.rho)
                             : copula_cdf(spec, v1[a], v2[a]);
    const double d = static_cast<double>(below) / static_cast<double>(n) - model;
    s += d * d;
  }
  return s;
}

}  // namespace

double cvm_statistic(const CopulaSpec& spec, const std::vector<double>& v1, const std::vector<double>& v2) {
  return cvm_impl(spec, v1, v2, nullptr);
}

GofResult gof_cvm(const CopulaSpec& spec, const std::vector<double>& v1, const std::vector<double>& v2,
                  int n_bootstrap, std::uint64_t seed) {
  if (n_bootstrap < 1) throw Error(ErrorCode::domain, "gof: need at least one bootstrap replicate");
  GofResult out;
  out.statistic = cvm_statistic(spec, v1, v2);
  out.replicates = n_bootstrap;
  const std::size_t n = v1.size();
  // Replicates are tie-free, so their pseudo-observations all sit on one grid.
  std::optional<RankQuantiles> quantiles;
  if (spec.family == CopulaFamily::student_t) quantiles.emplace(n, spec.nu);
  const RankQuantiles* q = quantiles ? &*quantiles : nullptr;
  int exceed = 0;
#pragma omp parallel for schedule(dynamic) reduction(+ : exceed)
  for (int b = 0; b < n_bootstrap; ++b) {
    Engine rng = make_stream(seed, StreamTag::bootstrap, static_cast<std::uint64_t>(b));
    std::vector<double> x1(n), x2(n);
    for (std::size_t c = 0; c < n; ++c) std::tie(x1[c], x2[c]) = sample_latent(spec, rng);
    const std::vector<double> w1 = pseudo_observations(x1);
    const std::vector<double> w2 = pseudo_observations(x2);
    CopulaSpec refit = spec;
    if (q) refit.rho = maximise_rho(TSample(w1, w2, spec.nu, q)).first;
    if (cvm_impl(refit, w1, w2, q) >= out.statistic) ++exceed;
  }
  out.p_value = (1.0 + exceed) / (1.0 + n_bootstrap);
  return out;
}

}  // namespace trisk
