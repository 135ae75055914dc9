#pragma once

#include "trisk/rng.h"

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

namespace trisk {

enum class CopulaFamily { independence, student_t };

struct CopulaSpec {
  CopulaFamily family = CopulaFamily::independence;
  int nu = 0;        // student_t only
  double rho = 0.0;  // student_t only

  // Fit statistics, filled by fit_bivariate.
  std::size_t n = 0;
  double log_likelihood = 0.0;      // of the selected family
  double t_log_likelihood = 0.0;    // best t fit, kept when independence is selected
  int t_nu = 0;
  double t_rho = 0.0;
  double rho_se = 0.0;              // observed-information standard error of the t rho
  double lr_statistic = 0.0;        // 2 (l_t - l_indep)
  double lr_p_value = 1.0;
  std::optional<double> gof_p_value;

  static CopulaSpec independence() { return {}; }
  static CopulaSpec student_t(int nu, double rho);
};

inline constexpr int kMaxCopulaNu = 30;
inline constexpr double kIndependenceLevel = 0.05;

/// log c(u1, u2) of the bivariate t copula.
double t_copula_log_density(double u1, double u2, int nu, double rho);
double t_copula_density(double u1, double u2, int nu, double rho);

/// P(X1 <= h, X2 <= k) for a standard bivariate t with integer nu (exact finite sum).
double bivariate_t_cdf(double h, double k, int nu, double rho);
double t_copula_cdf(double u1, double u2, int nu, double rho);

double copula_cdf(const CopulaSpec& spec, double u1, double u2);

/// One draw of a pair whose ranks follow the copula. The pair lives on the
/// t (or normal) scale, which is enough for rank-based reordering.
std::pair<double, double> sample_latent(const CopulaSpec& spec, Engine& rng);
/// Pseudo-observation scale: uniforms on (0,1).
std::pair<double, double> sample_uniform(const CopulaSpec& spec, Engine& rng);

/// Maximum pseudo-likelihood over rho for fixed nu; returns (rho, loglik).
std::pair<double, double> fit_t_rho(const std::vector<double>& v1, const std::vector<double>& v2, int nu);

/// Profile over nu = 1..max_nu, then a likelihood-ratio screen against
/// independence with two degrees of freedom.
CopulaSpec fit_bivariate(const std::vector<double>& v1, const std::vector<double>& v2,
                         int max_nu = kMaxCopulaNu, double level = kIndependenceLevel);

/// Kendall's tau-b, O(n log n).
double kendall_tau(const std::vector<double>& x, const std::vector<double>& y);

/// Scaled ranks rank/(n+1), ties share the average rank.
std::vector<double> pseudo_observations(const std::vector<double>& x);

struct GofResult {
  double statistic = 0.0;
  double p_value = 1.0;
  int replicates = 0;
};

/// Cramer-von Mises distance between the empirical copula and the fitted one.
double cvm_statistic(const CopulaSpec& spec, const std::vector<double>& v1, const std::vector<double>& v2);

/// Parametric bootstrap p-value. Each replicate simulates from `spec`,
/// re-ranks, refits rho at the same nu (t family) and recomputes the statistic.
GofResult gof_cvm(const CopulaSpec& spec, const std::vector<double>& v1, const std::vector<double>& v2,
                  int n_bootstrap, std::uint64_t seed);

}  // namespace trisk
