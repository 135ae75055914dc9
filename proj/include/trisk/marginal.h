#pragma once

#include "trisk/error.h"
#include "trisk/triangles.h"

#include <string>
#include <vector>

namespace trisk {

/// log mu_ij = iota + alpha_i + delta_j, alpha[0] = delta[0] = 0.
struct MeanParams {
  double iota = 0.0;
  std::vector<double> alpha;  // length I
  std::vector<double> delta;  // length J

  double eta(int i, int j) const { return iota + alpha[i - 1] + delta[j - 1]; }
  double mu(int i, int j) const;
  /// Packed (iota, alpha_2..alpha_I, delta_2..delta_J), length 2J - 1.
  std::vector<double> packed() const;
  static MeanParams unpack(const std::vector<double>& beta, int I, int J);
};

/// log phi_j = iota_d + gamma_j, gamma[0] = 0.
struct DispersionParams {
  double iota_d = 0.0;
  std::vector<double> gamma;  // length J

  double phi(int j) const;
};

struct FitDiagnostics {
  int iterations = 0;
  double change = 0.0;        // max abs parameter change at the last iteration
  double log_likelihood = 0.0;  // Tweedie log-likelihood, independent cells
  int zero_weight_cells = 0;    // cells dropped from the dispersion fit (h ~ 1)
  std::vector<double> change_history;
};

struct MarginalModel {
  std::string line_id;
  MeanParams mean;
  DispersionParams dispersion;
  double rho = 0.0;
  double p = 1.5;
  FitDiagnostics diagnostics;

  int size() const { return static_cast<int>(mean.alpha.size()); }
  double mu(int i, int j) const { return mean.mu(i, j); }
  double phi(int j) const { return dispersion.phi(j); }
  double scaled_innovation(int i, int j, double y) const;
};

struct FitOptions {
  int max_iterations = 200;
  double tolerance = 1e-8;
  bool fix_rho = false;
  double rho = 0.0;               // used when fix_rho
  bool dispersion_first = false;  // run the dispersion step before the mean step
  double effect_bound = 50.0;     // box on non-intercept mean and dispersion effects
};

class ConvergenceError : public Error {
public:
  ConvergenceError(const std::string& what, MarginalModel last, double change)
      : Error(ErrorCode::convergence, what), last_(std::move(last)), change_(change) {}
  const MarginalModel& last_iterate() const noexcept { return last_; }
  double change() const noexcept { return change_; }

private:
  MarginalModel last_;
  double change_;
};

/// Starting values: iota = log mean ratio, zero effects, Pearson dispersion.
MarginalModel initial_model(const LossTriangle& triangle, double p);

MarginalModel fit(const LossTriangle& triangle, double p, const FitOptions& options = {});

/// Lag-one autocorrelation of scaled innovations, clipped to +-0.999.
double update_rho(const MarginalModel& model, const LossTriangle& triangle);

/// One damped Fisher-scoring step of the AR(1) working-correlation GEE.
MeanParams gee_step(const MarginalModel& model, const LossTriangle& triangle,
                    double effect_bound = 50.0);

/// GEE estimating function sum_i D_i' V_i^-1 (y_i - mu_i), packed like MeanParams.
std::vector<double> gee_residual(const MarginalModel& model, const LossTriangle& triangle);

struct RemlInfo {
  std::vector<double> leverage;  // row-major over the upper set
  std::vector<double> deviance;
  double trace = 0.0;
  int zero_weight_cells = 0;
};

/// Leverages of the independence working weights W = mu^(2-p) / phi_j.
RemlInfo leverages(const MarginalModel& model, const LossTriangle& triangle);

DispersionParams reml_dispersion_step(const MarginalModel& model, const LossTriangle& triangle,
                                      RemlInfo* info = nullptr, double effect_bound = 50.0);

/// Sum of Tweedie log densities over observed cells.
double log_likelihood(const MarginalModel& model, const LossTriangle& triangle);

std::vector<double> default_p_grid();

struct PSelection {
  double p = 0.0;
  std::vector<double> grid;
  std::vector<double> log_likelihood;  // -inf where the fit failed
};

/// Grid search over the Tweedie index with rho = 0; ties go to the smaller p.
PSelection select_p(const LossTriangle& triangle, const std::vector<double>& grid = default_p_grid(),
                    const FitOptions& options = {});

}  // namespace trisk
