#include "trisk/marginal.h"

#include "trisk/ar_correlation.h"
#include "trisk/tweedie.h"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace trisk {

namespace {

constexpr double kLeverageOne = 1e-6;  // h >= 1 - kLeverageOne counts as saturated

// Design columns of cell (i, j) in the packed mean vector.
struct Cols {
  int idx[3];
  int n;
};

Cols design_cols(int i, int j, int I) {
  Cols c{{0, 0, 0}, 1};
  if (i >= 2) c.idx[c.n++] = i - 1;
  if (j >= 2) c.idx[c.n++] = I + j - 2;
  return c;
}

void check_triangle(const LossTriangle& t) {
  if (t.index().I() < 1) throw Error(ErrorCode::domain, "empty triangle");
}

// Score U and Fisher information F of the GEE for mean parameters `mean`
// under the dispersion, rho and p of `model`.
void gee_system(const MarginalModel& model, const MeanParams& mean, const LossTriangle& tri,
                Eigen::VectorXd* U, Eigen::MatrixXd* F) {
  const int I = tri.index().I();
  const int q = 2 * I - 1;
  const double p = model.p;
  const double rho = model.rho;
  const double k = 1.0 / (1.0 - rho * rho);
  if (U) U->setZero(q);
  if (F) F->setZero(q, q);
  std::vector<double> w(I), z(I), r(I);
  std::vector<Cols> cols(I);
  for (int i = 1; i <= I; ++i) {
    const int n = tri.index().observed_in_row(i);
    for (int a = 0; a < n; ++a) {
      const int j = a + 1;
      const double mu = mean.mu(i, j);
      const double phi = model.phi(j);
      const double sd = std::sqrt(phi * std::pow(mu, p));
      w[a] = mu / sd;
      z[a] = (tri.ratio(i, j) - mu) / sd;
      cols[a] = design_cols(i, j, I);
    }
    // R^{-1} is tridiagonal.
    auto diag = [&](int a) {
      if (n == 1) return 1.0;
      return (a == 0 || a == n - 1) ? k : k * (1.0 + rho * rho);
    };
    const double off = -k * rho;
    for (int a = 0; a < n; ++a) {
      r[a] = diag(a) * z[a];
      if (a > 0) r[a] += off * z[a - 1];
      if (a + 1 < n) r[a] += off * z[a + 1];
    }
    if (U) {
      for (int a = 0; a < n; ++a) {
        for (int c = 0; c < cols[a].n; ++c) (*U)(cols[a].idx[c]) += w[a] * r[a];
      }
    }
    if (F) {
      auto add = [&](int a, int b, double g) {
        const double v = w[a] * g * w[b];
        for (int c1 = 0; c1 < cols[a].n; ++c1) {
          for (int c2 = 0; c2 < cols[b].n; ++c2) (*F)(cols[a].idx[c1], cols[b].idx[c2]) += v;
        }
      };
      for (int a = 0; a < n; ++a) {
        add(a, a, diag(a));
        if (a + 1 < n) {
          add(a, a + 1, off);
          add(a + 1, a, off);
        }
      }
    }
  }
}

std::vector<double> flatten(const MarginalModel& m) {
  std::vector<double> v = m.mean.packed();
  v.push_back(m.dispersion.iota_d);
  v.insert(v.end(), m.dispersion.gamma.begin() + 1, m.dispersion.gamma.end());
  v.push_back(m.rho);
  return v;
}

void assign_flat(MarginalModel& m, const std::vector<double>& v) {
  const int I = m.size();
  const std::size_t q = static_cast<std::size_t>(2 * I - 1);
  m.mean = MeanParams::unpack(std::vector<double>(v.begin(), v.begin() + q), I, I);
  m.dispersion.iota_d = v[q];
  for (int j = 2; j <= I; ++j) m.dispersion.gamma[j - 1] = v[q + j - 1];
  m.rho = v.back();
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a[k] - b[k]));
  return m;
}

}  // namespace

double MeanParams::mu(int i, int j) const { return std::exp(eta(i, j)); }

std::vector<double> MeanParams::packed() const {
  std::vector<double> b;
  b.reserve(alpha.size() + delta.size() - 1);
  b.push_back(iota);
  b.insert(b.end(), alpha.begin() + 1, alpha.end());
  b.insert(b.end(), delta.begin() + 1, delta.end());
  return b;
}

MeanParams MeanParams::unpack(const std::vector<double>& beta, int I, int J) {
  if (beta.size() != static_cast<std::size_t>(I + J - 1)) {
    throw Error(ErrorCode::domain, "mean parameter vector has wrong length");
  }
  MeanParams m;
  m.iota = beta[0];
  m.alpha.assign(I, 0.0);
  m.delta.assign(J, 0.0);
  for (int i = 2; i <= I; ++i) m.alpha[i - 1] = beta[i - 1];
  for (int j = 2; j <= J; ++j) m.delta[j - 1] = beta[I + j - 2];
  return m;
}

double DispersionParams::phi(int j) const { return std::exp(iota_d + gamma[j - 1]); }

double MarginalModel::scaled_innovation(int i, int j, double y) const {
  const double m = mu(i, j);
  return (y - m) / std::sqrt(phi(j) * std::pow(m, p));
}

MarginalModel initial_model(const LossTriangle& tri, double p) {
  check_triangle(tri);
  tweedie::check_index(p);
  const int I = tri.index().I();
  const auto& y = tri.ratios();
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(y.size());
  if (!(mean > 0.0)) throw Error(ErrorCode::degenerate, "line " + tri.line_id() + ": all ratios are zero");
  double pearson = 0.0;
  for (double v : y) pearson += (v - mean) * (v - mean) / std::pow(mean, p);
  pearson /= std::max<double>(1.0, static_cast<double>(y.size()) - 1.0);

  MarginalModel m;
  m.line_id = tri.line_id();
  m.p = p;
  m.mean.iota = std::log(mean);
  m.mean.alpha.assign(I, 0.0);
  m.mean.delta.assign(I, 0.0);
  m.dispersion.iota_d = std::log(pearson > 0.0 ? pearson : 1.0);
  m.dispersion.gamma.assign(I, 0.0);
  m.rho = 0.0;
  return m;
}

double update_rho(const MarginalModel& model, const LossTriangle& tri) {
  const int I = tri.index().I();
  double num = 0.0;
  double den = 0.0;
  for (int i = 1; i <= I - 1; ++i) {
    const int n = tri.index().observed_in_row(i);
    double prev = model.scaled_innovation(i, 1, tri.ratio(i, 1));
    for (int j = 2; j <= n; ++j) {
      const double cur = model.scaled_innovation(i, j, tri.ratio(i, j));
      num += cur * prev;
      den += prev * prev;
      prev = cur;
    }
  }
  if (!(den > 0.0)) {
    throw Error(ErrorCode::degenerate, "line " + tri.line_id() + ": lag correlation undefined (zero innovations)");
  }
  return std::clamp(num / den, -kMaxAbsRho, kMaxAbsRho);
}

std::vector<double> gee_residual(const MarginalModel& model, const LossTriangle& tri) {
  Eigen::VectorXd U;
  gee_system(model, model.mean, tri, &U, nullptr);
  return std::vector<double>(U.data(), U.data() + U.size());
}

MeanParams gee_step(const MarginalModel& model, const LossTriangle& tri, double effect_bound) {
  if (!(std::abs(model.rho) < 1.0)) {
    throw Error(ErrorCode::singular, "GEE step: working correlation is not positive definite");
  }
  const int I = tri.index().I();
  Eigen::VectorXd U;
  Eigen::MatrixXd F;
  gee_system(model, model.mean, tri, &U, &F);
  const Eigen::LLT<Eigen::MatrixXd> llt(F);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::singular, "GEE step: working information matrix is singular");
  }
  const Eigen::VectorXd step = llt.solve(U);
  if (!step.allFinite()) throw Error(ErrorCode::singular, "GEE step: non-finite update");

  const std::vector<double> beta0 = model.mean.packed();
  const double norm0 = U.norm();
  double t = 1.0;
  for (int halving = 0; halving < 30; ++halving, t *= 0.5) {
    std::vector<double> beta = beta0;
    for (std::size_t c = 0; c < beta.size(); ++c) {
      beta[c] += t * step(static_cast<Eigen::Index>(c));
      if (c > 0) beta[c] = std::clamp(beta[c], -effect_bound, effect_bound);
    }
    MeanParams cand = MeanParams::unpack(beta, I, I);
    Eigen::VectorXd Uc;
    gee_system(model, cand, tri, &Uc, nullptr);
    if (Uc.allFinite() && Uc.norm() < norm0) return cand;
  }
  return model.mean;
}

RemlInfo leverages(const MarginalModel& model, const LossTriangle& tri) {
  const int I = tri.index().I();
  const int q = 2 * I - 1;
  const double p = model.p;
  const auto cells = tri.index().upper_cells();
  std::vector<double> W(cells.size());
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(q, q);
  for (std::size_t c = 0; c < cells.size(); ++c) {
    const auto [i, j] = cells[c];
    W[c] = std::pow(model.mu(i, j), 2.0 - p) / model.phi(j);
    const Cols x = design_cols(i, j, I);
    for (int a = 0; a < x.n; ++a) {
      for (int b = 0; b < x.n; ++b) M(x.idx[a], x.idx[b]) += W[c];
    }
  }
  const Eigen::LLT<Eigen::MatrixXd> llt(M);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::singular, "dispersion step: X'WX is singular");
  }
  const Eigen::MatrixXd Minv = llt.solve(Eigen::MatrixXd::Identity(q, q));
  RemlInfo info;
  info.leverage.resize(cells.size());
  info.deviance.resize(cells.size());
  for (std::size_t c = 0; c < cells.size(); ++c) {
    const auto [i, j] = cells[c];
    const Cols x = design_cols(i, j, I);
    double quad = 0.0;
    for (int a = 0; a < x.n; ++a) {
      for (int b = 0; b < x.n; ++b) quad += Minv(x.idx[a], x.idx[b]);
    }
    info.leverage[c] = W[c] * quad;
    info.trace += info.leverage[c];
    info.deviance[c] = tweedie::unit_deviance(tri.ratio(i, j), model.mu(i, j), p);
  }
  return info;
}

DispersionParams reml_dispersion_step(const MarginalModel& model, const LossTriangle& tri,
                                      RemlInfo* out, double effect_bound) {
  const int J = tri.index().J();
  if (J == 1) {
    throw Error(ErrorCode::saturated, "line " + tri.line_id() + ": saturated dispersion cell (1,1)");
  }
  RemlInfo info = leverages(model, tri);
  const auto cells = tri.index().upper_cells();

  double dev_total = 0.0;
  double scale = 0.0;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    dev_total += info.deviance[c];
    scale += std::pow(model.mu(cells[c].i, cells[c].j), 2.0 - model.p);
  }
  if (!(dev_total > 1e-14 * scale)) {
    throw Error(ErrorCode::degenerate,
                "line " + tri.line_id() + ": zero deviance, dispersion not estimable (constant data?)");
  }

  // Z holds one indicator per lag, so the weighted least-squares fit of z on
  // Z reduces to a weighted mean of z within each lag.
  std::vector<double> sw(J, 0.0), swz(J, 0.0);
  for (std::size_t c = 0; c < cells.size(); ++c) {
    const int j = cells[c].j;
    const double h = info.leverage[c];
    if (h >= 1.0 - kLeverageOne) {
      ++info.zero_weight_cells;
      continue;
    }
    const double phi = model.phi(j);
    const double dstar = info.deviance[c] / (1.0 - h);
    const double wd = 0.5 * (1.0 - h);
    const double z = (dstar - phi) / phi + std::log(phi);
    sw[j - 1] += wd;
    swz[j - 1] += wd * z;
  }
  std::vector<double> eta(J, std::numeric_limits<double>::quiet_NaN());
  int first = -1;
  for (int j = 0; j < J; ++j) {
    if (sw[j] > 0.0) {
      eta[j] = swz[j] / sw[j];
      if (first < 0) first = j;
    }
  }
  if (first < 0) {
    throw Error(ErrorCode::saturated, "line " + tri.line_id() + ": every dispersion cell is saturated");
  }
  // Only lag J is saturated by construction. Any other lag without usable
  // cells has had its dispersion driven to zero while its cells are fitted
  // exactly, where the likelihood is unbounded.
  for (int j = 0; j + 1 < J; ++j) {
    if (std::isnan(eta[j])) {
      throw Error(ErrorCode::degenerate, "line " + tri.line_id() + ": dispersion of lag " + std::to_string(j + 1) +
                                             " collapses to zero (unbounded likelihood)");
    }
  }
  if (std::isnan(eta[J - 1])) eta[J - 1] = eta[J - 2];
  DispersionParams d;
  d.iota_d = eta[0];
  d.gamma.assign(J, 0.0);
  for (int j = 1; j < J; ++j) d.gamma[j] = std::clamp(eta[j] - eta[0], -effect_bound, effect_bound);
  if (out) *out = std::move(info);
  return d;
}

double log_likelihood(const MarginalModel& model, const LossTriangle& tri) {
  double ll = 0.0;
  for (const Cell& c : tri.index().upper_cells()) {
    const tweedie::TweedieParams prm(model.mu(c.i, c.j), model.phi(c.j), model.p);
    ll += tweedie::log_density(prm, tri.ratio(c.i, c.j));
  }
  return ll;
}

MarginalModel fit(const LossTriangle& tri, double p, const FitOptions& opt) {
  if (tri.index().I() == 1) {
    throw Error(ErrorCode::saturated, "line " + tri.line_id() + ": saturated dispersion cell (1,1)");
  }
  MarginalModel model = initial_model(tri, p);
  if (opt.fix_rho) {
    if (!(std::abs(opt.rho) <= kMaxAbsRho)) throw Error(ErrorCode::config, "fixed rho outside [-0.999, 0.999]");
    model.rho = opt.rho;
  }
  std::vector<double> prev = flatten(model);
  double change = std::numeric_limits<double>::infinity();
  // Relaxation factor for the outer sweep. It drops below 1 only when the
  // sweep stops making progress (typically a two-cycle between the mean
  // and dispersion steps); fixed points are unaffected.
  double omega = 1.0;
  std::vector<double> before;
  auto& history = model.diagnostics.change_history;
  for (int it = 1; it <= opt.max_iterations; ++it) {
    if (!opt.fix_rho) model.rho = update_rho(model, tri);
    RemlInfo info;
    if (opt.dispersion_first) {
      model.dispersion = reml_dispersion_step(model, tri, &info, opt.effect_bound);
      model.mean = gee_step(model, tri, opt.effect_bound);
    } else {
      model.mean = gee_step(model, tri, opt.effect_bound);
      model.dispersion = reml_dispersion_step(model, tri, &info, opt.effect_bound);
    }
    std::vector<double> cur = flatten(model);
    change = max_abs_diff(cur, prev);
    history.push_back(change);
    // An iterate that lands back near the one two sweeps ago is oscillating.
    if (!before.empty() && max_abs_diff(cur, before) < 0.5 * change) {
      omega = std::max(0.125, 0.5 * omega);
    }
    before = prev;
    if (omega < 1.0) {
      for (std::size_t c = 0; c < cur.size(); ++c) cur[c] = prev[c] + omega * (cur[c] - prev[c]);
      assign_flat(model, cur);
    }
    prev = std::move(cur);
    model.diagnostics.iterations = it;
    model.diagnostics.change = change;
    model.diagnostics.zero_weight_cells = info.zero_weight_cells;
    if (!std::isfinite(change)) break;
    if (change < opt.tolerance) {
      model.diagnostics.log_likelihood = log_likelihood(model, tri);
      return model;
    }
  }
  std::ostringstream os;
  os << "line " << tri.line_id() << ": no convergence after " << model.diagnostics.iterations
     << " iterations (p=" << p << ", change " << change << ")";
  throw ConvergenceError(os.str(), model, change);
}

std::vector<double> default_p_grid() {
  std::vector<double> g;
  for (int k = 0; k <= 159; ++k) g.push_back((1105 + 5 * k) / 1000.0);
  return g;
}

PSelection select_p(const LossTriangle& tri, const std::vector<double>& grid, const FitOptions& options) {
  if (grid.empty()) throw Error(ErrorCode::config, "empty Tweedie index grid");
  for (double p : grid) tweedie::check_index(p);
  FitOptions opt = options;
  opt.fix_rho = true;
  opt.rho = 0.0;
  PSelection out;
  out.grid = grid;
  out.log_likelihood.assign(grid.size(), -std::numeric_limits<double>::infinity());
  const int n = static_cast<int>(grid.size());
#pragma omp parallel for schedule(dynamic)
  for (int g = 0; g < n; ++g) {
    try {
      const MarginalModel m = fit(tri, grid[g], opt);
      out.log_likelihood[g] = m.diagnostics.log_likelihood;
    } catch (const Error&) {
      // failed grid point keeps -inf
    }
  }
  int best = -1;
  for (int g = 0; g < n; ++g) {
    if (!std::isfinite(out.log_likelihood[g])) continue;
    if (best < 0 || out.log_likelihood[g] > out.log_likelihood[best] ||
        (out.log_likelihood[g] == out.log_likelihood[best] && grid[g] < grid[best])) {
      best = g;
    }
  }
  if (best < 0) throw Error(ErrorCode::convergence, "line " + tri.line_id() + ": every Tweedie index fit failed");
  out.p = grid[best];
  return out;
}

}  // namespace trisk
