#include "test_support.h"
#include "trisk/ar_correlation.h"
#include "trisk/dependence.h"
#include "trisk/error.h"

#include <doctest.h>

#include <algorithm>
#include <random>

using namespace trisk;

namespace {

// Flat model: mu = 10000, phi = 1e-4, p = 1.5, so y = mu + 10 e.
MarginalModel flat_model(int J) {
  MarginalModel m = testing::reference_model(J, 0.0, 1.5, std::log(10000.0), 1e-4, 0.0);
  for (auto& a : m.mean.alpha) a = 0.0;
  for (auto& d : m.mean.delta) d = 0.0;
  return m;
}

LossTriangle triangle_from_innovations(const MarginalModel& m, const std::vector<double>& e) {
  const TriangleIndex ix(m.size());
  std::vector<double> r(e.size());
  for (std::size_t c = 0; c < e.size(); ++c) r[c] = 10000.0 + 10.0 * e[c];
  return LossTriangle::from_ratios("X", ix, testing::flat_premiums(m.size()), r);
}

std::vector<double> ar_panel(int J, double rho, Engine& rng) {
  const TriangleIndex ix(J);
  std::normal_distribution<double> N;
  std::vector<double> e(ix.upper_count());
  for (int i = 1; i <= J; ++i) {
    double prev = N(rng);
    e[ix.upper_position(i, 1)] = prev;
    for (int j = 2; j <= ix.observed_in_row(i); ++j) {
      prev = rho * prev + std::sqrt(1 - rho * rho) * N(rng);
      e[ix.upper_position(i, j)] = prev;
    }
  }
  return e;
}

}  // namespace

TEST_CASE("closed forms agree with dense algebra") {
  for (double rho : {-0.9, -0.3, 0.0, 0.5, 0.95}) {
    const ARCorrelation ar(rho, 7);
    const Eigen::MatrixXd R = ar.matrix();
    const Eigen::MatrixXd L = ar.cholesky();
    CHECK((L * L.transpose() - R).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((ar.inverse() * R - Eigen::MatrixXd::Identity(7, 7)).cwiseAbs().maxCoeff() < 1e-10);
    Eigen::VectorXd y = Eigen::VectorXd::LinSpaced(7, -1.0, 2.0);
    CHECK((ar.whiten(y) - L.triangularView<Eigen::Lower>().solve(y)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((ar.color(y) - L * y).cwiseAbs().maxCoeff() < 1e-12);
  }
  CHECK_THROWS_AS(ARCorrelation(1.0, 3), Error);
  CHECK_THROWS_AS(ARCorrelation(0.5, 0), Error);
}

TEST_CASE("lag correlation estimate") {
  SUBCASE("perfect correlation is clipped") {
    const MarginalModel m = flat_model(6);
    const TriangleIndex ix(6);
    std::vector<double> e(ix.upper_count());
    for (const Cell& c : ix.upper_cells()) e[ix.upper_position(c.i, c.j)] = 0.3 * c.i - 1.0;
    CHECK(update_rho(m, triangle_from_innovations(m, e)) == kMaxAbsRho);
  }
  SUBCASE("white noise") {
    Engine rng(11);
    const MarginalModel m = flat_model(30);
    const auto e = ar_panel(30, 0.0, rng);
    const double pairs = 30.0 * 29.0 / 2.0;
    CHECK(std::abs(update_rho(m, triangle_from_innovations(m, e))) < 3.0 / std::sqrt(pairs));
  }
  SUBCASE("AR(1) at 0.8") {
    Engine rng(12);
    const MarginalModel m = flat_model(30);
    double sum = 0.0;
    for (int r = 0; r < 100; ++r) sum += update_rho(m, triangle_from_innovations(m, ar_panel(30, 0.8, rng)));
    CHECK(std::abs(sum / 100.0 - 0.8) < 0.05);
  }
}

TEST_CASE("whitened innovations") {
  SUBCASE("rho = 0 leaves the scaled innovations unchanged") {
    Engine rng(13);
    const MarginalModel m = flat_model(8);
    const auto panel = compute_innovations(m, triangle_from_innovations(m, ar_panel(8, 0.0, rng)));
    for (std::size_t c = 0; c < panel.scaled.size(); ++c) CHECK(panel.decorrelated[c] == panel.scaled[c]);
  }
  SUBCASE("AR(1) panels at 0.8 lose their lag correlation") {
    Engine rng(14);
    MarginalModel m = flat_model(30);
    m.rho = 0.8;
    const TriangleIndex ix(30);
    double num = 0.0, den = 0.0;
    for (int r = 0; r < 20; ++r) {
      const auto panel = compute_innovations(m, triangle_from_innovations(m, ar_panel(30, 0.8, rng)));
      for (int i = 1; i < 30; ++i) {
        for (int j = 2; j <= ix.observed_in_row(i); ++j) {
          const double a = panel.decorrelated[ix.upper_position(i, j - 1)];
          const double b = panel.decorrelated[ix.upper_position(i, j)];
          num += a * b;
          den += a * a;
        }
      }
      const auto [lo, hi] = std::minmax_element(panel.pseudo.begin(), panel.pseudo.end());
      CHECK(*lo > 0.0);
      CHECK(*hi < 1.0);
    }
    CHECK(std::abs(num / den) < 0.05);
  }
}

TEST_CASE("conditional law") {
  SUBCASE("independence") {
    Eigen::VectorXd obs(3);
    obs << 0.4, -1.0, 2.0;
    const ConditionalLaw law = conditional_law(0.0, obs, 2);
    CHECK(law.mean.cwiseAbs().maxCoeff() < 1e-15);
    CHECK((law.cov - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-15);
  }
  SUBCASE("scalar case") {
    Eigen::VectorXd obs(1);
    obs << 1.3;
    const ConditionalLaw law = conditional_law(0.8, obs, 1);
    CHECK(law.mean(0) == doctest::Approx(0.8 * 1.3).epsilon(1e-14));
    CHECK(law.cov(0, 0) == doctest::Approx(0.36).epsilon(1e-14));
  }
  SUBCASE("Markov property: only the last observed lag matters") {
    Eigen::VectorXd a(4), b(4);
    a << 0.1, 0.2, -0.5, 0.7;
    b << 3.0, -2.0, 1.0, 0.7;
    const ConditionalLaw la = conditional_law(0.6, a, 3);
    const ConditionalLaw lb = conditional_law(0.6, b, 3);
    CHECK((la.mean - lb.mean).cwiseAbs().maxCoeff() < 1e-12);
    for (int k = 0; k < 3; ++k) CHECK(la.mean(k) == doctest::Approx(std::pow(0.6, k + 1) * 0.7).epsilon(1e-12));
  }
}
