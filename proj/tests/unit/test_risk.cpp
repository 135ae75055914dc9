#include "trisk/error.h"
#include "trisk/risk.h"
#include "trisk/rng.h"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

using namespace trisk;

namespace {

// Integral of the empirical quantile over (alpha, 1) by midpoint sums.
double tvar_oracle(std::vector<double> x, double alpha, int steps = 200000) {
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double acc = 0.0;
  for (int s = 0; s < steps; ++s) {
    const double u = alpha + (1.0 - alpha) * (s + 0.5) / steps;
    const auto k = static_cast<std::size_t>(std::ceil(u * n));
    acc += x[std::min(k, x.size()) - 1];
  }
  return acc / steps;
}

std::vector<double> random_sample(Engine& rng, std::size_t n) {
  std::lognormal_distribution<double> ln(0.0, 1.0);
  std::uniform_int_distribution<int> kind(0, 2);
  const int k = kind(rng);
  std::vector<double> x(n);
  std::uniform_int_distribution<int> die(0, 9);
  for (double& v : x) v = k == 0 ? ln(rng) : k == 1 ? die(rng) : -ln(rng);
  return x;
}

}  // namespace

TEST_CASE("value at risk") {
  std::vector<double> x(100);
  std::iota(x.begin(), x.end(), 1.0);
  CHECK(var(x, 0.95) == 95.0);
  CHECK(var(std::vector<double>(10, 3.5), 0.37) == 3.5);
  CHECK_THROWS_AS(var(x, 1.0), Error);
  CHECK_THROWS_AS(var({}, 0.5), Error);
  Engine rng(1);
  for (int r = 0; r < 50; ++r) {
    const auto s = random_sample(rng, 1 + r * 7);
    CHECK(var(s, 0.9) <= var(s, 0.99));
  }
}

TEST_CASE("tail value at risk") {
  std::vector<double> x(100);
  std::iota(x.begin(), x.end(), 1.0);
  CHECK(tvar(x, 0.95) == doctest::Approx(98.0).epsilon(1e-14));
  CHECK(tvar(std::vector<double>(7, 2.0), 0.9) == doctest::Approx(2.0).epsilon(1e-15));
  Engine rng(2);
  for (int r = 0; r < 100; ++r) {
    const auto s = random_sample(rng, 10 + r * 13);
    for (double a : {0.5, 0.87, 0.9, 0.99}) {
      CHECK(tvar(s, a) >= var(s, a));
      CHECK(tvar(s, a) == doctest::Approx(tvar_oracle(s, a)).epsilon(1e-4));
    }
    CHECK(tvar(s, 0.8) <= tvar(s, 0.9) + 1e-12);
  }
}

TEST_CASE("Euler allocation") {
  Engine rng(3);
  std::lognormal_distribution<double> ln(0.0, 0.8);
  std::vector<std::vector<double>> cols(4, std::vector<double>(5000));
  for (auto& c : cols) {
    for (double& v : c) v = ln(rng);
  }
  const LossSample L = LossSample::from_lines({"a", "b", "c", "d"}, cols);
  const EulerAllocation e = euler_allocation(L, 0.99);
  const double sum = std::accumulate(e.allocation.begin(), e.allocation.end(), 0.0);
  CHECK(sum == doctest::Approx(e.tail_mean).epsilon(1e-14));
  double tail = 0.0;
  std::size_t m = 0;
  for (double s : L.aggregate) {
    if (s > e.var) {
      tail += s;
      ++m;
    }
  }
  CHECK(m == e.conditioning_size);
  CHECK(e.tail_mean == doctest::Approx(tail / m).epsilon(1e-12));

  const LossSample one = LossSample::from_lines({"a"}, {cols[0]});
  const EulerAllocation e1 = euler_allocation(one, 0.95);
  CHECK(e1.allocation[0] == e1.tail_mean);

  const LossSample flat = LossSample::from_lines({"a"}, {std::vector<double>(100, 1.0)});
  try {
    euler_allocation(flat, 0.9);
    FAIL("expected a degenerate error");
  } catch (const Error& err) {
    CHECK(err.code() == ErrorCode::degenerate);
  }
}

TEST_CASE("homogeneity and translation") {
  Engine rng(4);
  for (int r = 0; r < 20; ++r) {
    const auto x = random_sample(rng, 1000);
    std::vector<double> scaled(x), shifted(x);
    for (double& v : scaled) v *= 4.0;
    for (double& v : shifted) v += 2.5;
    CHECK(var(scaled, 0.95) == 4.0 * var(x, 0.95));
    CHECK(tvar(scaled, 0.95) == doctest::Approx(4.0 * tvar(x, 0.95)).epsilon(1e-13));
    CHECK(var(shifted, 0.95) == var(x, 0.95) + 2.5);
    CHECK(tvar(shifted, 0.95) == doctest::Approx(tvar(x, 0.95) + 2.5).epsilon(1e-13));
  }
}

TEST_CASE("diversification benefit") {
  Engine rng(5);
  for (int r = 0; r < 100; ++r) {
    std::uniform_int_distribution<int> kk(2, 6);
    const int K = kk(rng);
    std::vector<std::vector<double>> cols;
    for (int k = 0; k < K; ++k) cols.push_back(random_sample(rng, 800));
    std::vector<std::string> ids(static_cast<std::size_t>(K), "x");
    CHECK(diversification_benefit(LossSample::from_lines(ids, cols), 0.99) >= -1e-9);
  }
  std::lognormal_distribution<double> ln(0.0, 1.0);
  std::vector<double> a(100000), b(100000), c(100000);
  for (std::size_t s = 0; s < a.size(); ++s) {
    a[s] = ln(rng);
    b[s] = 2.0 * a[s];
    c[s] = ln(rng);
  }
  const double como = diversification_benefit(LossSample::from_lines({"a", "b"}, {a, b}), 0.99);
  CHECK(std::abs(como) < 1e-9 * tvar(a, 0.99));
  CHECK(diversification_benefit(LossSample::from_lines({"a", "c"}, {a, c}), 0.99) > 0.0);
}

TEST_CASE("cost of capital") {
  CHECK(coc_from_capitals({100.0}, 0.05, 0.02) == doctest::Approx(4.9020).epsilon(1e-4));
  CHECK(coc_from_capitals({100.0}, 0.05, 0.02) == doctest::Approx(5.0 / 1.02).epsilon(1e-15));
  CHECK(coc_from_capitals({100.0, 50.0}, 0.0, 0.02) == 0.0);
  const std::vector<double> caps = {120.0, 80.0, 30.0};
  CHECK(coc_from_capitals(caps, 0.04, 0.02) < coc_from_capitals(caps, 0.05, 0.02));
  CHECK(coc_from_capitals(caps, 0.05, 0.02) < coc_from_capitals(caps, 0.06, 0.02));
  std::vector<double> x(100);
  std::iota(x.begin(), x.end(), 1.0);
  const auto cap = period_capitals({x}, 0.99);
  CHECK(cap[0] == doctest::Approx(99.0 - 50.5));
  CHECK(coc_risk_adjustment({x}, {0.05, 0.0, 0.99}) == doctest::Approx(0.05 * 48.5));
}

TEST_CASE("equivalent alpha") {
  Engine rng(6);
  std::normal_distribution<double> N(10.0, 2.0);
  std::vector<double> x(100000);
  for (double& v : x) v = N(rng);
  const double target = var(x, 0.95) - mean(x);
  CHECK(equivalent_alpha(x, target) == doctest::Approx(0.95).epsilon(1e-12));
  CHECK(std::abs(equivalent_alpha(x, 0.0) - 0.5) < 0.01);
  CHECK_THROWS_AS(equivalent_alpha(x, 1e9), Error);
}
