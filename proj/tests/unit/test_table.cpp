#include "test_support.h"
#include "trisk/tweedie_table.h"

#include <doctest.h>

#include <cmath>

using namespace trisk;
using namespace trisk::tweedie;

TEST_CASE("table cdf agrees with the quadrature cdf") {
  for (double p : {1.2, 1.5, 1.9}) {
    for (double mu : {0.02, 1.0}) {
      for (double phi : {0.001, 0.5}) {
        const TweedieParams t(mu, phi, p);
        const InverseTable table(t, 512);
        CAPTURE(p);
        CAPTURE(mu);
        CAPTURE(phi);
        CHECK(table.zero_mass() == doctest::Approx(t.zero_mass()).epsilon(1e-14));
        CHECK(std::abs(table.raw_total() - 1.0) < 1e-6);
        for (double u : {0.01, 0.1, 0.3, 0.5, 0.7, 0.9, 0.99, 0.999}) {
          if (u <= t.zero_mass()) continue;
          const double y = table.quantile(u);
          CHECK(std::abs(cdf(t, y) - u) < 1e-6);
        }
      }
    }
  }
}

TEST_CASE("table quantile is monotone and honours the atom") {
  const TweedieParams t(1.0, 1.0, 1.5);
  const InverseTable table(t, 256);
  CHECK(table.quantile(0.05) == 0.0);
  CHECK(table.quantile(std::exp(-2.0) * 0.999) == 0.0);
  double prev = 0.0;
  for (int k = 1; k < 1000; ++k) {
    const double y = table.quantile(k / 1000.0);
    CHECK(y >= prev);
    prev = y;
  }
}

TEST_CASE("normal score path matches the uniform path") {
  const TweedieParams t(0.3, 0.05, 1.4);
  const InverseTable table(t, 1024);
  for (double z : {-3.0, -1.0, 0.0, 0.5, 2.0, 4.0}) {
    CHECK(table.from_normal_score(z) == doctest::Approx(table.quantile(testing::normal_cdf(z))).epsilon(1e-9));
  }
}

TEST_CASE("finer tables converge to the exact quantile") {
  const TweedieParams t(0.5, 0.2, 1.6);
  const double exact = quantile(t, 0.8);
  double err_coarse = std::abs(InverseTable(t, 32).quantile(0.8) - exact);
  double err_fine = std::abs(InverseTable(t, 1024).quantile(0.8) - exact);
  CHECK(err_fine <= err_coarse + 1e-12);
  CHECK(err_fine < 1e-6 * exact);
}
