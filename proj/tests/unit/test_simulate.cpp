#include "test_support.h"
#include "trisk/error.h"
#include "trisk/simulate.h"

#include <doctest.h>
#include <omp.h>

#include <algorithm>
#include <set>

using namespace trisk;

namespace {

struct Small {
  Portfolio portfolio;
  std::vector<MarginalModel> models;
  CopulaTree tree;
};

CopulaTree chain_tree(const std::vector<std::string>& ids, const CopulaSpec& spec) {
  CopulaTree t;
  t.lines = ids;
  for (int k = 0; k < static_cast<int>(ids.size()); ++k) t.nodes.push_back({k, -1, -1, {}, 0.0});
  int acc = 0;
  for (int k = 1; k < static_cast<int>(ids.size()); ++k) {
    t.nodes.push_back({-1, acc, k, spec, 0.0});
    acc = static_cast<int>(t.nodes.size()) - 1;
  }
  t.root = acc;
  return t;
}

Small small_portfolio(int J, double phi0, const CopulaSpec& spec) {
  Small s;
  s.portfolio.index = TriangleIndex(J);
  Engine rng(99);
  for (int k = 0; k < 3; ++k) {
    MarginalModel m = testing::reference_model(J, 0.4 + 0.1 * k, 1.3 + 0.2 * k, -1.5, phi0);
    m.line_id = "L" + std::to_string(k);
    s.portfolio.lines.push_back(synthesize_line(m, testing::flat_premiums(J, 100.0 * (k + 1)), rng));
    s.models.push_back(m);
  }
  s.tree = chain_tree({"L0", "L1", "L2"}, spec);
  return s;
}

}  // namespace

TEST_CASE("rank reordering worked example") {
  const std::vector<double> x1 = {1.27, -0.10, 2.80};
  const std::vector<double> x2 = {3.71, -2.19, 0.40};
  const std::vector<double> r1 = {3, 1, 2};
  const std::vector<double> r2 = {2, 3, 1};
  const auto o1 = rank_matching_order(x1, r1);
  const auto o2 = rank_matching_order(x2, r2);
  const std::vector<std::pair<double, double>> expect = {{2.80, 0.40}, {-0.10, 3.71}, {1.27, -2.19}};
  for (std::size_t r = 0; r < 3; ++r) {
    CHECK(x1[o1[r]] == expect[r].first);
    CHECK(x2[o2[r]] == expect[r].second);
  }
  CHECK_THROWS_AS(rank_matching_order({1.0}, {1.0, 2.0}), Error);
}

TEST_CASE("seeded permutation is a bijection") {
  for (std::uint64_t n : {1u, 2u, 7u, 64u, 1000u, 4099u}) {
    const SeededPermutation perm(n, 17);
    std::vector<bool> seen(n, false);
    for (std::uint64_t x = 0; x < n; ++x) {
      const auto y = perm(x);
      REQUIRE(y < n);
      CHECK_FALSE(seen[y]);
      seen[y] = true;
    }
  }
  const SeededPermutation a(1000, 1), b(1000, 1), c(1000, 2);
  int same = 0, differ = 0;
  for (std::uint64_t x = 0; x < 1000; ++x) {
    same += a(x) == b(x);
    differ += a(x) != c(x);
  }
  CHECK(same == 1000);
  CHECK(differ > 900);
  CHECK_THROWS_AS(a(1000), Error);
}

TEST_CASE("conditional innovation parameters") {
  Eigen::VectorXd obs(4);
  obs << 0.5, -0.2, 1.0, 0.3;
  const auto zero = conditional_innovation_params(0.0, 2, 5, obs);
  CHECK(zero.mean.cwiseAbs().maxCoeff() == 0.0);
  CHECK((zero.cov - Eigen::MatrixXd::Identity(1, 1)).norm() == 0.0);
  Eigen::VectorXd one(1);
  one << 1.5;
  const auto two = conditional_innovation_params(0.8, 2, 2, one);
  CHECK(two.mean(0) == doctest::Approx(1.2).epsilon(1e-15));
  CHECK(two.cov(0, 0) == doctest::Approx(0.36).epsilon(1e-15));
  CHECK((two.chol * two.chol.transpose() - two.cov).norm() < 1e-15);
  CHECK_THROWS_AS(conditional_innovation_params(0.5, 3, 5, obs), Error);
  CHECK_THROWS_AS(conditional_innovation_params(0.5, 1, 5, obs), Error);
}

TEST_CASE("innovation pool") {
  const CopulaTree tree = chain_tree({"A", "B", "C"}, CopulaSpec::student_t(6, 0.5));
  const std::size_t m = 5000;
  const InnovationPool par = simulate_innovation_matrix(tree, m, 5, true);
  const InnovationPool ser = simulate_innovation_matrix(tree, m, 5, false);
  CHECK(par.values == ser.values);
  for (int k = 0; k < 3; ++k) {
    Engine rng = make_stream(5, StreamTag::innovation_column, static_cast<std::uint64_t>(k));
    std::normal_distribution<double> N;
    std::vector<double> raw(m);
    for (double& v : raw) v = N(rng);
    auto col = par.column(k);
    std::sort(raw.begin(), raw.end());
    std::sort(col.begin(), col.end());
    CHECK(col == raw);
  }
  const InnovationPool other = simulate_innovation_matrix(tree, m, 6, true);
  CHECK(other.values != par.values);
}

TEST_CASE("independence tree keeps columns unrelated") {
  const CopulaTree tree = chain_tree({"A", "B", "C"}, CopulaSpec::independence());
  const InnovationPool pool = simulate_innovation_matrix(tree, 20000, 8);
  CHECK(std::abs(kendall_tau(pool.column(0), pool.column(1))) < 0.02);
  CHECK(std::abs(kendall_tau(pool.column(0) , pool.column(2))) < 0.02);
}

TEST_CASE("completion is deterministic and thread independent") {
  const Small s = small_portfolio(6, 0.05, CopulaSpec::student_t(5, 0.4));
  ScenarioConfig cfg;
  cfg.n_scenarios = 5000;
  cfg.table_intervals = 128;
  cfg.seed = 77;
  const ScenarioSet a = complete_triangles(s.portfolio, s.models, s.tree, cfg);
  const ScenarioSet b = complete_triangles_serial(s.portfolio, s.models, s.tree, cfg);
  CHECK(a.cash_flow == b.cash_flow);
  const int saved = omp_get_max_threads();
  omp_set_num_threads(3);
  const ScenarioSet c = complete_triangles(s.portfolio, s.models, s.tree, cfg);
  omp_set_num_threads(saved);
  CHECK(a.cash_flow == c.cash_flow);
  cfg.seed = 78;
  CHECK(complete_triangles(s.portfolio, s.models, s.tree, cfg).cash_flow != a.cash_flow);
  CHECK(a.periods() == 5);
  CHECK(a.cash_flow.size() == 5000u * 3u * 5u);
  for (double v : a.cash_flow) CHECK(v >= 0.0);
}

TEST_CASE("small dispersion concentrates on the mean") {
  Small s = small_portfolio(5, 1e-7, CopulaSpec::independence());
  for (auto& m : s.models) m.rho = 0.0;
  ScenarioConfig cfg;
  cfg.n_scenarios = 1;
  cfg.table_intervals = 256;
  cfg.discount_rate = 0.0;
  const ScenarioSet set = complete_triangles(s.portfolio, s.models, s.tree, cfg);
  REQUIRE(set.n == 1);
  for (int k = 0; k < 3; ++k) {
    const MarginalModel& m = s.models[static_cast<std::size_t>(k)];
    for (int t = 1; t <= 4; ++t) {
      double expect = 0.0;
      for (const Cell& c : TriangleIndex(5).lower_cells()) {
        if (TriangleIndex(5).period(c.i, c.j) == t) expect += m.mu(c.i, c.j) * 100.0 * (k + 1);
      }
      CHECK(set.flow(0, k, t) == doctest::Approx(expect).epsilon(0.01));
    }
  }
}

TEST_CASE("discounting and aggregation") {
  ScenarioSet set;
  set.n = 2;
  set.K = 2;
  set.I = 2;
  set.discount_rate = 0.02;
  set.lines = {"A", "B"};
  set.cash_flow = {50.0, 10.0, 0.0, 7.0};
  const auto a = set.discounted_line(0);
  CHECK(a[0] == doctest::Approx(50.0 / 1.02).epsilon(1e-15));
  CHECK(a[0] == doctest::Approx(49.02).epsilon(1e-4));
  const auto agg = set.discounted_aggregate();
  CHECK(agg[0] == doctest::Approx((50.0 + 10.0) / 1.02));
  CHECK(agg[1] == doctest::Approx(7.0 / 1.02));
  set.discount_rate = 0.0;
  CHECK(set.discounted_line(1)[0] == 10.0);
  CHECK(set.period_flow(1)[0] == 60.0);
  CHECK_THROWS_AS(set.period_flow(2), Error);
}

TEST_CASE("configuration errors") {
  const Small s = small_portfolio(4, 0.05, CopulaSpec::independence());
  ScenarioConfig cfg;
  cfg.n_scenarios = 0;
  CHECK_THROWS_AS(complete_triangles(s.portfolio, s.models, s.tree, cfg), Error);
  cfg.n_scenarios = 10;
  auto models = s.models;
  models.pop_back();
  CHECK_THROWS_AS(complete_triangles(s.portfolio, models, s.tree, cfg), Error);
}
