#include "test_support.h"
#include "trisk/dependence.h"
#include "trisk/error.h"
#include "trisk/simulate.h"

#include <doctest.h>

#include <algorithm>
#include <set>

using namespace trisk;

namespace {

InnovationPanel panel_of(const std::string& id, std::vector<double> u) {
  InnovationPanel p;
  p.line_id = id;
  p.pseudo = pseudo_observations(u);
  p.scaled = u;
  p.decorrelated = std::move(u);
  return p;
}

// Lines under `node` as a set of ids.
std::set<std::string> ids_under(const CopulaTree& t, int node) {
  std::set<std::string> out;
  for (int k : t.leaves_under(node)) out.insert(t.lines[static_cast<std::size_t>(k)]);
  return out;
}

CopulaTree six_line_truth(double cross_rho) {
  CopulaTree t;
  t.lines = {"PA_ON", "CA_ON", "PA_AB", "CA_AB", "PA_ATL", "CA_ATL"};
  for (int k = 0; k < 6; ++k) t.nodes.push_back({k, -1, -1, {}, 0.0});
  auto join = [&](int l, int r, CopulaSpec s) {
    t.nodes.push_back({-1, l, r, s, 0.0});
    return static_cast<int>(t.nodes.size()) - 1;
  };
  const int on = join(0, 1, CopulaSpec::student_t(8, 0.166));
  const int ab = join(2, 3, CopulaSpec::student_t(5, 0.29));
  const int atl = join(4, 5, CopulaSpec::independence());
  const int west = join(ab, atl, CopulaSpec::student_t(4, cross_rho));
  t.root = join(on, west, CopulaSpec::independence());
  return t;
}

const std::vector<std::pair<std::string, std::string>> kPairs = {
    {"PA_ON", "CA_ON"}, {"PA_AB", "CA_AB"}, {"PA_ATL", "CA_ATL"}};

}  // namespace

TEST_CASE("two lines give a single node") {
  Engine rng(1);
  std::vector<double> a(200), b(200);
  for (std::size_t r = 0; r < 200; ++r) std::tie(a[r], b[r]) = sample_uniform(CopulaSpec::student_t(5, 0.5), rng);
  const CopulaTree t = build_tree({panel_of("A", a), panel_of("B", b)}, {});
  t.validate();
  CHECK(t.leaf_count() == 2);
  CHECK(t.internal_count() == 1);
  CHECK(ids_under(t, t.root) == std::set<std::string>{"A", "B"});
  CHECK(t.nodes[static_cast<std::size_t>(t.root)].spec.family == CopulaFamily::student_t);
  CHECK(t.nodes[static_cast<std::size_t>(t.root)].tau == doctest::Approx(kendall_tau(a, b)));
}

TEST_CASE("structural checks") {
  CopulaTree t = six_line_truth(0.5);
  CHECK_NOTHROW(t.validate());
  CHECK(t.post_order().size() == 5);
  CHECK(t.post_order().back() == t.root);
  CHECK(t.line_index("PA_AB") == 2);
  try {
    t.line_index("XX");
    FAIL("expected a schema error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::schema);
  }
  CopulaTree bad = t;
  bad.nodes[static_cast<std::size_t>(bad.root)].right = bad.nodes[static_cast<std::size_t>(bad.root)].left;
  CHECK_THROWS_AS(bad.validate(), Error);
  CHECK_THROWS_AS(build_tree({panel_of("A", {0.1, 0.2}), panel_of("A", {0.1, 0.2})}, {}), Error);
}

TEST_CASE("regional pairing") {
  const auto pairs = pair_by_region(testing::example_portfolio());
  CHECK(pairs == kPairs);
}

TEST_CASE("strongly dependent clusters are joined first") {
  const CopulaTree truth = six_line_truth(0.6);
  int joined = 0;
  const int reps = 40;
  for (int r = 0; r < reps; ++r) {
    const InnovationPool pool = simulate_innovation_matrix(truth, 465, 1000 + r, false);
    std::vector<InnovationPanel> panels;
    for (int k = 0; k < 6; ++k) panels.push_back(panel_of(truth.lines[static_cast<std::size_t>(k)], pool.column(k)));
    const CopulaTree fitted = build_tree(panels, kPairs);
    fitted.validate();
    const auto& root = fitted.nodes[static_cast<std::size_t>(fitted.root)];
    const std::set<std::string> west = {"PA_AB", "CA_AB", "PA_ATL", "CA_ATL"};
    joined += ids_under(fitted, root.left) == west || ids_under(fitted, root.right) == west;
  }
  CHECK(joined >= 0.95 * reps);
}

TEST_CASE("example portfolio reproduces the provincial tree shape") {
  const Portfolio& pf = testing::example_portfolio();
  std::vector<InnovationPanel> panels;
  for (const auto& tri : pf.lines) panels.push_back(compute_innovations(testing::fixture_model(tri.line_id()), tri));
  const CopulaTree t = build_tree(panels, pair_by_region(pf));
  const auto& root = t.nodes[static_cast<std::size_t>(t.root)];
  std::set<std::set<std::string>> top = {ids_under(t, root.left), ids_under(t, root.right)};
  CHECK(top == std::set<std::set<std::string>>{{"PA_ON", "CA_ON"}, {"PA_AB", "CA_AB", "PA_ATL", "CA_ATL"}});
  for (int node : t.post_order()) {
    const auto& n = t.nodes[static_cast<std::size_t>(node)];
    if (ids_under(t, node) == std::set<std::string>{"PA_ON", "CA_ON"}) {
      REQUIRE(n.spec.family == CopulaFamily::student_t);
      CHECK(std::abs(n.spec.rho - 0.166) < 0.1);
    }
  }
}
