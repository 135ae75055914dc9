#include "trisk/dependence.h"

#include "trisk/ar_correlation.h"
#include "trisk/error.h"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>

namespace trisk {

InnovationPanel compute_innovations(const MarginalModel& model, const LossTriangle& tri) {
  const TriangleIndex& index = tri.index();
  if (model.size() != index.I()) throw Error(ErrorCode::domain, "innovations: model and triangle sizes differ");
  InnovationPanel panel;
  panel.line_id = tri.line_id();
  panel.cells = index.upper_cells();
  panel.scaled.reserve(panel.cells.size());
  panel.decorrelated.reserve(panel.cells.size());
  for (int i = 1; i <= index.I(); ++i) {
    const int n = index.observed_in_row(i);
    Eigen::VectorXd y(n);
    for (int j = 1; j <= n; ++j) y(j - 1) = model.scaled_innovation(i, j, tri.ratio(i, j));
    const Eigen::VectorXd u = ARCorrelation(model.rho, n).whiten(y);
    for (int j = 0; j < n; ++j) {
      panel.scaled.push_back(y(j));
      panel.decorrelated.push_back(u(j));
    }
  }
  panel.pseudo = pseudo_observations(panel.decorrelated);
  return panel;
}

int CopulaTree::internal_count() const {
  return static_cast<int>(std::count_if(nodes.begin(), nodes.end(), [](const Node& n) { return !n.is_leaf(); }));
}

std::vector<int> CopulaTree::leaves_under(int node) const {
  std::vector<int> out;
  std::function<void(int)> walk = [&](int k) {
    const Node& n = nodes.at(static_cast<std::size_t>(k));
    if (n.is_leaf()) {
      out.push_back(n.line);
      return;
    }
    walk(n.left);
    walk(n.right);
  };
  walk(node);
  return out;
}

std::vector<int> CopulaTree::post_order() const {
  std::vector<int> out;
  std::function<void(int)> walk = [&](int k) {
    const Node& n = nodes.at(static_cast<std::size_t>(k));
    if (n.is_leaf()) return;
    walk(n.left);
    walk(n.right);
    out.push_back(k);
  };
  if (root >= 0) walk(root);
  return out;
}

int CopulaTree::line_index(const std::string& id) const {
  const auto it = std::find(lines.begin(), lines.end(), id);
  if (it == lines.end()) throw Error(ErrorCode::schema, "copula tree has no line '" + id + "'");
  return static_cast<int>(it - lines.begin());
}

void CopulaTree::validate() const {
  const int k = leaf_count();
  if (k < 1) throw Error(ErrorCode::schema, "copula tree has no lines");
  if (root < 0 || root >= static_cast<int>(nodes.size())) throw Error(ErrorCode::schema, "copula tree has no root");
  std::vector<int> seen(static_cast<std::size_t>(k), 0);
  std::vector<int> visits(nodes.size(), 0);
  std::function<void(int)> walk = [&](int n) {
    if (n < 0 || n >= static_cast<int>(nodes.size())) throw Error(ErrorCode::schema, "copula tree: dangling child");
    if (visits[static_cast<std::size_t>(n)]++) throw Error(ErrorCode::schema, "copula tree: node reached twice");
    const Node& node = nodes[static_cast<std::size_t>(n)];
    if (node.is_leaf()) {
      if (node.line >= k) throw Error(ErrorCode::schema, "copula tree: leaf line out of range");
      ++seen[static_cast<std::size_t>(node.line)];
      return;
    }
    walk(node.left);
    walk(node.right);
  };
  walk(root);
  for (int c = 0; c < k; ++c) {
    if (seen[static_cast<std::size_t>(c)] != 1) {
      throw Error(ErrorCode::schema, "copula tree: line '" + lines[static_cast<std::size_t>(c)] + "' must appear exactly once");
    }
  }
  if (internal_count() != k - 1) throw Error(ErrorCode::schema, "copula tree: expected K-1 copula nodes");
}

CopulaTree build_tree(const std::vector<InnovationPanel>& panels,
                      const std::vector<std::pair<std::string, std::string>>& pairs, const TreeOptions& opt) {
  if (panels.size() < 2) throw Error(ErrorCode::domain, "copula tree needs at least two lines");
  const std::size_t n = panels.front().decorrelated.size();
  CopulaTree tree;
  for (const auto& p : panels) {
    if (p.decorrelated.size() != n) throw Error(ErrorCode::domain, "copula tree: panels differ in size");
    if (std::find(tree.lines.begin(), tree.lines.end(), p.line_id) != tree.lines.end()) {
      throw Error(ErrorCode::config, "copula tree: duplicate line '" + p.line_id + "'");
    }
    tree.lines.push_back(p.line_id);
  }

  struct Cluster {
    int node;
    std::vector<double> aggregate;
  };
  std::vector<Cluster> clusters;
  std::vector<int> leaf_node(panels.size(), -1);
  for (std::size_t k = 0; k < panels.size(); ++k) {
    CopulaTree::Node leaf;
    leaf.line = static_cast<int>(k);
    leaf_node[k] = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back(leaf);
  }

  auto join = [&](const Cluster& a, const Cluster& b) {
    CopulaTree::Node node;
    node.left = a.node;
    node.right = b.node;
    const std::vector<double> va = pseudo_observations(a.aggregate);
    const std::vector<double> vb = pseudo_observations(b.aggregate);
    node.tau = kendall_tau(a.aggregate, b.aggregate);
    node.spec = fit_bivariate(va, vb, opt.max_nu, opt.level);
    const int id = static_cast<int>(tree.nodes.size());
    if (opt.gof_bootstrap > 0) {
      node.spec.gof_p_value =
          gof_cvm(node.spec, va, vb, opt.gof_bootstrap, derive_seed(opt.seed, StreamTag::copula_node, id)).p_value;
    }
    tree.nodes.push_back(node);
    Cluster c{id, a.aggregate};
    for (std::size_t r = 0; r < n; ++r) c.aggregate[r] += b.aggregate[r];
    return c;
  };

  std::vector<bool> used(panels.size(), false);
  for (const auto& [first, second] : pairs) {
    const int a = tree.line_index(first);
    const int b = tree.line_index(second);
    if (a == b || used[static_cast<std::size_t>(a)] || used[static_cast<std::size_t>(b)]) {
      throw Error(ErrorCode::config, "copula tree: line paired twice ('" + first + "', '" + second + "')");
    }
    used[static_cast<std::size_t>(a)] = used[static_cast<std::size_t>(b)] = true;
    clusters.push_back(join({leaf_node[static_cast<std::size_t>(a)], panels[static_cast<std::size_t>(a)].decorrelated},
                            {leaf_node[static_cast<std::size_t>(b)], panels[static_cast<std::size_t>(b)].decorrelated}));
  }
  for (std::size_t k = 0; k < panels.size(); ++k) {
    if (!used[k]) clusters.push_back({leaf_node[k], panels[k].decorrelated});
  }

  while (clusters.size() > 1) {
    std::size_t ba = 0, bb = 1;
    double best = -1.0;
    for (std::size_t a = 0; a < clusters.size(); ++a) {
      for (std::size_t b = a + 1; b < clusters.size(); ++b) {
        const double t = std::abs(kendall_tau(clusters[a].aggregate, clusters[b].aggregate));
        if (t > best) {
          best = t;
          ba = a;
          bb = b;
        }
      }
    }
    Cluster merged = join(clusters[ba], clusters[bb]);
    clusters.erase(clusters.begin() + static_cast<std::ptrdiff_t>(bb));
    clusters.erase(clusters.begin() + static_cast<std::ptrdiff_t>(ba));
    clusters.push_back(std::move(merged));
  }
  tree.root = clusters.front().node;
  tree.validate();
  return tree;
}

std::vector<std::pair<std::string, std::string>> pair_by_region(const Portfolio& portfolio) {
  std::vector<std::string> order;
  std::map<std::string, std::vector<std::string>> by_region;
  for (const auto& line : portfolio.lines) {
    if (!by_region.count(line.region())) order.push_back(line.region());
    by_region[line.region()].push_back(line.line_id());
  }
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& region : order) {
    const auto& ids = by_region[region];
    for (std::size_t c = 0; c + 1 < ids.size(); c += 2) out.emplace_back(ids[c], ids[c + 1]);
  }
  return out;
}

}  // namespace trisk
