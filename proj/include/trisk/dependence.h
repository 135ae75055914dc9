#pragma once

#include "trisk/copula.h"
#include "trisk/marginal.h"
#include "trisk/triangles.h"

#include <string>
#include <utility>
#include <vector>

namespace trisk {

/// Residual panel of one line over the observed cells, row-major.
struct InnovationPanel {
  std::string line_id;
  std::vector<Cell> cells;
  std::vector<double> scaled;        // (Y - mu) / sqrt(phi mu^p)
  std::vector<double> decorrelated;  // per accident semester, L^{-1} applied to `scaled`
  std::vector<double> pseudo;        // rank(decorrelated) / (n + 1)
};

InnovationPanel compute_innovations(const MarginalModel& model, const LossTriangle& triangle);

/// Binary tree over lines. Leaves carry a line index; internal nodes a copula
/// joining the aggregates of their two subtrees.
struct CopulaTree {
  struct Node {
    int line = -1;  // >= 0 for leaves
    int left = -1;
    int right = -1;
    CopulaSpec spec;
    double tau = 0.0;  // Kendall tau between the two child aggregates, when fitted
    bool is_leaf() const { return line >= 0; }
  };

  std::vector<std::string> lines;
  std::vector<Node> nodes;
  int root = -1;

  int leaf_count() const { return static_cast<int>(lines.size()); }
  int internal_count() const;
  /// Line indices below `node`, left to right.
  std::vector<int> leaves_under(int node) const;
  /// Internal nodes with children before parents.
  std::vector<int> post_order() const;
  int line_index(const std::string& id) const;
  void validate() const;
};

struct TreeOptions {
  int max_nu = kMaxCopulaNu;
  double level = kIndependenceLevel;
  int gof_bootstrap = 0;  // 0 skips the goodness-of-fit test
  std::uint64_t seed = 1;
};

/// Fits the given first-level pairs, then repeatedly joins the two clusters
/// whose aggregate decorrelated innovations have the largest |Kendall tau|.
/// Lines not named in a pair start as singleton clusters.
CopulaTree build_tree(const std::vector<InnovationPanel>& panels,
                      const std::vector<std::pair<std::string, std::string>>& pairs,
                      const TreeOptions& options = {});

/// Regional pairing: lines sharing a region are paired in order of appearance.
std::vector<std::pair<std::string, std::string>> pair_by_region(const Portfolio& portfolio);

}  // namespace trisk
