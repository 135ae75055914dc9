#include "trisk/simulate.h"

#include "trisk/ar_correlation.h"
#include "trisk/error.h"
#include "trisk/rng.h"
#include "trisk/tweedie_table.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <exception>
#include <memory>
#include <numeric>
#include <random>

namespace trisk {

namespace {

constexpr std::size_t kBlock = 2048;

std::vector<std::size_t> argsort(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  return order;
}

std::uint64_t mix(std::uint64_t x) {
  x ^= x >> 31;
  x *= 0x7fb5d329728ea185ULL;
  x ^= x >> 27;
  x *= 0x81dadef4bc2dd44dULL;
  x ^= x >> 33;
  return x;
}

// Everything complete_triangles needs, prepared once.
struct Setup {
  int K = 0;
  int I = 0;
  std::vector<int> pool_column;  // portfolio line k -> pool column
  std::vector<std::vector<double>> premiums;
  std::vector<Cell> lower;
  std::vector<std::size_t> row_offset;  // first lower-cell index of row i
  std::vector<std::vector<ConditionalInnovation>> laws;  // [k][i]
  std::vector<std::unique_ptr<tweedie::InverseTable>> tables;  // [k * lower + c]
  InnovationPool pool;
  std::vector<SeededPermutation> subsample;  // per lower cell
};

template <class F>
void for_each(std::size_t n, bool parallel, F&& f) {
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic) if (parallel)
  for (std::size_t c = 0; c < n; ++c) {
    try {
      f(c);
    } catch (...) {
#pragma omp critical(trisk_simulate_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
}

Setup prepare(const Portfolio& portfolio, const std::vector<MarginalModel>& models, const CopulaTree& tree,
              const ScenarioConfig& cfg, bool parallel) {
  if (cfg.n_scenarios < 1) throw Error(ErrorCode::config, "simulation needs at least one scenario");
  if (cfg.oversample < 2) throw Error(ErrorCode::config, "oversample factor must be at least 2");
  if (!(cfg.discount_rate > -1.0) || !std::isfinite(cfg.discount_rate)) {
    throw Error(ErrorCode::config, "discount rate must be finite and > -1");
  }
  tree.validate();
  Setup st;
  st.K = static_cast<int>(portfolio.lines.size());
  st.I = portfolio.index.I();
  if (st.I < 2) throw Error(ErrorCode::domain, "simulation needs at least two accident semesters");
  if (tree.leaf_count() != st.K) throw Error(ErrorCode::config, "copula tree and portfolio have different line counts");

  std::vector<const MarginalModel*> model_of(static_cast<std::size_t>(st.K), nullptr);
  for (int k = 0; k < st.K; ++k) {
    const LossTriangle& tri = portfolio.lines[static_cast<std::size_t>(k)];
    for (const auto& m : models) {
      if (m.line_id == tri.line_id()) model_of[static_cast<std::size_t>(k)] = &m;
    }
    if (!model_of[static_cast<std::size_t>(k)]) throw Error(ErrorCode::config, "no model for line '" + tri.line_id() + "'");
    if (model_of[static_cast<std::size_t>(k)]->size() != st.I) {
      throw Error(ErrorCode::config, "model for line '" + tri.line_id() + "' has the wrong triangle size");
    }
    st.pool_column.push_back(tree.line_index(tri.line_id()));
    st.premiums.push_back(tri.premiums());
  }

  const TriangleIndex& index = portfolio.index;
  st.lower = index.lower_cells();
  st.row_offset.assign(static_cast<std::size_t>(st.I) + 1, 0);
  for (int i = 2; i <= st.I; ++i) st.row_offset[static_cast<std::size_t>(i)] = static_cast<std::size_t>(i - 1) * (i - 2) / 2;

  st.laws.resize(static_cast<std::size_t>(st.K));
  for (int k = 0; k < st.K; ++k) {
    const MarginalModel& m = *model_of[static_cast<std::size_t>(k)];
    const LossTriangle& tri = portfolio.lines[static_cast<std::size_t>(k)];
    auto& laws = st.laws[static_cast<std::size_t>(k)];
    laws.resize(static_cast<std::size_t>(st.I) + 1);
    for (int i = 2; i <= st.I; ++i) {
      const int n_obs = index.observed_in_row(i);
      Eigen::VectorXd obs(n_obs);
      for (int j = 1; j <= n_obs; ++j) obs(j - 1) = m.scaled_innovation(i, j, tri.ratio(i, j));
      laws[static_cast<std::size_t>(i)] = conditional_innovation_params(m.rho, i, st.I, obs);
    }
  }

  const std::size_t L = st.lower.size();
  st.tables.resize(static_cast<std::size_t>(st.K) * L);
  for_each(st.tables.size(), parallel, [&](std::size_t slot) {
    const int k = static_cast<int>(slot / L);
    const Cell c = st.lower[slot % L];
    const MarginalModel& m = *model_of[static_cast<std::size_t>(k)];
    try {
      st.tables[slot] = std::make_unique<tweedie::InverseTable>(
          tweedie::TweedieParams(m.mu(c.i, c.j), m.phi(c.j), m.p), cfg.table_intervals);
    } catch (const Error& e) {
      throw Error(e.code(), "line " + m.line_id + " cell (" + std::to_string(c.i) + "," + std::to_string(c.j) +
                                "): " + e.what());
    }
  });

  const std::size_t m = cfg.n_scenarios * static_cast<std::size_t>(cfg.oversample);
  st.pool = simulate_innovation_matrix(tree, m, derive_seed(cfg.seed, StreamTag::tree_pool), parallel);
  st.subsample.reserve(L);
  for (std::size_t c = 0; c < L; ++c) {
    st.subsample.emplace_back(m, derive_seed(cfg.seed, StreamTag::cell_subsample, c));
  }
  return st;
}

ScenarioSet run(const Portfolio& portfolio, const std::vector<MarginalModel>& models, const CopulaTree& tree,
                const ScenarioConfig& cfg, bool parallel) {
  const Setup st = prepare(portfolio, models, tree, cfg, parallel);
  const int K = st.K;
  const int I = st.I;
  const int T = I - 1;
  const std::size_t N = cfg.n_scenarios;
  const std::size_t L = st.lower.size();

  ScenarioSet out;
  out.n = N;
  out.K = K;
  out.I = I;
  out.seed = cfg.seed;
  out.discount_rate = cfg.discount_rate;
  for (const auto& tri : portfolio.lines) out.lines.push_back(tri.line_id());
  out.cash_flow.assign(N * static_cast<std::size_t>(K) * static_cast<std::size_t>(T), 0.0);

  const std::size_t blocks = (N + kBlock - 1) / kBlock;
  auto fresh_stats = [&]() {
    std::vector<RowStats> stats;
    for (int k = 0; k < K; ++k) {
      for (int i = 2; i <= I; ++i) {
        RowStats r;
        r.line = k;
        r.i = i;
        const std::size_t n_new = static_cast<std::size_t>(i - 1);
        r.sum_ratio.assign(n_new, 0.0);
        r.sum_ratio_sq.assign(n_new, 0.0);
        r.zeros.assign(n_new, 0.0);
        r.sum_z.assign(n_new, 0.0);
        r.cross_z = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_new), static_cast<Eigen::Index>(n_new));
        stats.push_back(std::move(r));
      }
    }
    return stats;
  };
  std::vector<std::vector<RowStats>> block_stats(cfg.collect_cell_stats ? blocks : 0);

  for_each(blocks, parallel, [&](std::size_t b) {
    std::vector<RowStats> local;
    if (cfg.collect_cell_stats) local = fresh_stats();
    std::vector<std::size_t> pool_row(L);
    Eigen::VectorXd u(I), z(I);
    const std::size_t s_end = std::min(N, (b + 1) * kBlock);
    for (std::size_t s = b * kBlock; s < s_end; ++s) {
      for (std::size_t c = 0; c < L; ++c) pool_row[c] = st.subsample[c](s);
      for (int k = 0; k < K; ++k) {
        const int col = st.pool_column[static_cast<std::size_t>(k)];
        double* flow = &out.cash_flow[(s * static_cast<std::size_t>(K) + static_cast<std::size_t>(k)) * static_cast<std::size_t>(T)];
        for (int i = 2; i <= I; ++i) {
          const int n_new = i - 1;
          const std::size_t off = st.row_offset[static_cast<std::size_t>(i)];
          const ConditionalInnovation& law = st.laws[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)];
          for (int a = 0; a < n_new; ++a) u(a) = st.pool(pool_row[off + static_cast<std::size_t>(a)], col);
          z.head(n_new) = law.mean;
          z.head(n_new).noalias() += law.chol.triangularView<Eigen::Lower>() * u.head(n_new);
          RowStats* rs = cfg.collect_cell_stats ? &local[static_cast<std::size_t>(k * (I - 1) + (i - 2))] : nullptr;
          for (int a = 0; a < n_new; ++a) {
            const int j = I + 2 - i + a;
            const std::size_t cell = off + static_cast<std::size_t>(a);
            const double y = st.tables[static_cast<std::size_t>(k) * L + cell]->from_normal_score(z(a));
            flow[i + j - (I + 1) - 1] += y * st.premiums[static_cast<std::size_t>(k)][static_cast<std::size_t>(i - 1)];
            if (rs) {
              rs->sum_ratio[static_cast<std::size_t>(a)] += y;
              rs->sum_ratio_sq[static_cast<std::size_t>(a)] += y * y;
              rs->zeros[static_cast<std::size_t>(a)] += y == 0.0 ? 1.0 : 0.0;
              rs->sum_z[static_cast<std::size_t>(a)] += z(a);
            }
          }
          if (rs) {
            rs->cross_z.noalias() += z.head(n_new) * z.head(n_new).transpose();
            ++rs->count;
          }
        }
      }
    }
    if (cfg.collect_cell_stats) block_stats[b] = std::move(local);
  });

  if (cfg.collect_cell_stats) {
    out.stats = fresh_stats();
    for (auto& r : out.stats) r.law = st.laws[static_cast<std::size_t>(r.line)][static_cast<std::size_t>(r.i)];
    for (const auto& bs : block_stats) {
      for (std::size_t r = 0; r < bs.size(); ++r) {
        RowStats& dst = out.stats[r];
        const RowStats& src = bs[r];
        dst.count += src.count;
        for (std::size_t a = 0; a < dst.sum_ratio.size(); ++a) {
          dst.sum_ratio[a] += src.sum_ratio[a];
          dst.sum_ratio_sq[a] += src.sum_ratio_sq[a];
          dst.zeros[a] += src.zeros[a];
          dst.sum_z[a] += src.sum_z[a];
        }
        dst.cross_z += src.cross_z;
      }
    }
  }
  return out;
}

}  // namespace

std::vector<double> InnovationPool::column(int k) const {
  std::vector<double> c(rows);
  for (std::size_t r = 0; r < rows; ++r) c[r] = (*this)(r, k);
  return c;
}

std::vector<std::size_t> rank_matching_order(const std::vector<double>& values, const std::vector<double>& target) {
  if (values.size() != target.size()) throw Error(ErrorCode::domain, "rank matching: sizes differ");
  const std::vector<std::size_t> by_value = argsort(values);
  const std::vector<std::size_t> by_target = argsort(target);
  std::vector<std::size_t> out(values.size());
  // The row holding the r-th smallest target receives the r-th smallest value.
  for (std::size_t r = 0; r < values.size(); ++r) out[by_target[r]] = by_value[r];
  return out;
}

InnovationPool simulate_innovation_matrix(const CopulaTree& tree, std::size_t m, std::uint64_t seed, bool parallel) {
  tree.validate();
  if (m < 1) throw Error(ErrorCode::config, "innovation pool needs at least one row");
  const int K = tree.leaf_count();
  std::vector<std::vector<double>> cols(static_cast<std::size_t>(K));
  for_each(static_cast<std::size_t>(K), parallel, [&](std::size_t k) {
    Engine rng = make_stream(seed, StreamTag::innovation_column, k);
    std::normal_distribution<double> normal;
    cols[k].resize(m);
    for (double& v : cols[k]) v = normal(rng);
  });

  const std::vector<int> order = tree.post_order();
  std::vector<std::vector<std::pair<double, double>>> samples(order.size());
  for_each(order.size(), parallel, [&](std::size_t q) {
    Engine rng = make_stream(seed, StreamTag::copula_node, static_cast<std::uint64_t>(order[q]));
    const CopulaSpec& spec = tree.nodes[static_cast<std::size_t>(order[q])].spec;
    samples[q].resize(m);
    for (auto& pr : samples[q]) pr = sample_latent(spec, rng);
  });

  std::vector<double> first(m), second(m);
  for (std::size_t q = 0; q < order.size(); ++q) {
    const CopulaTree::Node& node = tree.nodes[static_cast<std::size_t>(order[q])];
    for (std::size_t r = 0; r < m; ++r) std::tie(first[r], second[r]) = samples[q][r];
    for (const auto& [child, target] : {std::pair{node.left, &first}, std::pair{node.right, &second}}) {
      const std::vector<int> leaves = tree.leaves_under(child);
      std::vector<double> agg(m, 0.0);
      for (int k : leaves) {
        for (std::size_t r = 0; r < m; ++r) agg[r] += cols[static_cast<std::size_t>(k)][r];
      }
      const std::vector<std::size_t> perm = rank_matching_order(agg, *target);
      std::vector<double> tmp(m);
      for (int k : leaves) {
        auto& c = cols[static_cast<std::size_t>(k)];
        for (std::size_t r = 0; r < m; ++r) tmp[r] = c[perm[r]];
        c.swap(tmp);
      }
    }
  }

  InnovationPool pool;
  pool.rows = m;
  pool.cols = K;
  pool.values.resize(m * static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k) {
    for (std::size_t r = 0; r < m; ++r) pool.values[r * static_cast<std::size_t>(K) + static_cast<std::size_t>(k)] = cols[static_cast<std::size_t>(k)][r];
  }
  return pool;
}

SeededPermutation::SeededPermutation(std::uint64_t n, std::uint64_t key) : n_(n) {
  if (n < 1) throw Error(ErrorCode::domain, "permutation of an empty range");
  const int bits = n <= 1 ? 1 : std::bit_width(n - 1);
  half_bits_ = std::max(1, (bits + 1) / 2);
  mask_ = (std::uint64_t{1} << half_bits_) - 1;
  std::uint64_t state = key;
  for (auto& k : keys_) k = splitmix64(state);
}

std::uint64_t SeededPermutation::round(int r, std::uint64_t half) const {
  return mix(half ^ keys_[r]) & mask_;
}

std::uint64_t SeededPermutation::operator()(std::uint64_t x) const {
  if (x >= n_) throw Error(ErrorCode::domain, "permutation argument out of range");
  do {
    std::uint64_t left = x >> half_bits_;
    std::uint64_t right = x & mask_;
    for (int r = 0; r < 4; ++r) {
      const std::uint64_t next = left ^ round(r, right);
      left = right;
      right = next;
    }
    x = (left << half_bits_) | right;
  } while (x >= n_);
  return x;
}

ConditionalInnovation conditional_innovation_params(double rho, int i, int I, const Eigen::VectorXd& observed) {
  if (i < 2 || i > I) throw Error(ErrorCode::domain, "conditional law needs 2 <= i <= I");
  const int n_obs = I + 1 - i;
  if (observed.size() != n_obs) {
    throw Error(ErrorCode::domain, "conditional law: expected " + std::to_string(n_obs) + " observed innovations, got " +
                                       std::to_string(observed.size()));
  }
  const ConditionalLaw law = conditional_law(rho, observed, i - 1);
  return {law.mean, law.cov, law.chol};
}

std::vector<double> ScenarioSet::discounted_line(int k) const {
  std::vector<double> factor(static_cast<std::size_t>(periods()));
  for (int t = 1; t <= periods(); ++t) factor[static_cast<std::size_t>(t - 1)] = std::pow(1.0 + discount_rate, -t);
  std::vector<double> out(n, 0.0);
  for (std::size_t s = 0; s < n; ++s) {
    double acc = 0.0;
    for (int t = 1; t <= periods(); ++t) acc += flow(s, k, t) * factor[static_cast<std::size_t>(t - 1)];
    out[s] = acc;
  }
  return out;
}

std::vector<double> ScenarioSet::discounted_aggregate() const {
  std::vector<double> out(n, 0.0);
  for (int k = 0; k < K; ++k) {
    const std::vector<double> line = discounted_line(k);
    for (std::size_t s = 0; s < n; ++s) out[s] += line[s];
  }
  return out;
}

std::vector<double> ScenarioSet::period_flow(int t, int k) const {
  if (t < 1 || t > periods()) throw Error(ErrorCode::domain, "period out of range");
  std::vector<double> out(n, 0.0);
  for (std::size_t s = 0; s < n; ++s) {
    if (k >= 0) {
      out[s] = flow(s, k, t);
    } else {
      for (int q = 0; q < K; ++q) out[s] += flow(s, q, t);
    }
  }
  return out;
}

const RowStats& ScenarioSet::row_stats(int line, int i) const {
  for (const auto& r : stats) {
    if (r.line == line && r.i == i) return r;
  }
  throw Error(ErrorCode::domain, "no statistics recorded for this row");
}

ScenarioSet complete_triangles(const Portfolio& portfolio, const std::vector<MarginalModel>& models,
                               const CopulaTree& tree, const ScenarioConfig& config) {
  return run(portfolio, models, tree, config, true);
}

ScenarioSet complete_triangles_serial(const Portfolio& portfolio, const std::vector<MarginalModel>& models,
                                      const CopulaTree& tree, const ScenarioConfig& config) {
  return run(portfolio, models, tree, config, false);
}

}  // namespace trisk
