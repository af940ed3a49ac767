#pragma once

// End-to-end glue: M* on a hierarchy, embeddings from it, kernel fitting from
// frontier-sampled pairs, and the per-root alignment sweep with baselines.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "hgeo/concept.hpp"
#include "hgeo/cooccur.hpp"
#include "hgeo/errors.hpp"
#include "hgeo/fitkernel.hpp"
#include "hgeo/hierarchy.hpp"
#include "hgeo/kernel.hpp"
#include "hgeo/rng.hpp"
#include "hgeo/spectra.hpp"
#include "hgeo/tree.hpp"

namespace hgeo {

/// M* over every hierarchy node, in hierarchy index order.
inline MstarView hierarchy_mstar(const CooccurrenceStats& stats, const ContractedHierarchy& h) {
  return mstar_restricted(stats, h.ids());
}

/// Rows of the top positive spectral modes of `mstar`, keyed by `tokens`.
inline EmbeddingTable embedding_table_from(const Eigen::MatrixXd& mstar, const std::vector<std::string>& tokens,
                                           int dim) {
  const EmbeddingMatrix e = build_embedding(mstar, dim);
  detail::require(!e.empty, "M* has no positive eigenvalue; embedding is empty");
  return EmbeddingTable(tokens, e.W);
}

/// Embedding of M* over the whole count vocabulary, optionally centered over it.
inline EmbeddingTable embedding_from_counts(const CooccurrenceStats& stats, int dim, bool center = true) {
  const MstarView view = mstar_restricted(stats, stats.vocabulary());
  EmbeddingTable table = embedding_table_from(view.matrix, stats.vocabulary(), dim);
  if (center && table.size() >= 2) table = center_whiten(table, false);
  return table;
}

struct DecayFitConfig {
  KernelFamily family = KernelFamily::Exponential;
  int max_distance = 6;
  std::size_t pairs_per_distance = 5000;
  std::uint64_t seed = 0;
};

struct DecayFitResult {
  DecayBins bins;
  KernelFit fit;
};

/// Frontier-weighted pairs at d = 0..max_distance (capped at the tree
/// diameter), binned means, then the parametric fit.
inline DecayFitResult fit_kernel_from_mstar(const ContractedHierarchy& h, const Eigen::MatrixXd& mstar,
                                            const DecayFitConfig& cfg) {
  detail::require(mstar.rows() == h.size() && mstar.cols() == h.size(), "M* size does not match the hierarchy");
  detail::require(cfg.family != KernelFamily::Tabulated, "fit family must be parametric");
  std::vector<WeightedPair> pairs;
  std::vector<int> distances;
  for (int d = 0; d <= cfg.max_distance; ++d) {
    distances.push_back(d);
    Rng rng = make_substream(cfg.seed, 3, static_cast<std::uint64_t>(d));
    try {
      auto p = sample_distance_pairs(h, d, cfg.pairs_per_distance, rng);
      pairs.insert(pairs.end(), p.begin(), p.end());
    } catch (const InputError&) {
      // Beyond the diameter; the empty bin is reported by binned_decay.
    }
  }
  DecayFitResult r;
  r.bins = binned_decay([&](int i, int j) { return mstar(i, j); }, pairs, distances);
  r.fit = cfg.family == KernelFamily::Exponential ? fit_exponential(r.bins, cfg.max_distance)
                                                  : fit_power_law(r.bins, cfg.max_distance);
  for (const auto& w : r.bins.warnings) r.fit.warnings.push_back(w);
  return r;
}

// ---------------------------------------------------------------- root sweep

struct SweepConfig {
  int L = 3;
  std::size_t trees_per_root = 5000;
  std::size_t baseline_repeats = 1;  ///< shuffles per tree and mode
  std::uint64_t seed = 0;
};

struct RootSweepEntry {
  int root = -1;
  std::string root_id;
  double structures = 0.0;  ///< N(root, L)
  bool enumerated = false;  ///< all structures used instead of sampling
  std::vector<std::vector<int>> trees;
  AlignmentReport report;
};

struct SweepResult {
  int n = 0;
  std::vector<RootSweepEntry> roots;
  AlignmentReport pooled;  ///< every tree of every root
};

/// All structures at `root` when there are at most trees_per_root (returns
/// true), else trees_per_root uniform draws from substreams (seed, root, t).
inline bool select_trees(const ContractedHierarchy& h, const SubtreeCountTable& table, int root,
                         const SweepConfig& cfg, std::vector<std::vector<int>>& trees) {
  trees.clear();
  if (auto all = enumerate_binary_subtrees(h, table, root, cfg.L, static_cast<double>(cfg.trees_per_root))) {
    trees = std::move(*all);
    return true;
  }
  for (std::size_t t = 0; t < cfg.trees_per_root; ++t) {
    Rng rng = make_substream(cfg.seed, static_cast<std::uint64_t>(root), t);
    trees.push_back(sample_binary_subtree(h, table, root, cfg.L, rng));
  }
  return false;
}

/// For each root with N(root, L) >= 1: enumerate its structures when there are
/// at most trees_per_root, else sample that many. Each tree's empirical Gram
/// (rows of `vectors`) is aligned with the kernel Gram of the perfect binary
/// tree, alongside within-tree shuffles and global shuffles that draw rows
/// from the whole table.
inline SweepResult run_root_sweep(const ContractedHierarchy& h, const EmbeddingTable& vectors,
                                  const KernelSpec& kernel, const SweepConfig& cfg) {
  detail::require(cfg.L >= 1, "sweep depth must be >= 1");
  detail::require(cfg.trees_per_root >= 1, "trees per root must be >= 1");
  std::vector<int> row_of(static_cast<std::size_t>(h.size()));
  std::string missing;
  for (int u = 0; u < h.size(); ++u) {
    auto r = vectors.find(h.id(u));
    if (!r) {
      missing += (missing.empty() ? "" : ", ") + h.id(u);
      continue;
    }
    row_of[static_cast<std::size_t>(u)] = *r;
  }
  detail::require(missing.empty(), "hierarchy nodes without vectors: " + missing);
  const Eigen::MatrixXd& pool = vectors.rows();

  const TreeTopology shape = build_sary_tree(2, cfg.L);
  const int n = shape.node_count();
  detail::require(h.size() >= n, "hierarchy is smaller than one sampled tree");
  const Eigen::MatrixXd theory = kernel_gram(kernel, shape);
  const SubtreeCountTable table = count_binary_subtrees(h, cfg.L);
  const std::vector<int> roots = eligible_roots(table);
  detail::require(!roots.empty(), "no eligible roots with a depth-" + std::to_string(cfg.L) + " binary subtree");

  SweepResult out;
  out.n = n;
  std::vector<std::vector<double>> all_emp, all_global, all_within;
  for (int root : roots) {
    RootSweepEntry e;
    e.root = root;
    e.root_id = h.id(root);
    e.structures = table(root, cfg.L);
    e.enumerated = select_trees(h, table, root, cfg, e.trees);
    std::vector<std::vector<double>> emp, global, within;
    for (std::size_t t = 0; t < e.trees.size(); ++t) {
      Eigen::MatrixXd w(n, vectors.dim());
      for (int k = 0; k < n; ++k) w.row(k) = pool.row(row_of[static_cast<std::size_t>(e.trees[t][static_cast<std::size_t>(k)])]);
      emp.push_back(topk_alignment(w * w.transpose(), theory, n).g);
      Rng rng = make_substream(cfg.seed ^ 0x9e3779b97f4a7c15ULL, static_cast<std::uint64_t>(root), t);
      for (std::size_t rep = 0; rep < cfg.baseline_repeats; ++rep) {
        within.push_back(topk_alignment(within_tree_shuffle(w, rng), theory, n).g);
        global.push_back(topk_alignment(global_shuffle(pool, n, rng), theory, n).g);
      }
    }
    all_emp.insert(all_emp.end(), emp.begin(), emp.end());
    all_global.insert(all_global.end(), global.begin(), global.end());
    all_within.insert(all_within.end(), within.begin(), within.end());
    e.report = make_alignment_report(e.root_id, n, emp, global, within);
    out.roots.push_back(std::move(e));
  }
  out.pooled = make_alignment_report("pooled", n, all_emp, all_global, all_within);
  return out;
}

/// Rows of `table` permuted across tokens (breaks every token-vector pairing).
inline EmbeddingTable shuffle_table_rows(const EmbeddingTable& table, Rng& rng) {
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(table.size()));
  for (std::size_t k = 0; k < perm.size(); ++k) perm[k] = static_cast<Eigen::Index>(k);
  std::shuffle(perm.begin(), perm.end(), rng);
  Eigen::MatrixXd rows(table.size(), table.dim());
  for (Eigen::Index i = 0; i < table.size(); ++i) rows.row(i) = table.rows().row(perm[static_cast<std::size_t>(i)]);
  return EmbeddingTable(table.tokens(), std::move(rows), table.preprocessing());
}

struct ControlResult {
  std::vector<double> areas;  ///< pooled mean area per permutation
  double mean = 0.0;
  double se = 0.0;
};

/// Root sweep on token-shuffled tables. Trees overlap heavily, so the
/// permutation (not the tree) is the unit of replication for the SE.
inline ControlResult shuffled_input_control(const ContractedHierarchy& h, const EmbeddingTable& vectors,
                                            const KernelSpec& kernel, SweepConfig cfg, std::size_t permutations) {
  detail::require(permutations >= 2, "the shuffled-input control needs at least 2 permutations");
  cfg.baseline_repeats = 0;
  ControlResult r;
  for (std::size_t k = 0; k < permutations; ++k) {
    Rng rng = make_substream(cfg.seed, 0x636f6e74726f6cULL, k);
    const EmbeddingTable shuffled = shuffle_table_rows(vectors, rng);
    r.areas.push_back(run_root_sweep(h, shuffled, kernel, cfg).pooled.empirical.area_mean);
  }
  for (double a : r.areas) r.mean += a;
  r.mean /= static_cast<double>(r.areas.size());
  double v = 0.0;
  for (double a : r.areas) v += (a - r.mean) * (a - r.mean);
  r.se = std::sqrt(v / static_cast<double>(r.areas.size() - 1) / static_cast<double>(r.areas.size()));
  return r;
}

}  // namespace hgeo
