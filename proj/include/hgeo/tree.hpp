#pragma once

// Regular (spherically symmetric) rooted trees with breadth-first node indexing,
// plus the distance and lowest-common-ancestor geometry derived from them.

#include <Eigen/Core>

#include <algorithm>
#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "hgeo/errors.hpp"

namespace hgeo {

/// Rooted tree in which every node at depth d has exactly b_d children.
///
/// Nodes are indexed breadth-first: root = 0, then level by level, with the
/// children of a node stored contiguously. Consequently the descendants of a
/// node at any fixed relative depth occupy a contiguous index range.
class TreeTopology {
 public:
  static constexpr std::size_t kMaxNodes = 20000;

  explicit TreeTopology(std::vector<int> profile) : profile_(std::move(profile)) {
    for (std::size_t d = 0; d < profile_.size(); ++d) {
      detail::require(profile_[d] >= 2, "branching factor at depth " + std::to_string(d) +
                                            " must be >= 2, got " + std::to_string(profile_[d]));
    }
    level_begin_.push_back(0);
    level_size_.push_back(1);
    std::size_t total = 1;
    for (int b : profile_) {
      const std::size_t next = level_size_.back() * static_cast<std::size_t>(b);
      detail::require(next <= kMaxNodes && total + next <= kMaxNodes,
                      "tree exceeds the " + std::to_string(kMaxNodes) + "-node cap");
      level_begin_.push_back(total);
      level_size_.push_back(next);
      total += next;
    }
    node_count_ = total;
    depth_of_.resize(node_count_);
    for (int d = 0; d <= depth(); ++d) {
      std::fill_n(depth_of_.begin() + static_cast<std::ptrdiff_t>(level_begin_[d]), level_size_[d], d);
    }
  }

  int depth() const { return static_cast<int>(profile_.size()); }
  const std::vector<int>& profile() const { return profile_; }
  int branching(int level) const { return profile_.at(static_cast<std::size_t>(level)); }
  int node_count() const { return static_cast<int>(node_count_); }

  int level_size(int level) const { return static_cast<int>(level_size_.at(static_cast<std::size_t>(level))); }
  int level_begin(int level) const { return static_cast<int>(level_begin_.at(static_cast<std::size_t>(level))); }

  int node_depth(int node) const { return depth_of_.at(static_cast<std::size_t>(node)); }
  int height(int node) const { return depth() - node_depth(node); }
  bool is_leaf(int node) const { return node_depth(node) == depth(); }
  bool is_constant_profile() const {
    return std::adjacent_find(profile_.begin(), profile_.end(), std::not_equal_to<>()) == profile_.end();
  }

  /// -1 for the root.
  int parent(int node) const {
    const int d = node_depth(node);
    if (d == 0) return -1;
    const int local = node - level_begin(d);
    return level_begin(d - 1) + local / branching(d - 1);
  }

  int child(int node, int c) const {
    const int d = node_depth(node);
    detail::require(d < depth(), "leaf node has no children");
    detail::require(c >= 0 && c < branching(d), "child index out of range");
    const int local = node - level_begin(d);
    return level_begin(d + 1) + local * branching(d) + c;
  }

  /// Number of descendants of a depth-`d` node at relative depth `r` (N_{d,r}).
  int subtree_level_size(int d, int r) const {
    int n = 1;
    for (int q = d; q < d + r; ++q) n *= branching(q);
    return n;
  }

  /// Half-open index range of the descendants of `node` at relative depth `r`.
  std::pair<int, int> descendants_at(int node, int r) const {
    const int d = node_depth(node);
    detail::require(r >= 0 && d + r <= depth(), "relative depth out of range");
    const int width = subtree_level_size(d, r);
    const int local = node - level_begin(d);
    const int begin = level_begin(d + r) + local * width;
    return {begin, begin + width};
  }

  int ancestor_at_depth(int node, int target_depth) const {
    int d = node_depth(node);
    detail::require(target_depth >= 0 && target_depth <= d, "ancestor depth out of range");
    int local = node - level_begin(d);
    while (d > target_depth) {
      local /= branching(d - 1);
      --d;
    }
    return level_begin(d) + local;
  }

  int lca(int a, int b) const {
    int d = std::min(node_depth(a), node_depth(b));
    a = ancestor_at_depth(a, d);
    b = ancestor_at_depth(b, d);
    while (a != b) {
      a = parent(a);
      b = parent(b);
    }
    return a;
  }

  int distance(int a, int b) const {
    return node_depth(a) + node_depth(b) - 2 * node_depth(lca(a, b));
  }

  bool operator==(const TreeTopology& other) const { return profile_ == other.profile_; }

 private:
  std::vector<int> profile_;
  std::vector<std::size_t> level_begin_;
  std::vector<std::size_t> level_size_;
  std::vector<int> depth_of_;
  std::size_t node_count_ = 0;
};

inline TreeTopology build_regular_tree(const std::vector<int>& branching_profile, int depth) {
  detail::require(depth >= 0, "depth must be nonnegative");
  detail::require(static_cast<int>(branching_profile.size()) == depth,
                  "branching profile length " + std::to_string(branching_profile.size()) +
                      " does not match depth " + std::to_string(depth));
  return TreeTopology(branching_profile);
}

/// Full s-ary tree of depth L.
inline TreeTopology build_sary_tree(int s, int depth) {
  return build_regular_tree(std::vector<int>(static_cast<std::size_t>(std::max(depth, 0)), s), depth);
}

/// Symmetric matrix of edge distances between tree nodes.
class DistanceMatrix {
 public:
  explicit DistanceMatrix(Eigen::MatrixXi values) : values_(std::move(values)) {
    detail::require(values_.rows() == values_.cols(), "distance matrix must be square");
  }

  int operator()(Eigen::Index i, Eigen::Index j) const { return values_(i, j); }
  Eigen::Index size() const { return values_.rows(); }
  int max() const { return values_.size() == 0 ? 0 : values_.maxCoeff(); }
  const Eigen::MatrixXi& values() const { return values_; }

 private:
  Eigen::MatrixXi values_;
};

inline DistanceMatrix tree_distance_matrix(const TreeTopology& tree) {
  const int n = tree.node_count();
  Eigen::MatrixXi d(n, n);
  for (int i = 0; i < n; ++i) {
    d(i, i) = 0;
    for (int j = i + 1; j < n; ++j) d(i, j) = d(j, i) = tree.distance(i, j);
  }
  return DistanceMatrix(std::move(d));
}

/// Entry (i, j) is the depth of the lowest common ancestor of i and j.
inline Eigen::MatrixXi lca_depth_matrix(const TreeTopology& tree) {
  const int n = tree.node_count();
  Eigen::MatrixXi m(n, n);
  for (int i = 0; i < n; ++i) {
    m(i, i) = tree.node_depth(i);
    for (int j = i + 1; j < n; ++j) m(i, j) = m(j, i) = tree.node_depth(tree.lca(i, j));
  }
  return m;
}

inline void to_json(nlohmann::json& j, const TreeTopology& tree) {
  j = nlohmann::json{{"depth", tree.depth()}, {"profile", tree.profile()}};
}

inline TreeTopology tree_from_json(const nlohmann::json& j) {
  try {
    return build_regular_tree(j.at("profile").get<std::vector<int>>(), j.at("depth").get<int>());
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("invalid tree JSON: ") + e.what());
  }
}

}  // namespace hgeo
