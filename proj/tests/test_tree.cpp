#include <gtest/gtest.h>

#include <random>

#include "fixtures.hpp"

using namespace hgeo;

TEST(Tree, NodeCounts) {
  EXPECT_EQ(build_regular_tree({2}, 1).node_count(), 3);
  EXPECT_EQ(build_sary_tree(2, 3).node_count(), 15);
  EXPECT_EQ(build_regular_tree({3, 2}, 2).node_count(), 10);
  EXPECT_EQ(build_sary_tree(3, 0).node_count(), 1);
}

TEST(Tree, RejectsBadProfiles) {
  EXPECT_THROW(build_regular_tree({1}, 1), InputError);
  EXPECT_THROW(build_regular_tree({2, 2}, 3), InputError);
  EXPECT_THROW(build_sary_tree(2, 20), InputError);  // over the node cap
}

TEST(Tree, BreadthFirstInvariants) {
  const auto t = build_regular_tree({3, 2, 4}, 3);
  for (int v = 1; v < t.node_count(); ++v) EXPECT_LT(t.parent(v), v);
  for (int v = 0; v < t.node_count(); ++v) {
    if (t.is_leaf(v)) {
      EXPECT_EQ(t.node_depth(v), 3);
      continue;
    }
    const int b = t.branching(t.node_depth(v));
    for (int c = 0; c < b; ++c) EXPECT_EQ(t.parent(t.child(v, c)), v);
    if (b > 1) EXPECT_EQ(t.child(v, 1), t.child(v, 0) + 1);  // contiguous
  }
}

TEST(Tree, DistanceExamples) {
  const auto t1 = build_sary_tree(2, 1);
  const auto d1 = tree_distance_matrix(t1);
  EXPECT_EQ(d1(0, 1), 1);
  EXPECT_EQ(d1(1, 2), 2);
  const auto t2 = build_sary_tree(2, 2);
  const auto d2 = tree_distance_matrix(t2);
  EXPECT_EQ(d2(3, 5), 4);  // leaves under different root children
  EXPECT_EQ(d2(3, 4), 2);
}

TEST(Tree, DistanceMatchesBfs) {
  for (const auto& profile : std::vector<std::vector<int>>{{2, 2, 2}, {3, 2}, {4, 3, 2}, {2, 3, 2, 2}}) {
    const auto t = build_regular_tree(profile, static_cast<int>(profile.size()));
    const Eigen::MatrixXi oracle = fixtures::bfs_distances(fixtures::parents_of(t));
    const auto d = tree_distance_matrix(t);
    EXPECT_EQ(d.values(), oracle);
    EXPECT_LE(d.max(), 2 * t.depth());
  }
}

TEST(Tree, LcaDepthExamplesAndIdentity) {
  const auto t = build_sary_tree(2, 3);
  const auto lca = lca_depth_matrix(t);
  const auto d = tree_distance_matrix(t);
  EXPECT_EQ(lca(1, 2), 0);
  EXPECT_EQ(lca(5, 5), 2);
  // Nodes 7 and 9 sit under node 3 and node 4, both children of node 1.
  EXPECT_EQ(lca(7, 9), 1);
  for (int i = 0; i < t.node_count(); ++i)
    for (int j = 0; j < t.node_count(); ++j)
      EXPECT_EQ(d(i, j), t.node_depth(i) + t.node_depth(j) - 2 * lca(i, j));
}

TEST(Tree, FourPointCondition) {
  const auto t = build_regular_tree({2, 3}, 2);
  const auto d = tree_distance_matrix(t);
  const int n = t.node_count();
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (int c = 0; c < n; ++c)
        for (int e = 0; e < n; ++e) {
          std::array<int, 3> s{d(a, b) + d(c, e), d(a, c) + d(b, e), d(a, e) + d(b, c)};
          std::sort(s.begin(), s.end());
          EXPECT_EQ(s[1], s[2]);
        }
}

TEST(Tree, DistanceInvariantUnderSiblingPermutation) {
  // Swapping the two subtrees of node 1 maps 3<->4, 7<->9, 8<->10.
  const auto t = build_sary_tree(2, 3);
  const auto d = tree_distance_matrix(t);
  std::vector<int> perm(15);
  std::iota(perm.begin(), perm.end(), 0);
  std::swap(perm[3], perm[4]);
  std::swap(perm[7], perm[9]);
  std::swap(perm[8], perm[10]);
  for (int i = 0; i < 15; ++i)
    for (int j = 0; j < 15; ++j) EXPECT_EQ(d(i, j), d(perm[i], perm[j]));
}

TEST(Tree, JsonRoundTrip) {
  const auto t = build_regular_tree({3, 2}, 2);
  nlohmann::json j = t;
  EXPECT_EQ(j["depth"], 2);
  EXPECT_EQ(j["profile"], nlohmann::json::array({3, 2}));
  EXPECT_EQ(tree_from_json(j), t);
}
