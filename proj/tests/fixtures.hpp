#pragma once

// Shared helpers for the test suites: fixture paths, random kernels, and
// brute-force oracles that do not reuse library code paths.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "hgeo/hgeo.hpp"

namespace fixtures {

inline std::string data_path(const std::string& name) { return std::string(HGEO_TEST_DATA) + "/" + name; }

inline hgeo::ContractedHierarchy hierarchy63() {
  std::ifstream in(data_path("hierarchy63.tsv"));
  return hgeo::read_hierarchy_tsv(in);
}

/// Strictly decreasing positive table f(0..max_d).
inline hgeo::KernelSpec random_decreasing_kernel(std::mt19937_64& rng, int max_d) {
  std::uniform_real_distribution<double> start(0.5, 3.0), drop(0.05, 0.9);
  std::vector<double> v{start(rng)};
  for (int d = 1; d <= max_d; ++d) v.push_back(v.back() * drop(rng));
  return hgeo::KernelSpec::tabulated(v);
}

/// All-pairs distances by breadth-first search over parent/child edges.
inline Eigen::MatrixXi bfs_distances(const std::vector<int>& parent) {
  const int n = static_cast<int>(parent.size());
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(n));
  for (int v = 0; v < n; ++v) {
    if (parent[static_cast<std::size_t>(v)] >= 0) {
      adj[static_cast<std::size_t>(v)].push_back(parent[static_cast<std::size_t>(v)]);
      adj[static_cast<std::size_t>(parent[static_cast<std::size_t>(v)])].push_back(v);
    }
  }
  Eigen::MatrixXi d = Eigen::MatrixXi::Constant(n, n, -1);
  for (int s = 0; s < n; ++s) {
    std::deque<int> q{s};
    d(s, s) = 0;
    while (!q.empty()) {
      const int x = q.front();
      q.pop_front();
      for (int y : adj[static_cast<std::size_t>(x)]) {
        if (d(s, y) < 0) {
          d(s, y) = d(s, x) + 1;
          q.push_back(y);
        }
      }
    }
  }
  return d;
}

inline std::vector<int> parents_of(const hgeo::TreeTopology& t) {
  std::vector<int> p(static_cast<std::size_t>(t.node_count()), -1);
  for (int v = 1; v < t.node_count(); ++v) p[static_cast<std::size_t>(v)] = t.parent(v);
  return p;
}

inline Eigen::MatrixXd random_symmetric(std::mt19937_64& rng, int n, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Eigen::MatrixXd a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = g(rng);
  return 0.5 * (a + a.transpose());
}

}  // namespace fixtures
