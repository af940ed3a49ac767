#pragma once

// Hypernym DAG -> arborescence (deepest parent, lexicographic ties),
// contraction onto an eligible node set, perfect-binary-subtree counting and
// uniform sampling, and distance-stratified pair sampling.

#include <Eigen/Core>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <deque>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "json.hpp"

#include "hgeo/errors.hpp"
#include "hgeo/rng.hpp"
#include "hgeo/tree.hpp"

namespace hgeo {

// ---------------------------------------------------------------- input

struct HierarchyEdge {
  std::string child;
  std::string parent;
  std::string lemma;                 ///< empty when absent
  std::optional<double> sense_count;
};

namespace detail {

inline std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find('\t', start);
    out.push_back(line.substr(start, pos == std::string::npos ? std::string::npos : pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  for (auto& f : out) {
    while (!f.empty() && (f.back() == '\r' || f.back() == ' ')) f.pop_back();
  }
  return out;
}

}  // namespace detail

/// TSV rows: child, parent[, lemma[, sense_count]]. Blank lines and '#' comments are skipped.
inline std::vector<HierarchyEdge> read_edge_tsv(std::istream& in) {
  detail::require(static_cast<bool>(in), "edge list is not readable");
  std::vector<HierarchyEdge> edges;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#' || line == "\r") continue;
    const auto f = detail::split_tabs(line);
    const std::string where = "edge list line " + std::to_string(lineno);
    detail::require(f.size() >= 2 && f.size() <= 4, where + ": expected 2 to 4 tab-separated fields");
    detail::require(!f[0].empty() && !f[1].empty(), where + ": empty node id");
    detail::require(f[0] != f[1], where + ": self loop on '" + f[0] + "'");
    HierarchyEdge e{f[0], f[1], f.size() >= 3 ? f[2] : std::string{}, std::nullopt};
    if (f.size() == 4 && !f[3].empty()) {
      try {
        std::size_t used = 0;
        e.sense_count = std::stod(f[3], &used);
        detail::require(used == f[3].size() && *e.sense_count >= 0.0, where + ": bad sense count");
      } catch (const std::logic_error&) {
        throw InputError(where + ": bad sense count '" + f[3] + "'");
      }
    }
    edges.push_back(std::move(e));
  }
  return edges;
}

/// One id per line.
inline std::set<std::string> read_id_set(std::istream& in) {
  std::set<std::string> ids;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back()))) line.pop_back();
    if (!line.empty() && line[0] != '#') ids.insert(line);
  }
  return ids;
}

// ---------------------------------------------------------------- arborescence

struct Arborescence {
  std::string root;
  std::map<std::string, std::string> parent;  ///< every non-root node
  std::map<std::string, int> depth;           ///< longest-path depth from the root
};

/// Each node keeps the parent of greatest depth; equal depths go to the
/// lexicographically smallest parent name.
inline Arborescence build_arborescence(const std::vector<HierarchyEdge>& edges, std::string root = {}) {
  std::map<std::string, std::set<std::string>> parents;
  std::map<std::string, std::set<std::string>> children;
  std::set<std::string> nodes;
  for (const auto& e : edges) {
    parents[e.child].insert(e.parent);
    children[e.parent].insert(e.child);
    nodes.insert(e.child);
    nodes.insert(e.parent);
  }
  detail::require(!nodes.empty(), "edge list is empty");
  if (root.empty()) {
    std::vector<std::string> tops;
    for (const auto& n : nodes) {
      if (!parents.count(n)) tops.push_back(n);
    }
    detail::require(tops.size() == 1, "cannot infer a unique root; " + std::to_string(tops.size()) +
                                          " parentless nodes (pass the root explicitly)");
    root = tops.front();
  }
  detail::require(nodes.count(root) > 0, "root '" + root + "' does not occur in the edge list");

  // Kahn over the whole graph: detects cycles.
  std::map<std::string, std::size_t> indeg;
  for (const auto& n : nodes) indeg[n] = parents.count(n) ? parents[n].size() : 0;
  std::deque<std::string> queue;
  for (const auto& [n, k] : indeg) {
    if (k == 0) queue.push_back(n);
  }
  std::vector<std::string> order;
  while (!queue.empty()) {
    auto n = queue.front();
    queue.pop_front();
    order.push_back(n);
    if (!children.count(n)) continue;
    for (const auto& c : children[n]) {
      if (--indeg[c] == 0) queue.push_back(c);
    }
  }
  if (order.size() != nodes.size()) {
    std::string cyc;
    for (const auto& [n, k] : indeg) {
      if (k > 0) cyc += (cyc.empty() ? "" : ", ") + n;
    }
    throw InputError("hypernym graph contains a cycle through: " + cyc);
  }

  Arborescence out;
  out.root = root;
  out.depth[root] = 0;
  for (const auto& n : order) {
    if (n == root || !parents.count(n)) continue;
    int best = -1;
    std::string chosen;
    for (const auto& p : parents[n]) {  // sorted: first max wins the tie
      auto it = out.depth.find(p);
      if (it != out.depth.end() && it->second > best) {
        best = it->second;
        chosen = p;
      }
    }
    if (best >= 0) {
      out.depth[n] = best + 1;
      out.parent[n] = chosen;
    }
  }
  std::string unreachable;
  for (const auto& n : nodes) {
    if (!out.depth.count(n)) unreachable += (unreachable.empty() ? "" : ", ") + n;
  }
  detail::require(unreachable.empty(), "nodes cannot reach root '" + root + "': " + unreachable);
  return out;
}

// ---------------------------------------------------------------- contraction

/// Rooted tree over named nodes, indexed breadth-first with children sorted by name.
class ContractedHierarchy {
 public:
  ContractedHierarchy() = default;

  /// `parent_of` maps every non-root node to its parent; `skipped` is optional provenance.
  ContractedHierarchy(const std::string& root, const std::map<std::string, std::string>& parent_of,
                      const std::map<std::string, std::vector<std::string>>& skipped = {}) {
    std::map<std::string, std::vector<std::string>> kids;
    for (const auto& [c, p] : parent_of) kids[p].push_back(c);
    for (auto& [p, cs] : kids) std::sort(cs.begin(), cs.end());
    ids_.push_back(root);
    parent_.push_back(-1);
    depth_.push_back(0);
    for (std::size_t k = 0; k < ids_.size(); ++k) {
      children_.emplace_back();
      auto it = kids.find(ids_[k]);
      if (it == kids.end()) continue;
      for (const auto& c : it->second) {
        children_[k].push_back(static_cast<int>(ids_.size()));
        ids_.push_back(c);
        parent_.push_back(static_cast<int>(k));
        depth_.push_back(depth_[k] + 1);
      }
      detail::require(ids_.size() <= parent_of.size() + 1, "parent map contains a cycle");
    }
    detail::require(ids_.size() == parent_of.size() + 1, "parent map is not a single rooted tree");
    for (std::size_t k = 0; k < ids_.size(); ++k) index_[ids_[k]] = static_cast<int>(k);
    skipped_.resize(ids_.size());
    for (const auto& [n, s] : skipped) {
      if (auto i = find(n)) skipped_[static_cast<std::size_t>(*i)] = s;
    }
  }

  int size() const { return static_cast<int>(ids_.size()); }
  const std::string& id(int node) const { return ids_.at(static_cast<std::size_t>(node)); }
  const std::vector<std::string>& ids() const { return ids_; }
  std::optional<int> find(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }
  int index(const std::string& name) const {
    auto i = find(name);
    detail::require(i.has_value(), "unknown node '" + name + "'");
    return *i;
  }
  int parent(int node) const { return parent_.at(static_cast<std::size_t>(node)); }
  int depth(int node) const { return depth_.at(static_cast<std::size_t>(node)); }
  const std::vector<int>& children(int node) const { return children_.at(static_cast<std::size_t>(node)); }
  /// Ineligible ids contracted out between this node and its parent, nearest first.
  const std::vector<std::string>& skipped(int node) const { return skipped_.at(static_cast<std::size_t>(node)); }
  int max_depth() const { return depth_.empty() ? 0 : *std::max_element(depth_.begin(), depth_.end()); }

  int lca(int a, int b) const {
    while (depth(a) > depth(b)) a = parent(a);
    while (depth(b) > depth(a)) b = parent(b);
    while (a != b) {
      a = parent(a);
      b = parent(b);
    }
    return a;
  }
  int distance(int a, int b) const { return depth(a) + depth(b) - 2 * depth(lca(a, b)); }
  bool is_ancestor(int a, int b) const {
    while (depth(b) > depth(a)) b = parent(b);
    return a == b;
  }

  /// Tree distances among `nodes` (all nodes when empty).
  DistanceMatrix distance_matrix(const std::vector<int>& nodes = {}) const {
    std::vector<int> sel = nodes;
    if (sel.empty()) {
      sel.resize(ids_.size());
      for (std::size_t k = 0; k < sel.size(); ++k) sel[k] = static_cast<int>(k);
    }
    const auto n = static_cast<Eigen::Index>(sel.size());
    Eigen::MatrixXi d(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      d(i, i) = 0;
      for (Eigen::Index j = i + 1; j < n; ++j) {
        d(i, j) = d(j, i) = distance(sel[static_cast<std::size_t>(i)], sel[static_cast<std::size_t>(j)]);
      }
    }
    return DistanceMatrix(std::move(d));
  }

  std::map<std::string, std::string> parent_map() const {
    std::map<std::string, std::string> m;
    for (std::size_t k = 1; k < ids_.size(); ++k) m[ids_[k]] = ids_[static_cast<std::size_t>(parent_[k])];
    return m;
  }

 private:
  std::vector<std::string> ids_;
  std::vector<int> parent_;
  std::vector<int> depth_;
  std::vector<std::vector<int>> children_;
  std::vector<std::vector<std::string>> skipped_;
  std::unordered_map<std::string, int> index_;
};

inline ContractedHierarchy as_hierarchy(const Arborescence& arb) {
  return ContractedHierarchy(arb.root, arb.parent);
}

/// Re-parents every eligible node onto its nearest eligible ancestor.
inline ContractedHierarchy contract(const Arborescence& arb, const std::set<std::string>& eligible) {
  std::map<std::string, std::string> parent_of;
  std::map<std::string, std::vector<std::string>> skipped;
  std::vector<std::string> tops;
  for (const auto& n : eligible) {
    detail::require(arb.depth.count(n) > 0, "eligible node '" + n + "' is not in the hierarchy");
    std::vector<std::string> path;
    std::string cur = n;
    std::optional<std::string> anc;
    while (true) {
      auto it = arb.parent.find(cur);
      if (it == arb.parent.end()) break;
      cur = it->second;
      if (eligible.count(cur)) {
        anc = cur;
        break;
      }
      path.push_back(cur);
    }
    if (anc) {
      parent_of[n] = *anc;
      skipped[n] = std::move(path);
    } else {
      tops.push_back(n);
    }
  }
  detail::require(!tops.empty(), "eligible set is empty");
  if (tops.size() > 1) {
    std::string list;
    for (const auto& t : tops) list += (list.empty() ? "" : ", ") + t;
    throw InputError("eligible nodes without an eligible ancestor (need a unique top node): " + list);
  }
  return ContractedHierarchy(tops.front(), parent_of, skipped);
}

/// Writes rows node, parent, depth; the root's parent is "-".
inline void write_hierarchy_tsv(std::ostream& os, const ContractedHierarchy& h) {
  for (int k = 0; k < h.size(); ++k) {
    os << h.id(k) << '\t' << (h.parent(k) < 0 ? std::string("-") : h.id(h.parent(k))) << '\t' << h.depth(k) << '\n';
  }
}

inline ContractedHierarchy read_hierarchy_tsv(std::istream& in) {
  detail::require(static_cast<bool>(in), "hierarchy file is not readable");
  std::map<std::string, std::string> parent_of;
  std::optional<std::string> root;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    const auto f = detail::split_tabs(line);
    detail::require(f.size() >= 2, "hierarchy line " + std::to_string(lineno) + ": expected node and parent");
    if (f[1] == "-") {
      detail::require(!root.has_value(), "hierarchy has more than one root");
      root = f[0];
    } else {
      detail::require(parent_of.emplace(f[0], f[1]).second, "node '" + f[0] + "' listed twice");
    }
  }
  detail::require(root.has_value(), "hierarchy has no root row (parent '-')");
  return ContractedHierarchy(*root, parent_of);
}

// ---------------------------------------------------------------- monosemy

/// count(l, s) / sum_s' count(l, s'); all zeros when the total is zero.
inline std::vector<double> monosemy_score(const std::vector<double>& sense_counts) {
  double total = 0.0;
  for (double c : sense_counts) {
    detail::require(c >= 0.0 && std::isfinite(c), "sense counts must be finite and nonnegative");
    total += c;
  }
  std::vector<double> out(sense_counts.size(), 0.0);
  if (total > 0.0) {
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = sense_counts[k] / total;
  }
  return out;
}

/// For each lemma, the sense (node) with the highest monosemy score, ties to
/// the smallest id; kept when its score reaches `min_score`. Edges without a
/// lemma are ignored.
inline std::set<std::string> eligible_by_monosemy(const std::vector<HierarchyEdge>& edges, double min_score) {
  std::map<std::string, std::map<std::string, double>> by_lemma;
  for (const auto& e : edges) {
    if (e.lemma.empty()) continue;
    auto& senses = by_lemma[e.lemma];
    senses.emplace(e.child, e.sense_count.value_or(0.0));
  }
  std::set<std::string> out;
  for (const auto& [lemma, senses] : by_lemma) {
    std::vector<double> counts;
    std::vector<std::string> names;
    for (const auto& [n, c] : senses) {
      names.push_back(n);
      counts.push_back(c);
    }
    const auto scores = monosemy_score(counts);
    const auto best = static_cast<std::size_t>(std::max_element(scores.begin(), scores.end()) - scores.begin());
    if (scores[best] >= min_score && scores[best] > 0.0) out.insert(names[best]);
  }
  return out;
}

// ---------------------------------------------------------------- binary subtrees

/// N(u, l): perfect binary subtrees of depth l rooted at u.
struct SubtreeCountTable {
  int L = 0;
  std::vector<std::vector<double>> counts;  ///< counts[u][l], l = 0..L

  double operator()(int node, int level) const {
    return counts.at(static_cast<std::size_t>(node)).at(static_cast<std::size_t>(level));
  }
};

inline SubtreeCountTable count_binary_subtrees(const ContractedHierarchy& h, int L) {
  detail::require(L >= 0, "subtree depth must be >= 0");
  SubtreeCountTable t;
  t.L = L;
  t.counts.assign(static_cast<std::size_t>(h.size()), std::vector<double>(static_cast<std::size_t>(L) + 1, 0.0));
  for (int u = h.size() - 1; u >= 0; --u) {  // children have larger breadth-first index
    auto& row = t.counts[static_cast<std::size_t>(u)];
    row[0] = 1.0;
    const auto& ch = h.children(u);
    for (int l = 1; l <= L; ++l) {
      double total = 0.0;
      for (std::size_t a = 0; a < ch.size(); ++a) {
        const double na = t.counts[static_cast<std::size_t>(ch[a])][static_cast<std::size_t>(l - 1)];
        if (na == 0.0) continue;
        for (std::size_t b = a + 1; b < ch.size(); ++b) {
          total += na * t.counts[static_cast<std::size_t>(ch[b])][static_cast<std::size_t>(l - 1)];
        }
      }
      row[static_cast<std::size_t>(l)] = total;
    }
  }
  return t;
}

inline std::vector<int> eligible_roots(const SubtreeCountTable& t) {
  std::vector<int> roots;
  for (std::size_t u = 0; u < t.counts.size(); ++u) {
    if (t.counts[u][static_cast<std::size_t>(t.L)] >= 1.0) roots.push_back(static_cast<int>(u));
  }
  return roots;
}

/// Uniform perfect binary subtree of depth L at `root`, listed breadth-first
/// (each chosen child pair in child order), 2^{L+1} - 1 nodes.
inline std::vector<int> sample_binary_subtree(const ContractedHierarchy& h, const SubtreeCountTable& t, int root,
                                              int L, Rng& rng) {
  detail::require(L >= 0 && L <= t.L, "subtree depth exceeds the count table");
  detail::require(t(root, L) >= 1.0, "node '" + h.id(root) + "' has no depth-" + std::to_string(L) + " binary subtree");
  std::vector<int> level{root};
  std::vector<int> out{root};
  for (int remaining = L; remaining >= 1; --remaining) {
    std::vector<int> next;
    for (int u : level) {
      const auto& ch = h.children(u);
      std::vector<std::pair<int, int>> pairs;
      std::vector<double> weights;
      for (std::size_t a = 0; a < ch.size(); ++a) {
        for (std::size_t b = a + 1; b < ch.size(); ++b) {
          const double w = t(ch[a], remaining - 1) * t(ch[b], remaining - 1);
          if (w > 0.0) {
            pairs.emplace_back(ch[a], ch[b]);
            weights.push_back(w);
          }
        }
      }
      std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
      const auto [c1, c2] = pairs[pick(rng)];
      next.push_back(c1);
      next.push_back(c2);
    }
    out.insert(out.end(), next.begin(), next.end());
    level = std::move(next);
  }
  return out;
}

/// Every valid structure at `root`, or nullopt when there are more than `limit`.
inline std::optional<std::vector<std::vector<int>>> enumerate_binary_subtrees(const ContractedHierarchy& h,
                                                                               const SubtreeCountTable& t, int root,
                                                                               int L, double limit) {
  detail::require(L >= 0 && L <= t.L, "subtree depth exceeds the count table");
  if (t(root, L) > limit) return std::nullopt;
  // Partial structures: the breadth-first list so far and the current frontier level.
  std::vector<std::vector<int>> partial{{root}};
  std::vector<std::vector<int>> frontier{{root}};
  for (int remaining = L; remaining >= 1; --remaining) {
    std::vector<std::vector<int>> next_partial;
    std::vector<std::vector<int>> next_frontier;
    for (std::size_t s = 0; s < partial.size(); ++s) {
      std::vector<std::vector<int>> levels{{}};  // combinations for this frontier
      for (int u : frontier[s]) {
        const auto& ch = h.children(u);
        std::vector<std::vector<int>> grown;
        for (const auto& prefix : levels) {
          for (std::size_t a = 0; a < ch.size(); ++a) {
            for (std::size_t b = a + 1; b < ch.size(); ++b) {
              if (t(ch[a], remaining - 1) * t(ch[b], remaining - 1) <= 0.0) continue;
              auto g = prefix;
              g.push_back(ch[a]);
              g.push_back(ch[b]);
              grown.push_back(std::move(g));
            }
          }
        }
        levels = std::move(grown);
      }
      for (auto& lv : levels) {
        auto p = partial[s];
        p.insert(p.end(), lv.begin(), lv.end());
        next_partial.push_back(std::move(p));
        next_frontier.push_back(std::move(lv));
      }
    }
    partial = std::move(next_partial);
    frontier = std::move(next_frontier);
  }
  return partial;
}

inline void to_json(nlohmann::json& j, const std::pair<const ContractedHierarchy*, const SubtreeCountTable*>& p) {
  const auto& [h, t] = p;
  nlohmann::json counts = nlohmann::json::object();
  for (int u = 0; u < h->size(); ++u) counts[h->id(u)] = t->counts[static_cast<std::size_t>(u)];
  j = nlohmann::json{{"L", t->L}, {"counts", std::move(counts)}};
}

// ---------------------------------------------------------------- distance pairs

struct WeightedPair {
  int i = 0;
  int j = 0;
  int distance = 0;
  double weight = 1.0;  ///< size of the distance-d frontier of i
};

/// Nodes at tree distance exactly d from u.
inline std::vector<int> distance_frontier(const ContractedHierarchy& h, int u, int d) {
  if (d == 0) return {u};
  std::vector<int> dist(static_cast<std::size_t>(h.size()), -1);
  std::vector<int> frontier{u};
  dist[static_cast<std::size_t>(u)] = 0;
  for (int step = 1; step <= d && !frontier.empty(); ++step) {
    std::vector<int> next;
    for (int x : frontier) {
      auto visit = [&](int y) {
        if (y >= 0 && dist[static_cast<std::size_t>(y)] < 0) {
          dist[static_cast<std::size_t>(y)] = step;
          next.push_back(y);
        }
      };
      visit(h.parent(x));
      for (int c : h.children(x)) visit(c);
    }
    frontier = std::move(next);
  }
  std::sort(frontier.begin(), frontier.end());
  return frontier;
}

/// Draws start nodes uniformly among those with a nonempty distance-d
/// frontier, then a frontier node uniformly; with replacement.
inline std::vector<WeightedPair> sample_distance_pairs(const ContractedHierarchy& h, int d, std::size_t count,
                                                       Rng& rng) {
  detail::require(d >= 0, "distance must be >= 0");
  std::vector<std::vector<int>> frontiers(static_cast<std::size_t>(h.size()));
  std::vector<int> starts;
  for (int u = 0; u < h.size(); ++u) {
    frontiers[static_cast<std::size_t>(u)] = distance_frontier(h, u, d);
    if (!frontiers[static_cast<std::size_t>(u)].empty()) starts.push_back(u);
  }
  detail::require(!starts.empty(), "no node pair at distance " + std::to_string(d) + " (exceeds the tree diameter)");
  std::uniform_int_distribution<std::size_t> pick_start(0, starts.size() - 1);
  std::vector<WeightedPair> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    const int u = starts[pick_start(rng)];
    const auto& f = frontiers[static_cast<std::size_t>(u)];
    std::uniform_int_distribution<std::size_t> pick(0, f.size() - 1);
    out.push_back({u, f[pick(rng)], d, static_cast<double>(f.size())});
  }
  return out;
}

}  // namespace hgeo
