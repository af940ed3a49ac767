#include <gtest/gtest.h>

#include <boost/math/distributions/chi_squared.hpp>

#include <map>
#include <random>
#include <set>
#include <sstream>

#include "fixtures.hpp"

using namespace hgeo;

namespace {

std::vector<HierarchyEdge> edges_from(const std::string& tsv) {
  std::istringstream in(tsv);
  return read_edge_tsv(in);
}

ContractedHierarchy hierarchy_from(const std::string& tsv) {
  std::istringstream in(tsv);
  return read_hierarchy_tsv(in);
}

// Random rooted tree on n named nodes; each node attaches to an earlier one.
std::map<std::string, std::string> random_parent_map(std::mt19937_64& rng, int n, double fanout_bias) {
  auto name = [](int k) {
    std::string s = std::to_string(k);
    return "v" + std::string(4 - s.size(), '0') + s;
  };
  std::map<std::string, std::string> parent;
  for (int k = 1; k < n; ++k) {
    // Bias toward recent nodes so depth grows; fanout_bias in [0,1].
    std::uniform_int_distribution<int> any(0, k - 1);
    std::uniform_int_distribution<int> recent(std::max(0, k - 4), k - 1);
    std::bernoulli_distribution coin(fanout_bias);
    parent[name(k)] = name(coin(rng) ? any(rng) : recent(rng));
  }
  return parent;
}

// Explicit structures at u with depth l, each as a sorted node list.
std::vector<std::vector<int>> brute_structures(const ContractedHierarchy& h, int u, int l) {
  if (l == 0) return {{u}};
  std::vector<std::vector<int>> out;
  const auto& ch = h.children(u);
  for (std::size_t a = 0; a < ch.size(); ++a)
    for (std::size_t b = a + 1; b < ch.size(); ++b)
      for (const auto& left : brute_structures(h, ch[a], l - 1))
        for (const auto& right : brute_structures(h, ch[b], l - 1)) {
          std::vector<int> s{u};
          s.insert(s.end(), left.begin(), left.end());
          s.insert(s.end(), right.begin(), right.end());
          std::sort(s.begin(), s.end());
          out.push_back(std::move(s));
        }
  return out;
}

double chi_square_p(const std::map<std::vector<int>, int>& freq, std::size_t categories, int draws) {
  const double expect = static_cast<double>(draws) / static_cast<double>(categories);
  double stat = 0.0;
  std::size_t seen = 0;
  for (const auto& [k, c] : freq) {
    stat += (c - expect) * (c - expect) / expect;
    ++seen;
  }
  stat += static_cast<double>(categories - seen) * expect;  // categories never drawn
  const boost::math::chi_squared dist(static_cast<double>(categories - 1));
  return boost::math::cdf(boost::math::complement(dist, stat));
}

}  // namespace

TEST(Hierarchy, EdgeListParsing) {
  const auto e = edges_from("# comment\ndog\tcanine\tdog\t12\ncat\tfeline\n\n");
  ASSERT_EQ(e.size(), 2u);
  EXPECT_EQ(e[0].lemma, "dog");
  EXPECT_DOUBLE_EQ(*e[0].sense_count, 12.0);
  EXPECT_FALSE(e[1].sense_count.has_value());
  EXPECT_THROW(edges_from("a\n"), InputError);
  EXPECT_THROW(edges_from("a\ta\n"), InputError);
  EXPECT_THROW(edges_from("a\tb\tl\tmany\n"), InputError);
}

TEST(Hierarchy, DiamondKeepsDeeperParent) {
  // a -> b -> x -> d and a -> c -> d: d's deepest parent is x.
  const auto arb = build_arborescence(edges_from("b\ta\nc\ta\nx\tb\nd\tx\nd\tc\n"));
  EXPECT_EQ(arb.root, "a");
  EXPECT_EQ(arb.parent.at("d"), "x");
  EXPECT_EQ(arb.depth.at("d"), 3);
}

TEST(Hierarchy, TieBreaksLexicographically) {
  const auto arb = build_arborescence(edges_from("canine\tanimal\nfeline\tanimal\npet\tfeline\npet\tcanine\n"));
  EXPECT_EQ(arb.parent.at("pet"), "canine");
}

TEST(Hierarchy, TreeInputUnchanged) {
  const auto arb = build_arborescence(edges_from("b\ta\nc\ta\nd\tb\n"));
  EXPECT_EQ(arb.parent, (std::map<std::string, std::string>{{"b", "a"}, {"c", "a"}, {"d", "b"}}));
}

TEST(Hierarchy, ArborescenceErrors) {
  EXPECT_THROW(build_arborescence(edges_from("b\ta\na\tb\nc\tr\n"), "r"), InputError);
  try {
    build_arborescence(edges_from("b\ta\nq\tz\n"), "a");
    FAIL();
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("q"), std::string::npos);
  }
}

TEST(Hierarchy, ContractionExamples) {
  const auto arb = build_arborescence(edges_from("b\ta\nc\tb\n"));
  const auto skip = contract(arb, {"a", "c"});
  EXPECT_EQ(skip.id(skip.parent(skip.index("c"))), "a");
  EXPECT_EQ(skip.distance(skip.index("a"), skip.index("c")), 1);
  EXPECT_EQ(skip.skipped(skip.index("c")), std::vector<std::string>{"b"});

  const auto all = contract(arb, {"a", "b", "c"});
  const auto plain = as_hierarchy(arb);
  EXPECT_EQ(all.parent_map(), plain.parent_map());
  EXPECT_THROW(contract(arb, {"b", "zz"}), InputError);
  const auto two_tops = build_arborescence(edges_from("b\ta\nc\ta\n"));
  EXPECT_THROW(contract(two_tops, {"b", "c"}), InputError);
}

TEST(Hierarchy, ContractionPreservesAncestry) {
  std::mt19937_64 rng(17);
  const auto parent = random_parent_map(rng, 1000, 0.5);
  Arborescence arb;
  arb.root = "v0000";
  arb.parent = parent;
  for (const auto& [c, p] : parent) arb.depth[c] = 0;
  arb.depth[arb.root] = 0;
  std::set<std::string> eligible{arb.root};
  std::bernoulli_distribution keep(0.4);
  for (const auto& [c, p] : parent)
    if (keep(rng)) eligible.insert(c);
  const auto h = contract(arb, eligible);
  const auto full = as_hierarchy(arb);
  ASSERT_EQ(h.size(), static_cast<int>(eligible.size()));
  std::uniform_int_distribution<int> pick(0, h.size() - 1);
  for (int trial = 0; trial < 5000; ++trial) {
    const int a = pick(rng), b = pick(rng);
    const int fa = full.index(h.id(a)), fb = full.index(h.id(b));
    EXPECT_EQ(h.is_ancestor(a, b), full.is_ancestor(fa, fb));
    EXPECT_LE(h.distance(a, b), full.distance(fa, fb));
  }
}

TEST(Hierarchy, MonosemyScores) {
  const auto s = monosemy_score({8, 2});
  EXPECT_DOUBLE_EQ(s[0], 0.8);
  EXPECT_DOUBLE_EQ(s[1], 0.2);
  EXPECT_DOUBLE_EQ(monosemy_score({5})[0], 1.0);
  EXPECT_EQ(monosemy_score({0, 0, 0}), (std::vector<double>{0, 0, 0}));
  EXPECT_THROW(monosemy_score({-1.0}), InputError);

  const auto edges = edges_from("bank.n.01\tx\tbank\t8\nbank.n.02\tx\tbank\t2\nrare.n.01\tx\trare\t0\n");
  EXPECT_EQ(eligible_by_monosemy(edges, 0.75), (std::set<std::string>{"bank.n.01"}));
  EXPECT_TRUE(eligible_by_monosemy(edges, 0.9).empty());
}

TEST(Hierarchy, SubtreeCountExamples) {
  const auto three = hierarchy_from("r\t-\na\tr\nb\tr\nc\tr\n");
  const auto t3 = count_binary_subtrees(three, 1);
  EXPECT_DOUBLE_EQ(t3(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(t3(0, 1), 3.0);
  EXPECT_DOUBLE_EQ(t3(1, 1), 0.0);

  const auto h63 = fixtures::hierarchy63();
  const auto t63 = count_binary_subtrees(h63, 3);
  EXPECT_DOUBLE_EQ(t63(h63.index("na"), 3), 2187.0);
  EXPECT_EQ(eligible_roots(t63).size(), 3u);
}

TEST(Hierarchy, SubtreeCountPairwiseProducts) {
  // x has children a, b, c with N(., 1) = 1, 1, 3: 1*1 + 1*3 + 1*3 = 7.
  const auto h = hierarchy_from(
      "x\t-\na\tx\nb\tx\nc\tx\n"
      "a1\ta\na2\ta\nb1\tb\nb2\tb\nc1\tc\nc2\tc\nc3\tc\n");
  EXPECT_DOUBLE_EQ(count_binary_subtrees(h, 2)(h.index("x"), 2), 7.0);

  // r has u, v, w with N(., 2) = 3, 1, 1: 3*1 + 3*1 + 1*1 = 7.
  const auto g = hierarchy_from(
      "r\t-\nu\tr\nv\tr\nw\tr\n"
      "s\tu\nt\tu\ns1\ts\ns2\ts\ns3\ts\nt1\tt\nt2\tt\n"
      "v1\tv\nv2\tv\nv1a\tv1\nv1b\tv1\nv2a\tv2\nv2b\tv2\n"
      "w1\tw\nw2\tw\nw1a\tw1\nw1b\tw1\nw2a\tw2\nw2b\tw2\n");
  const auto tg = count_binary_subtrees(g, 3);
  EXPECT_DOUBLE_EQ(tg(g.index("u"), 2), 3.0);
  EXPECT_DOUBLE_EQ(tg(g.index("v"), 2), 1.0);
  EXPECT_DOUBLE_EQ(tg(g.index("r"), 3), 7.0);
}

TEST(Hierarchy, CountsMatchBruteEnumeration) {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 30; ++trial) {
    std::uniform_int_distribution<int> size(5, 100);
    const auto parent = random_parent_map(rng, size(rng), 0.3);
    const ContractedHierarchy h("v0000", parent);
    const auto t = count_binary_subtrees(h, 3);
    for (int u = 0; u < h.size(); ++u) {
      for (int l = 0; l <= 3; ++l) {
        const auto brute = brute_structures(h, u, l);
        EXPECT_EQ(t(u, l), static_cast<double>(brute.size()));
        const auto listed = enumerate_binary_subtrees(h, t, u, l, 1e9);
        ASSERT_TRUE(listed.has_value());
        std::set<std::vector<int>> a(brute.begin(), brute.end()), b;
        for (auto s : *listed) {
          EXPECT_EQ(s.size(), (std::size_t{2} << l) - 1);
          std::sort(s.begin(), s.end());
          b.insert(s);
        }
        EXPECT_EQ(a, b);
      }
    }
  }
}

TEST(Hierarchy, SamplerUniqueStructure) {
  const auto h = ContractedHierarchy("n0", [] {
    std::map<std::string, std::string> p;
    const auto t = build_sary_tree(2, 3);
    for (int v = 1; v < t.node_count(); ++v) p["n" + std::to_string(v)] = "n" + std::to_string(t.parent(v));
    return p;
  }());
  const auto t = count_binary_subtrees(h, 3);
  Rng rng = make_substream(1);
  auto s = sample_binary_subtree(h, t, 0, 3, rng);
  std::sort(s.begin(), s.end());
  std::vector<int> all(15);
  std::iota(all.begin(), all.end(), 0);
  EXPECT_EQ(s, all);
  EXPECT_THROW(sample_binary_subtree(h, t, 1, 3, rng), InputError);
}

TEST(Hierarchy, SamplerThreeLeafChildren) {
  const auto h = hierarchy_from("r\t-\na\tr\nb\tr\nc\tr\n");
  const auto t = count_binary_subtrees(h, 1);
  Rng rng = make_substream(2);
  std::map<std::vector<int>, int> freq;
  const int draws = 30000;
  for (int k = 0; k < draws; ++k) ++freq[sample_binary_subtree(h, t, 0, 1, rng)];
  ASSERT_EQ(freq.size(), 3u);
  const double sigma = std::sqrt(draws * (1.0 / 3) * (2.0 / 3));
  for (const auto& [s, c] : freq) EXPECT_NEAR(c, draws / 3.0, 3 * sigma);
  EXPECT_GT(chi_square_p(freq, 3, draws), 1e-3);
}

TEST(Hierarchy, SamplerUniformOnEnumerableCases) {
  // r has a, b, c; N(a,2) = 3, N(b,2) = 1, N(c,2) = 9 so N(r,3) = 39.
  const auto h = hierarchy_from(
      "r\t-\na\tr\nb\tr\nc\tr\n"
      "a1\ta\na2\ta\nb1\tb\nb2\tb\nc1\tc\nc2\tc\n"
      "a1x\ta1\na1y\ta1\na1z\ta1\na2x\ta2\na2y\ta2\n"
      "b1x\tb1\nb1y\tb1\nb2x\tb2\nb2y\tb2\n"
      "c1x\tc1\nc1y\tc1\nc1z\tc1\nc2x\tc2\nc2y\tc2\nc2z\tc2\n");
  const auto t = count_binary_subtrees(h, 3);
  EXPECT_DOUBLE_EQ(t(h.index("r"), 3), 39.0);
  std::vector<std::pair<int, int>> cases{{h.index("r"), 3}, {h.index("c"), 2}, {h.index("a"), 2}};
  // Plus every depth-2 and depth-3 root of the 63-node fixture with <= 200 structures.
  const auto h63 = fixtures::hierarchy63();
  const auto t63 = count_binary_subtrees(h63, 3);
  std::vector<std::pair<int, int>> cases63;
  for (int u = 0; u < h63.size(); ++u)
    for (int l : {2, 3})
      if (t63(u, l) >= 2 && t63(u, l) <= 200) cases63.emplace_back(u, l);
  EXPECT_FALSE(cases63.empty());

  Rng rng = make_substream(3);
  auto check = [&](const ContractedHierarchy& hh, const SubtreeCountTable& tt, int u, int l) {
    const auto n = static_cast<std::size_t>(tt(u, l));
    const int draws = static_cast<int>(100 * n);
    std::map<std::vector<int>, int> freq;
    for (int k = 0; k < draws; ++k) ++freq[sample_binary_subtree(hh, tt, u, l, rng)];
    const auto all = enumerate_binary_subtrees(hh, tt, u, l, 200);
    ASSERT_TRUE(all.has_value());
    const std::set<std::vector<int>> valid(all->begin(), all->end());
    for (const auto& [s, c] : freq) EXPECT_TRUE(valid.count(s)) << "sampled an invalid structure";
    EXPECT_GT(chi_square_p(freq, n, draws), 1e-3) << hh.id(u) << " L=" << l;
  };
  for (const auto& [u, l] : cases) check(h, t, u, l);
  for (const auto& [u, l] : cases63) check(h63, t63, u, l);
}

TEST(Hierarchy, DistancePairs) {
  const auto star = hierarchy_from("r\t-\na\tr\nb\tr\nc\tr\nd\tr\n");
  EXPECT_EQ(distance_frontier(star, star.index("a"), 2).size(), 3u);
  Rng rng = make_substream(4);
  for (const auto& p : sample_distance_pairs(star, 2, 200, rng)) {
    EXPECT_NE(p.i, 0);
    EXPECT_NE(p.j, 0);
    EXPECT_NE(p.i, p.j);
    EXPECT_DOUBLE_EQ(p.weight, 3.0);
    EXPECT_EQ(star.distance(p.i, p.j), 2);
  }
  for (const auto& p : sample_distance_pairs(star, 0, 50, rng)) {
    EXPECT_EQ(p.i, p.j);
    EXPECT_DOUBLE_EQ(p.weight, 1.0);
  }
  const auto path = hierarchy_from("a\t-\nb\ta\nc\tb\n");
  EXPECT_THROW(sample_distance_pairs(path, 3, 1, rng), InputError);
  // Frontier against the all-pairs oracle on the fixture.
  const auto h = fixtures::hierarchy63();
  std::vector<int> parents(static_cast<std::size_t>(h.size()));
  for (int u = 0; u < h.size(); ++u) parents[static_cast<std::size_t>(u)] = h.parent(u);
  const Eigen::MatrixXi d = fixtures::bfs_distances(parents);
  for (int u = 0; u < h.size(); u += 7)
    for (int dist = 0; dist <= 8; ++dist) {
      std::vector<int> expect;
      for (int v = 0; v < h.size(); ++v)
        if (d(u, v) == dist) expect.push_back(v);
      EXPECT_EQ(distance_frontier(h, u, dist), expect);
    }
}

TEST(Hierarchy, TsvRoundTrip) {
  const auto h = fixtures::hierarchy63();
  EXPECT_EQ(h.size(), 63);
  EXPECT_EQ(h.max_depth(), 5);
  std::ostringstream os;
  write_hierarchy_tsv(os, h);
  std::istringstream in(os.str());
  const auto back = read_hierarchy_tsv(in);
  EXPECT_EQ(back.ids(), h.ids());
  EXPECT_EQ(back.parent_map(), h.parent_map());
  EXPECT_THROW(hierarchy_from("a\tb\n"), InputError);
  EXPECT_THROW(hierarchy_from("a\t-\nb\t-\n"), InputError);
}
