#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <random>
#include <regex>
#include <sstream>

#include "fixtures.hpp"

using namespace hgeo;

TEST(Cooccur, TokenizeSpans) {
  const std::unordered_set<std::string> vocab{"cat", "sat"};
  EXPECT_EQ(tokenize_article("The cat9 sat.", &vocab), (std::vector<std::string>{"cat", "sat"}));
  // Oracle: maximal alphabetic spans via regex.
  const std::string text = "Don't STOP-me now: x2y caf\xc3\xa9 end";
  std::vector<std::string> spans;
  const std::regex re("[A-Za-z]+");
  for (auto it = std::sregex_iterator(text.begin(), text.end(), re); it != std::sregex_iterator(); ++it) {
    std::string s = it->str();
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    spans.push_back(s);
  }
  EXPECT_EQ(tokenize_article(text, nullptr), spans);
}

TEST(Cooccur, ArticleFiltering) {
  std::istringstream in("\none two three\nfour\n");
  TokenizerConfig cfg;
  cfg.min_article_tokens = 2;
  const auto s = tokenize_corpus(in, cfg);
  EXPECT_EQ(s.articles_seen, 3u);
  EXPECT_EQ(s.articles_dropped, 2u);
  EXPECT_EQ(s.article_count(), 1u);
  EXPECT_EQ(s.tokens.size(), 3u);
}

TokenStream stream_of(std::vector<std::vector<std::string>> articles) {
  TokenStream s;
  for (auto& a : articles) {
    s.article_begin.push_back(s.tokens.size());
    s.tokens.insert(s.tokens.end(), a.begin(), a.end());
  }
  return s;
}

TEST(Cooccur, CountingExamples) {
  const auto ab = count_cooccurrence(stream_of({{"a", "b"}}), 16);
  EXPECT_DOUBLE_EQ(ab.count(*ab.id("a"), *ab.id("b")), 16.0);
  EXPECT_DOUBLE_EQ(ab.total_mass(), 32.0);

  const auto axb = count_cooccurrence(stream_of({{"a", "x", "b"}}), 2);
  EXPECT_DOUBLE_EQ(axb.count(*axb.id("a"), *axb.id("b")), 1.0);
  EXPECT_DOUBLE_EQ(axb.count(*axb.id("a"), *axb.id("x")), 2.0);

  const auto lone = count_cooccurrence(stream_of({{"a"}}), 16);
  EXPECT_TRUE(lone.degenerate());
  EXPECT_THROW(lone.marginals(), InputError);

  const auto split = count_cooccurrence(stream_of({{"a"}, {"b"}}), 16);
  EXPECT_EQ(split.nnz(), 0u);  // nothing crosses the boundary

  const auto self = count_cooccurrence(stream_of({{"a", "a"}}), 4);
  EXPECT_DOUBLE_EQ(self.count(0, 0), 8.0);  // 4/1 into #(a,a) from both ordered terms
  EXPECT_DOUBLE_EQ(self.total_mass(), 8.0);
  EXPECT_THROW(count_cooccurrence(stream_of({{"a"}}), 0), InputError);
}

TEST(Cooccur, CountsMatchBruteForce) {
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<int> tok(0, 5), len(1, 30);
  std::vector<std::vector<std::string>> arts;
  for (int a = 0; a < 6; ++a) {
    std::vector<std::string> art;
    for (int k = len(rng); k > 0; --k) art.push_back(std::string(1, static_cast<char>('a' + tok(rng))));
    arts.push_back(art);
  }
  const int L = 5;
  const auto stats = count_cooccurrence(stream_of(arts), L);
  std::map<std::pair<std::string, std::string>, double> ordered;
  for (const auto& art : arts)
    for (std::size_t p = 0; p < art.size(); ++p)
      for (std::size_t q = 0; q < art.size(); ++q) {
        const auto d = p > q ? p - q : q - p;
        if (d >= 1 && d <= static_cast<std::size_t>(L)) ordered[{art[p], art[q]}] += static_cast<double>(L) / d;
      }
  double mass = 0.0;
  for (const auto& [k, w] : ordered) {
    EXPECT_NEAR(stats.count(*stats.id(k.first), *stats.id(k.second)), w, 1e-9);
    mass += w;
  }
  EXPECT_NEAR(stats.total_mass(), mass, 1e-9);
  const auto m = stats.marginals();
  EXPECT_NEAR(std::accumulate(m.begin(), m.end(), 0.0), 1.0, 1e-12);
}

TEST(Cooccur, LinearityUnderConcatenation) {
  const std::vector<std::vector<std::string>> a{{"x", "y", "z", "x"}}, b{{"y", "y", "q"}, {"z", "x"}};
  auto sa = count_cooccurrence(stream_of(a), 3);
  const auto sb = count_cooccurrence(stream_of(b), 3);
  auto all = a;
  all.insert(all.end(), b.begin(), b.end());
  const auto sab = count_cooccurrence(stream_of(all), 3);
  sa.merge(sb);
  for (const auto& t1 : sab.vocabulary())
    for (const auto& t2 : sab.vocabulary())
      EXPECT_DOUBLE_EQ(sa.count(*sa.id(t1), *sa.id(t2)), sab.count(*sab.id(t1), *sab.id(t2)));
}

TEST(Cooccur, MstarEntry) {
  EXPECT_DOUBLE_EQ(mstar_entry(0.06, 0.2, 0.3), 0.0);
  EXPECT_NEAR(mstar_entry(std::exp(1.0) * 0.06, 0.2, 0.3), 2 * std::tanh(0.5), 1e-15);
  EXPECT_NEAR(mstar_entry(std::exp(1.0) * 0.06, 0.2, 0.3), 0.924234, 1e-6);
  EXPECT_DOUBLE_EQ(mstar_entry(0.0, 0.2, 0.3), -2.0);
  EXPECT_THROW(mstar_entry(0.1, 0.0, 0.3), InputError);
}

TEST(Cooccur, MstarRestricted) {
  const auto stats = count_cooccurrence(stream_of({{"a", "b", "c", "a", "b"}, {"d", "e"}}), 2);
  const auto v = mstar_restricted(stats, {"a", "b", "d"});
  EXPECT_EQ(v.matrix.rows(), 3);
  EXPECT_DOUBLE_EQ(v.matrix(0, 2), -2.0);  // a and d never co-occur
  EXPECT_GT(v.unseen_pairs, 0u);
  EXPECT_LT((v.matrix - v.matrix.transpose()).norm(), 1e-15);
  EXPECT_LE(v.matrix.maxCoeff(), 2.0);
  EXPECT_GE(v.matrix.minCoeff(), -2.0);
  try {
    mstar_restricted(stats, {"a", "zz", "yy"});
    FAIL();
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("zz"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("yy"), std::string::npos);
  }
}

TEST(Cooccur, CountFileRoundTripAndLayout) {
  CooccurrenceStats s(std::vector<std::string>{"ab", "c"});
  s.add_pair(0, 1, 2.5);
  s.add_pair(1, 1, 1.0);
  std::ostringstream os;
  write_counts(os, s);
  const std::string bytes = os.str();
  // 4 magic + 4 + 8 + (4+2) + (4+1) + 2 * 16
  ASSERT_EQ(bytes.size(), 4u + 4u + 8u + 6u + 5u + 32u);
  EXPECT_EQ(bytes.substr(0, 4), "HGC1");
  EXPECT_EQ(static_cast<unsigned char>(bytes[4]), 2u);
  EXPECT_EQ(static_cast<unsigned char>(bytes[8]), 2u);
  std::istringstream in(bytes);
  const auto back = read_counts(in);
  EXPECT_EQ(back.vocabulary(), s.vocabulary());
  EXPECT_DOUBLE_EQ(back.count(0, 1), 2.5);
  EXPECT_DOUBLE_EQ(back.count(1, 1), 2.0);
  std::istringstream junk("HGC2....");
  EXPECT_THROW(read_counts(junk), InputError);
  std::istringstream truncated(bytes.substr(0, bytes.size() - 3));
  EXPECT_THROW(read_counts(truncated), InputError);
}

TEST(Cooccur, GoldenTinyCorpus) {
  std::ifstream corpus(fixtures::data_path("tiny_corpus.txt"));
  std::ifstream vin(fixtures::data_path("tiny_vocab.txt"));
  const auto vocab = read_vocabulary(vin);
  const std::unordered_set<std::string> vset(vocab.begin(), vocab.end());
  TokenizerConfig cfg;
  cfg.min_article_tokens = 4;
  cfg.vocabulary = &vset;
  const auto stats = count_cooccurrence(tokenize_corpus(corpus, cfg), 2, &vocab);
  std::ostringstream os;
  write_counts(os, stats);
  std::ifstream golden(fixtures::data_path("tiny_counts.hgc"), std::ios::binary);
  const std::string expect((std::istreambuf_iterator<char>(golden)), std::istreambuf_iterator<char>());
  EXPECT_EQ(os.str(), expect);
}

TEST(Cooccur, SyntheticIndependentWhenKernelZero) {
  const auto t = build_sary_tree(2, 2);
  std::vector<std::string> names;
  for (int v = 0; v < t.node_count(); ++v) names.push_back("t" + std::to_string(v));
  SyntheticConfig cfg;
  cfg.total_pairs = 2e6;
  cfg.background_tokens = 3;
  Rng rng = make_substream(5);
  const auto stats = generate_synthetic_counts(tree_distance_matrix(t), names, KernelSpec::tabulated({0, 0, 0, 0, 0}),
                                               std::vector<double>(7, 1.0), cfg, rng);
  const auto v = mstar_restricted(stats, names);
  EXPECT_LT(v.matrix.cwiseAbs().maxCoeff(), 0.05);
}

TEST(Cooccur, SyntheticConvergesToPlantedKernel) {
  const auto t = build_sary_tree(2, 3);
  std::vector<std::string> names;
  for (int v = 0; v < t.node_count(); ++v) names.push_back("t" + std::to_string(v));
  const auto f = KernelSpec::exponential(0.5, 0.8);
  Rng rng = make_substream(9);
  const auto stats =
      generate_synthetic_counts(tree_distance_matrix(t), names, f, std::vector<double>(15, 1.0), SyntheticConfig{}, rng);
  const auto v = mstar_restricted(stats, names);
  const auto d = tree_distance_matrix(t);
  // Bin means over all pairs at each distance against f(d), within 3 SE.
  for (int dist = 0; dist <= 6; ++dist) {
    std::vector<double> xs;
    for (int i = 0; i < 15; ++i)
      for (int j = i; j < 15; ++j)
        if (d(i, j) == dist) xs.push_back(v.matrix(i, j));
    const double m = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
    double var = 0.0;
    for (double x : xs) var += (x - m) * (x - m);
    const double se = std::sqrt(var / (xs.size() - 1) / xs.size());
    EXPECT_NEAR(m, f(dist), 3 * se) << "d=" << dist;
  }
  // Marginals of hierarchy tokens sum to the configured mass.
  const auto p = stats.marginals();
  double s = 0.0;
  for (const auto& n : names) s += p[*stats.id(n)];
  EXPECT_NEAR(s, 0.8, 0.002);
}

TEST(Cooccur, SyntheticRejectsBadKernel) {
  const auto t = build_sary_tree(2, 1);
  Rng rng = make_substream(1);
  EXPECT_THROW(generate_synthetic_counts(tree_distance_matrix(t), {"a", "b", "c"}, KernelSpec::tabulated({2.0, 1, 1}),
                                         {1, 1, 1}, SyntheticConfig{}, rng),
               InputError);
}
