#pragma once

// Article-bounded weighted window co-occurrence counts, the bounded
// normalization M*_ij = 2(P_ij - P_i P_j)/(P_ij + P_i P_j), the HGC1 count
// file, and a planted-kernel synthetic count generator.

#include <Eigen/Core>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <tuple>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "hgeo/errors.hpp"
#include "hgeo/kernel.hpp"
#include "hgeo/rng.hpp"
#include "hgeo/tree.hpp"

namespace hgeo {

// ---------------------------------------------------------------- tokens

/// Tokens of all retained articles, concatenated, with article start offsets.
struct TokenStream {
  std::vector<std::string> tokens;
  std::vector<std::size_t> article_begin;  ///< one entry per retained article
  std::size_t articles_seen = 0;
  std::size_t articles_dropped = 0;

  std::size_t article_count() const { return article_begin.size(); }
  std::pair<std::size_t, std::size_t> article(std::size_t a) const {
    const std::size_t end = a + 1 < article_begin.size() ? article_begin[a + 1] : tokens.size();
    return {article_begin[a], end};
  }
};

struct TokenizerConfig {
  std::size_t min_article_tokens = 500;
  const std::unordered_set<std::string>* vocabulary = nullptr;  ///< null keeps every token
};

/// Lowercased maximal [a-z]+ spans, filtered by the vocabulary.
inline std::vector<std::string> tokenize_article(const std::string& text,
                                                 const std::unordered_set<std::string>* vocabulary) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty() && (vocabulary == nullptr || vocabulary->count(cur) > 0)) out.push_back(cur);
    cur.clear();
  };
  for (unsigned char ch : text) {
    if (std::isalpha(ch) && ch < 128) {
      cur.push_back(static_cast<char>(std::tolower(ch)));
    } else {
      flush();
    }
  }
  flush();
  return out;
}

inline void append_article(TokenStream& stream, const std::string& text, const TokenizerConfig& cfg) {
  ++stream.articles_seen;
  auto toks = tokenize_article(text, cfg.vocabulary);
  if (toks.empty() || toks.size() < cfg.min_article_tokens) {
    ++stream.articles_dropped;
    return;
  }
  stream.article_begin.push_back(stream.tokens.size());
  stream.tokens.insert(stream.tokens.end(), std::make_move_iterator(toks.begin()), std::make_move_iterator(toks.end()));
}

/// One article per line.
inline TokenStream tokenize_corpus(std::istream& in, const TokenizerConfig& cfg) {
  detail::require(static_cast<bool>(in), "corpus stream is not readable");
  TokenStream stream;
  std::string line;
  while (std::getline(in, line)) append_article(stream, line, cfg);
  detail::require(!in.bad(), "error while reading the corpus stream");
  return stream;
}

/// One article per regular file, in lexicographic file-name order.
inline TokenStream tokenize_directory(const std::filesystem::path& dir, const TokenizerConfig& cfg) {
  detail::require(std::filesystem::is_directory(dir), "corpus directory not found: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file()) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  TokenStream stream;
  for (const auto& f : files) {
    std::ifstream in(f, std::ios::binary);
    detail::require(static_cast<bool>(in), "cannot read corpus file " + f.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    append_article(stream, buf.str(), cfg);
  }
  return stream;
}

/// One lowercase alphabetic token per line; blank lines ignored, order kept.
inline std::vector<std::string> read_vocabulary(std::istream& in) {
  std::vector<std::string> vocab;
  std::unordered_set<std::string> seen;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back()))) line.pop_back();
    std::size_t start = 0;
    while (start < line.size() && std::isspace(static_cast<unsigned char>(line[start]))) ++start;
    line = line.substr(start);
    if (line.empty()) continue;
    for (unsigned char ch : line) {
      detail::require(ch >= 'a' && ch <= 'z', "vocabulary token '" + line + "' is not lowercase alphabetic");
    }
    if (seen.insert(line).second) vocab.push_back(line);
  }
  return vocab;
}

// ---------------------------------------------------------------- counts

/// Symmetric weighted pair counts. For i < j the stored weight is
/// #(i,j) = #(j,i); for i = j it is #(i,i).
class CooccurrenceStats {
 public:
  CooccurrenceStats() = default;
  explicit CooccurrenceStats(std::vector<std::string> vocabulary) {
    for (auto& t : vocabulary) add_token(std::move(t));
  }

  std::uint32_t add_token(std::string token) {
    auto it = index_.find(token);
    if (it != index_.end()) return it->second;
    const auto id = static_cast<std::uint32_t>(vocab_.size());
    index_.emplace(token, id);
    vocab_.push_back(std::move(token));
    return id;
  }

  const std::vector<std::string>& vocabulary() const { return vocab_; }
  std::size_t vocab_size() const { return vocab_.size(); }
  std::optional<std::uint32_t> id(const std::string& token) const {
    auto it = index_.find(token);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  /// Adds w to #(i,j) and to #(j,i); on the diagonal the cell receives 2w.
  void add_pair(std::uint32_t i, std::uint32_t j, double w) {
    if (i > j) std::swap(i, j);
    weights_[key(i, j)] += (i == j) ? 2.0 * w : w;
  }
  /// Adds w to the stored (upper-triangular) weight directly.
  void add_stored(std::uint32_t i, std::uint32_t j, double w) {
    if (i > j) std::swap(i, j);
    weights_[key(i, j)] += w;
  }

  /// #(i,j) (symmetric).
  double count(std::uint32_t i, std::uint32_t j) const {
    if (i > j) std::swap(i, j);
    auto it = weights_.find(key(i, j));
    return it == weights_.end() ? 0.0 : it->second;
  }

  /// Stored triplets (i <= j, weight), sorted by (i, j).
  std::vector<std::tuple<std::uint32_t, std::uint32_t, double>> triplets() const {
    std::vector<std::tuple<std::uint32_t, std::uint32_t, double>> out;
    out.reserve(weights_.size());
    for (const auto& [k, w] : weights_) {
      out.emplace_back(static_cast<std::uint32_t>(k >> 32), static_cast<std::uint32_t>(k & 0xffffffffu), w);
    }
    return out;
  }
  std::size_t nnz() const { return weights_.size(); }

  /// Sum over ordered pairs of #(i,j).
  double total_mass() const {
    double t = 0.0;
    for (const auto& [k, w] : weights_) t += ((k >> 32) == (k & 0xffffffffu)) ? w : 2.0 * w;
    return t;
  }
  bool degenerate() const { return !(total_mass() > 0.0); }

  double p_pair(std::uint32_t i, std::uint32_t j) const {
    const double t = total_mass();
    detail::require(t > 0.0, "co-occurrence statistics are degenerate (zero total mass)");
    return count(i, j) / t;
  }

  /// P_i = sum_j P_ij.
  std::vector<double> marginals() const {
    const double t = total_mass();
    detail::require(t > 0.0, "co-occurrence statistics are degenerate (zero total mass)");
    std::vector<double> m(vocab_.size(), 0.0);
    for (const auto& [k, w] : weights_) {
      const auto i = static_cast<std::size_t>(k >> 32);
      const auto j = static_cast<std::size_t>(k & 0xffffffffu);
      m[i] += w;
      if (i != j) m[j] += w;
    }
    for (auto& v : m) v /= t;
    return m;
  }

  /// Adds the counts of `other`, matching tokens by name.
  void merge(const CooccurrenceStats& other) {
    std::vector<std::uint32_t> remap(other.vocab_.size());
    for (std::size_t t = 0; t < other.vocab_.size(); ++t) remap[t] = add_token(other.vocab_[t]);
    for (const auto& [k, w] : other.weights_) {
      add_stored(remap[static_cast<std::size_t>(k >> 32)], remap[static_cast<std::size_t>(k & 0xffffffffu)], w);
    }
  }

 private:
  static std::uint64_t key(std::uint32_t i, std::uint32_t j) {
    return (static_cast<std::uint64_t>(i) << 32) | static_cast<std::uint64_t>(j);
  }

  std::vector<std::string> vocab_;
  std::unordered_map<std::string, std::uint32_t> index_;
  std::map<std::uint64_t, double> weights_;
};

/// Each same-article position pair at offset d in 1..L adds L/d to #(i,j) and #(j,i).
///
/// The vocabulary lists observed tokens only: in `order` when given, else in
/// first-appearance order.
inline CooccurrenceStats count_cooccurrence(const TokenStream& stream, int window,
                                            const std::vector<std::string>* order = nullptr) {
  detail::require(window >= 1, "window must be >= 1");
  std::unordered_set<std::string> observed(stream.tokens.begin(), stream.tokens.end());
  CooccurrenceStats stats;
  if (order != nullptr) {
    for (const auto& t : *order) {
      if (observed.count(t)) stats.add_token(t);
    }
  }
  std::vector<std::uint32_t> ids;
  ids.reserve(stream.tokens.size());
  for (const auto& t : stream.tokens) ids.push_back(stats.add_token(t));

  const double L = window;
  for (std::size_t a = 0; a < stream.article_count(); ++a) {
    const auto [begin, end] = stream.article(a);
    for (std::size_t p = begin; p < end; ++p) {
      const std::size_t last = std::min(end, p + static_cast<std::size_t>(window) + 1);
      for (std::size_t q = p + 1; q < last; ++q) stats.add_pair(ids[p], ids[q], L / static_cast<double>(q - p));
    }
  }
  return stats;
}

// ---------------------------------------------------------------- M*

/// 2(p_ij - p_i p_j)/(p_ij + p_i p_j) = 2 tanh(PMI/2); -2 when p_ij = 0.
inline double mstar_entry(double p_ij, double p_i, double p_j) {
  detail::require(p_i > 0.0 && p_j > 0.0, "M* needs positive marginals");
  detail::require(p_ij >= 0.0, "M* needs a nonnegative joint probability");
  const double indep = p_i * p_j;
  return 2.0 * (p_ij - indep) / (p_ij + indep);
}

struct MstarView {
  std::vector<std::string> tokens;
  Eigen::MatrixXd matrix;
  std::size_t unseen_pairs = 0;   ///< unordered pairs (incl. diagonal) with no support
  double sparsity = 0.0;          ///< unseen_pairs / (n(n+1)/2)
};

/// Dense M* on a token subset, in the given order. Missing tokens are an error.
inline MstarView mstar_restricted(const CooccurrenceStats& stats, const std::vector<std::string>& subset) {
  std::vector<std::uint32_t> ids;
  std::string missing;
  for (const auto& t : subset) {
    if (auto id = stats.id(t)) {
      ids.push_back(*id);
    } else {
      missing += (missing.empty() ? "" : ", ") + t;
    }
  }
  detail::require(missing.empty(), "tokens missing from the count vocabulary: " + missing);
  const std::vector<double> pm = stats.marginals();
  const double total = stats.total_mass();
  const auto n = static_cast<Eigen::Index>(ids.size());
  MstarView view;
  view.tokens = subset;
  view.matrix.resize(n, n);
  for (Eigen::Index a = 0; a < n; ++a) {
    for (Eigen::Index b = a; b < n; ++b) {
      const double c = stats.count(ids[static_cast<std::size_t>(a)], ids[static_cast<std::size_t>(b)]);
      if (c == 0.0) ++view.unseen_pairs;
      const double pi = pm[ids[static_cast<std::size_t>(a)]];
      const double pj = pm[ids[static_cast<std::size_t>(b)]];
      if (!(pi > 0.0 && pj > 0.0)) {
        throw InputError("token '" + (pi > 0.0 ? subset[static_cast<std::size_t>(b)] : subset[static_cast<std::size_t>(a)]) +
                         "' has zero marginal probability");
      }
      view.matrix(a, b) = view.matrix(b, a) = mstar_entry(c / total, pi, pj);
    }
  }
  view.matrix = 0.5 * (view.matrix + view.matrix.transpose()).eval();
  const double cells = 0.5 * static_cast<double>(n) * static_cast<double>(n + 1);
  view.sparsity = cells > 0 ? static_cast<double>(view.unseen_pairs) / cells : 0.0;
  return view;
}

// ---------------------------------------------------------------- HGC1

namespace detail {

template <class T>
void put_le(std::ostream& os, T value) {
  static_assert(std::is_integral_v<T> && std::is_unsigned_v<T>);
  char buf[sizeof(T)];
  for (std::size_t b = 0; b < sizeof(T); ++b) buf[b] = static_cast<char>((value >> (8 * b)) & 0xffu);
  os.write(buf, sizeof(T));
}

template <class T>
T get_le(std::istream& is, const char* what) {
  static_assert(std::is_integral_v<T> && std::is_unsigned_v<T>);
  unsigned char buf[sizeof(T)];
  is.read(reinterpret_cast<char*>(buf), sizeof(T));
  require(static_cast<std::size_t>(is.gcount()) == sizeof(T), std::string("truncated file while reading ") + what);
  T v = 0;
  for (std::size_t b = 0; b < sizeof(T); ++b) v |= static_cast<T>(buf[b]) << (8 * b);
  return v;
}

inline void put_f64(std::ostream& os, double x) {
  std::uint64_t bits;
  std::memcpy(&bits, &x, sizeof bits);
  put_le(os, bits);
}
inline double get_f64(std::istream& is, const char* what) {
  const auto bits = get_le<std::uint64_t>(is, what);
  double x;
  std::memcpy(&x, &bits, sizeof x);
  return x;
}
inline void put_f32(std::ostream& os, float x) {
  std::uint32_t bits;
  std::memcpy(&bits, &x, sizeof bits);
  put_le(os, bits);
}
inline float get_f32(std::istream& is, const char* what) {
  const auto bits = get_le<std::uint32_t>(is, what);
  float x;
  std::memcpy(&x, &bits, sizeof x);
  return x;
}

inline void put_string(std::ostream& os, const std::string& s) {
  put_le(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}
inline std::string get_string(std::istream& is) {
  const auto len = get_le<std::uint32_t>(is, "token length");
  std::string s(len, '\0');
  is.read(s.data(), len);
  require(static_cast<std::uint32_t>(is.gcount()) == len, "truncated file while reading a token");
  return s;
}

inline void expect_magic(std::istream& is, const char* magic) {
  char buf[4] = {};
  is.read(buf, 4);
  require(is.gcount() == 4 && std::memcmp(buf, magic, 4) == 0, std::string("bad magic: expected ") + magic);
}

}  // namespace detail

/// Little-endian: "HGC1", u32 vocab size, u64 nnz, u32-length-prefixed tokens,
/// then (u32 i, u32 j, f64 weight) with i <= j.
inline void write_counts(std::ostream& os, const CooccurrenceStats& stats) {
  os.write("HGC1", 4);
  detail::put_le(os, static_cast<std::uint32_t>(stats.vocab_size()));
  detail::put_le(os, static_cast<std::uint64_t>(stats.nnz()));
  for (const auto& t : stats.vocabulary()) detail::put_string(os, t);
  for (const auto& [i, j, w] : stats.triplets()) {
    detail::put_le(os, i);
    detail::put_le(os, j);
    detail::put_f64(os, w);
  }
  detail::require(static_cast<bool>(os), "failed to write count data");
}

inline CooccurrenceStats read_counts(std::istream& is) {
  detail::expect_magic(is, "HGC1");
  const auto n = detail::get_le<std::uint32_t>(is, "vocab size");
  const auto nnz = detail::get_le<std::uint64_t>(is, "nnz");
  CooccurrenceStats stats;
  for (std::uint32_t t = 0; t < n; ++t) {
    const auto before = stats.vocab_size();
    stats.add_token(detail::get_string(is));
    detail::require(stats.vocab_size() == before + 1, "duplicate token in count file");
  }
  for (std::uint64_t e = 0; e < nnz; ++e) {
    const auto i = detail::get_le<std::uint32_t>(is, "triplet");
    const auto j = detail::get_le<std::uint32_t>(is, "triplet");
    const double w = detail::get_f64(is, "triplet");
    detail::require(i <= j && j < n, "invalid triplet index in count file");
    detail::require(std::isfinite(w) && w >= 0.0, "invalid triplet weight in count file");
    stats.add_stored(i, j, w);
  }
  return stats;
}

inline void write_counts(const std::filesystem::path& path, const CooccurrenceStats& stats) {
  std::ofstream os(path, std::ios::binary);
  detail::require(static_cast<bool>(os), "cannot open " + path.string() + " for writing");
  write_counts(os, stats);
}

inline CooccurrenceStats read_counts(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  detail::require(static_cast<bool>(is), "cannot open count file " + path.string());
  return read_counts(is);
}

// ---------------------------------------------------------------- synthetic

struct SyntheticConfig {
  double total_pairs = 1e7;      ///< N multinomial events
  double hierarchy_mass = 0.8;   ///< S = sum of hierarchy-token marginals
  int background_tokens = 2000;  ///< K tokens sharing the remaining mass 1 - S equally
  std::string background_prefix = "background";
};

/// Names of the K background tokens: the prefix alone for K = 1, else prefix + a, b, ..., ba, ...
inline std::vector<std::string> background_token_names(const SyntheticConfig& cfg) {
  std::vector<std::string> names;
  for (int k = 0; k < cfg.background_tokens; ++k) {
    if (cfg.background_tokens == 1) {
      names.push_back(cfg.background_prefix);
      break;
    }
    std::string suffix;
    int v = k;
    do {
      suffix.insert(suffix.begin(), static_cast<char>('a' + v % 26));
      v /= 26;
    } while (v > 0);
    names.push_back(cfg.background_prefix + suffix);
  }
  return names;
}

/// Draws N co-occurrence events whose population M* equals f(dist(i,j)) on the
/// hierarchy tokens.
///
/// Hierarchy marginals are p_i = S u_i / sum(u) and ordered-pair probabilities
/// pi_ij = p_i p_j (2 + f)/(2 - f). The residual r_i = p_i - sum_j pi_ij is
/// spread evenly over K background tokens, which also share the leftover
/// mass among themselves, so every p_i is the exact population marginal.
/// Each off-diagonal event adds 1 to #(i,j) and #(j,i); a diagonal event adds 2 to #(i,i).
inline CooccurrenceStats generate_synthetic_counts(const DistanceMatrix& distances,
                                                   const std::vector<std::string>& tokens,
                                                   const KernelSpec& kernel, const std::vector<double>& unigram,
                                                   const SyntheticConfig& cfg, Rng& rng) {
  const auto n = static_cast<std::size_t>(distances.size());
  detail::require(tokens.size() == n && unigram.size() == n, "tokens, weights and distances disagree in size");
  detail::require(n >= 1, "synthetic corpus needs at least one token");
  detail::require(cfg.total_pairs >= 1.0 && std::isfinite(cfg.total_pairs), "total pair count must be >= 1");
  detail::require(cfg.hierarchy_mass > 0.0 && cfg.hierarchy_mass < 1.0, "hierarchy mass must lie in (0, 1)");
  detail::require(cfg.background_tokens >= 1, "at least one background token is required");
  const std::vector<std::string> background = background_token_names(cfg);
  for (const auto& b : background) {
    detail::require(std::find(tokens.begin(), tokens.end(), b) == tokens.end(),
                    "background token '" + b + "' collides with a hierarchy token");
  }
  double usum = 0.0;
  for (double u : unigram) {
    detail::require(std::isfinite(u) && u > 0.0, "unigram weights must be positive");
    usum += u;
  }
  std::vector<double> table(static_cast<std::size_t>(distances.max()) + 1);
  for (std::size_t d = 0; d < table.size(); ++d) {
    const double f = kernel(static_cast<int>(d));
    detail::require(f < 2.0 && f > -2.0, "kernel value f(" + std::to_string(d) + ") = " + std::to_string(f) +
                                             " lies outside (-2, 2); the inverse transform is undefined");
    table[d] = (2.0 + f) / (2.0 - f);
  }
  std::vector<double> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = cfg.hierarchy_mass * unigram[i] / usum;

  const auto K = static_cast<std::size_t>(cfg.background_tokens);
  const double k_inv = 1.0 / static_cast<double>(K);
  // Unordered cells (i <= j) with probabilities, in index order.
  std::vector<std::tuple<std::uint32_t, std::uint32_t, double>> cells;
  double residual_total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double pij = p[i] * p[j] * table[static_cast<std::size_t>(distances(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)))];
      row += pij;
      if (j == i) cells.emplace_back(i, j, pij);
      if (j > i) cells.emplace_back(i, j, 2.0 * pij);
    }
    const double r = p[i] - row;
    detail::require(r >= -1e-15, "hierarchy mass too large: token '" + tokens[i] +
                                     "' would need negative background co-occurrence; lower hierarchy_mass");
    for (std::size_t k = 0; k < K; ++k) {
      cells.emplace_back(static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(n + k), 2.0 * std::max(r, 0.0) * k_inv);
    }
    residual_total += std::max(r, 0.0);
  }
  const double bg = 1.0 - cfg.hierarchy_mass - residual_total;
  detail::require(bg >= -1e-15, "hierarchy mass too large for a consistent background");
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t l = k; l < K; ++l) {
      cells.emplace_back(static_cast<std::uint32_t>(n + k), static_cast<std::uint32_t>(n + l),
                         (k == l ? 1.0 : 2.0) * std::max(bg, 0.0) * k_inv * k_inv);
    }
  }

  std::vector<std::string> vocab = tokens;
  vocab.insert(vocab.end(), background.begin(), background.end());
  CooccurrenceStats stats(vocab);
  auto remaining = static_cast<long long>(std::llround(cfg.total_pairs));
  double mass_left = 0.0;
  for (const auto& c : cells) mass_left += std::get<2>(c);
  for (std::size_t c = 0; c < cells.size() && remaining > 0; ++c) {
    const auto [i, j, prob] = cells[c];
    long long k = remaining;
    if (c + 1 < cells.size()) {
      const double q = mass_left > 0.0 ? std::clamp(prob / mass_left, 0.0, 1.0) : 0.0;
      std::binomial_distribution<long long> draw(remaining, q);
      k = draw(rng);
    }
    mass_left -= prob;
    remaining -= k;
    if (k > 0) stats.add_stored(i, j, (i == j ? 2.0 : 1.0) * static_cast<double>(k));
  }
  return stats;
}

}  // namespace hgeo
