#pragma once

// External embedding tables (HGE1 files), frozen centering/whitening,
// covariance-normalized concept vectors with Ledoit-Wolf shrinkage, and
// parent-child innovation diagnostics.

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "hgeo/cooccur.hpp"
#include "hgeo/errors.hpp"
#include "hgeo/hierarchy.hpp"
#include "hgeo/rng.hpp"

namespace hgeo {

// ---------------------------------------------------------------- table

enum class Preprocessing { None, Centered, CenteredWhitened };

inline const char* to_string(Preprocessing p) {
  switch (p) {
    case Preprocessing::None: return "none";
    case Preprocessing::Centered: return "centered";
    case Preprocessing::CenteredWhitened: return "centered+whitened";
  }
  return "unknown";
}

class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  EmbeddingTable(std::vector<std::string> tokens, Eigen::MatrixXd rows,
                 Preprocessing prep = Preprocessing::None)
      : tokens_(std::move(tokens)), rows_(std::move(rows)), prep_(prep) {
    detail::require(static_cast<Eigen::Index>(tokens_.size()) == rows_.rows(), "token count does not match rows");
    for (std::size_t k = 0; k < tokens_.size(); ++k) {
      detail::require(index_.emplace(tokens_[k], static_cast<int>(k)).second,
                      "duplicate token '" + tokens_[k] + "' in embedding table");
    }
  }

  const std::vector<std::string>& tokens() const { return tokens_; }
  const Eigen::MatrixXd& rows() const { return rows_; }
  Preprocessing preprocessing() const { return prep_; }
  Eigen::Index size() const { return rows_.rows(); }
  Eigen::Index dim() const { return rows_.cols(); }
  std::optional<int> find(const std::string& token) const {
    auto it = index_.find(token);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

 private:
  std::vector<std::string> tokens_;
  Eigen::MatrixXd rows_;
  Preprocessing prep_ = Preprocessing::None;
  std::unordered_map<std::string, int> index_;
};

/// Little-endian: "HGE1", u64 n, u32 d, u32-length-prefixed tokens, row-major f32 matrix.
inline void write_embeddings(std::ostream& os, const EmbeddingTable& t) {
  os.write("HGE1", 4);
  detail::put_le(os, static_cast<std::uint64_t>(t.size()));
  detail::put_le(os, static_cast<std::uint32_t>(t.dim()));
  for (const auto& tok : t.tokens()) detail::put_string(os, tok);
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    for (Eigen::Index j = 0; j < t.dim(); ++j) detail::put_f32(os, static_cast<float>(t.rows()(i, j)));
  }
  detail::require(static_cast<bool>(os), "failed to write embedding data");
}

inline EmbeddingTable read_embeddings(std::istream& is) {
  detail::expect_magic(is, "HGE1");
  const auto n = detail::get_le<std::uint64_t>(is, "row count");
  const auto d = detail::get_le<std::uint32_t>(is, "dimension");
  detail::require(n <= (std::uint64_t{1} << 31), "embedding row count is implausibly large");
  std::vector<std::string> tokens;
  tokens.reserve(static_cast<std::size_t>(n));
  for (std::uint64_t k = 0; k < n; ++k) tokens.push_back(detail::get_string(is));
  Eigen::MatrixXd rows(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    for (Eigen::Index j = 0; j < rows.cols(); ++j) {
      const float v = detail::get_f32(is, "matrix entry");
      detail::require(std::isfinite(v), "non-finite embedding entry");
      rows(i, j) = v;
    }
  }
  return EmbeddingTable(std::move(tokens), std::move(rows));
}

inline void write_embeddings(const std::filesystem::path& path, const EmbeddingTable& t) {
  std::ofstream os(path, std::ios::binary);
  detail::require(static_cast<bool>(os), "cannot open " + path.string() + " for writing");
  write_embeddings(os, t);
}

inline EmbeddingTable read_embeddings(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  detail::require(static_cast<bool>(is), "cannot open embedding file " + path.string());
  return read_embeddings(is);
}

// ---------------------------------------------------------------- whitening

/// v -> T (v - mu), fitted once and applied to any subset.
struct WhiteningTransform {
  Eigen::VectorXd mean;
  Eigen::MatrixXd transform;  ///< Sigma^{-1/2} with floored eigenvalues, or identity when centering only
  bool whiten = true;

  Eigen::MatrixXd apply(const Eigen::MatrixXd& rows) const {
    detail::require(rows.cols() == mean.size(), "dimension mismatch in whitening");
    return (rows.rowwise() - mean.transpose()) * transform.transpose();
  }
};

inline WhiteningTransform fit_whitening(const Eigen::MatrixXd& rows, bool whiten = true, double floor = 1e-8) {
  detail::require(rows.rows() >= 2, "whitening needs at least 2 vectors");
  WhiteningTransform w;
  w.whiten = whiten;
  w.mean = rows.colwise().mean().transpose();
  const Eigen::Index d = rows.cols();
  if (!whiten) {
    w.transform = Eigen::MatrixXd::Identity(d, d);
    return w;
  }
  const Eigen::MatrixXd centered = rows.rowwise() - w.mean.transpose();
  const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(rows.rows() - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  detail::require(es.info() == Eigen::Success, "covariance eigensolve failed");
  const double lmax = es.eigenvalues().maxCoeff();
  detail::require(lmax > 0.0, "vectors have zero covariance; cannot whiten");
  const Eigen::VectorXd inv_sqrt =
      es.eigenvalues().unaryExpr([&](double l) { return 1.0 / std::sqrt(std::max(l, floor * lmax)); });
  w.transform = es.eigenvectors() * inv_sqrt.asDiagonal() * es.eigenvectors().transpose();
  return w;
}

/// Centers (and optionally whitens) a table with a transform fitted on the table itself.
inline EmbeddingTable center_whiten(const EmbeddingTable& table, bool whiten = true,
                                    WhiteningTransform* fitted = nullptr) {
  WhiteningTransform w = fit_whitening(table.rows(), whiten);
  EmbeddingTable out(table.tokens(), w.apply(table.rows()),
                     whiten ? Preprocessing::CenteredWhitened : Preprocessing::Centered);
  if (fitted) *fitted = std::move(w);
  return out;
}

// ---------------------------------------------------------------- concept vectors

enum class ShrinkageMode { LedoitWolf, Fixed, None };

struct ShrinkageOptions {
  ShrinkageMode mode = ShrinkageMode::LedoitWolf;
  double intensity = 0.0;  ///< used by Fixed, in [0, 1]
};

struct ConceptVector {
  std::string id;
  Eigen::VectorXd direction;  ///< unit g~
  double magnitude = 0.0;     ///< g~^T mu
  Eigen::VectorXd vector;     ///< magnitude * direction
  Eigen::VectorXd mean;       ///< mu
  double shrinkage = 0.0;     ///< intensity actually used
  std::size_t train_count = 0;
  bool zero = false;          ///< mean (or its normalized image) vanished
};

/// Ledoit-Wolf intensity toward (tr(S)/d) I for the 1/n sample covariance S.
inline double ledoit_wolf_intensity(const Eigen::MatrixXd& centered, const Eigen::MatrixXd& s) {
  const auto n = static_cast<double>(centered.rows());
  const auto d = static_cast<double>(s.rows());
  const double mu = s.trace() / d;
  const Eigen::MatrixXd target_gap = s - mu * Eigen::MatrixXd::Identity(s.rows(), s.cols());
  const double delta2 = target_gap.squaredNorm() / d;
  if (!(delta2 > 0.0)) return 1.0;
  double beta_bar = 0.0;
  for (Eigen::Index k = 0; k < centered.rows(); ++k) {
    const Eigen::VectorXd x = centered.row(k).transpose();
    beta_bar += (x * x.transpose() - s).squaredNorm() / d;
  }
  beta_bar /= n * n;
  return std::min(beta_bar, delta2) / delta2;
}

/// Moore-Penrose solve with singular values below rel_cutoff * max dropped.
inline Eigen::VectorXd pinv_solve(const Eigen::MatrixXd& sym, const Eigen::VectorXd& rhs, double rel_cutoff = 1e-10) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  detail::require(es.info() == Eigen::Success, "covariance eigensolve failed");
  const Eigen::VectorXd& l = es.eigenvalues();
  const double lmax = l.cwiseAbs().maxCoeff();
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(l.size());
  for (Eigen::Index k = 0; k < l.size(); ++k) {
    if (std::abs(l(k)) > rel_cutoff * lmax) inv(k) = 1.0 / l(k);
  }
  return es.eigenvectors() * (inv.asDiagonal() * (es.eigenvectors().transpose() * rhs));
}

/// g~ = Sigma^+ mu / ||Sigma^+ mu||, concept vector (g~^T mu) g~. Rows of `train` are vectors.
inline ConceptVector estimate_concept_vector(const Eigen::MatrixXd& train, const ShrinkageOptions& opt = {},
                                             std::string id = {}) {
  detail::require(train.rows() >= 2, "concept vector needs at least 2 training vectors");
  ConceptVector cv;
  cv.id = std::move(id);
  cv.train_count = static_cast<std::size_t>(train.rows());
  const Eigen::Index d = train.cols();
  cv.mean = train.colwise().mean().transpose();
  const Eigen::MatrixXd centered = train.rowwise() - cv.mean.transpose();
  const Eigen::MatrixXd s = centered.transpose() * centered / static_cast<double>(train.rows());
  switch (opt.mode) {
    case ShrinkageMode::LedoitWolf: cv.shrinkage = ledoit_wolf_intensity(centered, s); break;
    case ShrinkageMode::Fixed:
      detail::require(opt.intensity >= 0.0 && opt.intensity <= 1.0, "shrinkage intensity must lie in [0, 1]");
      cv.shrinkage = opt.intensity;
      break;
    case ShrinkageMode::None: cv.shrinkage = 0.0; break;
  }
  const double scale = s.trace() / static_cast<double>(d);
  Eigen::MatrixXd sigma = (1.0 - cv.shrinkage) * s;
  sigma.diagonal().array() += cv.shrinkage * (scale > 0.0 ? scale : 1.0);

  cv.direction = Eigen::VectorXd::Zero(d);
  cv.vector = Eigen::VectorXd::Zero(d);
  const double mean_norm = cv.mean.norm();
  if (!(mean_norm > 0.0) || sigma.cwiseAbs().maxCoeff() == 0.0) {
    cv.zero = true;
    return cv;
  }
  const Eigen::VectorXd g = pinv_solve(sigma, cv.mean);
  const double gn = g.norm();
  if (!(gn > 0.0)) {
    cv.zero = true;
    return cv;
  }
  cv.direction = g / gn;
  cv.magnitude = cv.direction.dot(cv.mean);
  cv.vector = cv.magnitude * cv.direction;
  return cv;
}

/// cos(l_child - l_parent, l_parent); NaN when the difference vanishes.
inline double innovation_cosine(const ConceptVector& child, const ConceptVector& parent) {
  const double pn = parent.vector.norm();
  detail::require(pn > 0.0, "parent concept vector is zero");
  detail::require(child.vector.size() == parent.vector.size(), "concept vectors differ in dimension");
  const Eigen::VectorXd diff = child.vector - parent.vector;
  const double dn = diff.norm();
  if (!(dn > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  return std::clamp(diff.dot(parent.vector) / (dn * pn), -1.0, 1.0);
}

struct ProjectionSeparation {
  std::vector<double> heldout;
  std::vector<double> baseline;
  double mean_heldout = 0.0;
  double mean_baseline = 0.0;
  double pooled_sd = 0.0;
  double separation = 0.0;  ///< (mean_heldout - mean_baseline) / pooled_sd
};

inline ProjectionSeparation projection_separation(const ConceptVector& cv, const Eigen::MatrixXd& heldout,
                                                  const Eigen::MatrixXd& baseline) {
  detail::require(heldout.rows() > 0 && baseline.rows() > 0, "projection sets must be nonempty");
  ProjectionSeparation r;
  auto project = [&](const Eigen::MatrixXd& m, std::vector<double>& out, double& mean) {
    const Eigen::VectorXd p = m * cv.direction;
    out.assign(p.data(), p.data() + p.size());
    mean = p.mean();
    return (p.array() - mean).square().sum();
  };
  const double ss1 = project(heldout, r.heldout, r.mean_heldout);
  const double ss2 = project(baseline, r.baseline, r.mean_baseline);
  const double dof = static_cast<double>(heldout.rows() + baseline.rows()) - 2.0;
  r.pooled_sd = dof > 0.0 ? std::sqrt((ss1 + ss2) / dof) : 0.0;
  const double gap = r.mean_heldout - r.mean_baseline;
  if (r.pooled_sd > 0.0) {
    r.separation = gap / r.pooled_sd;
  } else {
    r.separation = gap == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), gap);
  }
  return r;
}

/// Seeded split of indices 0..n-1 into round(fraction * n) training and the rest.
inline std::pair<std::vector<int>, std::vector<int>> train_split(int n, double fraction, Rng& rng) {
  detail::require(n >= 1, "cannot split an empty set");
  detail::require(fraction > 0.0 && fraction <= 1.0, "training fraction must lie in (0, 1]");
  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  const auto k = static_cast<std::size_t>(std::clamp<long>(std::lround(fraction * n), 1, n));
  std::vector<int> train(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k));
  std::vector<int> held(idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end());
  std::sort(train.begin(), train.end());
  std::sort(held.begin(), held.end());
  return {train, held};
}

// ---------------------------------------------------------------- hierarchy diagnostic

struct InnovationRecord {
  std::string child;
  std::string parent;  ///< true parent, or the substituted one
  bool shuffled = false;
  double cosine = 0.0;
};

struct ConceptDiagnosticConfig {
  double train_fraction = 0.7;
  ShrinkageOptions shrinkage{};
  std::uint64_t seed = 0;
  std::size_t min_train = 2;
};

/// Concept vectors for every node whose descendant set (itself included) has
/// enough embedded tokens, then innovation cosines against the true parent and
/// against a uniformly drawn other concept.
inline std::vector<InnovationRecord> concept_innovations(const ContractedHierarchy& h, const EmbeddingTable& table,
                                                         const ConceptDiagnosticConfig& cfg) {
  const int n = h.size();
  std::vector<std::vector<int>> rows_below(static_cast<std::size_t>(n));
  for (int u = n - 1; u >= 0; --u) {
    auto& mine = rows_below[static_cast<std::size_t>(u)];
    if (auto r = table.find(h.id(u))) mine.push_back(*r);
    for (int c : h.children(u)) {
      const auto& sub = rows_below[static_cast<std::size_t>(c)];
      mine.insert(mine.end(), sub.begin(), sub.end());
    }
  }
  std::vector<std::optional<ConceptVector>> concepts(static_cast<std::size_t>(n));
  for (int u = 0; u < n; ++u) {
    const auto& rows = rows_below[static_cast<std::size_t>(u)];
    Rng rng = make_substream(cfg.seed, 1, static_cast<std::uint64_t>(u));
    const auto [train, held] = train_split(static_cast<int>(rows.size()) > 0 ? static_cast<int>(rows.size()) : 1,
                                           cfg.train_fraction, rng);
    if (rows.empty() || train.size() < std::max<std::size_t>(cfg.min_train, 2)) continue;
    Eigen::MatrixXd y(static_cast<Eigen::Index>(train.size()), table.dim());
    for (std::size_t k = 0; k < train.size(); ++k) {
      y.row(static_cast<Eigen::Index>(k)) = table.rows().row(rows[static_cast<std::size_t>(train[k])]);
    }
    auto cv = estimate_concept_vector(y, cfg.shrinkage, h.id(u));
    if (!cv.zero) concepts[static_cast<std::size_t>(u)] = std::move(cv);
  }
  std::vector<int> available;
  for (int u = 0; u < n; ++u) {
    if (concepts[static_cast<std::size_t>(u)]) available.push_back(u);
  }
  std::vector<InnovationRecord> out;
  Rng rng = make_substream(cfg.seed, 2);
  for (int u = 1; u < n; ++u) {
    const int p = h.parent(u);
    if (!concepts[static_cast<std::size_t>(u)] || !concepts[static_cast<std::size_t>(p)]) continue;
    const auto& child = *concepts[static_cast<std::size_t>(u)];
    out.push_back({h.id(u), h.id(p), false, innovation_cosine(child, *concepts[static_cast<std::size_t>(p)])});
    std::vector<int> others;
    for (int a : available) {
      if (a != u && a != p) others.push_back(a);
    }
    if (others.empty()) continue;
    std::uniform_int_distribution<std::size_t> pick(0, others.size() - 1);
    const int q = others[pick(rng)];
    out.push_back({h.id(u), h.id(q), true, innovation_cosine(child, *concepts[static_cast<std::size_t>(q)])});
  }
  return out;
}

inline void write_cosines_csv(std::ostream& os, const std::vector<InnovationRecord>& records) {
  os << "child,parent,kind,cosine\n";
  for (const auto& r : records) {
    os << r.child << ',' << r.parent << ',' << (r.shuffled ? "shuffled" : "true") << ',' << r.cosine << '\n';
  }
}

}  // namespace hgeo
