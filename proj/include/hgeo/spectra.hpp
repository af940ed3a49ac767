#pragma once

// Embedding construction, spectral-ordering checks on Haar blocks, top-k
// eigenspace alignment with shuffle baselines, and clustered-eigenspace
// perturbation bounds.

#include <Eigen/Core>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "hgeo/eigensystem.hpp"
#include "hgeo/errors.hpp"
#include "hgeo/haar.hpp"
#include "hgeo/json_util.hpp"
#include "hgeo/kernel.hpp"
#include "hgeo/rng.hpp"

namespace hgeo {

// ---------------------------------------------------------------- embedding

struct EmbeddingMatrix {
  Eigen::MatrixXd W;        ///< n x retained
  std::string source_id;
  int requested = 0;
  int retained = 0;
  bool empty = false;       ///< source had no positive eigenvalue
};

/// W = U_d Lambda_d^{1/2} over the top min(d, #positive) positive modes.
inline EmbeddingMatrix build_embedding(const Eigen::MatrixXd& mstar, int d, std::string source_id = {}) {
  detail::require(d >= 1, "embedding dimension must be >= 1");
  const PsdComponent psd = psd_component(mstar, d);
  EmbeddingMatrix out;
  out.source_id = std::move(source_id);
  out.requested = d;
  out.retained = psd.rank;
  out.empty = psd.rank == 0;
  out.W = psd.eigenvectors * psd.eigenvalues.cwiseSqrt().asDiagonal();
  return out;
}

// ---------------------------------------------------------------- ordering

struct OrderingCheck {
  std::string name;
  bool applicable = true;
  bool holds = true;
  double min_slack = std::numeric_limits<double>::infinity();
  std::string note;
};

struct OrderingReport {
  Eigen::VectorXd scaling_eigenvalues;           ///< lambda^sc, descending
  std::vector<Eigen::VectorXd> split_eigenvalues;  ///< index h-1 -> lambda^(h), descending
  Eigen::VectorXd scaling_leading_vector;          ///< c_{l,1}
  std::vector<Eigen::VectorXd> split_leading_vectors;  ///< a^(h)_{r,1}
  double spectral_norm = 0.0;
  double tolerance = 0.0;
  bool degenerate = false;  ///< every split block vanishes
  std::vector<OrderingCheck> checks;

  bool all_hold() const {
    return std::all_of(checks.begin(), checks.end(), [](const OrderingCheck& c) { return !c.applicable || c.holds; });
  }
  const OrderingCheck& check(const std::string& name) const {
    for (const auto& c : checks) {
      if (c.name == name) return c;
    }
    throw InputError("no ordering check named '" + name + "'");
  }
};

namespace detail {

class SlackTracker {
 public:
  SlackTracker(std::string name, double tol, bool applicable) {
    check_.name = std::move(name);
    check_.applicable = applicable;
    tol_ = tol;
  }
  /// Records the inequality lhs >= rhs.
  void ge(double lhs, double rhs) { slack(lhs - rhs); }
  void slack(double s) {
    check_.min_slack = std::min(check_.min_slack, s);
    if (s < -tol_) check_.holds = false;
  }
  OrderingCheck done(std::string note = {}) {
    check_.note = std::move(note);
    return check_;
  }

 private:
  OrderingCheck check_;
  double tol_ = 0.0;
};

}  // namespace detail

/// Evaluates every spectral-ordering inequality on the blocks of a kernel
/// Gram matrix over a regular tree. Violations are reported, never thrown.
inline OrderingReport verify_ordering(const BlockDecomposition& blocks, const KernelSpec& kernel) {
  OrderingReport rep;
  const int L = blocks.depth();
  const bool constant_profile =
      std::adjacent_find(blocks.profile.begin(), blocks.profile.end(), std::not_equal_to<>()) == blocks.profile.end();
  const int max_d = 2 * L;
  const bool positive = kernel.positive_on(max_d);
  const bool decreasing = kernel.strictly_decreasing_on(max_d);
  const bool exponential = kernel.family() == KernelFamily::Exponential;

  const EigenSystem sc = sym_eig(blocks.scaling);
  rep.scaling_eigenvalues = sc.values;
  rep.scaling_leading_vector = sc.vectors.col(0);
  double norm = sc.spectral_norm();
  std::vector<Eigen::MatrixXd> split(static_cast<std::size_t>(L));
  double max_entry = 0.0;
  for (int h = 1; h <= L; ++h) {
    split[h - 1] = blocks.split_of_height(h).depth_block;
    const EigenSystem es = sym_eig(split[h - 1]);
    rep.split_eigenvalues.push_back(es.values);
    Eigen::VectorXd lead = es.vectors.col(0);
    if (lead.sum() < 0.0) lead = -lead;
    rep.split_leading_vectors.push_back(lead);
    norm = std::max(norm, es.spectral_norm());
    max_entry = std::max(max_entry, split[h - 1].cwiseAbs().maxCoeff());
  }
  rep.spectral_norm = norm;
  const double tol = 1e-10 * std::max(norm, std::numeric_limits<double>::min());
  rep.tolerance = tol;
  rep.degenerate = L > 0 && max_entry <= tol;
  constexpr double kVecTol = 1e-10;

  {
    detail::SlackTracker t("perron_top", tol, positive);
    for (int h = 1; h <= L; ++h) t.ge(rep.scaling_eigenvalues(0), rep.split_eigenvalues[h - 1](0));
    if (sc.size() > 1) t.ge(rep.scaling_eigenvalues(0), rep.scaling_eigenvalues(1));
    rep.checks.push_back(t.done("lambda^sc_1 dominates every block eigenvalue"));
  }
  {
    Eigen::VectorXd c = rep.scaling_leading_vector;
    if (c.sum() < 0.0) c = -c;
    rep.scaling_leading_vector = c;
    detail::SlackTracker t("scaling_vector_positive", kVecTol, positive);
    t.slack(c.minCoeff());
    rep.checks.push_back(t.done("all c_{l,1} > 0"));
  }
  {
    detail::SlackTracker t("split_entries_positive", tol, decreasing);
    for (const auto& a : split) t.slack(a.minCoeff());
    rep.checks.push_back(t.done(decreasing ? "" : "kernel is not strictly decreasing on 0..2L"));
  }
  {
    detail::SlackTracker t("split_vector_positive", kVecTol, decreasing);
    for (const auto& v : rep.split_leading_vectors) t.slack(rep.degenerate ? 0.0 : v.minCoeff());
    rep.checks.push_back(t.done("all a^(h)_{r,1} > 0"));
  }
  {
    detail::SlackTracker t("nesting", tol, constant_profile);
    for (int h = 1; h < L; ++h) {
      t.slack(-(split[h - 1] - split[h].topLeftCorner(h, h)).cwiseAbs().maxCoeff());
    }
    rep.checks.push_back(t.done("A^(h) is the leading principal submatrix of A^(h+1)"));
  }
  {
    detail::SlackTracker t("interlacing", tol, constant_profile);
    for (int h = 1; h < L; ++h) {
      const auto& small = rep.split_eigenvalues[h - 1];
      const auto& big = rep.split_eigenvalues[h];
      for (int k = 0; k < h; ++k) {
        t.ge(big(k), small(k));
        t.ge(small(k), big(k + 1));
      }
    }
    rep.checks.push_back(t.done("lambda^(h+1)_k >= lambda^(h)_k >= lambda^(h+1)_{k+1}"));
  }
  {
    detail::SlackTracker t("coarse_to_fine", tol, constant_profile && decreasing);
    for (int h = 1; h < L; ++h) t.ge(rep.split_eigenvalues[h](0), rep.split_eigenvalues[h - 1](0));
    rep.checks.push_back(t.done("lambda^(L)_1 >= ... >= lambda^(1)_1"));
  }
  {
    detail::SlackTracker t("rank_one_chain", tol, exponential && constant_profile && L >= 1);
    if (L >= 1) {
      const auto& top = rep.split_eigenvalues[L - 1];
      for (int k = 0; k < L; ++k) {
        t.ge(rep.scaling_eigenvalues(k), top(k));
        t.ge(top(k), rep.scaling_eigenvalues(k + 1));
      }
    }
    rep.checks.push_back(t.done("lambda^sc_1 >= lambda^(L)_1 >= lambda^sc_2 >= ... >= lambda^sc_{L+1}"));
  }
  {
    detail::SlackTracker t("non_leading_scaling_placement", tol, exponential && constant_profile && L >= 2);
    for (int k = 1; k <= L - 1; ++k) {
      const double mid = rep.split_eigenvalues[L - 1](k);
      t.ge(rep.split_eigenvalues[L - k - 1](0), mid);
      t.ge(mid, rep.scaling_eigenvalues(k + 1));
    }
    rep.checks.push_back(t.done("lambda^(L-k)_1 >= lambda^(L)_{k+1} >= lambda^sc_{k+2}"));
  }
  return rep;
}

inline void to_json(nlohmann::json& j, const OrderingReport& rep) {
  nlohmann::json split = nlohmann::json::array();
  for (std::size_t h = 0; h < rep.split_eigenvalues.size(); ++h) {
    split.push_back({{"height", h + 1},
                     {"eigenvalues", detail::vector_to_json(rep.split_eigenvalues[h])},
                     {"leading_vector", detail::vector_to_json(rep.split_leading_vectors[h])}});
  }
  nlohmann::json checks = nlohmann::json::array();
  for (const auto& c : rep.checks) {
    checks.push_back({{"name", c.name},
                      {"applicable", c.applicable},
                      {"holds", c.holds},
                      {"min_slack", std::isfinite(c.min_slack) ? nlohmann::json(c.min_slack) : nlohmann::json(nullptr)},
                      {"note", c.note}});
  }
  j = nlohmann::json{{"scaling_eigenvalues", detail::vector_to_json(rep.scaling_eigenvalues)},
                     {"scaling_leading_vector", detail::vector_to_json(rep.scaling_leading_vector)},
                     {"split", std::move(split)},
                     {"spectral_norm", rep.spectral_norm},
                     {"tolerance", rep.tolerance},
                     {"degenerate", rep.degenerate},
                     {"all_hold", rep.all_hold()},
                     {"checks", std::move(checks)}};
}

// ---------------------------------------------------------------- alignment

struct AlignmentCurve {
  std::vector<double> g;        ///< g(1..k_max)
  std::vector<double> gap_emp;  ///< lambda_k - lambda_{k+1} of the empirical Gram (+inf at k = n)
  std::vector<double> gap_th;   ///< same for the theoretical Gram
};

/// g(k) = ||U_k^T V_k||_F^2 / k with U, V the top-k eigenvectors of each Gram.
inline AlignmentCurve topk_alignment(const Eigen::MatrixXd& gram_emp, const Eigen::MatrixXd& gram_th, int k_max) {
  detail::require(gram_emp.rows() == gram_th.rows() && gram_emp.cols() == gram_th.cols(),
                  "alignment needs Gram matrices of equal size");
  const int n = static_cast<int>(gram_emp.rows());
  detail::require(k_max >= 1 && k_max <= n, "k_max must lie in 1..n");
  const EigenSystem a = sym_eig(gram_emp);
  const EigenSystem b = sym_eig(gram_th);
  const Eigen::MatrixXd cross = a.vectors.transpose() * b.vectors;
  AlignmentCurve out;
  for (int k = 1; k <= k_max; ++k) {
    out.g.push_back(cross.topLeftCorner(k, k).squaredNorm() / k);
    const double inf = std::numeric_limits<double>::infinity();
    out.gap_emp.push_back(k < n ? a.values(k - 1) - a.values(k) : inf);
    out.gap_th.push_back(k < n ? b.values(k - 1) - b.values(k) : inf);
  }
  return out;
}

/// Sum_k (g(k) - k/n).
inline double alignment_area(const std::vector<double>& curve, int n) {
  detail::require(n >= 1, "ambient dimension must be >= 1");
  double area = 0.0;
  for (std::size_t k = 1; k <= curve.size(); ++k) area += curve[k - 1] - static_cast<double>(k) / n;
  return area;
}

// ---------------------------------------------------------------- shuffles

enum class ShuffleMode { GlobalLabel, WithinTree };

/// Gram of the rows of `vectors` after a uniformly random row permutation.
inline Eigen::MatrixXd within_tree_shuffle(const Eigen::MatrixXd& vectors, Rng& rng) {
  detail::require(vectors.rows() >= 2, "within-tree shuffle needs at least 2 vectors");
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(vectors.rows()));
  std::iota(perm.begin(), perm.end(), Eigen::Index{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  Eigen::MatrixXd shuffled(vectors.rows(), vectors.cols());
  for (Eigen::Index i = 0; i < vectors.rows(); ++i) shuffled.row(i) = vectors.row(perm[static_cast<std::size_t>(i)]);
  return shuffled * shuffled.transpose();
}

/// Gram of n distinct rows drawn from `pool` under a random relabelling.
inline Eigen::MatrixXd global_shuffle(const Eigen::MatrixXd& pool, int n, Rng& rng) {
  detail::require(n >= 1 && n <= pool.rows(), "global shuffle needs a pool at least as large as the tree");
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(pool.rows()));
  std::iota(perm.begin(), perm.end(), Eigen::Index{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  Eigen::MatrixXd picked(n, pool.cols());
  for (int i = 0; i < n; ++i) picked.row(i) = pool.row(perm[static_cast<std::size_t>(i)]);
  return picked * picked.transpose();
}

/// Within-tree mode permutes `vectors`; global mode draws from `pool`.
inline Eigen::MatrixXd shuffle_baseline(const Eigen::MatrixXd& vectors, ShuffleMode mode, Rng& rng,
                                        const Eigen::MatrixXd* pool = nullptr) {
  if (mode == ShuffleMode::WithinTree) return within_tree_shuffle(vectors, rng);
  detail::require(pool != nullptr, "global shuffle needs a vocabulary pool");
  return global_shuffle(*pool, static_cast<int>(vectors.rows()), rng);
}

// ---------------------------------------------------------------- reports

struct CurveStats {
  std::vector<double> mean;
  std::vector<double> sd;
  std::vector<double> areas;  ///< one per curve
  double area_mean = 0.0;
  double area_se = 0.0;
  std::size_t count = 0;
};

inline CurveStats summarize_curves(const std::vector<std::vector<double>>& curves, int n) {
  CurveStats s;
  s.count = curves.size();
  if (curves.empty()) return s;
  const std::size_t k = curves.front().size();
  s.mean.assign(k, 0.0);
  s.sd.assign(k, 0.0);
  for (const auto& c : curves) {
    detail::require(c.size() == k, "curves of unequal length");
    for (std::size_t i = 0; i < k; ++i) s.mean[i] += c[i];
    s.areas.push_back(alignment_area(c, n));
  }
  for (auto& m : s.mean) m /= static_cast<double>(curves.size());
  for (const auto& c : curves) {
    for (std::size_t i = 0; i < k; ++i) s.sd[i] += (c[i] - s.mean[i]) * (c[i] - s.mean[i]);
  }
  const double denom = curves.size() > 1 ? static_cast<double>(curves.size() - 1) : 1.0;
  for (auto& v : s.sd) v = std::sqrt(v / denom);
  s.area_mean = std::accumulate(s.areas.begin(), s.areas.end(), 0.0) / static_cast<double>(s.areas.size());
  double var = 0.0;
  for (double a : s.areas) var += (a - s.area_mean) * (a - s.area_mean);
  s.area_se = s.areas.size() > 1 ? std::sqrt(var / denom / static_cast<double>(s.areas.size())) : 0.0;
  return s;
}

/// Alignment of one root (or pooled over roots): empirical curve statistics
/// over trees plus the global and within-tree shuffle baselines.
struct AlignmentReport {
  std::string label;
  int n = 0;
  CurveStats empirical;
  CurveStats global_null;
  CurveStats within_null;

  int k_max() const { return static_cast<int>(empirical.mean.size()); }
};

inline AlignmentReport make_alignment_report(std::string label, int n,
                                             const std::vector<std::vector<double>>& empirical,
                                             const std::vector<std::vector<double>>& global_null,
                                             const std::vector<std::vector<double>>& within_null) {
  AlignmentReport r;
  r.label = std::move(label);
  r.n = n;
  r.empirical = summarize_curves(empirical, n);
  r.global_null = summarize_curves(global_null, n);
  r.within_null = summarize_curves(within_null, n);
  return r;
}

inline const char* kAlignmentCsvHeader = "k,g_emp,g_null_mean,g_null_sd,g_within_mean,g_within_sd,g_emp_sd";

/// Rows k, g_emp, g_null_mean, g_null_sd (global shuffle), then within-tree columns.
inline void write_alignment_csv_rows(std::ostream& os, const AlignmentReport& r, const std::string& prefix = {}) {
  auto at = [](const std::vector<double>& v, std::size_t i) {
    return i < v.size() ? v[i] : std::numeric_limits<double>::quiet_NaN();
  };
  for (std::size_t i = 0; i < r.empirical.mean.size(); ++i) {
    os << prefix << (i + 1) << ',' << r.empirical.mean[i] << ',' << at(r.global_null.mean, i) << ','
       << at(r.global_null.sd, i) << ',' << at(r.within_null.mean, i) << ',' << at(r.within_null.sd, i) << ','
       << r.empirical.sd[i] << '\n';
  }
}

inline void to_json(nlohmann::json& j, const CurveStats& s) {
  j = nlohmann::json{{"mean", s.mean}, {"sd", s.sd}, {"area_mean", s.area_mean}, {"area_se", s.area_se},
                     {"count", s.count}};
}

inline void to_json(nlohmann::json& j, const AlignmentReport& r) {
  j = nlohmann::json{{"label", r.label},
                     {"n", r.n},
                     {"empirical", r.empirical},
                     {"global_null", r.global_null},
                     {"within_null", r.within_null}};
}

// ---------------------------------------------------------------- perturbation

struct DavisKahanResult {
  double sin_theta = 0.0;
  double bound = 0.0;           ///< ||E||_2 / gamma
  double rigorous_bound = 0.0;  ///< ||E||_2 / (gamma - ||E||_2)
  double gap = 0.0;             ///< gamma: separation of the cluster from the rest of spec(m0)
  double norm_e = 0.0;
  bool applicable = false;      ///< gamma > ||E||_2
  bool holds = false;           ///< sin_theta <= bound
};

/// Compares the eigenspace of m0 spanned by descending indices [begin, end)
/// with the matching eigenspace of m0 + E.
inline DavisKahanResult davis_kahan_check(const Eigen::MatrixXd& m0, const Eigen::MatrixXd& perturbation,
                                          std::pair<int, int> cluster) {
  detail::require(m0.rows() == perturbation.rows() && m0.cols() == perturbation.cols(),
                  "perturbation size mismatch");
  const int n = static_cast<int>(m0.rows());
  const auto [begin, end] = cluster;
  detail::require(begin >= 0 && begin < end && end <= n, "cluster index range out of bounds");
  const EigenSystem a = sym_eig(m0);
  const EigenSystem b = sym_eig(m0 + perturbation);
  DavisKahanResult r;
  r.norm_e = n == 0 ? 0.0 : sym_eig(perturbation).spectral_norm();
  r.gap = std::numeric_limits<double>::infinity();
  if (begin > 0) r.gap = std::min(r.gap, a.values(begin - 1) - a.values(begin));
  if (end < n) r.gap = std::min(r.gap, a.values(end - 1) - a.values(end));
  const int m = end - begin;
  const Eigen::MatrixXd overlap = a.vectors.middleCols(begin, m).transpose() * b.vectors.middleCols(begin, m);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(overlap);
  const double smin = std::min(1.0, svd.singularValues().minCoeff());
  r.sin_theta = std::sqrt(std::max(0.0, 1.0 - smin * smin));
  r.bound = r.norm_e / r.gap;
  r.applicable = r.gap > r.norm_e;
  r.rigorous_bound = r.applicable ? r.norm_e / (r.gap - r.norm_e) : std::numeric_limits<double>::infinity();
  r.holds = r.sin_theta <= r.bound + 1e-14;
  return r;
}

}  // namespace hgeo
