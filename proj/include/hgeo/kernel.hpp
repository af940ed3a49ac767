#pragma once

// Distance kernels f(d), their Gram matrices on trees, closed-form Haar blocks
// for full s-ary trees, the exponential-kernel rank-one identity, and the
// positive/negative spectral split of indefinite symmetric matrices.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "hgeo/eigensystem.hpp"
#include "hgeo/errors.hpp"
#include "hgeo/tree.hpp"

namespace hgeo {

enum class KernelFamily { Exponential, ShiftedPowerLaw, Tabulated };

inline std::string to_string(KernelFamily family) {
  switch (family) {
    case KernelFamily::Exponential: return "exponential";
    case KernelFamily::ShiftedPowerLaw: return "shifted_power_law";
    case KernelFamily::Tabulated: return "tabulated";
  }
  return "unknown";
}

inline KernelFamily kernel_family_from_string(const std::string& name) {
  if (name == "exponential") return KernelFamily::Exponential;
  if (name == "shifted_power_law" || name == "power_law") return KernelFamily::ShiftedPowerLaw;
  if (name == "tabulated") return KernelFamily::Tabulated;
  throw InputError("unknown kernel family '" + name + "'");
}

/// Distance kernel f: exponential alpha*exp(-beta*d), shifted power law
/// alpha*(1+d)^(-beta), or a table f(0..d_max).
class KernelSpec {
 public:
  static KernelSpec exponential(double alpha, double beta) {
    return KernelSpec(KernelFamily::Exponential, alpha, beta, {});
  }
  static KernelSpec power_law(double alpha, double beta) {
    return KernelSpec(KernelFamily::ShiftedPowerLaw, alpha, beta, {});
  }
  static KernelSpec tabulated(std::vector<double> values) {
    return KernelSpec(KernelFamily::Tabulated, 0.0, 0.0, std::move(values));
  }

  KernelFamily family() const { return family_; }
  double alpha() const { return alpha_; }
  double beta() const { return beta_; }
  const std::vector<double>& values() const { return values_; }

  /// Largest admissible distance; empty for the parametric families.
  std::optional<int> max_distance() const {
    if (family_ != KernelFamily::Tabulated) return std::nullopt;
    return static_cast<int>(values_.size()) - 1;
  }

  double operator()(int d) const {
    detail::require(d >= 0, "kernel distance must be nonnegative");
    switch (family_) {
      case KernelFamily::Exponential: return alpha_ * std::exp(-beta_ * d);
      case KernelFamily::ShiftedPowerLaw: return alpha_ * std::pow(1.0 + d, -beta_);
      case KernelFamily::Tabulated:
        detail::require(d < static_cast<int>(values_.size()),
                        "distance " + std::to_string(d) + " beyond tabulated kernel range 0.." +
                            std::to_string(values_.size() - 1));
        return values_[static_cast<std::size_t>(d)];
    }
    return 0.0;
  }

  bool positive_on(int max_d) const {
    for (int d = 0; d <= max_d; ++d) {
      if (!((*this)(d) > 0.0)) return false;
    }
    return true;
  }

  bool strictly_decreasing_on(int max_d) const {
    for (int d = 1; d <= max_d; ++d) {
      if (!((*this)(d) < (*this)(d - 1))) return false;
    }
    return true;
  }

 private:
  KernelSpec(KernelFamily family, double alpha, double beta, std::vector<double> values)
      : family_(family), alpha_(alpha), beta_(beta), values_(std::move(values)) {
    if (family_ == KernelFamily::Tabulated) {
      detail::require(!values_.empty(), "tabulated kernel needs at least one value");
      for (double v : values_) detail::require(std::isfinite(v), "tabulated kernel values must be finite");
    } else {
      detail::require(std::isfinite(alpha_) && alpha_ > 0.0, "kernel alpha must be finite and > 0");
      detail::require(std::isfinite(beta_), "kernel beta must be finite");
    }
  }

  KernelFamily family_;
  double alpha_;
  double beta_;
  std::vector<double> values_;
};

inline double eval_kernel(const KernelSpec& spec, int d) { return spec(d); }

inline void to_json(nlohmann::json& j, const KernelSpec& spec) {
  if (spec.family() == KernelFamily::Tabulated) {
    j = nlohmann::json{{"family", "tabulated"}, {"values", spec.values()}};
  } else {
    j = nlohmann::json{{"family", to_string(spec.family())}, {"alpha", spec.alpha()}, {"beta", spec.beta()}};
  }
}

inline KernelSpec kernel_from_json(const nlohmann::json& j) {
  try {
    const auto family = kernel_family_from_string(j.at("family").get<std::string>());
    switch (family) {
      case KernelFamily::Exponential:
        return KernelSpec::exponential(j.at("alpha").get<double>(), j.at("beta").get<double>());
      case KernelFamily::ShiftedPowerLaw:
        return KernelSpec::power_law(j.at("alpha").get<double>(), j.at("beta").get<double>());
      case KernelFamily::Tabulated:
        return KernelSpec::tabulated(j.at("values").get<std::vector<double>>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("invalid kernel JSON: ") + e.what());
  }
  throw InputError("invalid kernel JSON");
}

inline Eigen::MatrixXd kernel_gram(const KernelSpec& spec, const DistanceMatrix& distances) {
  const Eigen::Index n = distances.size();
  if (auto max_d = spec.max_distance()) {
    detail::require(distances.max() <= *max_d, "distance matrix exceeds the tabulated kernel range");
  }
  std::vector<double> table(static_cast<std::size_t>(distances.max()) + 1);
  for (std::size_t d = 0; d < table.size(); ++d) table[d] = spec(static_cast<int>(d));
  Eigen::MatrixXd m(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) m(i, j) = table[static_cast<std::size_t>(distances(i, j))];
  }
  return m;
}

inline Eigen::MatrixXd kernel_gram(const KernelSpec& spec, const TreeTopology& tree) {
  return kernel_gram(spec, tree_distance_matrix(tree));
}

/// Scaling block of a height-h full s-ary (sub)tree, grouped by the relative
/// depth of the pair's lowest common ancestor:
///   A_rt = s^{-(r+t)/2} [ sum_{l<min(r,t)} (s-1) s^{r+t-l-1} f(r+t-2l) + s^{max(r,t)} f(|r-t|) ].
inline Eigen::MatrixXd scaling_block_closed_form(const KernelSpec& f, int s, int h) {
  detail::require(s >= 2, "branching factor must be >= 2");
  detail::require(h >= 0, "height must be >= 0");
  const double b = s;
  Eigen::MatrixXd a(h + 1, h + 1);
  for (int r = 0; r <= h; ++r) {
    for (int t = 0; t <= h; ++t) {
      const double half = 0.5 * (r + t);
      double sum = 0.0;
      for (int l = 0; l < std::min(r, t); ++l) {
        sum += (b - 1.0) * std::pow(b, half - l - 1.0) * f(r + t - 2 * l);
      }
      sum += std::pow(b, std::max(r, t) - half) * f(std::abs(r - t));
      a(r, t) = sum;
    }
  }
  return a;
}

/// Relative-depth split block A^(h) of a full s-ary tree (identical for every contrast index):
///   A_rt = s^{-(r+t-2)/2} [ -s^{r+t-2} f(r+t) + sum_{l=1}^{min-1} (s-1) s^{r+t-l-2} f(r+t-2l)
///                            + s^{max(r,t)-1} f(|r-t|) ],   r, t = 1..h.
inline Eigen::MatrixXd split_block_closed_form(const KernelSpec& f, int s, int h) {
  detail::require(s >= 2, "branching factor must be >= 2");
  detail::require(h >= 1, "split blocks need height >= 1");
  const double b = s;
  Eigen::MatrixXd a(h, h);
  for (int r = 1; r <= h; ++r) {
    for (int t = 1; t <= h; ++t) {
      const double half = 0.5 * (r + t - 2);
      double sum = -std::pow(b, half) * f(r + t);
      for (int l = 1; l < std::min(r, t); ++l) {
        sum += (b - 1.0) * std::pow(b, half - l) * f(r + t - 2 * l);
      }
      sum += std::pow(b, std::max(r, t) - 1 - half) * f(std::abs(r - t));
      a(r - 1, t - 1) = sum;
    }
  }
  return a;
}

namespace detail {

inline void require_exponential(const KernelSpec& f) {
  require(f.family() == KernelFamily::Exponential, "identity holds only for the exponential kernel");
}

/// q_r = s^{r/2} e^{-beta r}, r = 0..h.
inline Eigen::VectorXd exponential_q(const KernelSpec& f, int s, int h) {
  Eigen::VectorXd q(h + 1);
  for (int r = 0; r <= h; ++r) q(r) = std::pow(static_cast<double>(s), 0.5 * r) * std::exp(-f.beta() * r);
  return q;
}

}  // namespace detail

/// Compact exponential-kernel scaling block:
///   alpha q_r q_t [ theta^m + (s-1)/s sum_{a=0}^{m-1} theta^a ],  theta = e^{2 beta}/s, m = min(r,t).
inline Eigen::MatrixXd scaling_block_exponential(const KernelSpec& f, int s, int h) {
  detail::require_exponential(f);
  detail::require(s >= 2 && h >= 0, "bad block parameters");
  const Eigen::VectorXd q = detail::exponential_q(f, s, h);
  const double theta = std::exp(2.0 * f.beta()) / s;
  const double w = (s - 1.0) / s;
  Eigen::MatrixXd a(h + 1, h + 1);
  for (int r = 0; r <= h; ++r) {
    for (int t = 0; t <= h; ++t) {
      const int m = std::min(r, t);
      double geo = 0.0;
      for (int k = 0; k < m; ++k) geo += std::pow(theta, k);
      a(r, t) = f.alpha() * q(r) * q(t) * (std::pow(theta, m) + w * geo);
    }
  }
  return a;
}

/// Compact exponential-kernel split block:
///   alpha q_r q_t [ theta^m + (s-1)/s sum_{a=1}^{m-1} theta^a - 1/s ].
inline Eigen::MatrixXd split_block_exponential(const KernelSpec& f, int s, int h) {
  detail::require_exponential(f);
  detail::require(s >= 2 && h >= 1, "bad block parameters");
  const Eigen::VectorXd q = detail::exponential_q(f, s, h);
  const double theta = std::exp(2.0 * f.beta()) / s;
  const double w = (s - 1.0) / s;
  Eigen::MatrixXd a(h, h);
  for (int r = 1; r <= h; ++r) {
    for (int t = 1; t <= h; ++t) {
      const int m = std::min(r, t);
      double geo = 0.0;
      for (int k = 1; k < m; ++k) geo += std::pow(theta, k);
      a(r - 1, t - 1) = f.alpha() * q(r) * q(t) * (std::pow(theta, m) + w * geo - 1.0 / s);
    }
  }
  return a;
}

/// || A^sc - ( 0 (+) A^(h) + alpha (1,q)(1,q)^T ) ||_F for the exponential kernel.
inline double rank_one_check(const KernelSpec& f, int s, int h) {
  detail::require_exponential(f);
  const Eigen::MatrixXd scaling = scaling_block_closed_form(f, s, h);
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(h + 1, h + 1);
  if (h >= 1) rhs.bottomRightCorner(h, h) = split_block_closed_form(f, s, h);
  const Eigen::VectorXd q = detail::exponential_q(f, s, h);
  rhs += f.alpha() * q * q.transpose();
  return (scaling - rhs).norm();
}

/// Positive spectral component M+ (optionally truncated to the top r positive modes)
/// and the negative component M-, with M = M+ - M- when untruncated.
struct PsdComponent {
  int rank = 0;                 ///< retained positive modes
  int positive_count = 0;       ///< positive modes available in the source
  bool rank_truncated = false;  ///< requested rank exceeded positive_count
  Eigen::VectorXd eigenvalues;  ///< retained, descending, > 0
  Eigen::MatrixXd eigenvectors; ///< n x rank
  Eigen::MatrixXd gram;         ///< U_r diag(eigenvalues) U_r^T
  Eigen::MatrixXd negative;     ///< M- = U diag(max(-lambda, 0)) U^T
};

/// Eigenvalues with |lambda| <= 1e-12 ||M||_2 count as zero.
inline PsdComponent psd_component(const Eigen::MatrixXd& matrix, std::optional<int> rank = std::nullopt) {
  detail::require(!rank || *rank >= 0, "rank must be nonnegative");
  const EigenSystem es = sym_eig(matrix);
  const double zero = 1e-12 * es.spectral_norm();
  PsdComponent out;
  const Eigen::Index n = es.size();
  for (Eigen::Index k = 0; k < n; ++k) {
    if (es.values(k) > zero) ++out.positive_count;
  }
  out.rank = out.positive_count;
  if (rank) {
    if (*rank > out.positive_count) {
      out.rank_truncated = true;
    } else {
      out.rank = *rank;
    }
  }
  out.eigenvalues = es.values.head(out.rank);
  out.eigenvectors = es.vectors.leftCols(out.rank);
  out.gram = out.eigenvectors * out.eigenvalues.asDiagonal() * out.eigenvectors.transpose();
  Eigen::VectorXd neg = Eigen::VectorXd::Zero(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    if (es.values(k) < -zero) neg(k) = -es.values(k);
  }
  out.negative = es.vectors * neg.asDiagonal() * es.vectors.transpose();
  return out;
}

}  // namespace hgeo
