#pragma once

// Distance-binned weighted means of M* with Kish effective sample sizes,
// weighted log-linear kernel fits, and decay conditioned on LCA depth.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "hgeo/errors.hpp"
#include "hgeo/hierarchy.hpp"
#include "hgeo/kernel.hpp"
#include "hgeo/tree.hpp"

namespace hgeo {

/// M* lookup by hierarchy node indices.
using MstarAccessor = std::function<double(int, int)>;

/// Mergeable weighted moments of one bin.
struct WeightedMoments {
  double sum_w = 0.0;
  double sum_w2 = 0.0;
  double sum_wx = 0.0;
  double sum_wx2 = 0.0;
  std::size_t n_raw = 0;

  void add(double x, double w) {
    sum_w += w;
    sum_w2 += w * w;
    sum_wx += w * x;
    sum_wx2 += w * x * x;
    ++n_raw;
  }
  void merge(const WeightedMoments& o) {
    sum_w += o.sum_w;
    sum_w2 += o.sum_w2;
    sum_wx += o.sum_wx;
    sum_wx2 += o.sum_wx2;
    n_raw += o.n_raw;
  }
  double mean() const { return sum_wx / sum_w; }
  /// Kish (sum w)^2 / sum w^2.
  double n_eff() const { return sum_w * sum_w / sum_w2; }
  /// Frequency-weighted variance rescaled by n_eff / (n_eff - 1).
  double sd() const {
    const double ne = n_eff();
    if (!(ne > 1.0)) return std::numeric_limits<double>::quiet_NaN();
    const double m = mean();
    const double pop = std::max(0.0, sum_wx2 / sum_w - m * m);
    return std::sqrt(pop * ne / (ne - 1.0));
  }
  double se() const { return sd() / std::sqrt(n_eff()); }
};

struct DecayBin {
  int d = 0;
  double mean = 0.0;
  double se = 0.0;
  double n_eff = 0.0;
  std::size_t n_raw = 0;
};

struct DecayBins {
  std::vector<DecayBin> bins;  ///< ascending d
  std::vector<std::string> warnings;
};

/// Weighted mean of M* per distance; requested distances with no pairs are
/// omitted and reported in `warnings`.
inline DecayBins binned_decay(const MstarAccessor& mstar, const std::vector<WeightedPair>& pairs,
                              const std::vector<int>& distances = {}) {
  std::map<int, WeightedMoments> acc;
  for (int d : distances) acc[d];
  for (const auto& p : pairs) {
    detail::require(p.weight > 0.0 && std::isfinite(p.weight), "pair weights must be positive");
    acc[p.distance].add(mstar(p.i, p.j), p.weight);
  }
  DecayBins out;
  for (const auto& [d, m] : acc) {
    if (m.n_raw == 0) {
      out.warnings.push_back("distance bin " + std::to_string(d) + " is empty and was omitted");
      continue;
    }
    out.bins.push_back({d, m.mean(), m.se(), m.n_eff(), m.n_raw});
  }
  return out;
}

inline void write_decay_csv(std::ostream& os, const DecayBins& bins) {
  os << "d,mean,se,n_eff,n_raw\n";
  for (const auto& b : bins.bins) os << b.d << ',' << b.mean << ',' << b.se << ',' << b.n_eff << ',' << b.n_raw << '\n';
}

// ---------------------------------------------------------------- fits

struct KernelFit {
  KernelSpec kernel = KernelSpec::exponential(1.0, 0.0);
  double alpha = 0.0;
  double beta = 0.0;
  double se_log_alpha = 0.0;
  double se_beta = 0.0;
  bool inverse_variance_weights = true;  ///< false when some SE was unusable
  std::vector<int> used;                 ///< distances that entered the fit
  std::vector<double> residuals;         ///< log mean - fitted log mean
  std::vector<std::string> warnings;
};

namespace detail {

/// Weighted regression of log(mean) on x(d) = d or log(1+d); the slope is -beta.
inline KernelFit fit_log_linear(const DecayBins& bins, int max_distance, bool power_law) {
  std::vector<const DecayBin*> use;
  KernelFit fit;
  for (const auto& b : bins.bins) {
    if (b.d > max_distance) continue;
    if (!(b.mean > 0.0) || !std::isfinite(b.mean)) {
      fit.warnings.push_back("bin d=" + std::to_string(b.d) + " has nonpositive mean; excluded");
      continue;
    }
    use.push_back(&b);
  }
  require(use.size() >= 2, "kernel fit needs at least 2 bins with positive finite mean");
  for (const auto* b : use) {
    if (!(b->se > 0.0) || !std::isfinite(b->se)) fit.inverse_variance_weights = false;
  }
  if (!fit.inverse_variance_weights) fit.warnings.push_back("some standard errors unusable; equal weights used");

  double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto* b : use) {
    const double w = fit.inverse_variance_weights ? 1.0 / (b->se * b->se) : 1.0;
    const double x = power_law ? std::log1p(static_cast<double>(b->d)) : static_cast<double>(b->d);
    const double y = std::log(b->mean);
    sw += w;
    sx += w * x;
    sy += w * y;
    sxx += w * x * x;
    sxy += w * x * y;
  }
  const double det = sw * sxx - sx * sx;
  require(std::abs(det) > 0.0, "kernel fit is singular (all bins at one distance)");
  const double slope = (sw * sxy - sx * sy) / det;
  const double intercept = (sy - slope * sx) / sw;
  fit.alpha = std::exp(intercept);
  fit.beta = -slope;
  fit.kernel = power_law ? KernelSpec::power_law(fit.alpha, fit.beta) : KernelSpec::exponential(fit.alpha, fit.beta);
  double rss = 0.0;
  for (const auto* b : use) {
    const double x = power_law ? std::log1p(static_cast<double>(b->d)) : static_cast<double>(b->d);
    const double r = std::log(b->mean) - (intercept + slope * x);
    fit.used.push_back(b->d);
    fit.residuals.push_back(r);
    const double w = fit.inverse_variance_weights ? 1.0 / (b->se * b->se) : 1.0;
    rss += w * r * r;
  }
  // Inverse-variance weights are known variances; equal weights use the residual scale.
  const double scale =
      fit.inverse_variance_weights ? 1.0 : (use.size() > 2 ? rss / static_cast<double>(use.size() - 2) : 0.0);
  fit.se_beta = std::sqrt(scale * sw / det);
  fit.se_log_alpha = std::sqrt(scale * sxx / det);
  return fit;
}

}  // namespace detail

/// log mean_d = log alpha - beta d, weights 1/SE^2, bins with d <= max_distance.
inline KernelFit fit_exponential(const DecayBins& bins, int max_distance = 6) {
  return detail::fit_log_linear(bins, max_distance, false);
}

/// log mean_d = log alpha - beta log(1+d).
inline KernelFit fit_power_law(const DecayBins& bins, int max_distance = 6) {
  return detail::fit_log_linear(bins, max_distance, true);
}

inline void to_json(nlohmann::json& j, const KernelFit& f) {
  j = nlohmann::json{{"kernel", f.kernel},
                     {"alpha", f.alpha},
                     {"beta", f.beta},
                     {"se_log_alpha", f.se_log_alpha},
                     {"se_beta", f.se_beta},
                     {"inverse_variance_weights", f.inverse_variance_weights},
                     {"used_distances", f.used},
                     {"residuals", f.residuals},
                     {"warnings", f.warnings}};
}

// ---------------------------------------------------------------- LCA-conditioned

struct LcaCell {
  int d = 0;
  int lca_depth = 0;
  double mean = 0.0;   ///< average over roots of root-level means
  double se = 0.0;     ///< across-root standard error (0 with one root)
  int roots = 0;
  std::size_t pairs = 0;
};

/// Every unordered pair (diagonal included) of each sampled binary tree is
/// binned by (tree distance, depth of the LCA within the tree). Pairs are
/// pooled per root; root means are then averaged.
///
/// Each tree is a breadth-first list of 2^{L+1}-1 hierarchy nodes whose
/// first entry is its root.
inline std::vector<LcaCell> lca_conditioned_decay(const std::vector<std::vector<int>>& trees,
                                                  const MstarAccessor& mstar) {
  detail::require(!trees.empty(), "LCA-conditioned decay needs at least one tree");
  std::map<int, std::map<std::pair<int, int>, WeightedMoments>> per_root;
  std::map<std::size_t, TreeTopology> shapes;
  for (const auto& t : trees) {
    int L = 0;
    while ((std::size_t{2} << L) - 1 < t.size()) ++L;
    detail::require((std::size_t{2} << L) - 1 == t.size(), "tree node list is not a perfect binary tree");
    auto it = shapes.try_emplace(t.size(), build_sary_tree(2, L)).first;
    const TreeTopology& shape = it->second;
    auto& bins = per_root[t.front()];
    for (int a = 0; a < shape.node_count(); ++a) {
      for (int b = a; b < shape.node_count(); ++b) {
        const int d = shape.distance(a, b);
        const int lca = shape.node_depth(shape.lca(a, b));
        bins[{d, lca}].add(mstar(t[static_cast<std::size_t>(a)], t[static_cast<std::size_t>(b)]), 1.0);
      }
    }
  }
  std::map<std::pair<int, int>, std::vector<double>> root_means;
  std::map<std::pair<int, int>, std::size_t> counts;
  for (const auto& [root, bins] : per_root) {
    for (const auto& [key, m] : bins) {
      root_means[key].push_back(m.mean());
      counts[key] += m.n_raw;
    }
  }
  std::vector<LcaCell> out;
  for (const auto& [key, means] : root_means) {
    LcaCell c;
    c.d = key.first;
    c.lca_depth = key.second;
    c.roots = static_cast<int>(means.size());
    c.pairs = counts[key];
    for (double m : means) c.mean += m;
    c.mean /= static_cast<double>(means.size());
    if (means.size() > 1) {
      double v = 0.0;
      for (double m : means) v += (m - c.mean) * (m - c.mean);
      c.se = std::sqrt(v / static_cast<double>(means.size() - 1) / static_cast<double>(means.size()));
    }
    out.push_back(c);
  }
  return out;
}

inline void write_lca_csv(std::ostream& os, const std::vector<LcaCell>& cells) {
  os << "d,lca_depth,mean,se,roots,pairs\n";
  for (const auto& c : cells) {
    os << c.d << ',' << c.lca_depth << ',' << c.mean << ',' << c.se << ',' << c.roots << ',' << c.pairs << '\n';
  }
}

}  // namespace hgeo
