#pragma once

// Hierarchy-adapted Haar basis on regular trees: one scaling mode per depth
// level and, for every internal node, zero-sum contrasts across its child
// subtrees at each relative depth. A distance kernel on the tree is block
// diagonal in this basis; project_to_blocks extracts the blocks and measures
// how far an arbitrary symmetric matrix is from that structure.

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "hgeo/errors.hpp"
#include "hgeo/json_util.hpp"
#include "hgeo/tree.hpp"

namespace hgeo {

/// Orthonormal basis (columns) of the zero-sum subspace of R^b.
///
/// Gram-Schmidt on (e_1 - e_q), q = 2..b, in child order. For b = 2 this is
/// (1, -1)/sqrt(2): the first child carries the positive sign.
inline Eigen::MatrixXd contrast_basis(int b) {
  detail::require(b >= 2, "contrast basis needs b >= 2");
  Eigen::MatrixXd c(b, b - 1);
  for (int q = 1; q < b; ++q) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(b);
    v(0) = 1.0;
    v(q) = -1.0;
    for (int prev = 0; prev < q - 1; ++prev) v -= c.col(prev).dot(v) * c.col(prev);
    c.col(q - 1) = v.normalized();
  }
  return c;
}

/// Normalized indicator of the nodes at `level`.
inline Eigen::VectorXd scaling_mode(const TreeTopology& tree, int level) {
  detail::require(level >= 0 && level <= tree.depth(),
                  "scaling level " + std::to_string(level) + " outside 0.." + std::to_string(tree.depth()));
  Eigen::VectorXd v = Eigen::VectorXd::Zero(tree.node_count());
  v.segment(tree.level_begin(level), tree.level_size(level))
      .setConstant(1.0 / std::sqrt(static_cast<double>(tree.level_size(level))));
  return v;
}

/// Wavelet modes psi_{u,r,a} of an internal node, ordered r-major (r = 1..h(u))
/// then by contrast index a = 1..b-1.
inline std::vector<Eigen::VectorXd> wavelet_modes(const TreeTopology& tree, int node) {
  detail::require(node >= 0 && node < tree.node_count(), "node out of range");
  detail::require(!tree.is_leaf(node), "wavelet modes are defined only for internal nodes");
  const int d = tree.node_depth(node);
  const int b = tree.branching(d);
  const Eigen::MatrixXd contrasts = contrast_basis(b);
  std::vector<Eigen::VectorXd> modes;
  modes.reserve(static_cast<std::size_t>(tree.height(node) * (b - 1)));
  for (int r = 1; r <= tree.height(node); ++r) {
    const int per_child = tree.subtree_level_size(d + 1, r - 1);
    const double scale = 1.0 / std::sqrt(static_cast<double>(per_child));
    for (int a = 0; a < b - 1; ++a) {
      Eigen::VectorXd v = Eigen::VectorXd::Zero(tree.node_count());
      for (int q = 0; q < b; ++q) {
        const auto [begin, end] = tree.descendants_at(tree.child(node, q), r - 1);
        v.segment(begin, end - begin).setConstant(scale * contrasts(q, a));
      }
      modes.push_back(std::move(v));
    }
  }
  return modes;
}

/// Where a basis column lives in the block structure.
struct ModeLabel {
  enum class Kind { Scaling, Wavelet };
  Kind kind = Kind::Scaling;
  int node = -1;      ///< internal node u for wavelets, -1 for scaling modes
  int level = 0;      ///< depth level for scaling, relative depth r for wavelets
  int contrast = 0;   ///< contrast index a (0-based) for wavelets
};

/// Complete orthonormal hierarchy-adapted basis of R^{nodes}.
///
/// Columns are ordered: scaling modes phi_0..phi_L, then for each internal
/// node in breadth-first order its h(u)(b-1) wavelet modes.
class HaarBasis {
 public:
  struct SplitRange {
    int node;
    int offset;   ///< first column of this node's block
    int heights;  ///< h(u)
    int contrasts;  ///< b_{|u|} - 1
    int size() const { return heights * contrasts; }
  };

  explicit HaarBasis(TreeTopology tree) : tree_(std::move(tree)) {
    const int n = tree_.node_count();
    modes_.resize(n, n);
    int col = 0;
    for (int level = 0; level <= tree_.depth(); ++level) {
      modes_.col(col++) = scaling_mode(tree_, level);
      labels_.push_back({ModeLabel::Kind::Scaling, -1, level, 0});
    }
    for (int u = 0; u < n; ++u) {
      if (tree_.is_leaf(u)) continue;
      const int contrasts = tree_.branching(tree_.node_depth(u)) - 1;
      splits_.push_back({u, col, tree_.height(u), contrasts});
      auto wavelets = wavelet_modes(tree_, u);
      for (std::size_t k = 0; k < wavelets.size(); ++k) {
        const int r = static_cast<int>(k) / contrasts + 1;
        const int a = static_cast<int>(k) % contrasts;
        modes_.col(col++) = wavelets[k];
        labels_.push_back({ModeLabel::Kind::Wavelet, u, r, a});
      }
    }
    detail::require(col == n, "internal error: Haar mode count does not match node count");
  }

  const TreeTopology& tree() const { return tree_; }
  /// n x n matrix whose columns are the basis modes.
  const Eigen::MatrixXd& matrix() const { return modes_; }
  int mode_count() const { return static_cast<int>(modes_.cols()); }
  int scaling_count() const { return tree_.depth() + 1; }
  const std::vector<ModeLabel>& labels() const { return labels_; }
  const std::vector<SplitRange>& splits() const { return splits_; }

 private:
  TreeTopology tree_;
  Eigen::MatrixXd modes_;
  std::vector<ModeLabel> labels_;
  std::vector<SplitRange> splits_;
};

inline HaarBasis assemble_basis(const TreeTopology& tree) { return HaarBasis(tree); }

/// Block of a symmetric matrix on one split space S^u.
struct SplitBlock {
  int node = -1;
  int depth = 0;
  int height = 0;
  int contrasts = 1;
  /// h x h relative-depth block; the mean over contrast indices of the diagonal sub-blocks.
  Eigen::MatrixXd depth_block;
  /// Full h(b-1) x h(b-1) block, r-major then contrast index.
  Eigen::MatrixXd full;
  /// || full - depth_block (x) I_{b-1} ||_F
  double contrast_residual = 0.0;
};

struct BlockDecomposition {
  Eigen::MatrixXd scaling;  ///< (L+1) x (L+1)
  std::vector<SplitBlock> splits;  ///< one per internal node, breadth-first order
  double off_block_residual = 0.0;  ///< Frobenius norm of all cross-block entries
  double max_contrast_residual = 0.0;
  double frobenius_norm = 0.0;  ///< ||M||_F of the projected matrix
  std::vector<int> profile;

  int depth() const { return static_cast<int>(profile.size()); }

  const SplitBlock& split_for(int node) const {
    for (const auto& s : splits) {
      if (s.node == node) return s;
    }
    throw InputError("node " + std::to_string(node) + " has no split block");
  }

  /// Depth block of the first node of height h (all such nodes share it on a regular tree).
  const SplitBlock& split_of_height(int h) const {
    for (const auto& s : splits) {
      if (s.height == h) return s;
    }
    throw InputError("no split block of height " + std::to_string(h));
  }
};

namespace detail {

inline double symmetry_defect(const Eigen::MatrixXd& m) {
  return (m - m.transpose()).cwiseAbs().maxCoeff();
}

inline void require_symmetric(const Eigen::MatrixXd& m, double rel_tol) {
  require(m.rows() == m.cols(), "matrix must be square");
  if (m.size() == 0) return;
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  require(symmetry_defect(m) <= rel_tol * scale, "matrix is not symmetric");
}

}  // namespace detail

inline BlockDecomposition project_to_blocks(const Eigen::MatrixXd& matrix, const HaarBasis& basis) {
  detail::require(matrix.rows() == basis.mode_count() && matrix.cols() == basis.mode_count(),
                  "matrix size does not match the basis");
  detail::require_symmetric(matrix, 1e-10);

  // Each node lies in O(depth * branching) modes, so the sparse product is cheap.
  const Eigen::SparseMatrix<double> q = basis.matrix().sparseView();
  Eigen::MatrixXd projected = q.transpose() * (matrix * q);
  projected = 0.5 * (projected + projected.transpose()).eval();

  BlockDecomposition out;
  out.profile = basis.tree().profile();
  out.frobenius_norm = matrix.norm();
  const int ns = basis.scaling_count();
  out.scaling = projected.topLeftCorner(ns, ns);

  Eigen::MatrixXd residual = projected;
  residual.topLeftCorner(ns, ns).setZero();
  const TreeTopology& tree = basis.tree();
  for (const auto& range : basis.splits()) {
    SplitBlock block;
    block.node = range.node;
    block.depth = tree.node_depth(range.node);
    block.height = range.heights;
    block.contrasts = range.contrasts;
    block.full = projected.block(range.offset, range.offset, range.size(), range.size());
    residual.block(range.offset, range.offset, range.size(), range.size()).setZero();

    const int h = range.heights;
    const int c = range.contrasts;
    block.depth_block = Eigen::MatrixXd::Zero(h, h);
    for (int a = 0; a < c; ++a) {
      for (int r = 0; r < h; ++r) {
        for (int t = 0; t < h; ++t) block.depth_block(r, t) += block.full(r * c + a, t * c + a);
      }
    }
    block.depth_block /= static_cast<double>(c);
    Eigen::MatrixXd expected = Eigen::MatrixXd::Zero(h * c, h * c);
    for (int r = 0; r < h; ++r) {
      for (int t = 0; t < h; ++t) {
        for (int a = 0; a < c; ++a) expected(r * c + a, t * c + a) = block.depth_block(r, t);
      }
    }
    block.contrast_residual = (block.full - expected).norm();
    out.max_contrast_residual = std::max(out.max_contrast_residual, block.contrast_residual);
    out.splits.push_back(std::move(block));
  }
  out.off_block_residual = residual.norm();
  return out;
}

inline void to_json(nlohmann::json& j, const BlockDecomposition& blocks) {
  nlohmann::json splits = nlohmann::json::array();
  for (const auto& s : blocks.splits) {
    splits.push_back({{"node", s.node},
                      {"depth", s.depth},
                      {"height", s.height},
                      {"contrasts", s.contrasts},
                      {"block", detail::matrix_to_json(s.depth_block)},
                      {"contrast_residual", s.contrast_residual}});
  }
  j = nlohmann::json{{"profile", blocks.profile},
                     {"scaling", detail::matrix_to_json(blocks.scaling)},
                     {"splits", std::move(splits)},
                     {"off_block_residual", blocks.off_block_residual},
                     {"max_contrast_residual", blocks.max_contrast_residual},
                     {"frobenius_norm", blocks.frobenius_norm}};
}

}  // namespace hgeo
