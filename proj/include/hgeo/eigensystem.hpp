#pragma once

// Dense symmetric eigendecomposition with descending order and a canonical
// eigenvector sign. Backed by Eigen's SelfAdjointEigenSolver.

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

#include "hgeo/errors.hpp"

namespace hgeo {

struct EigenSystem {
  Eigen::VectorXd values;   ///< descending
  Eigen::MatrixXd vectors;  ///< column k pairs with values(k)

  Eigen::Index size() const { return values.size(); }
  /// ||M||_2 of the decomposed matrix.
  double spectral_norm() const { return values.size() == 0 ? 0.0 : values.cwiseAbs().maxCoeff(); }
};

/// Flip each column so that its largest-magnitude coordinate is positive.
inline void canonicalize_signs(Eigen::MatrixXd& vectors) {
  for (Eigen::Index k = 0; k < vectors.cols(); ++k) {
    Eigen::Index arg = 0;
    vectors.col(k).cwiseAbs().maxCoeff(&arg);
    if (vectors(arg, k) < 0.0) vectors.col(k) *= -1.0;
  }
}

inline EigenSystem sym_eig(const Eigen::MatrixXd& matrix) {
  detail::require(matrix.rows() == matrix.cols(), "sym_eig: matrix must be square");
  EigenSystem out;
  if (matrix.size() == 0) return out;
  const double scale = std::max(matrix.cwiseAbs().maxCoeff(), 1e-300);
  const double defect = (matrix - matrix.transpose()).cwiseAbs().maxCoeff();
  detail::require(defect <= 1e-9 * scale, "sym_eig: matrix is not symmetric");

  const Eigen::MatrixXd sym = 0.5 * (matrix + matrix.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sym);
  if (solver.info() != Eigen::Success) throw InputError("sym_eig: eigensolver did not converge");
  out.values = solver.eigenvalues().reverse();
  out.vectors = solver.eigenvectors().rowwise().reverse();
  canonicalize_signs(out.vectors);
  return out;
}

}  // namespace hgeo
