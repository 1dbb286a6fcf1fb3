#pragma once

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "gcs/types.hpp"

namespace gcs::linalg {

/// exp(s·H) for Hermitian H and any complex s, via the eigenbasis of H.
inline Matrix expm_hermitian(const Matrix& H, cplx s) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(H);
  const Matrix& U = es.eigenvectors();
  Vector phases(H.rows());
  for (Eigen::Index k = 0; k < H.rows(); ++k) phases(k) = std::exp(s * es.eigenvalues()(k));
  return U * phases.asDiagonal() * U.adjoint();
}

/// Scaling-and-squaring Taylor exponential for general square matrices.
inline Matrix expm_general(const Matrix& A) {
  const double norm = A.cwiseAbs().colwise().sum().maxCoeff();
  int squarings = 0;
  if (norm > 0.5) squarings = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
  const Matrix X = A / std::ldexp(1.0, squarings);
  Matrix result = Matrix::Identity(A.rows(), A.cols());
  Matrix term = result;
  for (int k = 1; k < 40; ++k) {
    term = term * X / static_cast<double>(k);
    result += term;
    if (term.cwiseAbs().maxCoeff() < 1e-18 * result.cwiseAbs().maxCoeff()) break;
  }
  for (int i = 0; i < squarings; ++i) result = result * result;
  return result;
}

/// Top-left m×m block: the compression onto the first m basis states.
inline Matrix compress(const Matrix& M, Eigen::Index m) {
  return M.topLeftCorner(m, m);
}

inline double max_abs(const Matrix& M) {
  return M.size() == 0 ? 0.0 : M.cwiseAbs().maxCoeff();
}

inline double hermiticity_residual(const Matrix& M) {
  return max_abs(M - M.adjoint());
}

/// Spectral norm.
inline double op_norm(const Matrix& M) {
  if (M.size() == 0) return 0.0;
  if (hermiticity_residual(M) < 1e-14 * std::max(1.0, max_abs(M))) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(M, Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseAbs().maxCoeff();
  }
  Eigen::JacobiSVD<Matrix> svd(M);
  return svd.singularValues()(0);
}

inline Matrix commutator(const Matrix& A, const Matrix& B) { return A * B - B * A; }

/// Squared amplitude mass on indices >= m.
inline double tail_mass(const Vector& psi, Eigen::Index m) {
  if (m >= psi.size()) return 0.0;
  return psi.tail(psi.size() - m).squaredNorm();
}

inline double min_eigenvalue(const Matrix& H) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(H, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

}  // namespace gcs::linalg
