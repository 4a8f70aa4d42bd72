#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "qsel/error.hpp"

namespace qsel {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Sorted list of zero-based sensor indices.
using SensorSet = std::vector<std::size_t>;

inline Matrix symmetrized(const Matrix& m) { return 0.5 * (m + m.transpose()); }

inline double min_eigenvalue(const Matrix& sym) {
  if (sym.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

inline bool is_square(const Matrix& m) { return m.rows() == m.cols(); }

inline void require_square(const Matrix& m, Index n, const char* what) {
  if (m.rows() != n || m.cols() != n) {
    throw DimensionError(std::string(what) + ": expected " + std::to_string(n) + "x" +
                         std::to_string(n) + ", got " + std::to_string(m.rows()) + "x" +
                         std::to_string(m.cols()));
  }
}

/// Moore-Penrose pseudo-inverse of a symmetric matrix. Eigenvalues whose
/// magnitude is below `relative_cutoff` times the largest magnitude are
/// treated as zero.
inline Matrix symmetric_pseudo_inverse(const Matrix& sym, double relative_cutoff = 1e-12) {
  const Index n = sym.rows();
  if (n == 0) return Matrix(0, 0);
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(sym));
  const Vector& lambda = es.eigenvalues();
  const double largest = lambda.cwiseAbs().maxCoeff();
  if (largest == 0.0) return Matrix::Zero(n, n);
  Vector inv = Vector::Zero(n);
  for (Index i = 0; i < n; ++i) {
    if (std::abs(lambda(i)) > relative_cutoff * largest) inv(i) = 1.0 / lambda(i);
  }
  const Matrix& v = es.eigenvectors();
  return v * inv.asDiagonal() * v.transpose();
}

/// Inverse of a symmetric positive definite matrix via Cholesky.
inline Matrix spd_inverse(const Matrix& m, const char* what = "matrix") {
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success) {
    throw InvalidArgument(std::string(what) + " is not positive definite");
  }
  return llt.solve(Matrix::Identity(m.rows(), m.cols()));
}

inline bool is_sorted_unique(const SensorSet& s) {
  return std::adjacent_find(s.begin(), s.end(), [](auto a, auto b) { return a >= b; }) ==
         s.end();
}

inline SensorSet normalized(SensorSet s) {
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());
  return s;
}

inline SensorSet full_set(std::size_t n) {
  SensorSet s(n);
  for (std::size_t i = 0; i < n; ++i) s[i] = i;
  return s;
}

}  // namespace qsel
