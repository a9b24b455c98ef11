#pragma once

// Dense symmetric-matrix kernel: eigendecomposition, simultaneous
// diagonalization of commuting pairs, numerical rank and PSD tests.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "sdg/error.hpp"

namespace sdg {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr double kDefaultRankTol = 1e-8;

/// Real symmetric matrix in full storage. Construction averages the input
/// with its transpose; the Frobenius norm of the removed antisymmetric part
/// is kept as `defect()`.
class SymMatrix {
 public:
  SymMatrix() = default;

  // Implicit on purpose: every dense matrix handed to the symmetric kernel
  // goes through the symmetrizing constructor.
  SymMatrix(const Matrix& m) {  // NOLINT(google-explicit-constructor)
    if (m.rows() != m.cols() || m.rows() < 1) {
      throw Error(ErrorKind::InvalidInput, "SymMatrix requires a non-empty square matrix");
    }
    m_ = 0.5 * (m + m.transpose());
    defect_ = 0.5 * (m - m.transpose()).norm();
  }

  static SymMatrix identity(Eigen::Index d) { return SymMatrix(Matrix::Identity(d, d)); }
  static SymMatrix zero(Eigen::Index d) { return SymMatrix(Matrix::Zero(d, d)); }
  static SymMatrix diagonal(const Vector& d) { return SymMatrix(Matrix(d.asDiagonal())); }

  Eigen::Index dim() const { return m_.rows(); }
  double defect() const { return defect_; }
  const Matrix& mat() const { return m_; }
  operator const Matrix&() const { return m_; }  // NOLINT(google-explicit-constructor)
  double operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }

 private:
  Matrix m_;
  double defect_ = 0.0;
};

struct EigenDecomposition {
  Matrix basis;   // columns are eigenvectors
  Vector values;  // descending
};

struct JointEigenSystem {
  Matrix basis;
  std::vector<std::pair<double, double>> pairs;  // (primal, dual) per column
};

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

inline double spectral_norm(const SymMatrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(m.mat(), Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

inline EigenDecomposition sym_eigen(const SymMatrix& m) {
  if (!all_finite(m.mat())) {
    throw Error(ErrorKind::InvalidInput, "sym_eigen: non-finite entries");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(m.mat());
  if (es.info() != Eigen::Success) {
    throw Error(ErrorKind::InternalError, "sym_eigen: eigensolver did not converge");
  }
  const Eigen::Index d = m.dim();
  EigenDecomposition out;
  out.basis.resize(d, d);
  out.values.resize(d);
  // Eigen returns ascending order.
  for (Eigen::Index i = 0; i < d; ++i) {
    out.values(i) = es.eigenvalues()(d - 1 - i);
    out.basis.col(i) = es.eigenvectors().col(d - 1 - i);
  }
  return out;
}

/// Common eigenbasis of a commuting symmetric pair. P is eigendecomposed and
/// D is diagonalized inside each eigenvalue cluster of P (relative gap 1e-6).
inline JointEigenSystem joint_diagonalize(const SymMatrix& p, const SymMatrix& d, double tol) {
  if (p.dim() != d.dim()) {
    throw Error(ErrorKind::InvalidInput, "joint_diagonalize: dimension mismatch");
  }
  const Matrix& pm = p.mat();
  const Matrix& dm = d.mat();
  const double comm = (pm * dm - dm * pm).norm();
  const double bound = tol * (1.0 + pm.norm()) * (1.0 + dm.norm());
  if (comm > bound) {
    throw Error(ErrorKind::NotCommuting, "commutator norm " + std::to_string(comm) +
                                             " exceeds " + std::to_string(bound));
  }

  const EigenDecomposition ep = sym_eigen(p);
  const Eigen::Index n = p.dim();
  const double scale = std::max(1.0, ep.values.cwiseAbs().maxCoeff());
  constexpr double kClusterGap = 1e-6;

  Matrix basis = ep.basis;
  Eigen::Index start = 0;
  while (start < n) {
    Eigen::Index end = start + 1;
    while (end < n && ep.values(end - 1) - ep.values(end) <= kClusterGap * scale) ++end;
    const Eigen::Index size = end - start;
    if (size > 1) {
      const Matrix q = ep.basis.middleCols(start, size);
      const EigenDecomposition inner = sym_eigen(SymMatrix(Matrix(q.transpose() * dm * q)));
      basis.middleCols(start, size) = q * inner.basis;
    }
    start = end;
  }

  JointEigenSystem out;
  out.basis = basis;
  out.pairs.reserve(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto q = basis.col(i);
    out.pairs.emplace_back(q.dot(pm * q), q.dot(dm * q));
  }
  return out;
}

/// Number of eigenvalues with |lambda| > tol * max(1, ||M||_2).
inline int numerical_rank(const SymMatrix& m, double tol = kDefaultRankTol) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(m.mat(), Eigen::EigenvaluesOnly);
  const Vector abs = es.eigenvalues().cwiseAbs();
  const double cut = tol * std::max(1.0, abs.maxCoeff());
  return static_cast<int>((abs.array() > cut).count());
}

struct PsdResult {
  bool psd;
  double min_eigenvalue;
};

inline PsdResult psd_check(const SymMatrix& m, double tol = kDefaultRankTol) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(m.mat(), Eigen::EigenvaluesOnly);
  const double lmin = es.eigenvalues()(0);
  const double norm = es.eigenvalues().cwiseAbs().maxCoeff();
  return {lmin >= -tol * std::max(1.0, norm), lmin};
}

inline double min_eigenvalue(const SymMatrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(m.mat(), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

inline double max_eigenvalue(const SymMatrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(m.mat(), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(es.eigenvalues().size() - 1);
}

/// Frobenius inner product.
inline double inner(const Matrix& a, const Matrix& b) { return a.cwiseProduct(b).sum(); }

}  // namespace sdg
