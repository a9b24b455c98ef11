#pragma once

// Semidefinite games: payoff tensors, the contraction operators, slack
// matrices, best responses and Nash certificates.

#include <algorithm>
#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include "sdg/error.hpp"
#include "sdg/linalg.hpp"

namespace sdg {

inline constexpr double kDefaultVerifyTol = 1e-7;
inline constexpr double kTieGap = 1e-8;

/// Four-index payoff array T[i][j][k][l], i,j < m and k,l < n, symmetric in
/// (i,j) and in (k,l).
class PayoffTensor {
 public:
  PayoffTensor() = default;

  /// Zero tensor.
  PayoffTensor(int m, int n) : m_(m), n_(n), data_(size_for(m, n), 0.0) {
    if (m < 1 || n < 1) throw Error(ErrorKind::InvalidInput, "tensor dimensions must be positive");
  }

  /// Validates exact symmetry in both index pairs; throws InvalidInput otherwise.
  PayoffTensor(int m, int n, std::vector<double> data) : m_(m), n_(n), data_(std::move(data)) {
    if (m < 1 || n < 1) throw Error(ErrorKind::InvalidInput, "tensor dimensions must be positive");
    if (data_.size() != size_for(m, n)) {
      throw Error(ErrorKind::InvalidInput, "tensor data has wrong size");
    }
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j)
        for (int k = 0; k < n; ++k)
          for (int l = 0; l < n; ++l) {
            const double a = (*this)(i, j, k, l);
            if (!std::isfinite(a)) {
              throw Error(ErrorKind::InvalidInput, "tensor entry is not finite");
            }
            if (a != (*this)(j, i, k, l) || a != (*this)(i, j, l, k)) {
              throw Error(ErrorKind::InvalidInput,
                          "tensor not symmetric at [" + std::to_string(i + 1) + "][" +
                              std::to_string(j + 1) + "][" + std::to_string(k + 1) + "][" +
                              std::to_string(l + 1) + "]");
            }
          }
  }

  /// Averages over the index-pair symmetries instead of rejecting.
  static PayoffTensor symmetrized(int m, int n, const std::vector<double>& data) {
    PayoffTensor raw;
    raw.m_ = m;
    raw.n_ = n;
    raw.data_ = data;
    if (data.size() != size_for(m, n)) {
      throw Error(ErrorKind::InvalidInput, "tensor data has wrong size");
    }
    PayoffTensor out(m, n);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j)
        for (int k = 0; k < n; ++k)
          for (int l = 0; l < n; ++l) {
            // Canonical index order so mirrored entries are bitwise equal.
            const int a = std::min(i, j), b = std::max(i, j);
            const int c = std::min(k, l), d = std::max(k, l);
            out.at(i, j, k, l) = 0.25 * (raw(a, b, c, d) + raw(b, a, c, d) + raw(a, b, d, c) +
                                         raw(b, a, d, c));
          }
    return out;
  }

  /// Sets the n x n slice T[i][j][.][.] and its mirror T[j][i][.][.].
  void set_slice(int i, int j, const Matrix& slice) {
    if (slice.rows() != n_ || slice.cols() != n_) {
      throw Error(ErrorKind::InvalidInput, "slice has wrong shape");
    }
    if ((slice - slice.transpose()).cwiseAbs().maxCoeff() != 0.0) {
      throw Error(ErrorKind::InvalidInput, "slice must be symmetric");
    }
    for (int k = 0; k < n_; ++k)
      for (int l = 0; l < n_; ++l) {
        at(i, j, k, l) = slice(k, l);
        at(j, i, k, l) = slice(k, l);
      }
  }

  Matrix slice(int i, int j) const {
    Matrix s(n_, n_);
    for (int k = 0; k < n_; ++k)
      for (int l = 0; l < n_; ++l) s(k, l) = (*this)(i, j, k, l);
    return s;
  }

  int m() const { return m_; }
  int n() const { return n_; }
  const std::vector<double>& data() const { return data_; }

  double operator()(int i, int j, int k, int l) const { return data_[offset(i, j, k, l)]; }
  double& at(int i, int j, int k, int l) { return data_[offset(i, j, k, l)]; }

  double max_abs() const {
    double out = 0.0;
    for (double a : data_) out = std::max(out, std::abs(a));
    return out;
  }

  bool operator==(const PayoffTensor& other) const = default;

 private:
  static std::size_t size_for(int m, int n) {
    return static_cast<std::size_t>(m) * m * n * n;
  }
  std::size_t offset(int i, int j, int k, int l) const {
    return ((static_cast<std::size_t>(i) * m_ + j) * n_ + k) * n_ + l;
  }

  int m_ = 0;
  int n_ = 0;
  std::vector<double> data_;
};

enum class StructureMask { FullSymmetric, Diagonal };

inline std::string_view to_string(StructureMask mask) {
  return mask == StructureMask::Diagonal ? "diagonal" : "full";
}

inline StructureMask parse_mask(std::string_view s) {
  if (s == "full") return StructureMask::FullSymmetric;
  if (s == "diagonal") return StructureMask::Diagonal;
  throw Error(ErrorKind::InvalidInput, "mask must be \"full\" or \"diagonal\", got \"" +
                                           std::string(s) + "\"");
}

struct SdGame {
  PayoffTensor A;
  PayoffTensor B;
  StructureMask mask1 = StructureMask::FullSymmetric;
  StructureMask mask2 = StructureMask::FullSymmetric;

  SdGame() = default;
  SdGame(PayoffTensor a, PayoffTensor b, StructureMask m1 = StructureMask::FullSymmetric,
         StructureMask m2 = StructureMask::FullSymmetric)
      : A(std::move(a)), B(std::move(b)), mask1(m1), mask2(m2) {
    if (A.m() != B.m() || A.n() != B.n()) {
      throw Error(ErrorKind::InvalidInput, "payoff tensors have different shapes");
    }
  }

  int m() const { return A.m(); }
  int n() const { return A.n(); }
};

/// Trace-one PSD strategy, respecting the owner's structure mask.
class DensityMatrix {
 public:
  DensityMatrix(const Matrix& x, StructureMask mask = StructureMask::FullSymmetric) {
    if (x.rows() != x.cols() || x.rows() < 1) {
      throw Error(ErrorKind::InvalidInput, "strategy must be a non-empty square matrix");
    }
    if (!x.allFinite()) throw Error(ErrorKind::InvalidInput, "strategy has non-finite entries");
    const SymMatrix s(x);
    if (s.defect() > 1e-9) throw Error(ErrorKind::InvalidInput, "strategy is not symmetric");
    if (std::abs(s.mat().trace() - 1.0) > 1e-9) {
      throw Error(ErrorKind::InvalidInput,
                  "strategy trace is " + std::to_string(s.mat().trace()) + ", expected 1");
    }
    const double lmin = min_eigenvalue(s);
    if (lmin < -1e-8) {
      throw Error(ErrorKind::InvalidInput,
                  "strategy is not PSD (min eigenvalue " + std::to_string(lmin) + ")");
    }
    if (mask == StructureMask::Diagonal) {
      const Matrix off = s.mat() - Matrix(s.mat().diagonal().asDiagonal());
      if (off.cwiseAbs().maxCoeff() != 0.0) {
        throw Error(ErrorKind::InvalidInput, "diagonal-mask strategy has off-diagonal entries");
      }
    }
    m_ = s.mat();
  }

  const Matrix& mat() const { return m_; }
  operator const Matrix&() const { return m_; }  // NOLINT(google-explicit-constructor)
  Eigen::Index dim() const { return m_.rows(); }

 private:
  Matrix m_;
};

inline Matrix phi_A(const PayoffTensor& a, const Matrix& y) {
  if (y.rows() != a.n() || y.cols() != a.n()) {
    throw Error(ErrorKind::InvalidInput, "phi_A: Y must be n x n");
  }
  const int m = a.m();
  const int n = a.n();
  Matrix out = Matrix::Zero(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = i; j < m; ++j) {
      double s = 0.0;
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) s += a(i, j, k, l) * y(k, l);
      out(i, j) = s;
      out(j, i) = s;
    }
  return out;
}

inline Matrix phi_B_prime(const PayoffTensor& b, const Matrix& x) {
  if (x.rows() != b.m() || x.cols() != b.m()) {
    throw Error(ErrorKind::InvalidInput, "phi_B_prime: X must be m x m");
  }
  const int m = b.m();
  const int n = b.n();
  Matrix out = Matrix::Zero(n, n);
  for (int k = 0; k < n; ++k)
    for (int l = k; l < n; ++l) {
      double s = 0.0;
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) s += x(i, j) * b(i, j, k, l);
      out(k, l) = s;
      out(l, k) = s;
    }
  return out;
}

struct Payoffs {
  double player1;
  double player2;
};

inline Payoffs payoffs(const SdGame& game, const Matrix& x, const Matrix& y) {
  return {inner(x, phi_A(game.A, y)), inner(phi_B_prime(game.B, x), y)};
}

inline Matrix slack_W(const PayoffTensor& a, const Matrix& y, double w) {
  return w * Matrix::Identity(a.m(), a.m()) - phi_A(a, y);
}

inline Matrix slack_V(const PayoffTensor& b, const Matrix& x, double v) {
  return v * Matrix::Identity(b.n(), b.n()) - phi_B_prime(b, x);
}

// Mask-aware views used wherever complementarity is evaluated. Under the
// diagonal mask only the diagonal of a slack matrix matters.

inline double masked_min(const Matrix& m, StructureMask mask) {
  if (mask == StructureMask::Diagonal) return m.diagonal().minCoeff();
  return min_eigenvalue(SymMatrix(m));
}

inline double masked_max(const Matrix& m, StructureMask mask) {
  if (mask == StructureMask::Diagonal) return m.diagonal().maxCoeff();
  return max_eigenvalue(SymMatrix(m));
}

inline double masked_inner(const Matrix& strategy, const Matrix& slack, StructureMask mask) {
  if (mask == StructureMask::Diagonal) return strategy.diagonal().dot(slack.diagonal());
  return inner(strategy, slack);
}

inline int masked_rank(const Matrix& m, StructureMask mask, double tol) {
  if (mask == StructureMask::Diagonal) {
    const Vector d = m.diagonal();
    const double cut = tol * std::max(1.0, d.cwiseAbs().maxCoeff());
    return static_cast<int>((d.array().abs() > cut).count());
  }
  return numerical_rank(SymMatrix(m), tol);
}

struct BestResponse {
  Matrix strategy;
  double value;
  bool tie_broken;
};

/// Best response to a payoff matrix: the normalized projector onto the top
/// eigenspace (argmax diagonal entries under the diagonal mask). Ties are
/// resolved by the uniform mixture and flagged.
inline BestResponse best_response_to(const Matrix& payoff, StructureMask mask) {
  const Eigen::Index d = payoff.rows();
  if (mask == StructureMask::Diagonal) {
    const Vector diag = payoff.diagonal();
    const double top = diag.maxCoeff();
    const double cut = kTieGap * std::max(1.0, std::abs(top));
    Matrix s = Matrix::Zero(d, d);
    int count = 0;
    for (Eigen::Index i = 0; i < d; ++i)
      if (top - diag(i) <= cut) {
        s(i, i) = 1.0;
        ++count;
      }
    s /= count;
    return {s, top, count > 1};
  }
  const EigenDecomposition ed = sym_eigen(SymMatrix(payoff));
  const double top = ed.values(0);
  const double cut = kTieGap * std::max(1.0, std::abs(top));
  Eigen::Index count = 1;
  while (count < d && top - ed.values(count) <= cut) ++count;
  const Matrix q = ed.basis.leftCols(count);
  Matrix s = q * q.transpose() / static_cast<double>(count);
  s = 0.5 * (s + s.transpose());
  return {s, top, count > 1};
}

inline BestResponse best_response_1(const SdGame& game, const Matrix& y) {
  return best_response_to(phi_A(game.A, y), game.mask1);
}

inline BestResponse best_response_2(const SdGame& game, const Matrix& x) {
  return best_response_to(phi_B_prime(game.B, x), game.mask2);
}

/// rank P + rank D == dim_total, with ranks taken at `tol`.
inline bool strict_complementarity(const SymMatrix& p, const SymMatrix& d, int dim_total,
                                   double tol = kDefaultRankTol) {
  return numerical_rank(p, tol) + numerical_rank(d, tol) == dim_total;
}

inline bool strict_complementarity(const Matrix& p, const Matrix& d, StructureMask mask,
                                   double tol = kDefaultRankTol) {
  return masked_rank(p, mask, tol) + masked_rank(d, mask, tol) == static_cast<int>(p.rows());
}

inline double complementarity_norm(const Matrix& strategy, const Matrix& slack,
                                   StructureMask mask) {
  if (mask == StructureMask::Diagonal) {
    return strategy.diagonal().cwiseProduct(slack.diagonal()).norm();
  }
  return (strategy * slack).norm();
}

/// ||XW||_F + ||YV||_F (componentwise diagonal products under the diagonal mask).
inline double matrix_complementarity_residual(
    const Matrix& x, const Matrix& w, const Matrix& y, const Matrix& v,
    StructureMask mask1 = StructureMask::FullSymmetric,
    StructureMask mask2 = StructureMask::FullSymmetric) {
  return complementarity_norm(x, w, mask1) + complementarity_norm(y, v, mask2);
}

struct CertificateResiduals {
  double min_eig_W;
  double min_eig_V;
  double inner_XW;
  double inner_YV;
};

struct NashCertificate {
  Matrix X;
  Matrix Y;
  double w = 0.0;
  double v = 0.0;
  CertificateResiduals residuals{};
  bool strict = false;
  bool valid = false;
};

inline NashCertificate verify_nash(const SdGame& game, const Matrix& x, const Matrix& y,
                                   double tol = kDefaultVerifyTol) {
  NashCertificate cert;
  cert.X = x;
  cert.Y = y;
  const Matrix pa = phi_A(game.A, y);
  const Matrix pb = phi_B_prime(game.B, x);
  cert.w = game.mask1 == StructureMask::Diagonal ? pa.diagonal().maxCoeff()
                                                 : max_eigenvalue(SymMatrix(pa));
  cert.v = game.mask2 == StructureMask::Diagonal ? pb.diagonal().maxCoeff()
                                                 : max_eigenvalue(SymMatrix(pb));
  const Matrix w = cert.w * Matrix::Identity(game.m(), game.m()) - pa;
  const Matrix v = cert.v * Matrix::Identity(game.n(), game.n()) - pb;
  cert.residuals.min_eig_W = masked_min(w, game.mask1);
  cert.residuals.min_eig_V = masked_min(v, game.mask2);
  cert.residuals.inner_XW = std::abs(masked_inner(x, w, game.mask1));
  cert.residuals.inner_YV = std::abs(masked_inner(y, v, game.mask2));
  cert.valid = cert.residuals.min_eig_W >= -tol && cert.residuals.min_eig_V >= -tol &&
               cert.residuals.inner_XW <= tol && cert.residuals.inner_YV <= tol;
  cert.strict = strict_complementarity(x, w, game.mask1, tol) &&
                strict_complementarity(y, v, game.mask2, tol);
  return cert;
}

}  // namespace sdg
