#pragma once

// The bonus-perturbed complementarity system traced by the homotopy.
//
// Unknowns are the free coordinates of X and Y (upper triangle for a full
// symmetric strategy, the diagonal under the diagonal mask), the payoffs w
// and v, and finally the bonus t. Equations are the symmetrized products
// (XW + WX)/2 (upper triangle) or x_i * W_ii, the same for (Y, V), and the
// two trace rows.

#include <cmath>
#include <vector>

#include "sdg/game.hpp"
#include "sdg/linalg.hpp"

namespace sdg {

/// Game with every entry of the slice A[k][k][.][.] raised by t.
struct PerturbedGame {
  SdGame base;
  int k = 0;
  double t = 0.0;

  SdGame materialize() const {
    SdGame out = base;
    for (int r = 0; r < base.n(); ++r)
      for (int s = 0; s < base.n(); ++s) out.A.at(k, k, r, s) += t;
    return out;
  }
};

inline PerturbedGame perturb(const SdGame& game, int k, double t) {
  if (k < 0 || k >= game.m()) throw Error(ErrorKind::InvalidInput, "perturb: k out of range");
  if (!(t >= 0.0)) throw Error(ErrorKind::InvalidInput, "perturb: t must be non-negative");
  return {game, k, t};
}

/// Phi_{A(t)}(Y) = Phi_A(Y) + t * (1'Y1) * E_kk.
inline Matrix phi_A_bonus(const PayoffTensor& a, const Matrix& y, int k, double t) {
  Matrix out = phi_A(a, y);
  out(k, k) += t * y.sum();
  return out;
}

enum class PairFlag { StrategyZero, SlackZero };

/// Which member of each complementary eigenpair is held at zero, together
/// with the joint eigenbasis used to track pairs between steps.
struct ActiveSet {
  std::vector<PairFlag> player1;
  std::vector<PairFlag> player2;
  Matrix basis1;
  Matrix basis2;

  const std::vector<PairFlag>& flags(int player) const { return player == 1 ? player1 : player2; }
  std::vector<PairFlag>& flags(int player) { return player == 1 ? player1 : player2; }
  const Matrix& basis(int player) const { return player == 1 ? basis1 : basis2; }
  Matrix& basis(int player) { return player == 1 ? basis1 : basis2; }
};

struct PathPoint {
  Matrix X;
  Matrix Y;
  double w = 0.0;
  double v = 0.0;
  double t = 0.0;
  ActiveSet active;
  double residual_norm = 0.0;
};

/// Index bookkeeping between matrices and the flat unknown vector.
class SystemLayout {
 public:
  SystemLayout(int m, int n, StructureMask mask1, StructureMask mask2)
      : m_(m), n_(n), mask1_(mask1), mask2_(mask2) {
    nx_ = mask1 == StructureMask::Diagonal ? m : m * (m + 1) / 2;
    ny_ = mask2 == StructureMask::Diagonal ? n : n * (n + 1) / 2;
  }

  int m() const { return m_; }
  int n() const { return n_; }
  StructureMask mask1() const { return mask1_; }
  StructureMask mask2() const { return mask2_; }
  int nx() const { return nx_; }
  int ny() const { return ny_; }
  /// Unknowns excluding t; also the number of equations.
  int size() const { return nx_ + ny_ + 2; }
  int w_index() const { return nx_ + ny_; }
  int v_index() const { return nx_ + ny_ + 1; }
  int t_index() const { return nx_ + ny_ + 2; }

  Vector pack(const Matrix& x, const Matrix& y, double w, double v, double t) const {
    Vector u(size() + 1);
    pack_block(x, mask1_, u, 0);
    pack_block(y, mask2_, u, nx_);
    u(w_index()) = w;
    u(v_index()) = v;
    u(t_index()) = t;
    return u;
  }

  Vector pack(const PathPoint& p) const { return pack(p.X, p.Y, p.w, p.v, p.t); }

  Matrix unpack_x(const Vector& u) const { return unpack_block(u, 0, m_, mask1_); }
  Matrix unpack_y(const Vector& u) const { return unpack_block(u, nx_, n_, mask2_); }

  /// Matrix direction for unit coordinate `c` inside a block.
  static Matrix unit(int c, int d, StructureMask mask) {
    Matrix e = Matrix::Zero(d, d);
    if (mask == StructureMask::Diagonal) {
      e(c, c) = 1.0;
      return e;
    }
    int idx = 0;
    for (int i = 0; i < d; ++i)
      for (int j = i; j < d; ++j, ++idx)
        if (idx == c) {
          e(i, j) = 1.0;
          e(j, i) = 1.0;
          return e;
        }
    return e;
  }

  /// Equation rows for one player's complementarity block.
  static void write_rows(const Matrix& strategy, const Matrix& slack, StructureMask mask,
                         Vector& out, int offset) {
    const Eigen::Index d = strategy.rows();
    if (mask == StructureMask::Diagonal) {
      for (Eigen::Index i = 0; i < d; ++i) out(offset + i) = strategy(i, i) * slack(i, i);
      return;
    }
    const Matrix s = 0.5 * (strategy * slack + slack * strategy);
    int idx = offset;
    for (Eigen::Index i = 0; i < d; ++i)
      for (Eigen::Index j = i; j < d; ++j) out(idx++) = s(i, j);
  }

  /// Linearization of write_rows at (strategy, slack) in direction (ds, dslack).
  static void write_row_differential(const Matrix& strategy, const Matrix& slack,
                                     const Matrix& ds, const Matrix& dslack,
                                     StructureMask mask, Vector& out, int offset) {
    const Eigen::Index d = strategy.rows();
    if (mask == StructureMask::Diagonal) {
      for (Eigen::Index i = 0; i < d; ++i)
        out(offset + i) = ds(i, i) * slack(i, i) + strategy(i, i) * dslack(i, i);
      return;
    }
    const Matrix s = 0.5 * (ds * slack + slack * ds + strategy * dslack + dslack * strategy);
    int idx = offset;
    for (Eigen::Index i = 0; i < d; ++i)
      for (Eigen::Index j = i; j < d; ++j) out(idx++) = s(i, j);
  }

 private:
  static void pack_block(const Matrix& x, StructureMask mask, Vector& u, int offset) {
    const Eigen::Index d = x.rows();
    if (mask == StructureMask::Diagonal) {
      for (Eigen::Index i = 0; i < d; ++i) u(offset + i) = x(i, i);
      return;
    }
    int idx = offset;
    for (Eigen::Index i = 0; i < d; ++i)
      for (Eigen::Index j = i; j < d; ++j) u(idx++) = 0.5 * (x(i, j) + x(j, i));
  }

  static Matrix unpack_block(const Vector& u, int offset, int d, StructureMask mask) {
    Matrix x = Matrix::Zero(d, d);
    if (mask == StructureMask::Diagonal) {
      for (int i = 0; i < d; ++i) x(i, i) = u(offset + i);
      return x;
    }
    int idx = offset;
    for (int i = 0; i < d; ++i)
      for (int j = i; j < d; ++j) {
        x(i, j) = u(idx);
        x(j, i) = u(idx);
        ++idx;
      }
    return x;
  }

  int m_;
  int n_;
  StructureMask mask1_;
  StructureMask mask2_;
  int nx_ = 0;
  int ny_ = 0;
};

/// First-order change of the state matrices along one unknown coordinate.
struct Differentials {
  Matrix dX;
  Matrix dY;
  Matrix dW;
  Matrix dV;
};

/// Residual map F(z, t) of the perturbed game G(t) with bonus on strategy k.
class HomotopySystem {
 public:
  HomotopySystem(SdGame game, int k)
      : game_(std::move(game)),
        k_(k),
        layout_(game_.m(), game_.n(), game_.mask1, game_.mask2) {
    if (k < 0 || k >= game_.m()) throw Error(ErrorKind::InvalidInput, "bonus index out of range");
  }

  const SdGame& game() const { return game_; }
  int k() const { return k_; }
  const SystemLayout& layout() const { return layout_; }

  Matrix slack_W(const Matrix& y, double w, double t) const {
    return w * Matrix::Identity(game_.m(), game_.m()) - phi_A_bonus(game_.A, y, k_, t);
  }

  Matrix slack_V(const Matrix& x, double v) const {
    return v * Matrix::Identity(game_.n(), game_.n()) - phi_B_prime(game_.B, x);
  }

  Vector residual(const Vector& u) const {
    const Matrix x = layout_.unpack_x(u);
    const Matrix y = layout_.unpack_y(u);
    const double w = u(layout_.w_index());
    const double v = u(layout_.v_index());
    const double t = u(layout_.t_index());
    Vector f(layout_.size());
    SystemLayout::write_rows(x, slack_W(y, w, t), layout_.mask1(), f, 0);
    SystemLayout::write_rows(y, slack_V(x, v), layout_.mask2(), f, layout_.nx());
    f(layout_.nx() + layout_.ny()) = x.trace() - 1.0;
    f(layout_.nx() + layout_.ny() + 1) = y.trace() - 1.0;
    return f;
  }

  Differentials differentials(const Vector& u, int column) const {
    const int m = game_.m();
    const int n = game_.n();
    const Matrix y = layout_.unpack_y(u);
    const double t = u(layout_.t_index());
    Differentials d{Matrix::Zero(m, m), Matrix::Zero(n, n), Matrix::Zero(m, m),
                    Matrix::Zero(n, n)};
    if (column < layout_.nx()) {
      d.dX = SystemLayout::unit(column, m, layout_.mask1());
      d.dV = -phi_B_prime(game_.B, d.dX);
    } else if (column < layout_.nx() + layout_.ny()) {
      d.dY = SystemLayout::unit(column - layout_.nx(), n, layout_.mask2());
      d.dW = -phi_A_bonus(game_.A, d.dY, k_, t);
    } else if (column == layout_.w_index()) {
      d.dW = Matrix::Identity(m, m);
    } else if (column == layout_.v_index()) {
      d.dV = Matrix::Identity(n, n);
    } else {
      d.dW(k_, k_) = -y.sum();
    }
    return d;
  }

  /// Analytic Jacobian, size() x (size() + 1); the last column is d/dt.
  Matrix jacobian(const Vector& u) const {
    const Matrix x = layout_.unpack_x(u);
    const Matrix y = layout_.unpack_y(u);
    const Matrix w = slack_W(y, u(layout_.w_index()), u(layout_.t_index()));
    const Matrix v = slack_V(x, u(layout_.v_index()));
    const int rows = layout_.size();
    Matrix jac(rows, rows + 1);
    Vector col(rows);
    for (int c = 0; c <= rows; ++c) {
      const Differentials d = differentials(u, c);
      SystemLayout::write_row_differential(x, w, d.dX, d.dW, layout_.mask1(), col, 0);
      SystemLayout::write_row_differential(y, v, d.dY, d.dV, layout_.mask2(), col, layout_.nx());
      col(layout_.nx() + layout_.ny()) = d.dX.trace();
      col(layout_.nx() + layout_.ny() + 1) = d.dY.trace();
      jac.col(c) = col;
    }
    return jac;
  }

  PathPoint point(const Vector& u) const {
    PathPoint p;
    p.X = layout_.unpack_x(u);
    p.Y = layout_.unpack_y(u);
    p.w = u(layout_.w_index());
    p.v = u(layout_.v_index());
    p.t = u(layout_.t_index());
    p.residual_norm = residual(u).norm();
    return p;
  }

  Matrix W(const PathPoint& p) const { return slack_W(p.Y, p.w, p.t); }
  Matrix V(const PathPoint& p) const { return slack_V(p.X, p.v); }

 private:
  SdGame game_;
  int k_;
  SystemLayout layout_;
};

inline Vector residual(const PathPoint& point, const PerturbedGame& pg) {
  HomotopySystem sys(pg.base, pg.k);
  return sys.residual(sys.layout().pack(point.X, point.Y, point.w, point.v, pg.t));
}

inline Matrix jacobian(const PathPoint& point, const PerturbedGame& pg) {
  HomotopySystem sys(pg.base, pg.k);
  return sys.jacobian(sys.layout().pack(point.X, point.Y, point.w, point.v, pg.t));
}

/// Smallest singular value of the Jacobian with the t column removed.
inline double square_jacobian_sigma_min(const HomotopySystem& sys, const Vector& u) {
  const Matrix jac = sys.jacobian(u);
  const int n = sys.layout().size();
  Eigen::JacobiSVD<Matrix> svd(jac.leftCols(n));
  return svd.singularValues()(n - 1);
}

}  // namespace sdg
