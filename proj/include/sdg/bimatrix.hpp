#pragma once

// Classical bimatrix machinery used as an independent reference: labels,
// Lemke-Howson complementary pivoting, support enumeration, the diagonal
// embedding into semidefinite games, and a grid search for 2x2 semidefinite
// games.

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numbers>
#include <set>
#include <string>
#include <vector>

#include "sdg/continuation.hpp"
#include "sdg/game.hpp"
#include "sdg/system.hpp"

namespace sdg {

struct BimatrixGame {
  Matrix A;
  Matrix B;

  BimatrixGame() = default;
  BimatrixGame(Matrix a, Matrix b) : A(std::move(a)), B(std::move(b)) {
    if (A.rows() != B.rows() || A.cols() != B.cols() || A.size() == 0) {
      throw Error(ErrorKind::InvalidInput, "bimatrix payoffs must be non-empty and share a shape");
    }
  }
  int m() const { return static_cast<int>(A.rows()); }
  int n() const { return static_cast<int>(A.cols()); }
};

/// Labels are 1-based: 1..m for player 1's strategies, m+1..m+n for player 2's.
using LabelSet = std::set<int>;

inline constexpr double kLabelTol = 1e-9;

/// Labels of a player-1 point: zero coordinates plus player 2's binding best
/// responses. The artificial point x = 0 carries exactly the labels 1..m.
inline LabelSet labels_of_x(const BimatrixGame& g, const Vector& x) {
  LabelSet out;
  for (int i = 0; i < g.m(); ++i)
    if (std::abs(x(i)) <= kLabelTol) out.insert(i + 1);
  if (x.cwiseAbs().maxCoeff() <= kLabelTol) return out;
  const Vector pay = g.B.transpose() * x;
  const double top = pay.maxCoeff();
  for (int j = 0; j < g.n(); ++j)
    if (pay(j) >= top - kLabelTol) out.insert(g.m() + j + 1);
  return out;
}

inline LabelSet labels_of_y(const BimatrixGame& g, const Vector& y) {
  LabelSet out;
  for (int j = 0; j < g.n(); ++j)
    if (std::abs(y(j)) <= kLabelTol) out.insert(g.m() + j + 1);
  if (y.cwiseAbs().maxCoeff() <= kLabelTol) return out;
  const Vector pay = g.A * y;
  const double top = pay.maxCoeff();
  for (int i = 0; i < g.m(); ++i)
    if (pay(i) >= top - kLabelTol) out.insert(i + 1);
  return out;
}

struct LemkeHowsonResult {
  Vector x;
  Vector y;
  double w = 0.0;  // player 1 payoff in the original game
  double v = 0.0;
  int pivots = 0;
  std::vector<int> leaving_labels;  // 1-based label of each pivot's leaving variable
  bool last_left_slack = false;     // terminal pivot removed the slack of row k
};

namespace detail {

/// Dense tableau rows: basic = rhs - sum coef * nonbasic, stored as the
/// equality system T z = rhs with an explicit basis list.
struct Tableau {
  Matrix T;
  Vector rhs;
  std::vector<int> basis;  // variable index per row

  /// Pivots `enter` into the basis; returns the leaving variable.
  int pivot(int enter) {
    int row = -1;
    double best = 0.0;
    for (int r = 0; r < T.rows(); ++r) {
      if (T(r, enter) <= 1e-12) continue;
      const double ratio = rhs(r) / T(r, enter);
      if (row < 0 || ratio < best - 1e-12 * std::max(1.0, std::abs(best))) {
        row = r;
        best = ratio;
      } else if (std::abs(ratio - best) <= 1e-12 * std::max(1.0, std::abs(best))) {
        throw Error(ErrorKind::DegenerateGame, "tie in the minimum-ratio test");
      }
    }
    if (row < 0) throw Error(ErrorKind::InternalError, "unbounded pivot column");
    const double p = T(row, enter);
    T.row(row) /= p;
    rhs(row) /= p;
    for (int r = 0; r < T.rows(); ++r) {
      if (r == row) continue;
      const double f = T(r, enter);
      if (f == 0.0) continue;
      T.row(r) -= f * T.row(row);
      rhs(r) -= f * rhs(row);
    }
    const int leaving = basis[static_cast<std::size_t>(row)];
    basis[static_cast<std::size_t>(row)] = enter;
    return leaving;
  }

  Vector values(int nvars) const {
    Vector z = Vector::Zero(nvars);
    for (std::size_t r = 0; r < basis.size(); ++r) z(basis[r]) = rhs(static_cast<Eigen::Index>(r));
    return z;
  }
};

inline long binomial(int n, int k) {
  long r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

}  // namespace detail

/// Lemke-Howson from the artificial equilibrium with missing label k
/// (0-based strategy of player 1).
inline LemkeHowsonResult lemke_howson(const BimatrixGame& g, int k) {
  const int m = g.m();
  const int n = g.n();
  if (k < 0 || k >= m) throw Error(ErrorKind::InvalidInput, "missing label out of range");
  const double shift = 1.0 + std::max(std::abs(g.A.minCoeff()), std::abs(g.B.minCoeff()));
  const Matrix a = g.A.array() + shift;
  const Matrix b = g.B.array() + shift;

  // Player 1 side: B'x + s = 1, variables x_0..x_{m-1} (label i), s_0..s_{n-1} (label m+j).
  detail::Tableau p;
  p.T = Matrix::Zero(n, m + n);
  p.T.leftCols(m) = b.transpose();
  p.T.rightCols(n) = Matrix::Identity(n, n);
  p.rhs = Vector::Ones(n);
  for (int j = 0; j < n; ++j) p.basis.push_back(m + j);
  // Player 2 side: r + Ay = 1, variables r_0..r_{m-1} (label i), y_0..y_{n-1} (label m+j).
  detail::Tableau q;
  q.T = Matrix::Zero(m, m + n);
  q.T.leftCols(m) = Matrix::Identity(m, m);
  q.T.rightCols(n) = a;
  q.rhs = Vector::Ones(m);
  for (int i = 0; i < m; ++i) q.basis.push_back(i);

  LemkeHowsonResult res;
  const long cap = detail::binomial(m + n, m) + 2;
  int enter = k;  // x_k
  bool on_p = true;
  while (true) {
    if (res.pivots >= cap) throw Error(ErrorKind::InternalError, "pivot limit exceeded (cycling)");
    const int leaving = on_p ? p.pivot(enter) : q.pivot(enter);
    ++res.pivots;
    // Both tableaux number variables so that variable index == label - 1.
    res.leaving_labels.push_back(leaving + 1);
    if (leaving == k) {
      res.last_left_slack = !on_p;
      break;
    }
    enter = leaving;
    on_p = !on_p;
  }
  const Vector zp = p.values(m + n);
  const Vector zq = q.values(m + n);
  Vector x = zp.head(m);
  Vector y = zq.tail(n);
  x /= x.sum();
  y /= y.sum();
  res.x = x;
  res.y = y;
  res.w = (g.A * y).maxCoeff();
  res.v = (g.B.transpose() * x).maxCoeff();
  return res;
}

/// Paired crossings the homotopy path of the diagonal embedding should show
/// for this pivot sequence. The first pivot is the start itself; a final pivot
/// that drops the slack of row k happens at t = 0 rather than at a crossing.
inline int expected_paired_crossings(const LemkeHowsonResult& r) {
  return r.pivots - 1 - (r.last_left_slack ? 1 : 0);
}

struct BimatrixEquilibrium {
  Vector x;
  Vector y;
};

/// All equilibria with equal-size supports (complete for non-degenerate games).
inline std::vector<BimatrixEquilibrium> support_enumeration(const BimatrixGame& g) {
  const int m = g.m();
  const int n = g.n();
  if (m > 4 || n > 4) throw Error(ErrorKind::InvalidInput, "support enumeration limited to 4x4");
  std::vector<BimatrixEquilibrium> out;
  auto subsets = [](int d, int s) {
    std::vector<std::vector<int>> all;
    for (int mask = 0; mask < (1 << d); ++mask) {
      if (__builtin_popcount(static_cast<unsigned>(mask)) != s) continue;
      std::vector<int> v;
      for (int i = 0; i < d; ++i)
        if (mask & (1 << i)) v.push_back(i);
      all.push_back(v);
    }
    return all;
  };
  // Solves M_{I,J} z_J = val * 1, sum z = 1 for z on J.
  auto solve = [](const Matrix& mat, const std::vector<int>& rows, const std::vector<int>& cols,
                  Vector& z, double& val) {
    const int s = static_cast<int>(rows.size());
    Matrix sys = Matrix::Zero(s + 1, s + 1);
    Vector rhs = Vector::Zero(s + 1);
    for (int r = 0; r < s; ++r) {
      for (int c = 0; c < s; ++c) sys(r, c) = mat(rows[static_cast<std::size_t>(r)], cols[static_cast<std::size_t>(c)]);
      sys(r, s) = -1.0;
    }
    for (int c = 0; c < s; ++c) sys(s, c) = 1.0;
    rhs(s) = 1.0;
    Eigen::FullPivLU<Matrix> lu(sys);
    if (!lu.isInvertible()) return false;
    const Vector sol = lu.solve(rhs);
    z = sol.head(s);
    val = sol(s);
    return true;
  };
  for (int s = 1; s <= std::min(m, n); ++s) {
    for (const auto& I : subsets(m, s)) {
      for (const auto& J : subsets(n, s)) {
        Vector yj, xi;
        double w = 0, v = 0;
        if (!solve(g.A, I, J, yj, w)) continue;
        if (!solve(g.B.transpose(), J, I, xi, v)) continue;
        if (yj.minCoeff() < -1e-12 || xi.minCoeff() < -1e-12) continue;
        Vector x = Vector::Zero(m), y = Vector::Zero(n);
        for (int c = 0; c < s; ++c) {
          x(I[static_cast<std::size_t>(c)]) = std::max(0.0, xi(c));
          y(J[static_cast<std::size_t>(c)]) = std::max(0.0, yj(c));
        }
        if ((g.A * y).maxCoeff() > w + 1e-9 || (g.B.transpose() * x).maxCoeff() > v + 1e-9) continue;
        const bool dup = std::any_of(out.begin(), out.end(), [&](const BimatrixEquilibrium& e) {
          return (e.x - x).cwiseAbs().maxCoeff() <= 1e-9 && (e.y - y).cwiseAbs().maxCoeff() <= 1e-9;
        });
        if (!dup) out.push_back({x, y});
      }
    }
  }
  return out;
}

/// Diagonal semidefinite game with A_{iikk} = a_{ik}, B_{iikk} = b_{ik}.
inline SdGame embed_diagonal(const BimatrixGame& g) {
  PayoffTensor a(g.m(), g.n());
  PayoffTensor b(g.m(), g.n());
  for (int i = 0; i < g.m(); ++i)
    for (int k = 0; k < g.n(); ++k) {
      a.at(i, i, k, k) = g.A(i, k);
      b.at(i, i, k, k) = g.B(i, k);
    }
  return SdGame(a, b, StructureMask::Diagonal, StructureMask::Diagonal);
}

// ---------------------------------------------------------------------------
// Grid search for 2x2 semidefinite games.

/// Real 2x2 density matrix from disk coordinates (r_x, r_z), r_x^2 + r_z^2 <= 1.
inline Matrix disk_density(double rx, double rz) {
  Matrix x(2, 2);
  x << 0.5 * (1.0 + rz), 0.5 * rx, 0.5 * rx, 0.5 * (1.0 - rz);
  return x;
}

struct BruteForceCluster {
  Matrix X;
  Matrix Y;
  double w = 0.0;
  double v = 0.0;
  bool strict = false;
  double sigma_min = 0.0;
  int seeds = 0;  // polished seeds that landed in this cluster
};

struct BruteForceResult {
  std::vector<BruteForceCluster> clusters;
  int candidates = 0;
  bool degenerate = false;  // some cluster is not locally isolated
};

/// Grids both disks at the given resolution, keeps pairs that are mutual
/// epsilon-best responses, polishes seeds by Newton on the complementarity
/// system at t = 0 and clusters verified results (Frobenius radius 1e-3).
inline BruteForceResult brute_force_2x2_sdg(const SdGame& game, double resolution) {
  if (game.m() != 2 || game.n() != 2 || game.mask1 != StructureMask::FullSymmetric ||
      game.mask2 != StructureMask::FullSymmetric) {
    throw Error(ErrorKind::InvalidInput, "grid search needs a 2x2 game with full masks");
  }
  if (!(resolution > 0.0 && resolution <= 0.5)) {
    throw Error(ErrorKind::InvalidInput, "grid resolution must lie in (0, 0.5]");
  }
  struct GridPoint {
    double rx, rz;
  };
  // Square lattice inside the open disk, indexed for box queries, plus a
  // ring of pure states on the boundary.
  std::vector<GridPoint> grid;
  const int half = static_cast<int>(std::ceil(1.0 / resolution));
  const int side = 2 * half + 1;
  std::vector<int> lattice(static_cast<std::size_t>(side * side), -1);
  for (int i = -half; i <= half; ++i)
    for (int j = -half; j <= half; ++j) {
      const double rx = i * resolution;
      const double rz = j * resolution;
      if (rx * rx + rz * rz <= 1.0 - 1e-12) {
        lattice[static_cast<std::size_t>((i + half) * side + (j + half))] = static_cast<int>(grid.size());
        grid.push_back({rx, rz});
      }
    }
  const std::size_t ring_begin = grid.size();
  const int ring = static_cast<int>(std::ceil(2.0 * std::numbers::pi / resolution));
  for (int i = 0; i < ring; ++i) {
    const double a = 2.0 * std::numbers::pi * i / ring;
    grid.push_back({std::cos(a), std::sin(a)});
  }

  // <Z, P> = tr(P)/2 + rz (P11 - P22)/2 + rx P12 is affine in the disk
  // coordinates of Z, with maximum tr(P)/2 + |(P12, (P11 - P22)/2)|.
  struct Affine {
    double c0, cx, cz, top;
  };
  auto affine = [](const Matrix& p) {
    Affine f{0.5 * p.trace(), p(0, 1), 0.5 * (p(0, 0) - p(1, 1)), 0.0};
    f.top = f.c0 + std::hypot(f.cx, f.cz);
    return f;
  };
  std::vector<Affine> br2(grid.size()), br1(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Matrix z = disk_density(grid[i].rx, grid[i].rz);
    br2[i] = affine(phi_B_prime(game.B, z));  // player 2's payoff against X = z
    br1[i] = affine(phi_A(game.A, z));        // player 1's payoff against Y = z
  }
  const double scale = std::max({1.0, game.A.max_abs(), game.B.max_abs()});
  const double eps = 2.0 * resolution * scale;

  struct Candidate {
    std::size_t ix, iy;
    double gap;
  };
  std::vector<Candidate> cand;
  auto test = [&](std::size_t ix, std::size_t iy) {
    const Affine& f = br2[ix];
    const double gy = f.top - (f.c0 + f.cx * grid[iy].rx + f.cz * grid[iy].rz);
    if (gy > eps) return;
    const Affine& h = br1[iy];
    const double gx = h.top - (h.c0 + h.cx * grid[ix].rx + h.cz * grid[ix].rz);
    if (gx > eps) return;
    cand.push_back({ix, iy, gx + gy});
  };
  for (std::size_t ix = 0; ix < grid.size(); ++ix) {
    const Affine& f = br2[ix];
    const double rho = std::hypot(f.cx, f.cz);
    // The eps-best responses form a cap of depth eps / rho around the top
    // eigenvector's boundary point; the cap fits in a ball of radius
    // sqrt(2 depth) around that point.
    const double depth = rho > 0.0 ? eps / rho : 3.0;
    if (depth >= 2.0) {
      for (std::size_t iy = 0; iy < grid.size(); ++iy) test(ix, iy);
      continue;
    }
    const double cx = f.cx / rho;
    const double cz = f.cz / rho;
    const double radius = std::sqrt(2.0 * depth) + resolution;
    const int i0 = std::max(-half, static_cast<int>(std::floor((cx - radius) / resolution)));
    const int i1 = std::min(half, static_cast<int>(std::ceil((cx + radius) / resolution)));
    const int j0 = std::max(-half, static_cast<int>(std::floor((cz - radius) / resolution)));
    const int j1 = std::min(half, static_cast<int>(std::ceil((cz + radius) / resolution)));
    for (int i = i0; i <= i1; ++i)
      for (int j = j0; j <= j1; ++j) {
        const int id = lattice[static_cast<std::size_t>((i + half) * side + (j + half))];
        if (id >= 0) test(ix, static_cast<std::size_t>(id));
      }
    for (std::size_t iy = ring_begin; iy < grid.size(); ++iy) test(ix, iy);
  }
  std::stable_sort(cand.begin(), cand.end(),
                   [](const Candidate& a, const Candidate& b) { return a.gap < b.gap; });

  BruteForceResult res;
  res.candidates = static_cast<int>(cand.size());
  const HomotopySystem sys(game, 0);
  std::vector<std::pair<GridPoint, GridPoint>> seeds;
  std::map<std::array<int, 4>, std::vector<std::size_t>> cells;
  const double seed_sep = 3.0 * resolution;
  auto cell_of = [&](const GridPoint& a, const GridPoint& b) {
    return std::array<int, 4>{static_cast<int>(std::floor(a.rx / seed_sep)),
                              static_cast<int>(std::floor(a.rz / seed_sep)),
                              static_cast<int>(std::floor(b.rx / seed_sep)),
                              static_cast<int>(std::floor(b.rz / seed_sep))};
  };
  for (const Candidate& c : cand) {
    const GridPoint& gx = grid[c.ix];
    const GridPoint& gy = grid[c.iy];
    const std::array<int, 4> home = cell_of(gx, gy);
    bool near = false;
    for (int d = 0; d < 81 && !near; ++d) {
      std::array<int, 4> key = home;
      int code = d;
      for (int a = 0; a < 4; ++a, code /= 3) key[static_cast<std::size_t>(a)] += code % 3 - 1;
      const auto it = cells.find(key);
      if (it == cells.end()) continue;
      for (const std::size_t si : it->second) {
        const auto& s = seeds[si];
        if (std::hypot(s.first.rx - gx.rx, s.first.rz - gx.rz) +
                std::hypot(s.second.rx - gy.rx, s.second.rz - gy.rz) <
            seed_sep) {
          near = true;
          break;
        }
      }
    }
    if (near) continue;
    cells[home].push_back(seeds.size());
    seeds.emplace_back(gx, gy);
    const Matrix x0 = disk_density(gx.rx, gx.rz);
    const Matrix y0 = disk_density(gy.rx, gy.rz);
    const double w0 = max_eigenvalue(SymMatrix(phi_A(game.A, y0)));
    const double v0 = max_eigenvalue(SymMatrix(phi_B_prime(game.B, x0)));
    const CorrectorResult cr = correct_fixed_t(sys, sys.layout().pack(x0, y0, w0, v0, 0.0), 0.0);
    if (!cr.converged) continue;
    const PathPoint p = sys.point(cr.u);
    if (min_eigenvalue(SymMatrix(p.X)) < -1e-9 || min_eigenvalue(SymMatrix(p.Y)) < -1e-9) continue;
    const NashCertificate cert = verify_nash(game, p.X, p.Y);
    if (!cert.valid) continue;
    auto it = std::find_if(res.clusters.begin(), res.clusters.end(), [&](const BruteForceCluster& k) {
      return (k.X - p.X).norm() + (k.Y - p.Y).norm() <= 1e-3;
    });
    if (it != res.clusters.end()) {
      ++it->seeds;
      continue;
    }
    BruteForceCluster cl;
    cl.X = p.X;
    cl.Y = p.Y;
    cl.w = cert.w;
    cl.v = cert.v;
    cl.strict = cert.strict;
    cl.sigma_min = square_jacobian_sigma_min(sys, cr.u);
    cl.seeds = 1;
    if (cl.sigma_min < 1e-6) res.degenerate = true;
    res.clusters.push_back(cl);
  }
  return res;
}

}  // namespace sdg
