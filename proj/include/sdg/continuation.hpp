#pragma once

// Predictor-corrector machinery on top of HomotopySystem: eigenpair
// bookkeeping, tangents, the pseudo-arclength corrector and the start point.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "sdg/game.hpp"
#include "sdg/linalg.hpp"
#include "sdg/system.hpp"

namespace sdg {

enum class Member { Strategy, Slack };

inline constexpr double kZeroTol = 1e-8;
inline constexpr double kPsdTol = 1e-8;

/// Complementary eigenpairs of (strategy, slack). Under the diagonal mask the
/// pairs are the diagonal entries in the standard basis.
inline JointEigenSystem complementarity_pairs(const Matrix& strategy, const Matrix& slack,
                                              StructureMask mask) {
  const Eigen::Index d = strategy.rows();
  if (mask == StructureMask::Diagonal) {
    JointEigenSystem js;
    js.basis = Matrix::Identity(d, d);
    for (Eigen::Index i = 0; i < d; ++i) js.pairs.emplace_back(strategy(i, i), slack(i, i));
    return js;
  }
  return joint_diagonalize(SymMatrix(strategy), SymMatrix(slack), 1e-6);
}

/// Reorders the columns of `js` to follow `reference` by maximal overlap.
/// Columns with (numerically) equal pair values are interchangeable, so only
/// a near tie between columns carrying different values is ambiguous.
inline JointEigenSystem align_pairs(const JointEigenSystem& js, const Matrix& reference,
                                    double value_scale) {
  const Eigen::Index d = js.basis.cols();
  if (reference.cols() != d) return js;
  const Matrix overlap = (reference.transpose() * js.basis).cwiseAbs();
  std::vector<bool> used(static_cast<std::size_t>(d), false);
  std::vector<Eigen::Index> assign(static_cast<std::size_t>(d), -1);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(d));
  for (Eigen::Index i = 0; i < d; ++i) order[static_cast<std::size_t>(i)] = i;
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return overlap.row(a).maxCoeff() > overlap.row(b).maxCoeff();
  });
  const double value_tol = 1e-6 * std::max(1.0, value_scale);
  for (const Eigen::Index r : order) {
    Eigen::Index best = -1;
    Eigen::Index second = -1;
    for (Eigen::Index c = 0; c < d; ++c) {
      if (used[static_cast<std::size_t>(c)]) continue;
      if (best < 0 || overlap(r, c) > overlap(r, best)) {
        second = best;
        best = c;
      } else if (second < 0 || overlap(r, c) > overlap(r, second)) {
        second = c;
      }
    }
    if (second >= 0 && overlap(r, best) - overlap(r, second) < 1e-3) {
      const auto& pb = js.pairs[static_cast<std::size_t>(best)];
      const auto& ps = js.pairs[static_cast<std::size_t>(second)];
      if (std::abs(pb.first - ps.first) > value_tol || std::abs(pb.second - ps.second) > value_tol) {
        throw Error(ErrorKind::TrackingAmbiguity, "eigenvector overlaps " +
                                                      std::to_string(overlap(r, best)) + " and " +
                                                      std::to_string(overlap(r, second)));
      }
    }
    used[static_cast<std::size_t>(best)] = true;
    assign[static_cast<std::size_t>(r)] = best;
  }
  JointEigenSystem out;
  out.basis.resize(js.basis.rows(), d);
  for (Eigen::Index r = 0; r < d; ++r) {
    const Eigen::Index c = assign[static_cast<std::size_t>(r)];
    Vector q = js.basis.col(c);
    if (q.dot(reference.col(r)) < 0) q = -q;
    out.basis.col(r) = q;
    out.pairs.push_back(js.pairs[static_cast<std::size_t>(c)]);
  }
  return out;
}

inline double member_value(const std::pair<double, double>& pair, Member member) {
  return member == Member::Strategy ? pair.first : pair.second;
}

/// The member of a pair that is not held at zero.
inline Member watched_member(PairFlag flag) {
  return flag == PairFlag::StrategyZero ? Member::Slack : Member::Strategy;
}

inline Member held_member(PairFlag flag) {
  return flag == PairFlag::StrategyZero ? Member::Strategy : Member::Slack;
}

/// Both players' pair systems at u, aligned to the bases stored in `previous`
/// when given.
struct PairState {
  JointEigenSystem p1;
  JointEigenSystem p2;
  double scale1 = 1.0;
  double scale2 = 1.0;

  const JointEigenSystem& of(int player) const { return player == 1 ? p1 : p2; }
  double scale(int player) const { return player == 1 ? scale1 : scale2; }
};

inline PairState pair_state(const HomotopySystem& sys, const Vector& u,
                            const ActiveSet* previous) {
  const SystemLayout& lay = sys.layout();
  const Matrix x = lay.unpack_x(u);
  const Matrix y = lay.unpack_y(u);
  const Matrix w = sys.slack_W(y, u(lay.w_index()), u(lay.t_index()));
  const Matrix v = sys.slack_V(x, u(lay.v_index()));
  PairState ps;
  ps.scale1 = std::max(1.0, w.norm());
  ps.scale2 = std::max(1.0, v.norm());
  ps.p1 = complementarity_pairs(x, w, lay.mask1());
  ps.p2 = complementarity_pairs(y, v, lay.mask2());
  if (previous != nullptr) {
    ps.p1 = align_pairs(ps.p1, previous->basis1, ps.scale1);
    ps.p2 = align_pairs(ps.p2, previous->basis2, ps.scale2);
  }
  return ps;
}

/// Flags from which member of each pair is below kZeroTol. Returns nullopt
/// when some pair has both members (numerically) zero.
inline std::optional<ActiveSet> classify_active_set(const PairState& ps) {
  ActiveSet as;
  for (int player = 1; player <= 2; ++player) {
    const JointEigenSystem& js = ps.of(player);
    const double scale = ps.scale(player);
    for (const auto& [s, l] : js.pairs) {
      const bool s_zero = std::abs(s) <= kZeroTol;
      const bool l_zero = std::abs(l) <= kZeroTol * scale;
      if (s_zero == l_zero) return std::nullopt;
      as.flags(player).push_back(s_zero ? PairFlag::StrategyZero : PairFlag::SlackZero);
    }
    as.basis(player) = js.basis;
  }
  return as;
}

/// Mask-aware minimum eigenvalues of X, Y, W, V.
struct Feasibility {
  double min_X;
  double min_Y;
  double min_W;
  double min_V;

  double worst() const { return std::min(std::min(min_X, min_Y), std::min(min_W, min_V)); }
  bool ok(double tol = kPsdTol) const { return worst() >= -tol; }
};

inline Feasibility feasibility(const HomotopySystem& sys, const PathPoint& p) {
  const StructureMask m1 = sys.layout().mask1();
  const StructureMask m2 = sys.layout().mask2();
  return {masked_min(p.X, m1), masked_min(p.Y, m2), masked_min(sys.W(p), m1),
          masked_min(sys.V(p), m2)};
}

/// Gradient of q'Mq over the unknowns (including t) for one member of a pair.
inline Vector member_gradient(const HomotopySystem& sys, const Vector& u, int player,
                              Member member, const Vector& q) {
  const int cols = sys.layout().size() + 1;
  Vector g(cols);
  for (int c = 0; c < cols; ++c) {
    const Differentials d = sys.differentials(u, c);
    const Matrix& dm = player == 1 ? (member == Member::Strategy ? d.dX : d.dW)
                                   : (member == Member::Strategy ? d.dY : d.dV);
    g(c) = q.dot(dm * q);
  }
  return g;
}

struct Tangent {
  Vector direction;
  int orientation = 1;  // sign applied to the raw null vector
};

/// Unit null vector of the full Jacobian, oriented along `previous`, or with
/// dt < 0 when there is no previous tangent.
inline Tangent tangent(const HomotopySystem& sys, const Vector& u, const Vector* previous) {
  const Matrix jac = sys.jacobian(u);
  const int n = sys.layout().size();
  Eigen::JacobiSVD<Matrix> svd(jac, Eigen::ComputeFullV);
  const Vector& s = svd.singularValues();
  if (s(n - 1) <= 1e-6 * std::max(1.0, s(0))) {
    throw Error(ErrorKind::NearSingular,
                "Jacobian null space is not one-dimensional (sigma_min " + std::to_string(s(n - 1)) +
                    ")");
  }
  Tangent tan;
  tan.direction = svd.matrixV().col(n);
  const bool flip = previous != nullptr ? tan.direction.dot(*previous) < 0
                                        : tan.direction(n) > 0;
  if (flip) {
    tan.direction = -tan.direction;
    tan.orientation = -1;
  }
  return tan;
}

struct CorrectorResult {
  Vector u;
  bool converged = false;
  int iterations = 0;
  double residual = 0.0;
};

struct CorrectorOptions {
  int max_iterations = 20;
  double tol = 1e-10;
};

/// Gauss-Newton on F(u) = 0 together with normal'(u - anchor) = 0.
inline CorrectorResult correct(const HomotopySystem& sys, const Vector& start,
                               const Vector& normal, const Vector& anchor,
                               const CorrectorOptions& opts = {}) {
  const int n = sys.layout().size();
  CorrectorResult res;
  res.u = start;
  Vector g(n + 1);
  auto eval = [&](const Vector& u) {
    g.head(n) = sys.residual(u);
    g(n) = normal.dot(u - anchor);
    return g.norm();
  };
  double norm = eval(res.u);
  Matrix ja(n + 1, n + 1);
  for (int it = 0; it < opts.max_iterations; ++it) {
    if (!res.u.allFinite()) break;
    ja.topRows(n) = sys.jacobian(res.u);
    ja.row(n) = normal.transpose();
    const Vector delta = Eigen::CompleteOrthogonalDecomposition<Matrix>(ja).solve(-g);
    res.u += delta;
    res.iterations = it + 1;
    const double next = eval(res.u);
    if (!std::isfinite(next) || (it >= 1 && next > 2.0 * norm && next > opts.tol)) {
      norm = next;
      break;
    }
    norm = next;
    if (norm <= 0.1 * opts.tol || delta.norm() <= 1e-15 * (1.0 + res.u.norm())) break;
  }
  res.residual = sys.residual(res.u).norm();
  res.converged = std::isfinite(norm) && res.residual <= opts.tol &&
                  std::abs(normal.dot(res.u - anchor)) <= 1e-9;
  return res;
}

/// Newton solve with t pinned.
inline CorrectorResult correct_fixed_t(const HomotopySystem& sys, const Vector& start,
                                       double t, const CorrectorOptions& opts = {}) {
  const int n = sys.layout().size();
  Vector normal = Vector::Zero(n + 1);
  normal(n) = 1.0;
  Vector anchor = start;
  anchor(n) = t;
  Vector u = start;
  u(n) = t;
  return correct(sys, u, normal, anchor, opts);
}

/// Predictor u + h * tangent, corrected on the hyperplane through the
/// prediction orthogonal to the tangent.
inline CorrectorResult step(const HomotopySystem& sys, const Vector& u, const Tangent& tan,
                            double h, const CorrectorOptions& opts = {}) {
  const Vector pred = u + h * tan.direction;
  if (h == 0.0) {
    CorrectorResult res;
    res.u = u;
    res.residual = sys.residual(u).norm();
    res.converged = res.residual <= opts.tol;
    return res;
  }
  return correct(sys, pred, tan.direction, pred, opts);
}

/// Smallest bonus at which strategy k is verified dominant against the
/// opponent's best response to E_kk.
inline double initial_bonus(const SdGame& game, int k) {
  if (k < 0 || k >= game.m()) throw Error(ErrorKind::InvalidInput, "k out of range");
  const int m = game.m();
  double t0 = 2.0 * m * game.n() * game.A.max_abs() + 1.0;
  Matrix ekk = Matrix::Zero(m, m);
  ekk(k, k) = 1.0;
  const Matrix ystar = best_response_2(game, ekk).strategy;
  for (int attempt = 0; attempt <= 10; ++attempt, t0 *= 2.0) {
    const Matrix p = phi_A_bonus(game.A, ystar, k, t0);
    if (game.mask1 == StructureMask::Diagonal) {
      double other = -std::numeric_limits<double>::infinity();
      for (int i = 0; i < m; ++i)
        if (i != k) other = std::max(other, p(i, i));
      if (m == 1 || p(k, k) - other > 1e-6) return t0;
      continue;
    }
    const EigenDecomposition ed = sym_eigen(SymMatrix(p));
    const double gap = m > 1 ? ed.values(0) - ed.values(1) : 1.0;
    const double cosine = std::min(1.0, std::abs(ed.basis(k, 0)));
    if (gap > 1e-6 && std::acos(cosine) <= 0.1) return t0;
  }
  throw Error(ErrorKind::BonusIneffective,
              "bonus on strategy " + std::to_string(k + 1) +
                  " does not dominate after 10 doublings; try a different k");
}

enum class StartStatus { Ok, Tie };

struct StartResult {
  StartStatus status = StartStatus::Ok;
  PathPoint point;
  Vector u;
  double t0 = 0.0;
  std::string message;
};

/// Equilibrium of G(t0) by best-response iteration from E_kk, polished by
/// Newton at fixed t0.
inline StartResult start_point(const HomotopySystem& sys, double t0) {
  const SdGame& game = sys.game();
  const int m = game.m();
  const int k = sys.k();
  StartResult out;
  out.t0 = t0;
  Matrix x = Matrix::Zero(m, m);
  x(k, k) = 1.0;
  BestResponse br2 = best_response_2(game, x);
  Matrix y = br2.strategy;
  bool tie = br2.tie_broken;
  bool settled = false;
  for (int round = 0; round < 100; ++round) {
    const BestResponse br1 = best_response_to(phi_A_bonus(game.A, y, k, t0), game.mask1);
    br2 = best_response_2(game, br1.strategy);
    tie = br1.tie_broken || br2.tie_broken;
    const double change = (br1.strategy - x).norm() + (br2.strategy - y).norm();
    x = br1.strategy;
    y = br2.strategy;
    if (change <= 1e-12) {
      settled = true;
      break;
    }
  }

  const double w = masked_max(phi_A_bonus(game.A, y, k, t0), game.mask1);
  const double v = masked_max(phi_B_prime(game.B, x), game.mask2);
  out.point.X = x;
  out.point.Y = y;
  out.point.w = w;
  out.point.v = v;
  out.point.t = t0;
  if (tie) {
    out.status = StartStatus::Tie;
    out.message = "best response at the start is not unique";
    out.u = sys.layout().pack(out.point);
    return out;
  }
  // A slowly damped two-cycle is handed to Newton; the result must then be a
  // pure equilibrium of G(t0) in its own right.
  const CorrectorResult c = correct_fixed_t(sys, sys.layout().pack(x, y, w, v, t0), t0);
  if (!c.converged) {
    throw Error(ErrorKind::StartFailure, settled ? "Newton polish of the start point failed"
                                                 : "best-response iteration did not settle");
  }
  out.u = c.u;
  out.point = sys.point(c.u);
  if (!settled && (!feasibility(sys, out.point).ok() ||
                   numerical_rank(SymMatrix(out.point.X)) != 1 ||
                   numerical_rank(SymMatrix(out.point.Y)) != 1)) {
    throw Error(ErrorKind::StartFailure, "best-response iteration did not settle");
  }
  const auto active = classify_active_set(pair_state(sys, c.u, nullptr));
  if (!active) {
    out.status = StartStatus::Tie;
    out.message = "start point is not strictly complementary";
    return out;
  }
  out.point.active = *active;
  return out;
}

}  // namespace sdg
