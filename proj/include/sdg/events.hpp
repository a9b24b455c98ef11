#pragma once

// Event points on the path: detection between accepted points, refinement
// onto the double zero, branch switching, plus diagnostics (Puiseux fit,
// minor scan, non-degeneracy probe).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "sdg/continuation.hpp"
#include "sdg/game.hpp"
#include "sdg/random.hpp"
#include "sdg/system.hpp"

namespace sdg {

enum class EventKind { PairedCrossing, HomotopyEnd, BoundaryExit, RangeExceeded };

inline std::string_view to_string(EventKind kind) {
  switch (kind) {
    case EventKind::PairedCrossing: return "PairedCrossing";
    case EventKind::HomotopyEnd: return "HomotopyEnd";
    case EventKind::BoundaryExit: return "BoundaryExit";
    case EventKind::RangeExceeded: return "RangeExceeded";
  }
  return "?";
}

struct Rational {
  int num = 0;
  int den = 1;
  double value() const { return static_cast<double>(num) / den; }
  bool operator==(const Rational&) const = default;
};

struct PuiseuxTerm {
  Rational exponent;
  double coefficient = 0.0;
  double log_residual = 0.0;
};

struct EventRecord {
  EventKind kind = EventKind::HomotopyEnd;
  double t_star = 0.0;
  PathPoint point;
  int player = 0;  // 1 or 2 for PairedCrossing
  int index = -1;  // pair index within the player's joint eigenbasis
  std::optional<int> flipped_index;
  Member crossing_member = Member::Strategy;  // member that reached zero
  std::optional<PuiseuxTerm> puiseux;        // freed member against t - t_star
  bool minors_certified = false;
  int step = 0;
  std::size_t first_point = 0;  // index of the first accepted point after the event
};

/// Candidate event between two accepted (or one accepted and one rejected)
/// path points.
struct Bracket {
  Vector u_prev;
  Vector u_next;
  ActiveSet active;
  EventKind kind = EventKind::PairedCrossing;
  int player = 0;
  int index = -1;
  Member member = Member::Strategy;
  double g_prev = 0.0;
  double g_next = 0.0;
};

/// Largest |held member| / scale over all pairs; large values mean the
/// corrector slid onto a different branch.
inline double held_deviation(const PairState& ps, const ActiveSet& active) {
  double worst = 0.0;
  for (int player = 1; player <= 2; ++player) {
    const auto& pairs = ps.of(player).pairs;
    const auto& flags = active.flags(player);
    for (std::size_t i = 0; i < pairs.size() && i < flags.size(); ++i) {
      const Member held = held_member(flags[i]);
      const double scale = held == Member::Slack ? ps.scale(player) : 1.0;
      worst = std::max(worst, std::abs(member_value(pairs[i], held)) / scale);
    }
  }
  return worst;
}

/// Earliest sign change (or sub-tolerance dip) of a watched member, or of t,
/// between u_prev and u_next.
inline std::optional<Bracket> detect_crossing(const HomotopySystem& sys, const Vector& u_prev,
                                              const ActiveSet& active, const Vector& u_next) {
  const int ti = sys.layout().t_index();
  const PairState prev = pair_state(sys, u_prev, &active);
  const PairState next = pair_state(sys, u_next, &active);
  std::optional<Bracket> best;
  double best_theta = 2.0;
  auto consider = [&](EventKind kind, int player, int index, Member member, double ga,
                      double gb) {
    double theta = 1.0;
    if (gb < 0.0 && ga > 0.0) theta = ga / (ga - gb);
    if (theta < best_theta) {
      best_theta = theta;
      best = Bracket{u_prev, u_next, active, kind, player, index, member, ga, gb};
    }
  };
  for (int player = 1; player <= 2; ++player) {
    const auto& flags = active.flags(player);
    for (std::size_t i = 0; i < flags.size(); ++i) {
      const Member mem = watched_member(flags[i]);
      const double scale = mem == Member::Slack ? next.scale(player) : 1.0;
      const double gb = member_value(next.of(player).pairs[i], mem);
      if (gb <= kZeroTol * scale) {
        const double ga = member_value(prev.of(player).pairs[i], mem);
        consider(EventKind::PairedCrossing, player, static_cast<int>(i), mem, ga, gb);
      }
    }
  }
  if (u_next(ti) <= 0.0) consider(EventKind::HomotopyEnd, 0, -1, Member::Strategy, u_prev(ti), u_next(ti));
  return best;
}

/// Strategy or slack matrix of one player at u.
inline Matrix member_matrix(const HomotopySystem& sys, const Vector& u, int player, Member member) {
  const SystemLayout& lay = sys.layout();
  if (player == 1) {
    if (member == Member::Strategy) return lay.unpack_x(u);
    return sys.slack_W(lay.unpack_y(u), u(lay.w_index()), u(lay.t_index()));
  }
  if (member == Member::Strategy) return lay.unpack_y(u);
  return sys.slack_V(lay.unpack_x(u), u(lay.v_index()));
}

/// Value of the bracketed quantity at u (watched member of the tracked pair,
/// or t).
inline double bracket_value(const HomotopySystem& sys, const Bracket& b, const Vector& u,
                            Vector* q = nullptr) {
  if (b.kind == EventKind::HomotopyEnd) return u(sys.layout().t_index());
  const PairState ps = pair_state(sys, u, &b.active);
  const JointEigenSystem& js = ps.of(b.player);
  if (q != nullptr) *q = js.basis.col(b.index);
  return member_value(js.pairs[static_cast<std::size_t>(b.index)], b.member);
}

struct RefinedEvent {
  Vector u;
  double residual = 0.0;
  double g = 0.0;
};

/// Localizes the zero of the bracketed quantity: false position on the
/// corrected path between the bracket ends, then Gauss-Newton on the residual
/// system with both members of the pair held at zero.
inline RefinedEvent refine_event(const HomotopySystem& sys, const Bracket& b) {
  const int n = sys.layout().size();
  const double scale =
      b.kind == EventKind::PairedCrossing && b.member == Member::Slack
          ? pair_state(sys, b.u_next, &b.active).scale(b.player)
          : 1.0;
  Vector ua = b.u_prev;
  Vector ub = b.u_next;
  double ga = b.g_prev;
  double gb = b.g_next;
  Vector best = ub;
  double gbest = gb;

  if (gb < 0.0 && ga > 0.0) {
    int side = 0;
    for (int it = 0; it < 200; ++it) {
      const double width = (ub - ua).norm();
      if (width <= 1e-12) break;
      double theta = ga / (ga - gb);
      if (!(theta > 1e-3 && theta < 1.0 - 1e-3)) theta = std::clamp(theta, 1e-3, 1.0 - 1e-3);
      Vector pred = ua + theta * (ub - ua);
      Vector normal = (ub - ua) / width;
      CorrectorResult c = correct(sys, pred, normal, pred);
      if (!c.converged) {
        pred = 0.5 * (ua + ub);
        c = correct(sys, pred, normal, pred);
        if (!c.converged) throw Error(ErrorKind::RefinementFailure, "corrector failed inside bracket");
      }
      const double gc = bracket_value(sys, b, c.u);
      if (std::abs(gc) < std::abs(gbest)) {
        best = c.u;
        gbest = gc;
      }
      if (std::abs(gc) <= 1e-14 * scale) break;
      if (gc > 0.0) {
        ua = c.u;
        ga = gc;
        if (side == 1) gb *= 0.5;  // Illinois
        side = 1;
      } else {
        ub = c.u;
        gb = gc;
        if (side == -1) ga *= 0.5;
        side = -1;
      }
    }
  }

  RefinedEvent out;
  if (b.kind == EventKind::HomotopyEnd) {
    const CorrectorResult c = correct_fixed_t(sys, best, 0.0);
    if (!c.converged) throw Error(ErrorKind::RefinementFailure, "final Newton solve at t = 0 failed");
    out.u = c.u;
    out.residual = c.residual;
    out.g = 0.0;
    return out;
  }

  // Gauss-Newton on F(u) = 0 with both members of the pair at zero. The
  // watched member alone does not pin the point: it vanishes identically on
  // the branch leaving the event.
  const Member other = b.member == Member::Strategy ? Member::Slack : Member::Strategy;
  const double other_scale =
      other == Member::Slack ? pair_state(sys, best, &b.active).scale(b.player) : 1.0;
  auto augmented = [&](const Vector& x, Vector& qq, double& gw) {
    gw = bracket_value(sys, b, x, &qq);
    Vector r(n + 2);
    r.head(n) = sys.residual(x);
    r(n) = gw / scale;
    r(n + 1) = qq.dot(member_matrix(sys, x, b.player, other) * qq) / other_scale;
    return r;
  };
  Vector u = best;
  Vector q;
  double g = 0.0;
  Vector big = augmented(u, q, g);
  double norm = big.norm();
  Matrix ja(n + 2, n + 1);
  for (int it = 0; it < 20 && norm > 1e-14; ++it) {
    ja.topRows(n) = sys.jacobian(u);
    ja.row(n) = member_gradient(sys, u, b.player, b.member, q).transpose() / scale;
    ja.row(n + 1) = member_gradient(sys, u, b.player, other, q).transpose() / other_scale;
    const Vector delta = Eigen::CompleteOrthogonalDecomposition<Matrix>(ja).solve(-big);
    // Off the solution set the pair decomposition may not exist; shorten.
    Vector trial;
    Vector qt;
    Vector bt;
    double gt = 0.0;
    bool improved = false;
    for (double lambda = 1.0; lambda >= 0.125 && !improved; lambda *= 0.5) {
      trial = u + lambda * delta;
      try {
        bt = augmented(trial, qt, gt);
      } catch (const Error&) {
        continue;
      }
      improved = bt.allFinite() && bt.norm() < norm;
    }
    if (!improved) break;
    u = trial;
    q = qt;
    g = gt;
    big = bt;
    norm = bt.norm();
  }
  out.u = u;
  out.residual = sys.residual(u).norm();
  out.g = g;
  if (out.residual > 1e-10 || std::abs(g) > kZeroTol * scale) {
    throw Error(ErrorKind::RefinementFailure,
                "event refinement stalled (residual " + std::to_string(out.residual) +
                    ", member " + std::to_string(g) + ")");
  }
  return out;
}

struct SwitchResult {
  bool ok = false;
  Vector u;
  ActiveSet active;
  Tangent tangent;
};

inline bool matches_active_set(const PairState& ps, const ActiveSet& active) {
  for (int player = 1; player <= 2; ++player) {
    const auto& pairs = ps.of(player).pairs;
    const auto& flags = active.flags(player);
    for (std::size_t i = 0; i < flags.size(); ++i) {
      const Member held = held_member(flags[i]);
      const Member free = watched_member(flags[i]);
      const double hs = held == Member::Slack ? ps.scale(player) : 1.0;
      const double fs = free == Member::Slack ? ps.scale(player) : 1.0;
      if (std::abs(member_value(pairs[i], held)) > kZeroTol * hs) return false;
      if (member_value(pairs[i], free) <= kZeroTol * fs) return false;
    }
  }
  return true;
}

/// Leaves the event point along the branch on which the crossing member is
/// held at zero and its partner is released.
inline SwitchResult switch_branch(const HomotopySystem& sys, const Vector& u_star,
                                  const ActiveSet& active, int player, int index,
                                  double h_trial = 1e-4) {
  const int n = sys.layout().size();
  const PairState ps = pair_state(sys, u_star, &active);
  const Vector q = ps.of(player).basis.col(index);
  const PairFlag old_flag = active.flags(player)[static_cast<std::size_t>(index)];
  const Member now_held = watched_member(old_flag);
  const Member freed = held_member(old_flag);

  ActiveSet flipped = active;
  flipped.flags(player)[static_cast<std::size_t>(index)] =
      old_flag == PairFlag::StrategyZero ? PairFlag::SlackZero : PairFlag::StrategyZero;
  flipped.basis1 = ps.p1.basis;
  flipped.basis2 = ps.p2.basis;

  const Vector gh = member_gradient(sys, u_star, player, now_held, q);
  const Vector gf = member_gradient(sys, u_star, player, freed, q);
  Eigen::JacobiSVD<Matrix> svd(sys.jacobian(u_star), Eigen::ComputeFullV);
  const Vector n1 = svd.matrixV().col(n - 1);
  const Vector n2 = svd.matrixV().col(n);
  const double a = gh.dot(n1);
  const double c = gh.dot(n2);
  Vector dir;
  if (std::hypot(a, c) > 1e-12 * std::max(1.0, gh.norm())) {
    dir = c * n1 - a * n2;
  } else {
    dir = gf.dot(n1) * n1 + gf.dot(n2) * n2;
  }
  if (dir.norm() == 0.0) return {};
  dir.normalize();
  if (gf.dot(dir) < 0.0) dir = -dir;

  for (const double sign : {1.0, -1.0}) {
    const Vector d = sign * dir;
    const Vector pred = u_star + h_trial * d;
    const CorrectorResult cr = correct(sys, pred, d, pred);
    if (!cr.converged) continue;
    const PathPoint p = sys.point(cr.u);
    if (!feasibility(sys, p).ok()) continue;
    PairState trial;
    try {
      trial = pair_state(sys, cr.u, &flipped);
    } catch (const Error&) {
      continue;
    }
    if (!matches_active_set(trial, flipped)) continue;
    SwitchResult out;
    out.ok = true;
    out.u = cr.u;
    out.active = flipped;
    out.active.basis1 = trial.p1.basis;
    out.active.basis2 = trial.p2.basis;
    try {
      out.tangent = tangent(sys, cr.u, &d);
    } catch (const Error&) {
      out.tangent.direction = (cr.u - u_star).normalized();
    }
    return out;
  }
  return {};
}

// ---------------------------------------------------------------------------
// Diagnostics

/// Nearest rational with denominator at most max_den (smallest denominator
/// on ties).
inline Rational nearest_rational(double x, int max_den) {
  Rational best{static_cast<int>(std::lround(x)), 1};
  double err = std::abs(x - best.value());
  for (int q = 2; q <= max_den; ++q) {
    const int p = static_cast<int>(std::lround(x * q));
    const double e = std::abs(x - static_cast<double>(p) / q);
    if (e < err - 1e-12) {
      err = e;
      best = {p, q};
    }
  }
  const int g = std::gcd(best.num, best.den);
  if (g > 1) best = {best.num / g, best.den / g};
  return best;
}

/// Leading term c * s^e of value(s) near s = 0 from a log-log fit.
inline PuiseuxTerm puiseux_fit(const std::vector<std::pair<double, double>>& samples,
                               int max_den) {
  if (samples.size() < 8) throw Error(ErrorKind::FitUnreliable, "need at least 8 samples");
  const bool negative = samples.front().first < 0.0;
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  for (const auto& [s, val] : samples) {
    if (s == 0.0 || (s < 0.0) != negative) {
      throw Error(ErrorKind::FitUnreliable, "samples must share the sign of s and avoid s = 0");
    }
    if (val == 0.0) throw Error(ErrorKind::FitUnreliable, "zero sample value");
    lo = std::min(lo, std::abs(s));
    hi = std::max(hi, std::abs(s));
  }
  if (hi / lo < 100.0) throw Error(ErrorKind::FitUnreliable, "samples span less than two decades");

  const auto count = static_cast<double>(samples.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& [s, val] : samples) {
    const double lx = std::log(std::abs(s));
    const double ly = std::log(std::abs(val));
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double slope = (count * sxy - sx * sy) / (count * sxx - sx * sx);
  const double intercept = (sy - slope * sx) / count;
  double rss = 0;
  for (const auto& [s, val] : samples) {
    const double r = std::log(std::abs(val)) - (intercept + slope * std::log(std::abs(s)));
    rss += r * r;
  }
  PuiseuxTerm term;
  term.log_residual = std::sqrt(rss / count);
  if (term.log_residual > 0.05) {
    throw Error(ErrorKind::FitUnreliable,
                "log-space fit residual " + std::to_string(term.log_residual));
  }
  term.exponent = nearest_rational(slope, max_den);
  const double e = term.exponent.value();
  double mean = 0;
  for (const auto& [s, val] : samples) mean += std::log(std::abs(val)) - e * std::log(std::abs(s));
  double coef = std::exp(mean / count);
  // value = c * s^e; for s < 0 only integer exponents carry a sign.
  double sign = samples.front().second < 0 ? -1.0 : 1.0;
  if (negative && term.exponent.den == 1 && term.exponent.num % 2 != 0) sign = -sign;
  term.coefficient = sign * coef;
  return term;
}

struct MinorCondition {
  int player = 1;
  int level = 1;            // k: size of the strategy minors
  bool strategy_vanishes = false;
  bool slack_vanishes = false;
  double max_strategy_minor = 0.0;
  double max_slack_minor = 0.0;
  bool holds() const { return strategy_vanishes && slack_vanishes; }
};

namespace detail {

inline void combinations(int d, int k, int start, std::vector<int>& cur,
                         std::vector<std::vector<int>>& out) {
  if (static_cast<int>(cur.size()) == k) {
    out.push_back(cur);
    return;
  }
  for (int i = start; i < d; ++i) {
    cur.push_back(i);
    combinations(d, k, i + 1, cur, out);
    cur.pop_back();
  }
}

inline double max_minor(const Matrix& m, int k) {
  if (k <= 0) return 1.0;
  std::vector<std::vector<int>> sets;
  std::vector<int> cur;
  combinations(static_cast<int>(m.rows()), k, 0, cur, sets);
  double best = 0.0;
  Matrix sub(k, k);
  for (const auto& r : sets)
    for (const auto& c : sets) {
      for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j) sub(i, j) = m(r[static_cast<std::size_t>(i)], c[static_cast<std::size_t>(j)]);
      best = std::max(best, std::abs(sub.determinant()));
    }
  return best;
}

}  // namespace detail

/// For each level k, whether all k x k minors of the strategy and all
/// (d-k+1) x (d-k+1) minors of its slack vanish.
inline std::vector<MinorCondition> minor_scan(const HomotopySystem& sys, const PathPoint& p,
                                              double tol = 1e-7) {
  std::vector<MinorCondition> out;
  for (int player = 1; player <= 2; ++player) {
    const Matrix s = player == 1 ? p.X : p.Y;
    Matrix l = player == 1 ? sys.W(p) : sys.V(p);
    const StructureMask mask = player == 1 ? sys.layout().mask1() : sys.layout().mask2();
    if (mask == StructureMask::Diagonal) l = Matrix(l.diagonal().asDiagonal());
    const int d = static_cast<int>(s.rows());
    const double ns = std::max(1.0, s.norm());
    const double nl = std::max(1.0, l.norm());
    for (int k = 1; k <= d; ++k) {
      MinorCondition mc;
      mc.player = player;
      mc.level = k;
      mc.max_strategy_minor = detail::max_minor(s, k);
      mc.max_slack_minor = detail::max_minor(l, d - k + 1);
      mc.strategy_vanishes = mc.max_strategy_minor <= tol * std::pow(ns, k);
      mc.slack_vanishes = mc.max_slack_minor <= tol * std::pow(nl, d - k + 1);
      out.push_back(mc);
    }
  }
  return out;
}

inline bool minors_certify(const std::vector<MinorCondition>& scan, int player) {
  return std::any_of(scan.begin(), scan.end(),
                     [&](const MinorCondition& m) { return m.player == player && m.holds(); });
}

struct ConditionIWitness {
  int player = 1;  // whose strategy was sampled
  int strategy_rank = 0;
  int top_multiplicity = 0;
  Matrix strategy;
};

struct EquilibriumCheck {
  bool valid = false;
  bool strict = false;
  double sigma_min = 0.0;  // square Jacobian at t = 0
  bool isolated = false;
};

struct ProbeReport {
  int samples = 0;
  int violations = 0;
  std::vector<ConditionIWitness> witnesses;  // first few violations
  std::vector<EquilibriumCheck> equilibria;
};

namespace detail {

inline int top_multiplicity(const Matrix& payoff, StructureMask mask) {
  Vector vals;
  if (mask == StructureMask::Diagonal) {
    vals = payoff.diagonal();
  } else {
    vals = sym_eigen(SymMatrix(payoff)).values;
  }
  const double top = vals.maxCoeff();
  const double cut = 1e-8 * std::max(1.0, std::abs(top));
  return static_cast<int>((vals.array() >= top - cut).count());
}

inline Matrix sample_strategy(Rng& rng, int d, int rank, StructureMask mask) {
  return mask == StructureMask::Diagonal ? rng.diagonal_density(d, rank) : rng.density(d, rank);
}

}  // namespace detail

/// Falsification probe for condition I (the slack of the best-response value
/// has rank at least d minus the opponent's strategy rank) on random strategies
/// of every rank, plus strict complementarity and local isolation at supplied
/// equilibria.
inline ProbeReport nondegeneracy_probe(const SdGame& game, int samples, std::uint64_t seed,
                                       const std::vector<std::pair<Matrix, Matrix>>& equilibria = {}) {
  Rng rng(seed);
  ProbeReport rep;
  const int m = game.m();
  const int n = game.n();
  for (int s = 0; s < samples; ++s) {
    const int k1 = 1 + static_cast<int>(rng.index(static_cast<std::size_t>(m)));
    const int k2 = 1 + static_cast<int>(rng.index(static_cast<std::size_t>(n)));
    const Matrix x = detail::sample_strategy(rng, m, k1, game.mask1);
    const Matrix y = detail::sample_strategy(rng, n, k2, game.mask2);
    ++rep.samples;
    // rank V(X) = n - multiplicity of the top eigenvalue of Phi'_B(X).
    const int mult2 = detail::top_multiplicity(phi_B_prime(game.B, x), game.mask2);
    const int mult1 = detail::top_multiplicity(phi_A(game.A, y), game.mask1);
    if (mult2 > k1) {
      ++rep.violations;
      if (rep.witnesses.size() < 5) rep.witnesses.push_back({1, k1, mult2, x});
    }
    if (mult1 > k2) {
      ++rep.violations;
      if (rep.witnesses.size() < 5) rep.witnesses.push_back({2, k2, mult1, y});
    }
  }
  if (!equilibria.empty()) {
    const HomotopySystem sys(game, 0);
    for (const auto& [x, y] : equilibria) {
      EquilibriumCheck ec;
      const NashCertificate cert = verify_nash(game, x, y);
      ec.valid = cert.valid;
      ec.strict = cert.strict;
      ec.sigma_min = square_jacobian_sigma_min(sys, sys.layout().pack(x, y, cert.w, cert.v, 0.0));
      ec.isolated = ec.sigma_min > 1e-6;
      rep.equilibria.push_back(ec);
    }
  }
  return rep;
}

}  // namespace sdg
