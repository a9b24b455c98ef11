#pragma once

// trace_path: follows the bonus homotopy from the dominant start at t0 down
// to t = 0, switching branches at event points.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "sdg/continuation.hpp"
#include "sdg/events.hpp"
#include "sdg/game.hpp"
#include "sdg/system.hpp"

namespace sdg {

struct TraceOptions {
  int max_steps = 100000;
  double h0 = 1e-2;
  double h_min = 1e-12;
  double h_max = 0.1;
  double tmax_mult = 4.0;
  double verify_tol = kDefaultVerifyTol;
  double h_trial = 1e-4;
  int puiseux_max_den = 4;
  double puiseux_window = 0.03;  // |t - t*| <= window * max(1, t*)
};

enum class TraceOutcome {
  Equilibrium,
  DegenerateEquilibrium,
  DegenerateStart,
  NotVerified,
  StallFailure,
  RangeExceeded,
  PathLeavesStrategySpace,
  MaxStepsExceeded,
  BonusIneffective,
  StartFailure,
  RefinementFailure,
  TrackingAmbiguity,
};

inline std::string_view to_string(TraceOutcome o) {
  switch (o) {
    case TraceOutcome::Equilibrium: return "Equilibrium";
    case TraceOutcome::DegenerateEquilibrium: return "DegenerateEquilibrium";
    case TraceOutcome::DegenerateStart: return "DegenerateStart";
    case TraceOutcome::NotVerified: return "NotVerified";
    case TraceOutcome::StallFailure: return "StallFailure";
    case TraceOutcome::RangeExceeded: return "RangeExceeded";
    case TraceOutcome::PathLeavesStrategySpace: return "PathLeavesStrategySpace";
    case TraceOutcome::MaxStepsExceeded: return "MaxStepsExceeded";
    case TraceOutcome::BonusIneffective: return "BonusIneffective";
    case TraceOutcome::StartFailure: return "StartFailure";
    case TraceOutcome::RefinementFailure: return "RefinementFailure";
    case TraceOutcome::TrackingAmbiguity: return "TrackingAmbiguity";
  }
  return "?";
}

struct Trace {
  int k = 0;
  double t0 = 0.0;
  std::vector<PathPoint> points;
  std::vector<int> point_steps;      // step counter at which each point was accepted
  std::vector<double> sigma_min;     // smallest singular value of the square sub-Jacobian
  std::vector<EventRecord> events;
  TraceOutcome outcome = TraceOutcome::StallFailure;
  std::string message;
  std::optional<NashCertificate> certificate;
  int steps = 0;

  int paired_crossings() const {
    return static_cast<int>(std::count_if(events.begin(), events.end(), [](const EventRecord& e) {
      return e.kind == EventKind::PairedCrossing;
    }));
  }
  bool found_equilibrium() const { return outcome == TraceOutcome::Equilibrium; }
};

namespace detail {

inline double freed_value(const HomotopySystem& sys, const PathPoint& p, const EventRecord& e) {
  const Vector q = p.active.basis(e.player).col(e.index);
  const Member freed = e.crossing_member == Member::Strategy ? Member::Slack : Member::Strategy;
  Matrix m;
  if (e.player == 1) m = freed == Member::Strategy ? p.X : sys.W(p);
  else m = freed == Member::Strategy ? p.Y : sys.V(p);
  return q.dot(m * q);
}

inline void attach_puiseux(const HomotopySystem& sys, Trace& tr, const TraceOptions& opt) {
  for (std::size_t ei = 0; ei < tr.events.size(); ++ei) {
    EventRecord& e = tr.events[ei];
    if (e.kind != EventKind::PairedCrossing) continue;
    const std::size_t end = ei + 1 < tr.events.size() ? tr.events[ei + 1].first_point : tr.points.size();
    const double window = opt.puiseux_window * std::max(1.0, std::abs(e.t_star));
    std::vector<std::pair<double, double>> samples;
    for (std::size_t i = e.first_point; i < end; ++i) {
      const double s = tr.points[i].t - e.t_star;
      if (std::abs(s) > window) break;
      if (!samples.empty() && (s < 0) != (samples.front().first < 0)) break;
      const double val = freed_value(sys, tr.points[i], e);
      if (s == 0.0 || val == 0.0) continue;
      samples.emplace_back(s, val);
    }
    try {
      e.puiseux = puiseux_fit(samples, opt.puiseux_max_den);
    } catch (const Error&) {
      e.puiseux.reset();
    }
  }
}

}  // namespace detail

inline Trace trace_path(const SdGame& game, int k, const TraceOptions& opt = {}) {
  Trace tr;
  tr.k = k;
  const HomotopySystem sys(game, k);
  const int ti = sys.layout().t_index();

  auto fail = [&](TraceOutcome o, std::string msg) {
    tr.outcome = o;
    tr.message = std::move(msg);
    return tr;
  };

  StartResult start;
  try {
    tr.t0 = initial_bonus(game, k);
    start = start_point(sys, tr.t0);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::BonusIneffective) return fail(TraceOutcome::BonusIneffective, e.what());
    return fail(TraceOutcome::StartFailure, e.what());
  }
  if (start.status == StartStatus::Tie) return fail(TraceOutcome::DegenerateStart, start.message);

  const double t_max = opt.tmax_mult * tr.t0;
  Vector u = start.u;
  ActiveSet active = start.point.active;
  auto accept = [&](const Vector& uu, const ActiveSet& as) {
    PathPoint p = sys.point(uu);
    p.active = as;
    tr.points.push_back(std::move(p));
    tr.point_steps.push_back(tr.steps);
    tr.sigma_min.push_back(square_jacobian_sigma_min(sys, uu));
  };
  accept(u, active);

  Tangent tan;
  try {
    tan = tangent(sys, u, nullptr);
  } catch (const Error& e) {
    return fail(TraceOutcome::DegenerateStart, e.what());
  }

  double h = opt.h0;
  int good = 0;
  while (true) {
    if (tr.steps >= opt.max_steps) return fail(TraceOutcome::MaxStepsExceeded, "step budget exhausted");
    ++tr.steps;
    const CorrectorResult c = step(sys, u, tan, h);
    bool ok = c.converged && (c.u - (u + h * tan.direction)).norm() <= std::max(h, 1e-10);
    PairState ps;
    if (ok) {
      try {
        ps = pair_state(sys, c.u, &active);
        ok = held_deviation(ps, active) <= 1e-6;
      } catch (const Error&) {
        ok = false;
      }
    }
    std::optional<Bracket> br;
    if (ok) {
      try {
        br = detect_crossing(sys, u, active, c.u);
      } catch (const Error&) {
        ok = false;
      }
    }
    if (ok && !br && !feasibility(sys, sys.point(c.u)).ok()) ok = false;
    if (!ok) {
      h *= 0.5;
      good = 0;
      if (h < opt.h_min) return fail(TraceOutcome::StallFailure, "step size fell below minimum");
      continue;
    }

    if (br) {
      RefinedEvent ref;
      try {
        ref = refine_event(sys, *br);
      } catch (const Error& e) {
        return fail(TraceOutcome::RefinementFailure, e.what());
      }
      EventRecord ev;
      ev.kind = br->kind;
      ev.t_star = ref.u(ti);
      ev.point = sys.point(ref.u);
      ev.point.active = active;
      ev.player = br->player;
      ev.index = br->index;
      ev.crossing_member = br->member;
      ev.step = tr.steps;

      if (br->kind == EventKind::HomotopyEnd) {
        ev.first_point = tr.points.size();
        tr.events.push_back(ev);
        std::optional<ActiveSet> fin;
        try {
          fin = classify_active_set(pair_state(sys, ref.u, &active));
        } catch (const Error&) {
        }
        accept(ref.u, fin ? *fin : active);
        const PathPoint& last = tr.points.back();
        tr.certificate = verify_nash(game, last.X, last.Y, opt.verify_tol);
        detail::attach_puiseux(sys, tr, opt);
        if (!tr.certificate->valid) return fail(TraceOutcome::NotVerified, "end point failed verification");
        if (tr.sigma_min.back() < 1e-6) {
          return fail(TraceOutcome::DegenerateEquilibrium,
                      "equilibrium reached but the complementarity system is singular there "
                      "(not isolated)");
        }
        tr.outcome = TraceOutcome::Equilibrium;
        tr.message = "equilibrium";
        return tr;
      }

      const auto scan = minor_scan(sys, ev.point);
      ev.minors_certified = minors_certify(scan, ev.player);
      const SwitchResult sw = switch_branch(sys, ref.u, active, br->player, br->index, opt.h_trial);
      if (!sw.ok) {
        ev.first_point = tr.points.size();
        tr.events.push_back(ev);
        EventRecord exit;
        exit.kind = EventKind::BoundaryExit;
        exit.t_star = ev.t_star;
        exit.point = ev.point;
        exit.step = tr.steps;
        exit.first_point = tr.points.size();
        tr.events.push_back(exit);
        detail::attach_puiseux(sys, tr, opt);
        return fail(TraceOutcome::PathLeavesStrategySpace, "no admissible branch leaves the event point");
      }
      ev.flipped_index = br->index;
      ev.first_point = tr.points.size();
      tr.events.push_back(ev);
      u = sw.u;
      active = sw.active;
      tan = sw.tangent;
      accept(u, active);
      h = opt.h_trial;
      good = 0;
      continue;
    }

    const Vector u_old = u;
    u = c.u;
    active.basis1 = ps.p1.basis;
    active.basis2 = ps.p2.basis;
    accept(u, active);
    if (u(ti) > t_max) {
      EventRecord ev;
      ev.kind = EventKind::RangeExceeded;
      ev.t_star = u(ti);
      ev.point = tr.points.back();
      ev.step = tr.steps;
      ev.first_point = tr.points.size();
      tr.events.push_back(ev);
      return fail(TraceOutcome::RangeExceeded, "bonus exceeded t_max");
    }
    try {
      tan = tangent(sys, u, &tan.direction);
    } catch (const Error&) {
      const Vector sec = (u - u_old).normalized();
      tan.direction = sec;
    }
    if (c.iterations <= 4) {
      if (++good >= 3) {
        h = std::min(2.0 * h, opt.h_max);
        good = 0;
      }
    } else {
      good = 0;
    }
  }
}

}  // namespace sdg
