#include <gtest/gtest.h>

#include "support.hpp"

using namespace sdg;
using namespace sdg::test;

namespace {

// Random interior-ish point of the unknown space for a game.
Vector random_unknowns(Rng& rng, const HomotopySystem& sys) {
  const SdGame& g = sys.game();
  const Matrix x = g.mask1 == StructureMask::Diagonal ? rng.diagonal_density(g.m(), g.m()) : rng.density(g.m(), g.m());
  const Matrix y = g.mask2 == StructureMask::Diagonal ? rng.diagonal_density(g.n(), g.n()) : rng.density(g.n(), g.n());
  return sys.layout().pack(x, y, rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(0.0, 3.0));
}

std::vector<std::pair<double, double>> power_samples(double c, double e, bool negative, double noise = 0.0,
                                                     std::uint64_t seed = 0) {
  Rng rng(seed);
  std::vector<std::pair<double, double>> out;
  for (int i = 0; i < 20; ++i) {
    const double mag = std::pow(10.0, -5.0 + 4.0 * i / 19.0);
    const double s = negative ? -mag : mag;
    double val = c * std::pow(mag, e) * (1.0 + 0.01 * mag);
    if (negative && e == std::round(e) && static_cast<long>(e) % 2 != 0) val = -val;
    if (noise > 0) val *= std::exp(rng.uniform(-noise, noise));
    out.emplace_back(s, val);
  }
  return out;
}

}  // namespace

TEST(System, PackUnpackRoundTrip) {
  Rng rng(11);
  for (auto [m1, m2] : {std::pair{StructureMask::FullSymmetric, StructureMask::FullSymmetric},
                        std::pair{StructureMask::Diagonal, StructureMask::FullSymmetric},
                        std::pair{StructureMask::Diagonal, StructureMask::Diagonal}}) {
    const SdGame g = random_game(rng, 3, 2, m1, m2);
    const HomotopySystem sys(g, 0);
    const SystemLayout& lay = sys.layout();
    const Vector u = random_unknowns(rng, sys);
    EXPECT_EQ(u.size(), lay.size() + 1);
    const Vector again = lay.pack(lay.unpack_x(u), lay.unpack_y(u), u(lay.w_index()), u(lay.v_index()),
                                  u(lay.t_index()));
    EXPECT_EQ((again - u).norm(), 0.0);
    const PathPoint p = sys.point(u);
    EXPECT_EQ((lay.pack(p) - u).norm(), 0.0);
  }
}

TEST(System, AnalyticJacobianMatchesFiniteDifferences) {
  Rng rng(12);
  for (int c = 0; c < 100; ++c) {
    const int m = 1 + static_cast<int>(rng.index(3));
    const int n = 1 + static_cast<int>(rng.index(3));
    const auto m1 = rng.uniform() < 0.5 ? StructureMask::Diagonal : StructureMask::FullSymmetric;
    const auto m2 = rng.uniform() < 0.5 ? StructureMask::Diagonal : StructureMask::FullSymmetric;
    const SdGame g = random_game(rng, m, n, m1, m2);
    const HomotopySystem sys(g, static_cast<int>(rng.index(static_cast<std::size_t>(m))));
    const Vector u = random_unknowns(rng, sys);
    const Matrix ja = sys.jacobian(u);
    const Matrix jf = fd_jacobian(sys, u);
    ASSERT_LT((ja - jf).norm(), 1e-7 * std::max(1.0, ja.norm())) << "case " << c;
  }
}

TEST(System, BonusRaisesOnlyTheChosenDiagonal) {
  const SdGame g = hybrid_game();
  const SdGame pg = perturb(g, 1, 2.5).materialize();
  const Matrix y = mat2(0.3, 0.1, 0.1, 0.7);
  const Matrix diff = phi_A(pg.A, y) - phi_A(g.A, y);
  EXPECT_LT((diff - mat2(0, 0, 0, 2.5 * y.sum())).norm(), 1e-14);
  EXPECT_LT((phi_A_bonus(g.A, y, 1, 2.5) - phi_A(pg.A, y)).norm(), 1e-14);
  EXPECT_THROW(perturb(g, 2, 1.0), Error);
  EXPECT_THROW(perturb(g, 0, -1.0), Error);
}

TEST(Continuation, TangentIsUnitNullVector) {
  const SdGame g = hybrid_game();
  const HomotopySystem sys(g, 0);
  const double t0 = initial_bonus(g, 0);
  const StartResult st = start_point(sys, t0);
  const Tangent tan = tangent(sys, st.u, nullptr);
  EXPECT_NEAR(tan.direction.norm(), 1.0, 1e-12);
  EXPECT_LT((sys.jacobian(st.u) * tan.direction).norm(), 1e-10);
  EXPECT_LT(tan.direction(sys.layout().t_index()), 0.0);
  const Vector flipped = -tan.direction;
  const Tangent again = tangent(sys, st.u, &flipped);
  EXPECT_LT((again.direction + tan.direction).norm(), 1e-10);
}

TEST(Continuation, StartIsPureStrategyOfTheBonusGame) {
  const SdGame g = hybrid_game();
  for (int k = 0; k < 2; ++k) {
    const HomotopySystem sys(g, k);
    const double t0 = initial_bonus(g, k);
    const StartResult st = start_point(sys, t0);
    Matrix ekk = Matrix::Zero(2, 2);
    ekk(k, k) = 1.0;
    EXPECT_LT((st.point.X - ekk).norm(), 1e-12);
    EXPECT_LT(sys.residual(st.u).norm(), 1e-10);
    const NashCertificate c = verify_nash(perturb(g, k, t0).materialize(), st.point.X, st.point.Y);
    EXPECT_TRUE(c.valid);
  }
  // Full masks: X is rank one and aligned with E_kk within the bonus cone.
  Rng rng(13);
  int checked = 0;
  for (int c = 0; c < 30; ++c) {
    const SdGame rg = random_game(rng, 3, 3);
    const HomotopySystem sys(rg, 1);
    try {
      const StartResult st = start_point(sys, initial_bonus(rg, 1));
      EXPECT_EQ(numerical_rank(SymMatrix(st.point.X)), 1);
      EXPECT_GE(st.point.X(1, 1), std::pow(std::cos(0.1), 2) - 1e-9);
      EXPECT_LT(sys.residual(st.u).norm(), 1e-10);
      ++checked;
    } catch (const Error& e) {
      EXPECT_TRUE(e.kind() == ErrorKind::StartFailure || e.kind() == ErrorKind::BonusIneffective) << e.what();
    }
  }
  EXPECT_GE(checked, 25);
}

TEST(Continuation, AlignPairsFollowsReference) {
  const Matrix q = Rng(14).orthogonal(3);
  JointEigenSystem js;
  js.basis = q;
  js.pairs = {{0.5, 0.0}, {0.0, 0.2}, {0.3, 0.0}};
  JointEigenSystem shuffled;
  shuffled.basis.resize(3, 3);
  shuffled.basis.col(0) = -q.col(2);
  shuffled.basis.col(1) = q.col(0);
  shuffled.basis.col(2) = q.col(1);
  shuffled.pairs = {js.pairs[2], js.pairs[0], js.pairs[1]};
  const JointEigenSystem back = align_pairs(shuffled, q, 1.0);
  for (int i = 0; i < 3; ++i) {
    EXPECT_NEAR(std::abs(back.basis.col(i).dot(q.col(i))), 1.0, 1e-12);
    EXPECT_EQ(back.pairs[static_cast<std::size_t>(i)], js.pairs[static_cast<std::size_t>(i)]);
  }
}

TEST(Events, NearestRational) {
  EXPECT_EQ(nearest_rational(0.499, 4), (Rational{1, 2}));
  EXPECT_EQ(nearest_rational(1.02, 4), (Rational{1, 1}));
  EXPECT_EQ(nearest_rational(0.74, 4), (Rational{3, 4}));
  EXPECT_EQ(nearest_rational(1.49, 4), (Rational{3, 2}));
  EXPECT_EQ(nearest_rational(-0.34, 3), (Rational{-1, 3}));
  EXPECT_EQ(nearest_rational(0.34, 2), (Rational{1, 2}));
}

TEST(Events, PuiseuxFitRecoversPowerLaws) {
  struct Case {
    double c;
    double e;
    Rational r;
    bool negative;
  };
  for (const Case& cs : {Case{2.0, 1.0, {1, 1}, false}, Case{-0.7, 0.5, {1, 2}, false},
                         Case{3.0, 1.5, {3, 2}, false}, Case{0.2, 2.0, {2, 1}, false},
                         Case{1.3, 1.0, {1, 1}, true}}) {
    const PuiseuxTerm pt = puiseux_fit(power_samples(cs.c, cs.e, cs.negative), 4);
    EXPECT_EQ(pt.exponent, cs.r) << cs.e;
    EXPECT_NEAR(pt.coefficient, cs.c, 0.01 * std::abs(cs.c)) << cs.e;
    EXPECT_LT(pt.log_residual, 0.01);
  }
}

TEST(Events, PuiseuxFitRejectsBadSamples) {
  auto kind = [](const std::vector<std::pair<double, double>>& s) {
    try {
      puiseux_fit(s, 4);
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::InternalError;
  };
  EXPECT_EQ(kind(power_samples(1.0, 1.0, false, 1.0, 5)), ErrorKind::FitUnreliable);
  auto few = power_samples(1.0, 1.0, false);
  few.resize(5);
  EXPECT_EQ(kind(few), ErrorKind::FitUnreliable);
  std::vector<std::pair<double, double>> narrow;
  for (int i = 0; i < 10; ++i) narrow.emplace_back(0.01 + 0.001 * i, 1.0 + i);
  EXPECT_EQ(kind(narrow), ErrorKind::FitUnreliable);
}

TEST(Events, MinorScanAtHybridCrossings) {
  const SdGame g = hybrid_game();
  const Trace tr = trace_path(g, 0);
  ASSERT_EQ(tr.outcome, TraceOutcome::Equilibrium) << tr.message;
  const HomotopySystem sys(g, 0);
  int crossings = 0;
  for (const EventRecord& e : tr.events) {
    if (e.kind != EventKind::PairedCrossing) continue;
    ++crossings;
    EXPECT_TRUE(minors_certify(minor_scan(sys, e.point), e.player)) << "t* = " << e.t_star;
    EXPECT_TRUE(e.minors_certified);
  }
  EXPECT_EQ(crossings, 2);
  // Away from an event (the start) no level of the bonus player's minors
  // vanishes on both sides: X = E11 has a nonzero 1x1 minor and W has rank one.
  const auto scan = minor_scan(sys, tr.points.front());
  EXPECT_FALSE(minors_certify(scan, 2));
}

TEST(Events, MaxMinor) {
  EXPECT_DOUBLE_EQ(detail::max_minor(mat2(1, 2, 3, 4), 2), 2.0);
  EXPECT_DOUBLE_EQ(detail::max_minor(mat2(1, 2, 3, -5), 1), 5.0);
  EXPECT_DOUBLE_EQ(detail::max_minor(mat2(1, 2, 3, 4), 0), 1.0);
}

TEST(Probe, ZeroGameViolatesConditionI) {
  const SdGame zero(PayoffTensor(2, 2), PayoffTensor(2, 2));
  const ProbeReport rep = nondegeneracy_probe(zero, 200, 7);
  EXPECT_EQ(rep.samples, 200);
  EXPECT_GT(rep.violations, 0);
  EXPECT_FALSE(rep.witnesses.empty());
}

TEST(Probe, HybridGameIsClean) {
  const ProbeReport rep = nondegeneracy_probe(hybrid_game(), 2000, 8);
  EXPECT_EQ(rep.violations, 0);
}
