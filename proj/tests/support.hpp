#pragma once

// Shared fixtures and independent checks for the test binaries.

#include <cmath>
#include <string>
#include <vector>

#include "sdg/bimatrix.hpp"
#include "sdg/io.hpp"
#include "sdg/random.hpp"
#include "sdg/trace.hpp"

#ifndef SDG_DATA_DIR
#define SDG_DATA_DIR "data"
#endif

namespace sdg::test {

inline std::string data_path(const std::string& name) { return std::string(SDG_DATA_DIR) + "/" + name; }

inline Matrix mat2(double a, double b, double c, double d) {
  Matrix m(2, 2);
  m << a, b, c, d;
  return m;
}

/// Both players share the slices [[1,0],[0,0]], [[0,c],[c,0]], [[0,0],[0,d22]].
inline SdGame symmetric_2x2(double c, double d22) {
  PayoffTensor a(2, 2);
  a.set_slice(0, 0, mat2(1, 0, 0, 0));
  a.set_slice(0, 1, mat2(0, c, c, 0));
  a.set_slice(1, 1, mat2(0, 0, 0, d22));
  return SdGame(a, a);
}

inline SdGame hybrid_game(double c = 0.1) {
  PayoffTensor a(2, 2);
  PayoffTensor b(2, 2);
  a.set_slice(0, 0, mat2(1, 0, 0, 1));
  a.set_slice(1, 1, mat2(2, 2 * c, 2 * c, 2));
  b.set_slice(0, 0, mat2(2, 0, 0, 1));
  b.set_slice(1, 1, mat2(2, c, c, 1));
  return SdGame(a, b, StructureMask::Diagonal, StructureMask::FullSymmetric);
}

inline BimatrixGame random_bimatrix(Rng& rng, int m, int n) {
  Matrix a(m, n);
  Matrix b(m, n);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = rng.uniform(-1.0, 1.0);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) b(i, j) = rng.uniform(-1.0, 1.0);
  return BimatrixGame(a, b);
}

inline SdGame random_game(Rng& rng, int m, int n, StructureMask m1 = StructureMask::FullSymmetric,
                          StructureMask m2 = StructureMask::FullSymmetric) {
  const std::size_t size = static_cast<std::size_t>(m) * m * n * n;
  std::vector<double> a(size);
  std::vector<double> b(size);
  for (double& x : a) x = rng.uniform(-1.0, 1.0);
  for (double& x : b) x = rng.uniform(-1.0, 1.0);
  SdGame g(PayoffTensor::symmetrized(m, n, a), PayoffTensor::symmetrized(m, n, b), m1, m2);
  // Zero the off-diagonal slices a diagonal mask cannot see, so the game is
  // the one the mask describes.
  auto strip = [](PayoffTensor& t, bool rows, bool cols) {
    for (int i = 0; i < t.m(); ++i)
      for (int j = 0; j < t.m(); ++j)
        for (int k = 0; k < t.n(); ++k)
          for (int l = 0; l < t.n(); ++l)
            if ((rows && i != j) || (cols && k != l)) t.at(i, j, k, l) = 0.0;
  };
  const bool d1 = m1 == StructureMask::Diagonal;
  const bool d2 = m2 == StructureMask::Diagonal;
  strip(g.A, d1, d2);
  strip(g.B, d1, d2);
  return g;
}

/// Central differences of the residual, one column per unknown.
inline Matrix fd_jacobian(const HomotopySystem& sys, const Vector& u, double h = 1e-6) {
  const Vector f0 = sys.residual(u);
  Matrix j(f0.size(), u.size());
  for (Eigen::Index c = 0; c < u.size(); ++c) {
    Vector up = u;
    Vector dn = u;
    up(c) += h;
    dn(c) -= h;
    j.col(c) = (sys.residual(up) - sys.residual(dn)) / (2.0 * h);
  }
  return j;
}

struct InvariantReport {
  int points = 0;
  double worst_residual = 0.0;
  double worst_min_eig = 0.0;   // most negative masked eigenvalue of X, Y, W, V
  double worst_pairing = 0.0;   // largest |strategy * slack| over eigenpairs
  std::string first_failure;
  bool ok() const { return first_failure.empty(); }
};

inline InvariantReport check_path_invariants(const Trace& tr, const SdGame& game) {
  const HomotopySystem sys(game, tr.k);
  InvariantReport rep;
  for (std::size_t i = 0; i < tr.points.size(); ++i) {
    const PathPoint& p = tr.points[i];
    const Vector u = sys.layout().pack(p);
    ++rep.points;
    const double res = sys.residual(u).norm();
    const double feas = feasibility(sys, p).worst();
    double pairing = 0.0;
    try {
      const PairState ps = pair_state(sys, u, nullptr);
      for (int pl = 1; pl <= 2; ++pl)
        for (const auto& [s, l] : ps.of(pl).pairs) pairing = std::max(pairing, std::abs(s * l));
    } catch (const Error&) {
      pairing = std::numeric_limits<double>::infinity();
    }
    rep.worst_residual = std::max(rep.worst_residual, res);
    rep.worst_min_eig = std::min(rep.worst_min_eig, feas);
    rep.worst_pairing = std::max(rep.worst_pairing, pairing);
    if (rep.first_failure.empty() && (res > 1e-10 || feas < -1e-8 || pairing > 1e-7)) {
      rep.first_failure = "point " + std::to_string(i) + " t=" + std::to_string(p.t) +
                          " residual=" + std::to_string(res) + " min_eig=" + std::to_string(feas) +
                          " pairing=" + std::to_string(pairing);
    }
  }
  return rep;
}

/// rank X + rank W <= m and rank Y + rank V <= n, as forced by XW = 0.
inline bool sylvester_holds(const SdGame& g, const NashCertificate& c, double tol = 1e-7) {
  const Matrix w = c.w * Matrix::Identity(g.m(), g.m()) - phi_A(g.A, c.Y);
  const Matrix v = c.v * Matrix::Identity(g.n(), g.n()) - phi_B_prime(g.B, c.X);
  return masked_rank(c.X, g.mask1, tol) + masked_rank(w, g.mask1, tol) <= g.m() &&
         masked_rank(c.Y, g.mask2, tol) + masked_rank(v, g.mask2, tol) <= g.n();
}

/// Smallest sigma_min over accepted points that are not within `margin` (in t)
/// of an event.
inline double sigma_between_events(const Trace& tr, double margin) {
  double out = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < tr.points.size(); ++i) {
    bool near = false;
    for (const EventRecord& e : tr.events) near = near || std::abs(tr.points[i].t - e.t_star) <= margin;
    if (!near) out = std::min(out, tr.sigma_min[i]);
  }
  return out;
}

/// Smallest of the N singular values of the full N x (N+1) Jacobian at every
/// accepted point. Positive means the solution set is a smooth curve there,
/// whatever its direction.
inline double full_jacobian_sigma(const Trace& tr, const SdGame& game) {
  const HomotopySystem sys(game, tr.k);
  double out = std::numeric_limits<double>::infinity();
  for (const PathPoint& p : tr.points) {
    Eigen::JacobiSVD<Matrix> svd(sys.jacobian(sys.layout().pack(p)));
    out = std::min(out, svd.singularValues()(svd.singularValues().size() - 1));
  }
  return out;
}

}  // namespace sdg::test
