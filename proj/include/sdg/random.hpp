#pragma once

// Seeded generator shared by the probe, the fixture generator and the tests.
// Doubles are built from raw 64-bit output so streams are identical across
// standard library implementations.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "sdg/linalg.hpp"

namespace sdg {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Index in [0, n).
  std::size_t index(std::size_t n) {
    return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
  }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
    has_spare_ = true;
    return r * std::cos(2.0 * std::numbers::pi * u2);
  }

  Matrix normal_matrix(Eigen::Index rows, Eigen::Index cols) {
    Matrix m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
      for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = normal();
    return m;
  }

  Matrix orthogonal(Eigen::Index d) {
    Eigen::HouseholderQR<Matrix> qr(normal_matrix(d, d));
    Matrix q = qr.householderQ();
    const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (Eigen::Index i = 0; i < d; ++i)
      if (r(i, i) < 0) q.col(i) *= -1.0;
    return q;
  }

  Matrix symmetric(Eigen::Index d) {
    const Matrix g = normal_matrix(d, d);
    return 0.5 * (g + g.transpose());
  }

  /// Random trace-one PSD matrix of the given rank.
  Matrix density(Eigen::Index d, Eigen::Index rank) {
    const Matrix q = orthogonal(d);
    Vector lambda = Vector::Zero(d);
    double total = 0.0;
    for (Eigen::Index i = 0; i < rank; ++i) {
      lambda(i) = 0.05 + uniform();
      total += lambda(i);
    }
    lambda /= total;
    Matrix x = q * lambda.asDiagonal() * q.transpose();
    return 0.5 * (x + x.transpose());
  }

  /// Random diagonal density matrix with exactly `rank` nonzero entries.
  Matrix diagonal_density(Eigen::Index d, Eigen::Index rank) {
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(d));
    for (Eigen::Index i = 0; i < d; ++i) idx[static_cast<std::size_t>(i)] = i;
    for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[index(i)]);
    Vector diag = Vector::Zero(d);
    double total = 0.0;
    for (Eigen::Index i = 0; i < rank; ++i) {
      const double v = 0.05 + uniform();
      diag(idx[static_cast<std::size_t>(i)]) = v;
      total += v;
    }
    diag /= total;
    return diag.asDiagonal();
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace sdg
