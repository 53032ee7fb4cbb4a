#pragma once

#include <cmath>
#include <random>

#include "nlsvd/numerics.hpp"

namespace nlsvd::testing {

inline Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix m(rows, cols);
  for (auto& v : m.data()) v = n(rng);
  return m;
}

inline Vector random_vector(std::size_t n, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  Vector v(n);
  for (auto& e : v) e = d(rng);
  return v;
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline double orthogonality_residual(const Matrix& q) {
  return (q.transpose() * q - Matrix::identity(q.cols())).max_abs();
}

}  // namespace nlsvd::testing
