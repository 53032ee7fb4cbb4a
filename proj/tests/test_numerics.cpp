#include "doctest.h"

#include <cmath>
#include <limits>

#include "nlsvd/error.hpp"
#include "nlsvd/numerics.hpp"
#include "test_util.hpp"

using namespace nlsvd;
using nlsvd::testing::orthogonality_residual;
using nlsvd::testing::random_matrix;

namespace {

void check_factors(const Matrix& a, const SvdFactors& f) {
  REQUIRE(f.u.rows() == a.rows());
  REQUIRE(f.u.cols() == a.rows());
  REQUIRE(f.vt.rows() == a.cols());
  REQUIRE(f.vt.cols() == a.cols());
  CHECK(orthogonality_residual(f.u) <= 1e-10);
  CHECK(orthogonality_residual(f.vt.transpose()) <= 1e-10);
  for (std::size_t i = 1; i < f.s.size(); ++i) CHECK(f.s[i - 1] >= f.s[i]);
  for (double s : f.s) CHECK(s >= 0.0);
  const double scale = std::max(a.frobenius_norm(), std::numeric_limits<double>::min());
  CHECK((f.reconstruct() - a).frobenius_norm() <= 1e-10 * scale);
}

bool is_signed_permutation(const Matrix& m) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    int ones = 0;
    for (std::size_t c = 0; c < m.cols(); ++c) {
      const double v = std::abs(m(r, c));
      if (std::abs(v - 1.0) < 1e-14) {
        ++ones;
      } else if (v > 1e-14) {
        return false;
      }
    }
    if (ones != 1) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("svd of the identity has unit singular values") {
  const SvdFactors f = svd(Matrix::identity(3));
  REQUIRE(f.s.size() == 3);
  for (double s : f.s) CHECK(s == doctest::Approx(1.0).epsilon(1e-15));
  check_factors(Matrix::identity(3), f);
}

TEST_CASE("svd of a diagonal matrix returns signed permutation factors") {
  const Vector d{1.0, 3.0};
  const Matrix a = Matrix::diagonal(d);
  const SvdFactors f = svd(a);
  CHECK(f.s[0] == doctest::Approx(3.0).epsilon(1e-15));
  CHECK(f.s[1] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(is_signed_permutation(f.u));
  CHECK(is_signed_permutation(f.vt));
  check_factors(a, f);
}

TEST_CASE("svd of a seeded random 4x3 matrix reconstructs") {
  const Matrix a = random_matrix(4, 3, 42);
  check_factors(a, svd(a));
}

TEST_CASE("svd invariants over random shapes, including wide and rank-deficient") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const std::size_t rows = 1 + seed % 7;
    const std::size_t cols = 1 + (seed * 3) % 9;
    Matrix a = random_matrix(rows, cols, 1000 + seed);
    if (seed % 5 == 0 && rows > 1) {
      // duplicate a row to force rank deficiency
      for (std::size_t c = 0; c < cols; ++c) a(rows - 1, c) = a(0, c);
    }
    CAPTURE(seed);
    check_factors(a, svd(a));
  }
}

TEST_CASE("svd sign convention: largest entry of each left vector is nonnegative") {
  const Matrix a = random_matrix(5, 4, 7);
  const SvdFactors f = svd(a);
  for (std::size_t j = 0; j < f.u.cols(); ++j) {
    double best = 0.0;
    for (std::size_t i = 0; i < f.u.rows(); ++i) {
      if (std::abs(f.u(i, j)) > std::abs(best)) best = f.u(i, j);
    }
    CHECK(best >= 0.0);
  }
  // deterministic
  const SvdFactors g = svd(a);
  CHECK(f.u == g.u);
  CHECK(f.vt == g.vt);
  CHECK(f.s == g.s);
}

TEST_CASE("svd of the zero matrix") {
  const Matrix z(3, 2);
  const SvdFactors f = svd(z);
  CHECK(f.s == Vector{0.0, 0.0});
  check_factors(z, f);
}

TEST_CASE("singular_values agrees with the full decomposition") {
  const Matrix a = random_matrix(6, 4, 11);
  const Vector s = singular_values(a);
  const SvdFactors f = svd(a);
  for (std::size_t i = 0; i < s.size(); ++i) CHECK(s[i] == doctest::Approx(f.s[i]).epsilon(1e-12));
}

TEST_CASE("non-finite matrices are rejected") {
  CHECK_THROWS_AS(Matrix(1, 2, {1.0, std::nan("")}), Error);
  Matrix a(2, 2);
  a(0, 0) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(svd(a), Error);
}

TEST_CASE("pseudoinverse of diagonal and identity matrices") {
  const Vector d{2.0, 0.0};
  const Matrix p = pseudoinverse(Matrix::diagonal(d));
  CHECK(p(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(p(0, 1) == 0.0);
  CHECK(p(1, 0) == 0.0);
  CHECK(p(1, 1) == 0.0);
  CHECK((pseudoinverse(Matrix::identity(4)) - Matrix::identity(4)).max_abs() < 1e-15);
  CHECK_THROWS_AS(pseudoinverse(Matrix::identity(2), -1.0), Error);
}

TEST_CASE("pseudoinverse satisfies the Penrose identities") {
  const Matrix a = random_matrix(3, 5, 3);
  const Matrix p = pseudoinverse(a);
  CHECK((a * p * a - a).frobenius_norm() < 1e-9);

  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const std::size_t rows = 2 + seed % 5;
    const std::size_t cols = 2 + (seed * 7) % 6;
    Matrix m = random_matrix(rows, cols, 500 + seed);
    if (seed % 3 == 0) {
      for (std::size_t c = 0; c < cols; ++c) m(rows - 1, c) = 2.0 * m(0, c);
    }
    const Matrix mp = pseudoinverse(m);
    CAPTURE(seed);
    CHECK((m * mp * m - m).frobenius_norm() < 1e-9);
    CHECK((mp * m * mp - mp).frobenius_norm() < 1e-9);
    const Matrix amp = m * mp;
    const Matrix pam = mp * m;
    CHECK((amp - amp.transpose()).frobenius_norm() < 1e-9);
    CHECK((pam - pam.transpose()).frobenius_norm() < 1e-9);
  }
}

TEST_CASE("null basis of a rank-one 2x2 matrix") {
  const Matrix a = Matrix::from_rows({{1.0, 0.0}, {0.0, 0.0}});
  const Matrix b = null_basis(a);
  REQUIRE(b.rows() == 2);
  REQUIRE(b.cols() == 1);
  CHECK(std::abs(b(0, 0)) < 1e-15);
  CHECK(std::abs(std::abs(b(1, 0)) - 1.0) < 1e-15);
}

TEST_CASE("null basis of a full-rank square matrix is empty") {
  const Matrix b = null_basis(random_matrix(4, 4, 9));
  CHECK(b.rows() == 4);
  CHECK(b.cols() == 0);
}

TEST_CASE("null basis of a wide 10x1000 matrix") {
  const Matrix k = random_matrix(10, 1000, 2024);
  const Matrix b = null_basis(k);
  REQUIRE(b.cols() == 990);
  const Matrix kb = k * b;
  CHECK(kb.max_abs() < 1e-9);
  const double s_max = singular_values(k).front();
  CHECK(kb.frobenius_norm() <= 1e-9 * s_max * b.frobenius_norm());
  CHECK(orthogonality_residual(b) <= 1e-10);
}

TEST_CASE("complete_orthonormal keeps the given columns") {
  Matrix q(3, 1);
  q(0, 0) = 0.6;
  q(1, 0) = 0.8;
  const Matrix full = complete_orthonormal(q);
  CHECK(full(0, 0) == 0.6);
  CHECK(full(1, 0) == 0.8);
  CHECK(orthogonality_residual(full) < 1e-14);
}

TEST_CASE("vector helpers") {
  CHECK(norm2(Vector{3.0, 4.0}) == 5.0);
  CHECK(norm2(Vector{1e-200, 1e-200}) == doctest::Approx(std::sqrt(2.0) * 1e-200));
  CHECK(norm2(Vector{1e200, 1e200}) == doctest::Approx(std::sqrt(2.0) * 1e200));
  const std::vector<std::size_t> perm{2, 0, 1};
  const Vector x{10.0, 20.0, 30.0};
  const Vector px = apply_permutation(x, perm);
  CHECK(px == Vector{30.0, 10.0, 20.0});
  CHECK(invert_permutation(px, perm) == x);
  CHECK(is_permutation(perm));
  CHECK_FALSE(is_permutation(std::vector<std::size_t>{0, 0}));
  CHECK(argmax(Vector{1.0, 5.0, 5.0}) == 1);
}
