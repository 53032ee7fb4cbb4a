#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace nlsvd {

using Vector = std::vector<double>;

// Dense row-major real matrix. Constructors reject non-finite entries.
// Zero-sized matrices are allowed so that e.g. an empty null-space basis can
// be represented as an n x 0 matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix identity(std::size_t n);
  static Matrix diagonal(std::span<const double> d);
  static Matrix diagonal(std::size_t rows, std::size_t cols, std::span<const double> d);
  static Matrix from_rows(const std::vector<std::vector<double>>& rows);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }
  Vector column(std::size_t c) const;

  const std::vector<double>& data() const noexcept { return data_; }
  std::vector<double>& data() noexcept { return data_; }

  Matrix transpose() const;
  Matrix operator*(const Matrix& rhs) const;
  Vector operator*(std::span<const double> x) const;
  Matrix operator-(const Matrix& rhs) const;
  Matrix operator+(const Matrix& rhs) const;
  Matrix& operator*=(double s);

  double frobenius_norm() const;
  double max_abs() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Full SVD a = u * diag(s) * vt with u (rows x rows) and vt (cols x cols).
struct SvdFactors {
  Matrix u;
  Vector s;
  Matrix vt;

  // u * diag(s) * vt, padded with zeros to the original shape.
  Matrix reconstruct() const;
};

inline constexpr double kDefaultRankTolerance = 1e-10;
inline constexpr int kJacobiMaxSweeps = 60;
inline constexpr double kJacobiTolerance = 1e-14;

// One-sided Jacobi SVD. Singular values are nonincreasing; each left
// singular vector has its largest-magnitude entry made nonnegative.
// Throws ConvergenceFailure after kJacobiMaxSweeps sweeps.
SvdFactors svd(const Matrix& a);

// Singular values only (no accumulation of the right factor).
Vector singular_values(const Matrix& a);

// Moore-Penrose pseudoinverse; singular values <= rtol * s_max count as zero.
Matrix pseudoinverse(const Matrix& a, double rtol = kDefaultRankTolerance);

// Orthonormal basis (as columns) of the numerical null space of a.
Matrix null_basis(const Matrix& a, double rtol = kDefaultRankTolerance);

std::size_t numerical_rank(std::span<const double> s, double rtol = kDefaultRankTolerance);

// Extends k orthonormal columns (n x k) to a full n x n orthogonal matrix whose
// first k columns are the given ones.
Matrix complete_orthonormal(const Matrix& q);

double norm2(std::span<const double> x);
double dot(std::span<const double> a, std::span<const double> b);
bool all_finite(std::span<const double> x);

// y = a - b
Vector subtract(std::span<const double> a, std::span<const double> b);
Vector add(std::span<const double> a, std::span<const double> b);
Vector scaled(std::span<const double> x, double s);

// Permutation helpers. perm[i] is the source index placed at position i.
Vector apply_permutation(std::span<const double> x, std::span<const std::size_t> perm);
Vector invert_permutation(std::span<const double> y, std::span<const std::size_t> perm);
bool is_permutation(std::span<const std::size_t> perm);

std::size_t argmax(std::span<const double> x);

}  // namespace nlsvd
