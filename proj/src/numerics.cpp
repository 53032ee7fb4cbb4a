#include "nlsvd/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "nlsvd/error.hpp"

namespace nlsvd {

namespace {

void require_finite(std::span<const double> data) {
  if (!all_finite(data)) {
    throw Error(ErrorKind::InvalidInput, "matrix entries must be finite");
  }
}

using Columns = std::vector<Vector>;

Columns to_columns(const Matrix& a) {
  Columns cols(a.cols(), Vector(a.rows()));
  for (std::size_t r = 0; r < a.rows(); ++r) {
    for (std::size_t c = 0; c < a.cols(); ++c) cols[c][r] = a(r, c);
  }
  return cols;
}

void rotate(Vector& x, Vector& y, double c, double s) {
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xi = x[i];
    const double yi = y[i];
    x[i] = c * xi - s * yi;
    y[i] = s * xi + c * yi;
  }
}

// Orthogonalizes the columns of `work` in place by one-sided Jacobi rotations.
// When `right` is non-null the same rotations are accumulated into it.
void jacobi_orthogonalize(Columns& work, Columns* right) {
  const std::size_t n = work.size();
  if (n < 2) return;

  double residual = 0.0;
  for (int sweep = 0; sweep < kJacobiMaxSweeps; ++sweep) {
    double max_norm2 = 0.0;
    for (const auto& c : work) max_norm2 = std::max(max_norm2, dot(c, c));
    if (max_norm2 == 0.0) return;
    // columns below this are numerically zero and never rotated
    const double negligible = max_norm2 * 1e-30;

    bool rotated = false;
    residual = 0.0;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double alpha = dot(work[p], work[p]);
        const double beta = dot(work[q], work[q]);
        if (alpha <= negligible || beta <= negligible) continue;
        const double gamma = dot(work[p], work[q]);
        const double rel = std::abs(gamma) / std::sqrt(alpha * beta);
        if (rel <= kJacobiTolerance) continue;
        residual = std::max(residual, rel);
        rotated = true;

        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        rotate(work[p], work[q], c, s);
        if (right != nullptr) rotate((*right)[p], (*right)[q], c, s);
      }
    }
    if (!rotated) return;
  }
  std::ostringstream os;
  os << "one-sided Jacobi did not converge in " << kJacobiMaxSweeps
     << " sweeps (max relative off-diagonal " << residual << ")";
  throw ConvergenceFailure(os.str(), residual);
}

struct TallSvd {
  Matrix u;   // m x m
  Vector s;   // n
  Matrix v;   // n x n
};

// SVD of a matrix with rows >= cols.
TallSvd svd_tall(const Matrix& a) {
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();
  Columns work = to_columns(a);
  Columns right(n, Vector(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) right[i][i] = 1.0;
  jacobi_orthogonalize(work, &right);

  Vector norms(n);
  for (std::size_t j = 0; j < n; ++j) norms[j] = norm2(work[j]);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return norms[x] > norms[y]; });

  TallSvd out;
  out.s.resize(n);
  out.v = Matrix(n, n);
  const double s_max = n > 0 ? norms[order[0]] : 0.0;
  const double keep = s_max * static_cast<double>(std::max<std::size_t>(m, 1)) *
                      std::numeric_limits<double>::epsilon();
  std::size_t kept = 0;
  for (std::size_t j = 0; j < n; ++j) {
    out.s[j] = norms[order[j]];
    for (std::size_t i = 0; i < n; ++i) out.v(i, j) = right[order[j]][i];
    if (out.s[j] > keep && out.s[j] > 0.0) ++kept;
  }

  Matrix thin(m, kept);
  for (std::size_t j = 0; j < kept; ++j) {
    const auto& col = work[order[j]];
    for (std::size_t i = 0; i < m; ++i) thin(i, j) = col[i] / out.s[j];
  }
  out.u = complete_orthonormal(thin);
  return out;
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw Error(ErrorKind::InvalidInput, "matrix data size does not match its shape");
  }
  require_finite(data_);
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::diagonal(std::span<const double> d) { return diagonal(d.size(), d.size(), d); }

Matrix Matrix::diagonal(std::size_t rows, std::size_t cols, std::span<const double> d) {
  require_finite(d);
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < std::min({rows, cols, d.size()}); ++i) m(i, i) = d[i];
  return m;
}

Matrix Matrix::from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) return {};
  const std::size_t cols = rows.front().size();
  std::vector<double> data;
  data.reserve(rows.size() * cols);
  for (const auto& r : rows) {
    if (r.size() != cols) throw Error(ErrorKind::InvalidInput, "ragged matrix rows");
    data.insert(data.end(), r.begin(), r.end());
  }
  return Matrix(rows.size(), cols, std::move(data));
}

Vector Matrix::column(std::size_t c) const {
  Vector out(rows_);
  for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
  return out;
}

Matrix Matrix::transpose() const {
  Matrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  }
  return t;
}

Matrix Matrix::operator*(const Matrix& rhs) const {
  if (cols_ != rhs.rows_) throw Error(ErrorKind::InvalidInput, "matrix product shape mismatch");
  Matrix out(rows_, rhs.cols_);
  for (std::size_t i = 0; i < rows_; ++i) {
    for (std::size_t k = 0; k < cols_; ++k) {
      const double aik = (*this)(i, k);
      if (aik == 0.0) continue;
      const auto rrow = rhs.row(k);
      auto orow = out.row(i);
      for (std::size_t j = 0; j < rhs.cols_; ++j) orow[j] += aik * rrow[j];
    }
  }
  return out;
}

Vector Matrix::operator*(std::span<const double> x) const {
  if (x.size() != cols_) throw Error(ErrorKind::InvalidInput, "matrix-vector shape mismatch");
  Vector out(rows_, 0.0);
  for (std::size_t i = 0; i < rows_; ++i) out[i] = dot(row(i), x);
  return out;
}

Matrix Matrix::operator-(const Matrix& rhs) const {
  if (rows_ != rhs.rows_ || cols_ != rhs.cols_) {
    throw Error(ErrorKind::InvalidInput, "matrix difference shape mismatch");
  }
  Matrix out = *this;
  for (std::size_t i = 0; i < data_.size(); ++i) out.data_[i] -= rhs.data_[i];
  return out;
}

Matrix Matrix::operator+(const Matrix& rhs) const {
  if (rows_ != rhs.rows_ || cols_ != rhs.cols_) {
    throw Error(ErrorKind::InvalidInput, "matrix sum shape mismatch");
  }
  Matrix out = *this;
  for (std::size_t i = 0; i < data_.size(); ++i) out.data_[i] += rhs.data_[i];
  return out;
}

Matrix& Matrix::operator*=(double s) {
  for (auto& v : data_) v *= s;
  return *this;
}

double Matrix::frobenius_norm() const { return norm2(data_); }

double Matrix::max_abs() const {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::abs(v));
  return m;
}

Matrix SvdFactors::reconstruct() const {
  Matrix us(u.rows(), vt.rows());
  for (std::size_t i = 0; i < u.rows(); ++i) {
    for (std::size_t j = 0; j < s.size(); ++j) us(i, j) = u(i, j) * s[j];
  }
  return us * vt;
}

SvdFactors svd(const Matrix& a) {
  require_finite(a.data());
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();
  SvdFactors f;
  if (m >= n) {
    TallSvd t = svd_tall(a);
    f.u = std::move(t.u);
    f.s = std::move(t.s);
    f.vt = t.v.transpose();
  } else {
    // a^T = U' S V'^T  =>  a = V' S U'^T
    TallSvd t = svd_tall(a.transpose());
    f.u = std::move(t.v);
    f.s = std::move(t.s);
    f.vt = t.u.transpose();
  }

  const std::size_t k = std::min(m, n);
  for (std::size_t j = 0; j < f.u.cols(); ++j) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < f.u.rows(); ++i) {
      if (std::abs(f.u(i, j)) > std::abs(f.u(best, j))) best = i;
    }
    if (f.u.rows() > 0 && f.u(best, j) < 0.0) {
      for (std::size_t i = 0; i < f.u.rows(); ++i) f.u(i, j) = -f.u(i, j);
      if (j < k) {
        for (auto& v : f.vt.row(j)) v = -v;
      }
    }
  }
  return f;
}

Vector singular_values(const Matrix& a) {
  require_finite(a.data());
  Columns work = to_columns(a.rows() >= a.cols() ? a : a.transpose());
  jacobi_orthogonalize(work, nullptr);
  Vector s(work.size());
  for (std::size_t j = 0; j < work.size(); ++j) s[j] = norm2(work[j]);
  std::sort(s.begin(), s.end(), std::greater<>());
  return s;
}

std::size_t numerical_rank(std::span<const double> s, double rtol) {
  if (s.empty()) return 0;
  const double s_max = *std::max_element(s.begin(), s.end());
  if (s_max <= 0.0) return 0;
  return static_cast<std::size_t>(
      std::count_if(s.begin(), s.end(), [&](double v) { return v > rtol * s_max; }));
}

Matrix pseudoinverse(const Matrix& a, double rtol) {
  if (rtol < 0.0) throw Error(ErrorKind::InvalidInput, "rtol must be nonnegative");
  const SvdFactors f = svd(a);
  const std::size_t rank = numerical_rank(f.s, rtol);
  Matrix out(a.cols(), a.rows());
  for (std::size_t j = 0; j < rank; ++j) {
    const double inv = 1.0 / f.s[j];
    for (std::size_t r = 0; r < a.cols(); ++r) {
      const double vr = f.vt(j, r) * inv;
      for (std::size_t c = 0; c < a.rows(); ++c) out(r, c) += vr * f.u(c, j);
    }
  }
  return out;
}

Matrix null_basis(const Matrix& a, double rtol) {
  if (rtol < 0.0) throw Error(ErrorKind::InvalidInput, "rtol must be nonnegative");
  const SvdFactors f = svd(a);
  const std::size_t rank = numerical_rank(f.s, rtol);
  const std::size_t n = a.cols();
  Matrix basis(n, n - rank);
  for (std::size_t j = rank; j < n; ++j) {
    for (std::size_t i = 0; i < n; ++i) basis(i, j - rank) = f.vt(j, i);
  }
  return basis;
}

Matrix complete_orthonormal(const Matrix& q) {
  const std::size_t n = q.rows();
  const std::size_t k = q.cols();
  if (k > n) throw Error(ErrorKind::InvalidInput, "more columns than rows in orthonormal set");

  // Householder QR of q; reflectors stored as unit vectors on rows j..n-1.
  Matrix r = q;
  std::vector<Vector> reflectors;
  reflectors.reserve(k);
  for (std::size_t j = 0; j < k; ++j) {
    Vector v(n - j);
    for (std::size_t i = j; i < n; ++i) v[i - j] = r(i, j);
    const double alpha = norm2(v);
    v[0] += std::copysign(alpha, v[0] == 0.0 ? 1.0 : v[0]);
    const double vn = norm2(v);
    if (vn > 0.0) {
      for (auto& e : v) e /= vn;
      for (std::size_t c = j; c < k; ++c) {
        double w = 0.0;
        for (std::size_t i = j; i < n; ++i) w += v[i - j] * r(i, c);
        for (std::size_t i = j; i < n; ++i) r(i, c) -= 2.0 * v[i - j] * w;
      }
    }
    reflectors.push_back(std::move(v));
  }

  Matrix full = Matrix::identity(n);
  for (std::size_t jj = k; jj-- > 0;) {
    const Vector& v = reflectors[jj];
    Vector w(n, 0.0);
    for (std::size_t i = jj; i < n; ++i) {
      const double vi = v[i - jj];
      if (vi == 0.0) continue;
      const auto frow = full.row(i);
      for (std::size_t c = 0; c < n; ++c) w[c] += vi * frow[c];
    }
    for (std::size_t i = jj; i < n; ++i) {
      const double vi = 2.0 * v[i - jj];
      if (vi == 0.0) continue;
      auto frow = full.row(i);
      for (std::size_t c = 0; c < n; ++c) frow[c] -= vi * w[c];
    }
  }
  for (std::size_t j = 0; j < k; ++j) {
    for (std::size_t i = 0; i < n; ++i) full(i, j) = q(i, j);
  }
  return full;
}

double norm2(std::span<const double> x) {
  // scaled accumulation keeps tiny and huge entries from under/overflowing
  double scale = 0.0;
  double ssq = 1.0;
  for (double v : x) {
    if (v == 0.0) continue;
    const double a = std::abs(v);
    if (scale < a) {
      ssq = 1.0 + ssq * (scale / a) * (scale / a);
      scale = a;
    } else {
      ssq += (a / scale) * (a / scale);
    }
  }
  return scale * std::sqrt(ssq);
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

bool all_finite(std::span<const double> x) {
  return std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); });
}

Vector subtract(std::span<const double> a, std::span<const double> b) {
  Vector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

Vector add(std::span<const double> a, std::span<const double> b) {
  Vector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

Vector scaled(std::span<const double> x, double s) {
  Vector out(x.begin(), x.end());
  for (auto& v : out) v *= s;
  return out;
}

Vector apply_permutation(std::span<const double> x, std::span<const std::size_t> perm) {
  Vector out(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) out[i] = x[perm[i]];
  return out;
}

Vector invert_permutation(std::span<const double> y, std::span<const std::size_t> perm) {
  Vector out(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) out[perm[i]] = y[i];
  return out;
}

bool is_permutation(std::span<const std::size_t> perm) {
  std::vector<bool> seen(perm.size(), false);
  for (std::size_t p : perm) {
    if (p >= perm.size() || seen[p]) return false;
    seen[p] = true;
  }
  return true;
}

std::size_t argmax(std::span<const double> x) {
  return static_cast<std::size_t>(std::max_element(x.begin(), x.end()) - x.begin());
}

}  // namespace nlsvd
