#pragma once

// Dense row-major matrices and a one-sided Jacobi SVD, enough for the
// small-column least-squares problems the regression needs.

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

#include "gamorra/error.hpp"

namespace gamorra::linalg {

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }

  std::vector<double> column(std::size_t c) const {
    std::vector<double> out(rows_);
    for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
    return out;
  }

  Matrix transpose() const {
    Matrix t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
      for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
    return t;
  }

  friend Matrix operator*(const Matrix& a, const Matrix& b) {
    assert(a.cols_ == b.rows_);
    Matrix out(a.rows_, b.cols_);
    for (std::size_t i = 0; i < a.rows_; ++i)
      for (std::size_t k = 0; k < a.cols_; ++k) {
        double aik = a(i, k);
        if (aik == 0.0) continue;
        for (std::size_t j = 0; j < b.cols_; ++j) out(i, j) += aik * b(k, j);
      }
    return out;
  }

  std::vector<double> operator*(std::span<const double> x) const {
    assert(x.size() == cols_);
    std::vector<double> y(rows_, 0.0);
    for (std::size_t r = 0; r < rows_; ++r) {
      double acc = 0.0;
      for (std::size_t c = 0; c < cols_; ++c) acc += (*this)(r, c) * x[c];
      y[r] = acc;
    }
    return y;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

// Thin SVD A = U diag(s) V^T of an m x n matrix with m >= n. Singular
// values are sorted in decreasing order.
struct Svd {
  Matrix u;               // m x n, orthonormal columns where s > 0
  std::vector<double> s;  // n
  Matrix v;               // n x n orthogonal
};

// One-sided (Hestenes) Jacobi: plane rotations orthogonalize the columns
// of A; the column norms are the singular values.
inline Svd svd(const Matrix& a, double tol = 1e-15, int max_sweeps = 60) {
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();
  if (m < n) throw InsufficientDataError("svd requires rows >= cols");
  // Column-major working copy keeps the inner loops contiguous.
  std::vector<std::vector<double>> col(n, std::vector<double>(m));
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t c = 0; c < n; ++c) col[c][r] = a(r, c);
  Matrix v = Matrix::identity(n);

  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        double alpha = dot(col[p], col[p]);
        double beta = dot(col[q], col[q]);
        double gamma = dot(col[p], col[q]);
        if (gamma == 0.0 || std::abs(gamma) <= tol * std::sqrt(alpha * beta)) continue;
        rotated = true;
        double zeta = (beta - alpha) / (2.0 * gamma);
        double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        double c = 1.0 / std::sqrt(1.0 + t * t);
        double s = c * t;
        for (std::size_t i = 0; i < m; ++i) {
          double xp = col[p][i];
          double xq = col[q][i];
          col[p][i] = c * xp - s * xq;
          col[q][i] = s * xp + c * xq;
        }
        for (std::size_t i = 0; i < n; ++i) {
          double vp = v(i, p);
          double vq = v(i, q);
          v(i, p) = c * vp - s * vq;
          v(i, q) = s * vp + c * vq;
        }
      }
    }
    if (!rotated) break;
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> norms(n);
  for (std::size_t c = 0; c < n; ++c) norms[c] = norm2(col[c]);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return norms[x] > norms[y]; });

  Svd out{Matrix(m, n), std::vector<double>(n), Matrix(n, n)};
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t c = order[k];
    out.s[k] = norms[c];
    for (std::size_t i = 0; i < n; ++i) out.v(i, k) = v(i, c);
    if (norms[c] > 0.0) {
      for (std::size_t i = 0; i < m; ++i) out.u(i, k) = col[c][i] / norms[c];
    }
  }
  return out;
}

struct LstsqResult {
  std::vector<double> x;
  std::vector<double> singular_values;
  std::size_t rank = 0;
};

// Minimum-norm least squares x = V S^+ U^T y. Singular values below
// rcond * s_max are treated as zero. With rcond <= 0 nothing is pruned and
// an exactly singular system is an error.
inline LstsqResult lstsq(const Matrix& a, std::span<const double> y, double rcond) {
  if (a.rows() != y.size()) throw InvariantError("lstsq: row count mismatch");
  Svd d = svd(a);
  const std::size_t n = a.cols();
  const double s_max = d.s.empty() ? 0.0 : d.s.front();
  LstsqResult r{std::vector<double>(n, 0.0), d.s, 0};
  for (std::size_t k = 0; k < n; ++k) {
    double sk = d.s[k];
    bool keep = rcond > 0.0 ? sk > rcond * s_max : sk > 0.0;
    if (!keep) {
      if (rcond <= 0.0) throw InvariantError("singular system (zero singular value) with pruning disabled");
      continue;
    }
    ++r.rank;
    double uty = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i) uty += d.u(i, k) * y[i];
    double coef = uty / sk;
    for (std::size_t i = 0; i < n; ++i) r.x[i] += d.v(i, k) * coef;
  }
  return r;
}

}  // namespace gamorra::linalg
