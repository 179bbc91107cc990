#pragma once

// Small dense linear algebra: just enough for IRLS on a handful of
// columns and for assembling 7x7 latent correlation matrices.  Matrices
// are row-major over std::vector<double>.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <vector>

namespace pslab {

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

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double* row_ptr(std::size_t i) { return data_.data() + i * cols_; }
  const double* row_ptr(std::size_t i) const { return data_.data() + i * cols_; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Lower-triangular Cholesky factor of a symmetric positive-definite
// matrix.  Returns nullopt if a pivot is not strictly positive.
inline std::optional<Matrix> cholesky_spd(const Matrix& a) {
  const std::size_t n = a.rows();
  if (a.cols() != n) return std::nullopt;
  Matrix l(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      if (i == j) {
        if (!(s > 0.0)) return std::nullopt;
        l(i, i) = std::sqrt(s);
      } else {
        l(i, j) = s / l(j, j);
      }
    }
  }
  return l;
}

// Solve L y = b, then L^T x = y.
inline std::vector<double> cholesky_solve(const Matrix& l, const std::vector<double>& b) {
  const std::size_t n = l.rows();
  std::vector<double> x(b);
  for (std::size_t i = 0; i < n; ++i) {
    double s = x[i];
    for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * x[k];
    x[i] = s / l(i, i);
  }
  for (std::size_t ii = n; ii-- > 0;) {
    double s = x[ii];
    for (std::size_t k = ii + 1; k < n; ++k) s -= l(k, ii) * x[k];
    x[ii] = s / l(ii, ii);
  }
  return x;
}

// Solve A x = b for symmetric positive-definite A.
inline std::optional<std::vector<double>> solve_spd(const Matrix& a,
                                                    const std::vector<double>& b) {
  auto l = cholesky_spd(a);
  if (!l) return std::nullopt;
  return cholesky_solve(*l, b);
}

// Inverse of an SPD matrix via its Cholesky factor.
inline std::optional<Matrix> invert_spd(const Matrix& a) {
  const std::size_t n = a.rows();
  auto l = cholesky_spd(a);
  if (!l) return std::nullopt;
  Matrix inv(n, n);
  std::vector<double> e(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    e[j] = 1.0;
    std::vector<double> col = cholesky_solve(*l, e);
    for (std::size_t i = 0; i < n; ++i) inv(i, j) = col[i];
    e[j] = 0.0;
  }
  // Symmetrise against round-off.
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      const double v = 0.5 * (inv(i, j) + inv(j, i));
      inv(i, j) = v;
      inv(j, i) = v;
    }
  }
  return inv;
}

// Rank detection for a symmetric PSD Gram matrix: diagonal-pivoted
// Cholesky.  Columns whose pivot falls below rel_tol * max diagonal are
// reported as linearly dependent on earlier columns.
struct PivotedRank {
  std::vector<std::size_t> kept;     // independent columns, original indices
  std::vector<std::size_t> dropped;  // collinear columns
};

inline PivotedRank pivoted_rank(Matrix g, double rel_tol = 1e-10) {
  const std::size_t n = g.rows();
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  double max_diag = 0.0;
  for (std::size_t i = 0; i < n; ++i) max_diag = std::max(max_diag, g(i, i));
  const double tol = rel_tol * std::max(max_diag, 1e-300);

  PivotedRank out;
  std::size_t r = 0;
  for (; r < n; ++r) {
    // Pick the largest remaining diagonal.
    std::size_t p = r;
    for (std::size_t i = r + 1; i < n; ++i) {
      if (g(i, i) > g(p, p)) p = i;
    }
    if (g(p, p) <= tol) break;
    if (p != r) {
      std::swap(perm[p], perm[r]);
      for (std::size_t k = 0; k < n; ++k) std::swap(g(p, k), g(r, k));
      for (std::size_t k = 0; k < n; ++k) std::swap(g(k, p), g(k, r));
    }
    const double piv = std::sqrt(g(r, r));
    g(r, r) = piv;
    for (std::size_t i = r + 1; i < n; ++i) g(i, r) /= piv;
    for (std::size_t i = r + 1; i < n; ++i) {
      for (std::size_t j = r + 1; j <= i; ++j) {
        g(i, j) -= g(i, r) * g(j, r);
        g(j, i) = g(i, j);
      }
    }
  }
  out.kept.assign(perm.begin(), perm.begin() + r);
  out.dropped.assign(perm.begin() + r, perm.end());
  std::sort(out.kept.begin(), out.kept.end());
  std::sort(out.dropped.begin(), out.dropped.end());
  return out;
}

// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
// Adequate for the tiny matrices used here (correlation repair).
struct SymmetricEigen {
  std::vector<double> values;  // ascending
  Matrix vectors;              // columns are eigenvectors
};

inline SymmetricEigen symmetric_eigen(Matrix a, int max_sweeps = 64) {
  const std::size_t n = a.rows();
  Matrix v = Matrix::identity(n);
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) off += a(i, j) * a(i, j);
    if (off < 1e-30) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::fabs(a(p, q)) < 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  SymmetricEigen out;
  out.values.resize(n);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t x, std::size_t y) { return a(x, x) < a(y, y); });
  out.vectors = Matrix(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    out.values[j] = a(order[j], order[j]);
    for (std::size_t i = 0; i < n; ++i) out.vectors(i, j) = v(i, order[j]);
  }
  return out;
}

}  // namespace pslab
