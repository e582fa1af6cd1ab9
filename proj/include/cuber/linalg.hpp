#pragma once
// Dense row-major matrices and the handful of factorizations the engine
// needs: one-sided Jacobi SVD, Gram-Schmidt orthonormalization and
// projection onto column subspaces.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cuber/error.hpp"

namespace cuber {

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    detail::require(data_.size() == rows_ * cols_, "Matrix: data length != rows * cols");
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.begin()->size();
    Matrix m(r, c);
    std::size_t i = 0;
    for (const auto& row : rows) {
      detail::require(row.size() == c, "Matrix::from_rows: ragged rows");
      std::copy(row.begin(), row.end(), m.data_.begin() + static_cast<std::ptrdiff_t>(i * c));
      ++i;
    }
    return m;
  }

  /// Column vector (n x 1).
  static Matrix column_vector(std::span<const double> v) {
    return Matrix(v.size(), 1, std::vector<double>(v.begin(), v.end()));
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }

  std::vector<double> column(std::size_t c) const {
    std::vector<double> out(rows_);
    for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
    return out;
  }

  Matrix transposed() const {
    Matrix t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
      for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
    return t;
  }

  bool all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

  bool same_shape(const Matrix& o) const noexcept { return rows_ == o.rows_ && cols_ == o.cols_; }

  Matrix& operator+=(const Matrix& o) {
    detail::require(same_shape(o), "Matrix +=: shape mismatch");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }
  Matrix& operator-=(const Matrix& o) {
    detail::require(same_shape(o), "Matrix -=: shape mismatch");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
    return *this;
  }
  Matrix& operator*=(double s) noexcept {
    for (double& v : data_) v *= s;
    return *this;
  }
  /// this += s * o
  Matrix& add_scaled(const Matrix& o, double s) {
    detail::require(same_shape(o), "Matrix add_scaled: shape mismatch");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += s * o.data_[i];
    return *this;
  }

  friend Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
  friend Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
  friend Matrix operator*(Matrix a, double s) { return a *= s; }
  friend Matrix operator*(double s, Matrix a) { return a *= s; }
  friend bool operator==(const Matrix& a, const Matrix& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

namespace detail {

// out(rows r..r+R) += a(rows r..r+R) * b, four output rows per pass so each
// row of b is loaded once per block.
inline void gemm_rows(const Matrix& a, const Matrix& b, Matrix& out) {
  const std::size_t n = a.cols();
  const std::size_t m = b.cols();
  const std::size_t rows = a.rows();
  std::size_t i = 0;
  for (; i + 4 <= rows; i += 4) {
    double* o0 = out.row(i).data();
    double* o1 = out.row(i + 1).data();
    double* o2 = out.row(i + 2).data();
    double* o3 = out.row(i + 3).data();
    const double* a0 = a.row(i).data();
    const double* a1 = a.row(i + 1).data();
    const double* a2 = a.row(i + 2).data();
    const double* a3 = a.row(i + 3).data();
    for (std::size_t k = 0; k < n; ++k) {
      const double x0 = a0[k], x1 = a1[k], x2 = a2[k], x3 = a3[k];
      const double* br = b.row(k).data();
      for (std::size_t j = 0; j < m; ++j) {
        const double v = br[j];
        o0[j] += x0 * v;
        o1[j] += x1 * v;
        o2[j] += x2 * v;
        o3[j] += x3 * v;
      }
    }
  }
  for (; i < rows; ++i) {
    double* o = out.row(i).data();
    const double* ar = a.row(i).data();
    for (std::size_t k = 0; k < n; ++k) {
      const double aik = ar[k];
      const double* br = b.row(k).data();
      for (std::size_t j = 0; j < m; ++j) o[j] += aik * br[j];
    }
  }
}

}  // namespace detail

/// a * b
inline Matrix matmul(const Matrix& a, const Matrix& b) {
  detail::require(a.cols() == b.rows(), "matmul: inner dimensions differ");
  Matrix out(a.rows(), b.cols());
  detail::gemm_rows(a, b, out);
  return out;
}

/// a * b'
inline Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  detail::require(a.cols() == b.cols(), "matmul_nt: inner dimensions differ");
  Matrix out(a.rows(), b.rows());
  detail::gemm_rows(a, b.transposed(), out);
  return out;
}

/// a' * b
inline Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  detail::require(a.rows() == b.rows(), "matmul_tn: inner dimensions differ");
  Matrix out(a.cols(), b.cols());
  detail::gemm_rows(a.transposed(), b, out);
  return out;
}

/// Horizontal concatenation; all inputs must share the row count.
inline Matrix hconcat(std::span<const Matrix> parts, std::size_t rows) {
  std::size_t cols = 0;
  for (const auto& p : parts) {
    detail::require(p.rows() == rows, "hconcat: row count mismatch");
    cols += p.cols();
  }
  Matrix out(rows, cols);
  std::size_t offset = 0;
  for (const auto& p : parts) {
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < p.cols(); ++c) out(r, offset + c) = p(r, c);
    offset += p.cols();
  }
  return out;
}

/// Frobenius inner product of two equally shaped matrices.
inline double flat_inner(const Matrix& a, const Matrix& b) {
  detail::require(a.same_shape(b), "flat_inner: shape mismatch");
  const auto x = a.data();
  const auto y = b.data();
  return std::inner_product(x.begin(), x.end(), y.begin(), 0.0);
}

inline double flat_norm(const Matrix& a) { return std::sqrt(flat_inner(a, a)); }

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
  detail::require(a.same_shape(b), "max_abs_diff: shape mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

// ---------------------------------------------------------------------------
// Subspace bases

inline constexpr double kOrthonormalTol = 1e-10;
inline constexpr double kDuplicateTol = 1e-8;

/// Orthonormal columns spanning a subspace of R^ambient_dim.
class Basis {
 public:
  explicit Basis(std::size_t ambient_dim = 0) : m_(ambient_dim, 0) {}

  /// Adopts `columns`, verifying ||B'B - I||_max <= tol.
  static Basis from_orthonormal(Matrix columns, double tol = kOrthonormalTol) {
    detail::require(columns.all_finite(), "Basis: non-finite entries");
    detail::require(columns.cols() <= columns.rows(), "Basis: more columns than ambient dimension");
    Basis b;
    b.m_ = std::move(columns);
    if (b.orthonormality_error() > tol) throw InvalidInput("Basis: columns are not orthonormal");
    return b;
  }

  const Matrix& matrix() const noexcept { return m_; }
  std::size_t ambient_dim() const noexcept { return m_.rows(); }
  std::size_t size() const noexcept { return m_.cols(); }
  bool empty() const noexcept { return m_.cols() == 0; }

  /// max |(B'B - I)_ij|
  double orthonormality_error() const {
    const Matrix g = matmul_tn(m_, m_);
    return max_abs_diff(g, Matrix::identity(m_.cols()));
  }

 private:
  Matrix m_;
};

/// Modified Gram-Schmidt with one re-orthogonalization pass. Columns whose
/// residual norm falls below `tol` are dropped.
inline Basis orthonormalize(const Matrix& columns, double tol = kDuplicateTol) {
  detail::require(tol > 0.0, "orthonormalize: tol must be positive");
  detail::require(columns.all_finite(), "orthonormalize: non-finite input");
  const std::size_t d = columns.rows();
  std::vector<std::vector<double>> accepted;
  for (std::size_t c = 0; c < columns.cols(); ++c) {
    std::vector<double> v = columns.column(c);
    for (int pass = 0; pass < 2; ++pass) {
      for (const auto& q : accepted) {
        const double dot = std::inner_product(q.begin(), q.end(), v.begin(), 0.0);
        for (std::size_t i = 0; i < d; ++i) v[i] -= dot * q[i];
      }
    }
    const double norm = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
    if (norm < tol) continue;
    for (double& x : v) x /= norm;
    accepted.push_back(std::move(v));
    if (accepted.size() == d) break;
  }
  Matrix out(d, accepted.size());
  for (std::size_t c = 0; c < accepted.size(); ++c)
    for (std::size_t r = 0; r < d; ++r) out(r, c) = accepted[c][r];
  return Basis::from_orthonormal(std::move(out));
}

/// Union of several bases of the same ambient space, duplicates removed.
inline Basis union_basis(std::span<const Basis* const> bases, std::size_t ambient_dim) {
  std::vector<Matrix> parts;
  parts.reserve(bases.size());
  for (const Basis* b : bases) {
    detail::require(b->ambient_dim() == ambient_dim, "union_basis: ambient dimension mismatch");
    parts.push_back(b->matrix());
  }
  if (parts.empty()) return Basis(ambient_dim);
  return orthonormalize(hconcat(parts, ambient_dim));
}

/// M B B': projection of the rows of M onto span(B).
inline Matrix project(const Matrix& m, const Basis& b) {
  detail::require(m.cols() == b.ambient_dim(), "project: m.cols != basis ambient dimension");
  if (b.empty()) return Matrix(m.rows(), m.cols());
  return matmul_nt(matmul(m, b.matrix()), b.matrix());
}

/// M - M B B'
inline Matrix project_out(const Matrix& m, const Basis& b) { return m - project(m, b); }

// ---------------------------------------------------------------------------
// SVD

struct SvdResult {
  Matrix u;                             ///< m x k, orthonormal columns
  std::vector<double> singular_values;  ///< k values, nonincreasing
  Matrix v;                             ///< n x k, orthonormal columns
};

struct SvdOptions {
  int max_sweeps = 100;
  double off_diagonal_tol = 1e-12;
  double rank_tol = 1e-10;  ///< relative to sigma_max
};

namespace detail {

// One-sided Jacobi on a tall matrix (rows >= cols). Columns are stored
// contiguously to keep the rotations cache friendly.
inline SvdResult jacobi_svd_tall(const Matrix& a, const SvdOptions& opt) {
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();
  std::vector<std::vector<double>> w(n, std::vector<double>(m));
  std::vector<std::vector<double>> v(n, std::vector<double>(n, 0.0));
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < m; ++i) w[j][i] = a(i, j);
    v[j][j] = 1.0;
  }

  auto dot = [](const std::vector<double>& x, const std::vector<double>& y) {
    return std::inner_product(x.begin(), x.end(), y.begin(), 0.0);
  };
  auto rotate = [](std::vector<double>& x, std::vector<double>& y, double c, double s) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double xi = x[i];
      const double yi = y[i];
      x[i] = c * xi - s * yi;
      y[i] = s * xi + c * yi;
    }
  };

  bool converged = n < 2;
  for (int sweep = 0; sweep < opt.max_sweeps && !converged; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double alpha = dot(w[p], w[p]);
        const double beta = dot(w[q], w[q]);
        const double gamma = dot(w[p], w[q]);
        if (gamma == 0.0 || std::abs(gamma) <= opt.off_diagonal_tol * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        rotate(w[p], w[q], c, s);
        rotate(v[p], v[q], c, s);
      }
    }
    converged = !rotated;
  }
  if (!converged) throw NumericalError("svd: Jacobi sweeps did not converge");

  std::vector<double> sigma(n);
  for (std::size_t j = 0; j < n; ++j) sigma[j] = std::sqrt(dot(w[j], w[j]));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return sigma[x] > sigma[y]; });

  SvdResult out{Matrix(m, n), std::vector<double>(n), Matrix(n, n)};
  const double sigma_max = n == 0 ? 0.0 : sigma[order[0]];
  std::vector<std::vector<double>> ucols;
  std::vector<std::size_t> deficient;
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t j = order[k];
    out.singular_values[k] = sigma[j];
    for (std::size_t i = 0; i < n; ++i) out.v(i, k) = v[j][i];
    std::vector<double> col(m, 0.0);
    if (sigma[j] > 0.0 && sigma[j] > opt.rank_tol * sigma_max) {
      for (std::size_t i = 0; i < m; ++i) col[i] = w[j][i] / sigma[j];
    } else {
      deficient.push_back(k);
    }
    ucols.push_back(std::move(col));
  }
  // Numerically null directions get an orthonormal completion so U'U = I.
  std::vector<bool> filled(n, true);
  for (std::size_t k : deficient) filled[k] = false;
  // Some unit vector e_i always keeps a residual of at least 1/sqrt(m), so
  // the first candidate clearing 1/sqrt(2m) is accepted.
  const double good_enough = 1.0 / std::sqrt(2.0 * static_cast<double>(std::max<std::size_t>(m, 1)));
  std::size_t next_e = 0;
  for (std::size_t k : deficient) {
    std::vector<double> best;
    double best_norm = -1.0;
    for (std::size_t step = 0; step < m && best_norm < good_enough; ++step) {
      const std::size_t e = (next_e + step) % m;
      std::vector<double> cand(m, 0.0);
      cand[e] = 1.0;
      for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t o = 0; o < n; ++o) {
          if (!filled[o]) continue;
          const double d = dot(ucols[o], cand);
          for (std::size_t i = 0; i < m; ++i) cand[i] -= d * ucols[o][i];
        }
      }
      const double norm = std::sqrt(dot(cand, cand));
      if (norm > best_norm + 1e-12) {
        best_norm = norm;
        best = std::move(cand);
        next_e = e + 1;
      }
    }
    for (double& x : best) x /= best_norm;
    ucols[k] = std::move(best);
    filled[k] = true;
  }
  for (std::size_t k = 0; k < n; ++k) {
    // Sign convention: largest-magnitude entry of each left vector is positive.
    std::size_t arg = 0;
    for (std::size_t i = 1; i < m; ++i)
      if (std::abs(ucols[k][i]) > std::abs(ucols[k][arg])) arg = i;
    const double sign = (m > 0 && ucols[k][arg] < 0.0) ? -1.0 : 1.0;
    for (std::size_t i = 0; i < m; ++i) out.u(i, k) = sign * ucols[k][i];
    if (sign < 0.0)
      for (std::size_t i = 0; i < n; ++i) out.v(i, k) = -out.v(i, k);
  }
  return out;
}

}  // namespace detail

/// Thin SVD M = U diag(s) V' with s nonincreasing.
inline SvdResult svd(const Matrix& m, const SvdOptions& opt = {}) {
  detail::require(m.all_finite(), "svd: non-finite input");
  if (m.rows() >= m.cols()) return detail::jacobi_svd_tall(m, opt);
  // Wide input: factor the transpose and swap roles, then restore the sign
  // convention on the new left vectors.
  SvdResult t = detail::jacobi_svd_tall(m.transposed(), opt);
  SvdResult out{std::move(t.v), std::move(t.singular_values), std::move(t.u)};
  for (std::size_t k = 0; k < out.u.cols(); ++k) {
    std::size_t arg = 0;
    for (std::size_t i = 1; i < out.u.rows(); ++i)
      if (std::abs(out.u(i, k)) > std::abs(out.u(arg, k))) arg = i;
    if (out.u.rows() > 0 && out.u(arg, k) < 0.0) {
      for (std::size_t i = 0; i < out.u.rows(); ++i) out.u(i, k) = -out.u(i, k);
      for (std::size_t i = 0; i < out.v.rows(); ++i) out.v(i, k) = -out.v(i, k);
    }
  }
  return out;
}

/// U diag(s) V'
inline Matrix reconstruct(const SvdResult& r) {
  Matrix us = r.u;
  for (std::size_t i = 0; i < us.rows(); ++i)
    for (std::size_t k = 0; k < us.cols(); ++k) us(i, k) *= r.singular_values[k];
  return matmul_nt(us, r.v);
}

}  // namespace cuber
