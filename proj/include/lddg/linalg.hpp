// Copyright 2026 The LDDG Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef LDDG_LINALG_HPP_
#define LDDG_LINALG_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace lddg {

/// Raised for every contract violation in the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dense row-major matrix of doubles.
///
/// A matrix with zero rows is allowed and represents an empty batch. Entries
/// supplied at construction must be finite; in-place arithmetic afterwards is
/// the caller's responsibility.
class Matrix {
 public:
  Matrix() = default;

  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {
    if (!std::isfinite(fill)) throw Error("Matrix: non-finite fill value");
  }

  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      std::ostringstream os;
      os << "Matrix: data length " << data_.size() << " does not match shape "
         << rows_ << "x" << cols_;
      throw Error(os.str());
    }
    for (double v : data_) {
      if (!std::isfinite(v)) throw Error("Matrix: non-finite entry on construction");
    }
  }

  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.begin()->size();
    std::vector<double> data;
    data.reserve(r * c);
    for (const auto& row : rows) {
      if (row.size() != c) throw Error("Matrix::from_rows: ragged rows");
      data.insert(data.end(), row.begin(), row.end());
    }
    return Matrix(r, c, std::move(data));
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  static Matrix column(std::span<const double> v) {
    return Matrix(v.size(), 1, std::vector<double>(v.begin(), v.end()));
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  const std::vector<double>& values() const { return data_; }

  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

  std::vector<double> col(std::size_t j) const {
    std::vector<double> out(rows_);
    for (std::size_t i = 0; i < rows_; ++i) out[i] = (*this)(i, j);
    return out;
  }

  Matrix transposed() const {
    Matrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
  }

  bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

  Matrix& operator+=(const Matrix& o) {
    require_same_shape(o, "+=");
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += o.data_[k];
    return *this;
  }
  Matrix& operator-=(const Matrix& o) {
    require_same_shape(o, "-=");
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= o.data_[k];
    return *this;
  }
  Matrix& operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
  }

  /// this += s * o
  Matrix& add_scaled(const Matrix& o, double s) {
    require_same_shape(o, "add_scaled");
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += s * o.data_[k];
    return *this;
  }

  double frobenius_norm() const {
    double s = 0.0;
    for (double v : data_) s += v * v;
    return std::sqrt(s);
  }

  double max_abs() const {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::abs(v));
    return m;
  }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

  std::string shape_string() const {
    return std::to_string(rows_) + "x" + std::to_string(cols_);
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  void require_same_shape(const Matrix& o, const char* op) const {
    if (!same_shape(o)) {
      throw Error(std::string("Matrix ") + op + ": shape mismatch " + shape_string() +
                  " vs " + o.shape_string());
    }
  }

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
inline Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
inline Matrix operator*(Matrix a, double s) { return a *= s; }
inline Matrix operator*(double s, Matrix a) { return a *= s; }

/// a * b
inline Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows())
    throw Error("matmul: inner dimensions differ (" + a.shape_string() + " * " +
                b.shape_string() + ")");
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto ci = c.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      auto bk = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) ci[j] += aik * bk[j];
    }
  }
  return c;
}

/// aᵀ * b
inline Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows())
    throw Error("matmul_tn: row counts differ (" + a.shape_string() + ", " +
                b.shape_string() + ")");
  Matrix c(a.cols(), b.cols());
  for (std::size_t k = 0; k < a.rows(); ++k) {
    auto ak = a.row(k);
    auto bk = b.row(k);
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double aki = ak[i];
      if (aki == 0.0) continue;
      auto ci = c.row(i);
      for (std::size_t j = 0; j < b.cols(); ++j) ci[j] += aki * bk[j];
    }
  }
  return c;
}

/// a * bᵀ
inline Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols())
    throw Error("matmul_nt: column counts differ (" + a.shape_string() + ", " +
                b.shape_string() + ")");
  Matrix c(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto ai = a.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      auto bj = b.row(j);
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += ai[k] * bj[k];
      c(i, j) = s;
    }
  }
  return c;
}

inline Matrix hadamard(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) throw Error("hadamard: shape mismatch");
  Matrix c = a;
  auto cd = c.data();
  auto bd = b.data();
  for (std::size_t k = 0; k < cd.size(); ++k) cd[k] *= bd[k];
  return c;
}

/// Sum over rows, returned as a 1 x cols matrix.
inline Matrix column_sums(const Matrix& a) {
  Matrix s(1, a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto ai = a.row(i);
    for (std::size_t j = 0; j < a.cols(); ++j) s(0, j) += ai[j];
  }
  return s;
}

/// Outer product u vᵀ.
inline Matrix outer(std::span<const double> u, std::span<const double> v) {
  if (u.empty() || v.empty()) throw Error("outer: empty vector");
  Matrix m(u.size(), v.size());
  for (std::size_t i = 0; i < u.size(); ++i)
    for (std::size_t j = 0; j < v.size(); ++j) m(i, j) = u[i] * v[j];
  return m;
}

/// Thin SVD z = u diag(sigma) vᵀ with r = min(rows, cols).
struct SvdResult {
  Matrix u;                   // rows x r, orthonormal columns
  std::vector<double> sigma;  // non-increasing, non-negative
  Matrix v;                   // cols x r, orthonormal columns
};

namespace detail {

// Column-major scratch for the one-sided Jacobi sweeps.
struct ColumnStore {
  std::size_t m = 0;
  std::size_t n = 0;
  std::vector<double> data;

  double* col(std::size_t j) { return data.data() + j * m; }
  const double* col(std::size_t j) const { return data.data() + j * m; }
};

inline double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t k = 0; k < n; ++k) s += a[k] * b[k];
  return s;
}

// Fills columns flagged in `missing` with unit vectors orthogonal to every
// other column, drawing candidates from the standard basis.
inline void complete_orthonormal(Matrix& u, const std::vector<bool>& missing) {
  const std::size_t m = u.rows();
  const std::size_t r = u.cols();
  std::vector<bool> filled(r);
  for (std::size_t j = 0; j < r; ++j) filled[j] = !missing[j];
  for (std::size_t j = 0; j < r; ++j) {
    if (!missing[j]) continue;
    std::vector<double> best;
    double best_norm = -1.0;
    for (std::size_t e = 0; e < m; ++e) {
      std::vector<double> cand(m, 0.0);
      cand[e] = 1.0;
      for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t k = 0; k < r; ++k) {
          if (!filled[k]) continue;
          double p = 0.0;
          for (std::size_t i = 0; i < m; ++i) p += u(i, k) * cand[i];
          for (std::size_t i = 0; i < m; ++i) cand[i] -= p * u(i, k);
        }
      }
      double nrm = std::sqrt(std::inner_product(cand.begin(), cand.end(), cand.begin(), 0.0));
      if (nrm > best_norm + 1e-12) {
        best_norm = nrm;
        best = std::move(cand);
      }
    }
    for (std::size_t i = 0; i < m; ++i) u(i, j) = best[i] / best_norm;
    filled[j] = true;
  }
}

// One-sided Jacobi for a tall (m >= n) matrix.
inline SvdResult jacobi_svd_tall(const Matrix& a) {
  constexpr double kTol = 1e-12;
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();

  ColumnStore w{m, n, std::vector<double>(m * n)};
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) w.col(j)[i] = a(i, j);
  ColumnStore vs{n, n, std::vector<double>(n * n, 0.0)};
  for (std::size_t j = 0; j < n; ++j) vs.col(j)[j] = 1.0;

  double total = 0.0;
  for (double x : w.data) total += x * x;
  const double negligible = total * 1e-60;

  const std::size_t max_sweeps = 100 * std::max<std::size_t>(1, n);
  double off = 0.0;
  bool converged = false;
  for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
    off = 0.0;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        double* cp = w.col(p);
        double* cq = w.col(q);
        const double alpha = dot(cp, cp, m);
        const double beta = dot(cq, cq, m);
        if (alpha <= negligible || beta <= negligible) continue;
        const double gamma = dot(cp, cq, m);
        const double rel = std::abs(gamma) / std::sqrt(alpha * beta);
        off = std::max(off, rel);
        if (rel <= kTol) continue;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t i = 0; i < m; ++i) {
          const double x = cp[i];
          const double y = cq[i];
          cp[i] = c * x - s * y;
          cq[i] = s * x + c * y;
        }
        double* vp = vs.col(p);
        double* vq = vs.col(q);
        for (std::size_t i = 0; i < n; ++i) {
          const double x = vp[i];
          const double y = vq[i];
          vp[i] = c * x - s * y;
          vq[i] = s * x + c * y;
        }
      }
    }
    if (off <= kTol) {
      converged = true;
      break;
    }
  }
  if (!converged) {
    std::ostringstream os;
    os << "svd: one-sided Jacobi did not converge for " << m << "x" << n
       << " matrix (residual off-orthogonality " << off << ")";
    throw Error(os.str());
  }

  std::vector<double> norms(n);
  for (std::size_t j = 0; j < n; ++j) norms[j] = std::sqrt(dot(w.col(j), w.col(j), m));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return norms[x] > norms[y]; });

  SvdResult out{Matrix(m, n), std::vector<double>(n), Matrix(n, n)};
  const double smax = n > 0 ? norms[order[0]] : 0.0;
  const double null_threshold = std::max(smax * 1e-13 * static_cast<double>(m), 1e-300);
  std::vector<bool> missing(n, false);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t j = order[k];
    out.sigma[k] = norms[j];
    for (std::size_t i = 0; i < n; ++i) out.v(i, k) = vs.col(j)[i];
    if (norms[j] <= null_threshold) {
      missing[k] = true;
      continue;
    }
    for (std::size_t i = 0; i < m; ++i) out.u(i, k) = w.col(j)[i] / norms[j];
  }
  if (std::find(missing.begin(), missing.end(), true) != missing.end())
    complete_orthonormal(out.u, missing);
  return out;
}

}  // namespace detail

/// Thin singular value decomposition by one-sided Jacobi rotations.
///
/// Singular values come back sorted descending. Signs are fixed so that the
/// largest-magnitude entry of every U column is non-negative (first index
/// wins ties) and V columns follow. Throws when the sweep cap of
/// 100 * min(rows, cols) is exhausted before the off-orthogonality drops
/// below 1e-12.
inline SvdResult svd(const Matrix& z) {
  if (z.rows() == 0 || z.cols() == 0) throw Error("svd: empty matrix " + z.shape_string());
  if (!z.all_finite()) throw Error("svd: non-finite entries in " + z.shape_string() + " matrix");

  SvdResult r;
  if (z.rows() >= z.cols()) {
    r = detail::jacobi_svd_tall(z);
  } else {
    SvdResult t = detail::jacobi_svd_tall(z.transposed());
    r = SvdResult{std::move(t.v), std::move(t.sigma), std::move(t.u)};
  }

  for (std::size_t k = 0; k < r.sigma.size(); ++k) {
    std::size_t arg = 0;
    double best = -1.0;
    for (std::size_t i = 0; i < r.u.rows(); ++i) {
      if (std::abs(r.u(i, k)) > best) {
        best = std::abs(r.u(i, k));
        arg = i;
      }
    }
    if (r.u(arg, k) < 0.0) {
      for (std::size_t i = 0; i < r.u.rows(); ++i) r.u(i, k) = -r.u(i, k);
      for (std::size_t i = 0; i < r.v.rows(); ++i) r.v(i, k) = -r.v(i, k);
    }
  }
  return r;
}

inline std::vector<double> singular_values(const Matrix& z) { return svd(z).sigma; }

/// Central-difference gradient of a scalar function of a matrix.
template <class F>
Matrix finite_diff_grad(F&& f, const Matrix& z, double h) {
  if (!(h > 0.0)) throw Error("finite_diff_grad: step must be positive");
  Matrix g(z.rows(), z.cols());
  Matrix probe = z;
  for (std::size_t i = 0; i < z.rows(); ++i) {
    for (std::size_t j = 0; j < z.cols(); ++j) {
      const double orig = probe(i, j);
      probe(i, j) = orig + h;
      const double fp = f(static_cast<const Matrix&>(probe));
      probe(i, j) = orig - h;
      const double fm = f(static_cast<const Matrix&>(probe));
      probe(i, j) = orig;
      g(i, j) = (fp - fm) / (2.0 * h);
    }
  }
  return g;
}

/// Largest entrywise deviation of `a` from `b`, scaled by the larger of the
/// two magnitudes (floored at `floor`).
inline double max_relative_error(const Matrix& a, const Matrix& b, double floor = 1e-12) {
  if (!a.same_shape(b)) throw Error("max_relative_error: shape mismatch");
  const double scale = std::max({a.max_abs(), b.max_abs(), floor});
  return (a - b).max_abs() / scale;
}

}  // namespace lddg

#endif  // LDDG_LINALG_HPP_
