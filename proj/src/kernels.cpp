#include "glossalign/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

namespace glossalign::kernels {

namespace {
// Below this much work (fused multiply-adds) the parallel-for is pure
// overhead; the per-instance head matmuls stay serial and batch-level
// loops provide the parallelism instead.
constexpr std::int64_t kParallelCutoff = 1 << 16;
}  // namespace

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw Error(Err::DimMismatch, "matmul inner dimensions");
  const std::int64_t m = static_cast<std::int64_t>(a.rows());
  const std::size_t k = a.cols(), n = b.cols();
  Matrix out(a.rows(), n);
#pragma omp parallel for schedule(static) if (m * static_cast<std::int64_t>(n * k) > kParallelCutoff)
  for (std::int64_t i = 0; i < m; ++i) {
    const double* ai = a.row(static_cast<std::size_t>(i));
    double* oi = out.row(static_cast<std::size_t>(i));
    for (std::size_t l = 0; l < k; ++l) {
      const double av = ai[l];
      const double* bl = b.row(l);
      for (std::size_t j = 0; j < n; ++j) oi[j] += av * bl[j];
    }
  }
  return out;
}

Matrix matmul_transb(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) throw Error(Err::DimMismatch, "matmul_transb inner dimensions");
  const std::int64_t m = static_cast<std::int64_t>(a.rows());
  const std::size_t k = a.cols(), n = b.rows();
  Matrix out(a.rows(), n);
#pragma omp parallel for schedule(static) if (m * static_cast<std::int64_t>(n * k) > kParallelCutoff)
  for (std::int64_t i = 0; i < m; ++i) {
    const double* ai = a.row(static_cast<std::size_t>(i));
    double* oi = out.row(static_cast<std::size_t>(i));
    for (std::size_t j = 0; j < n; ++j) {
      const double* bj = b.row(j);
      double s = 0.0;
      for (std::size_t l = 0; l < k; ++l) s += ai[l] * bj[l];
      oi[j] = s;
    }
  }
  return out;
}

Matrix matmul_transa(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw Error(Err::DimMismatch, "matmul_transa inner dimensions");
  const std::int64_t m = static_cast<std::int64_t>(a.cols());
  const std::size_t k = a.rows(), n = b.cols();
  Matrix out(a.cols(), n);
#pragma omp parallel for schedule(static) if (m * static_cast<std::int64_t>(n * k) > kParallelCutoff)
  for (std::int64_t i = 0; i < m; ++i) {
    double* oi = out.row(static_cast<std::size_t>(i));
    for (std::size_t l = 0; l < k; ++l) {
      const double av = a(l, static_cast<std::size_t>(i));
      const double* bl = b.row(l);
      for (std::size_t j = 0; j < n; ++j) oi[j] += av * bl[j];
    }
  }
  return out;
}

namespace {

void softmax_row(const double* x, double* y, std::size_t n) {
  double mx = x[0];
  for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, x[j]);
  double sum = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    y[j] = std::exp(x[j] - mx);
    sum += y[j];
  }
  for (std::size_t j = 0; j < n; ++j) y[j] /= sum;
}

}  // namespace

Matrix softmax_rows(const Matrix& m) {
  if (m.empty()) return m;
  Matrix out(m.rows(), m.cols());
  const std::int64_t rows = static_cast<std::int64_t>(m.rows());
#pragma omp parallel for schedule(static) if (rows * static_cast<std::int64_t>(m.cols()) > kParallelCutoff)
  for (std::int64_t i = 0; i < rows; ++i)
    softmax_row(m.row(static_cast<std::size_t>(i)), out.row(static_cast<std::size_t>(i)), m.cols());
  return out;
}

Matrix softmax_rows_backward(const Matrix& y, const Matrix& dy) {
  if (!y.same_shape(dy)) throw Error(Err::DimMismatch, "softmax backward shapes");
  Matrix dx(y.rows(), y.cols());
  for (std::size_t i = 0; i < y.rows(); ++i) {
    const double* yi = y.row(i);
    const double* di = dy.row(i);
    double s = 0.0;
    for (std::size_t j = 0; j < y.cols(); ++j) s += yi[j] * di[j];
    double* o = dx.row(i);
    for (std::size_t j = 0; j < y.cols(); ++j) o[j] = yi[j] * (di[j] - s);
  }
  return dx;
}

Matrix l2_normalize_rows(const Matrix& m) {
  Matrix out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const double* x = m.row(i);
    double n2 = 0.0;
    for (std::size_t j = 0; j < m.cols(); ++j) n2 += x[j] * x[j];
    const double n = std::sqrt(n2);
    if (n <= 1e-12) throw Error(Err::ZeroRow, "row " + std::to_string(i) + " has norm <= 1e-12");
    double* y = out.row(i);
    for (std::size_t j = 0; j < m.cols(); ++j) y[j] = x[j] / n;
  }
  return out;
}

Matrix l2_normalize_rows_backward(const Matrix& x, const Matrix& dy) {
  if (!x.same_shape(dy)) throw Error(Err::DimMismatch, "l2_normalize backward shapes");
  Matrix dx(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const double* xi = x.row(i);
    const double* di = dy.row(i);
    double n2 = 0.0;
    for (std::size_t j = 0; j < x.cols(); ++j) n2 += xi[j] * xi[j];
    const double n = std::sqrt(n2);
    if (n <= 1e-12) throw Error(Err::ZeroRow, "row " + std::to_string(i) + " has norm <= 1e-12");
    double yd = 0.0;  // dot(y, dy)
    for (std::size_t j = 0; j < x.cols(); ++j) yd += (xi[j] / n) * di[j];
    double* o = dx.row(i);
    for (std::size_t j = 0; j < x.cols(); ++j) o[j] = (di[j] - (xi[j] / n) * yd) / n;
  }
  return dx;
}

Matrix cosine_sim_matrix(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) throw Error(Err::DimMismatch, "cosine_sim_matrix column dims");
  return matmul_transb(a, b);
}

Vec vec_mat(const Vec& v, const Matrix& m) {
  if (v.size() != m.rows()) throw Error(Err::DimMismatch, "vec_mat dims");
  Vec out(m.cols(), 0.0);
  for (std::size_t l = 0; l < v.size(); ++l) {
    const double av = v[l];
    const double* ml = m.row(l);
    for (std::size_t j = 0; j < m.cols(); ++j) out[j] += av * ml[j];
  }
  return out;
}

Vec mat_vec(const Matrix& m, const Vec& v) {
  if (v.size() != m.cols()) throw Error(Err::DimMismatch, "mat_vec dims");
  Vec out(m.rows(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const double* mi = m.row(i);
    double s = 0.0;
    for (std::size_t j = 0; j < m.cols(); ++j) s += mi[j] * v[j];
    out[i] = s;
  }
  return out;
}

void outer_add(Matrix& acc, const Vec& u, const Vec& v) {
  if (acc.rows() != u.size() || acc.cols() != v.size())
    throw Error(Err::DimMismatch, "outer_add dims");
  for (std::size_t i = 0; i < u.size(); ++i) {
    double* ai = acc.row(i);
    const double ui = u[i];
    for (std::size_t j = 0; j < v.size(); ++j) ai[j] += ui * v[j];
  }
}

Vec col_sums(const Matrix& m) {
  Vec out(m.cols(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const double* mi = m.row(i);
    for (std::size_t j = 0; j < m.cols(); ++j) out[j] += mi[j];
  }
  return out;
}

namespace serial {

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw Error(Err::DimMismatch, "matmul inner dimensions");
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* ai = a.row(i);
    double* oi = out.row(i);
    for (std::size_t l = 0; l < a.cols(); ++l) {
      const double av = ai[l];
      const double* bl = b.row(l);
      for (std::size_t j = 0; j < b.cols(); ++j) oi[j] += av * bl[j];
    }
  }
  return out;
}

Matrix softmax_rows(const Matrix& m) {
  if (m.empty()) return m;
  Matrix out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i) softmax_row(m.row(i), out.row(i), m.cols());
  return out;
}

Matrix cosine_sim_matrix(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) throw Error(Err::DimMismatch, "cosine_sim_matrix column dims");
  Matrix out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* ai = a.row(i);
    double* oi = out.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const double* bj = b.row(j);
      double s = 0.0;
      for (std::size_t l = 0; l < a.cols(); ++l) s += ai[l] * bj[l];
      oi[j] = s;
    }
  }
  return out;
}

}  // namespace serial

}  // namespace glossalign::kernels
