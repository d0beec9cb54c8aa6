#pragma once

#include "glossalign/matrix.hpp"

namespace glossalign::kernels {

// OpenMP-parallel dense kernels. Every output element is an independent
// dot product with a fixed summation order, so results are bit-identical
// to the serial reference for any thread count.

/// a(m×k) · b(k×n)
Matrix matmul(const Matrix& a, const Matrix& b);

/// a(m×k) · b(n×k)ᵀ -> m×n
Matrix matmul_transb(const Matrix& a, const Matrix& b);

/// a(k×m)ᵀ · b(k×n) -> m×n
Matrix matmul_transa(const Matrix& a, const Matrix& b);

/// Row-wise softmax with row-max subtraction. Empty matrix passes through.
Matrix softmax_rows(const Matrix& m);

/// dL/dx given y = softmax_rows(x) and upstream dL/dy.
Matrix softmax_rows_backward(const Matrix& y, const Matrix& dy);

/// Scales each row to unit Euclidean norm. Throws ZeroRow if a row norm
/// is <= 1e-12.
Matrix l2_normalize_rows(const Matrix& m);

/// dL/dx given x (pre-normalization input) and upstream dL/dy.
Matrix l2_normalize_rows_backward(const Matrix& x, const Matrix& dy);

/// result[i][j] = dot(a_i, b_j). Rows are expected pre-normalized, so this
/// is cosine similarity. Throws DimMismatch when a.cols != b.cols.
Matrix cosine_sim_matrix(const Matrix& a, const Matrix& b);

// Small vector helpers used by the model head (single-query path).
Vec vec_mat(const Vec& v, const Matrix& m);                // v(k) · m(k×n) -> n
Vec mat_vec(const Matrix& m, const Vec& v);                // m(r×k) · v(k) -> r
void outer_add(Matrix& acc, const Vec& u, const Vec& v);   // acc(i,j) += u[i]*v[j]
Vec col_sums(const Matrix& m);

/// Serial reference implementations kept for testing and benchmarking the
/// parallel kernels against.
namespace serial {
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix softmax_rows(const Matrix& m);
Matrix cosine_sim_matrix(const Matrix& a, const Matrix& b);
}  // namespace serial

}  // namespace glossalign::kernels
