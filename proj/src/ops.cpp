#include "glossalign/ops.hpp"

#include "glossalign/kernels.hpp"

namespace glossalign {

namespace {

Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols, double scale = 1.0) {
  Matrix m(rows, cols);
  for (auto& v : m.data()) v = scale * (2.0 * rng.next_double() - 1.0);
  return m;
}

struct MatMulOp final : DifferentiableOp {
  const char* name() const override { return "matmul"; }
  Matrix forward(std::span<const Matrix> in) const override {
    return kernels::matmul(in[0], in[1]);
  }
  std::vector<Matrix> backward(std::span<const Matrix> in, const Matrix& up) const override {
    return {kernels::matmul_transb(up, in[1]), kernels::matmul_transa(in[0], up)};
  }
  std::vector<Matrix> sample_inputs(Rng& rng) const override {
    std::size_t m = 1 + rng.next_below(4), k = 1 + rng.next_below(4), n = 1 + rng.next_below(4);
    return {random_matrix(rng, m, k), random_matrix(rng, k, n)};
  }
};

struct SoftmaxRowsOp final : DifferentiableOp {
  const char* name() const override { return "softmax_rows"; }
  Matrix forward(std::span<const Matrix> in) const override {
    return kernels::softmax_rows(in[0]);
  }
  std::vector<Matrix> backward(std::span<const Matrix> in, const Matrix& up) const override {
    return {kernels::softmax_rows_backward(kernels::softmax_rows(in[0]), up)};
  }
  std::vector<Matrix> sample_inputs(Rng& rng) const override {
    return {random_matrix(rng, 1 + rng.next_below(4), 2 + rng.next_below(4), 2.0)};
  }
};

struct L2NormalizeRowsOp final : DifferentiableOp {
  const char* name() const override { return "l2_normalize_rows"; }
  Matrix forward(std::span<const Matrix> in) const override {
    return kernels::l2_normalize_rows(in[0]);
  }
  std::vector<Matrix> backward(std::span<const Matrix> in, const Matrix& up) const override {
    return {kernels::l2_normalize_rows_backward(in[0], up)};
  }
  std::vector<Matrix> sample_inputs(Rng& rng) const override {
    // rows bounded away from zero so the FD perturbation stays in-domain
    Matrix m = random_matrix(rng, 1 + rng.next_below(4), 2 + rng.next_below(4));
    for (std::size_t i = 0; i < m.rows(); ++i) {
      double n = 0.0;
      for (std::size_t j = 0; j < m.cols(); ++j) n += m(i, j) * m(i, j);
      if (std::sqrt(n) < 0.5) m(i, 0) += 1.0;
    }
    return {m};
  }
};

struct ReluOp final : DifferentiableOp {
  const char* name() const override { return "relu"; }
  Matrix forward(std::span<const Matrix> in) const override {
    Matrix out = in[0];
    for (auto& v : out.data()) v = v > 0.0 ? v : 0.0;
    return out;
  }
  std::vector<Matrix> backward(std::span<const Matrix> in, const Matrix& up) const override {
    Matrix dx = up;
    for (std::size_t i = 0; i < dx.data().size(); ++i)
      if (in[0].data()[i] <= 0.0) dx.data()[i] = 0.0;
    return {dx};
  }
  std::vector<Matrix> sample_inputs(Rng& rng) const override {
    // keep entries away from the kink where FD is one-sided
    Matrix m = random_matrix(rng, 1 + rng.next_below(4), 1 + rng.next_below(4));
    for (auto& v : m.data())
      if (std::fabs(v) < 1e-3) v = 0.1;
    return {m};
  }
};

struct AddRowBiasOp final : DifferentiableOp {
  const char* name() const override { return "add_row_bias"; }
  Matrix forward(std::span<const Matrix> in) const override {
    if (in[1].rows() != 1 || in[0].cols() != in[1].cols())
      throw Error(Err::DimMismatch, "add_row_bias shapes");
    Matrix out = in[0];
    for (std::size_t i = 0; i < out.rows(); ++i)
      for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) += in[1](0, j);
    return out;
  }
  std::vector<Matrix> backward(std::span<const Matrix> in, const Matrix& up) const override {
    Matrix db(1, in[1].cols());
    for (std::size_t i = 0; i < up.rows(); ++i)
      for (std::size_t j = 0; j < up.cols(); ++j) db(0, j) += up(i, j);
    return {up, db};
  }
  std::vector<Matrix> sample_inputs(Rng& rng) const override {
    std::size_t r = 1 + rng.next_below(4), c = 1 + rng.next_below(4);
    return {random_matrix(rng, r, c), random_matrix(rng, 1, c)};
  }
};

struct MeanPoolRowsOp final : DifferentiableOp {
  const char* name() const override { return "mean_pool_rows"; }
  Matrix forward(std::span<const Matrix> in) const override {
    Matrix out(1, in[0].cols());
    for (std::size_t i = 0; i < in[0].rows(); ++i)
      for (std::size_t j = 0; j < in[0].cols(); ++j) out(0, j) += in[0](i, j);
    for (auto& v : out.data()) v /= static_cast<double>(in[0].rows());
    return out;
  }
  std::vector<Matrix> backward(std::span<const Matrix> in, const Matrix& up) const override {
    Matrix dx(in[0].rows(), in[0].cols());
    const double inv = 1.0 / static_cast<double>(in[0].rows());
    for (std::size_t i = 0; i < dx.rows(); ++i)
      for (std::size_t j = 0; j < dx.cols(); ++j) dx(i, j) = up(0, j) * inv;
    return {dx};
  }
  std::vector<Matrix> sample_inputs(Rng& rng) const override {
    return {random_matrix(rng, 1 + rng.next_below(5), 1 + rng.next_below(4))};
  }
};

}  // namespace

std::vector<std::unique_ptr<const DifferentiableOp>> differentiable_ops() {
  std::vector<std::unique_ptr<const DifferentiableOp>> ops;
  ops.push_back(std::make_unique<MatMulOp>());
  ops.push_back(std::make_unique<SoftmaxRowsOp>());
  ops.push_back(std::make_unique<L2NormalizeRowsOp>());
  ops.push_back(std::make_unique<ReluOp>());
  ops.push_back(std::make_unique<AddRowBiasOp>());
  ops.push_back(std::make_unique<MeanPoolRowsOp>());
  return ops;
}

}  // namespace glossalign
