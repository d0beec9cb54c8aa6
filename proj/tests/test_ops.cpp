#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "glossalign/ops.hpp"
#include "test_helpers.hpp"

using namespace glossalign;

namespace {

// central finite differences of sum(upstream ⊙ forward) w.r.t. every input
// entry — the independent oracle for every DifferentiableOp
double fd_gradient(const DifferentiableOp& op, std::vector<Matrix>& inputs,
                   const Matrix& upstream, std::size_t input_idx, std::size_t entry) {
  const double step = 1e-5;
  double& x = inputs[input_idx].data()[entry];
  const double saved = x;
  auto weighted = [&]() {
    const Matrix out = op.forward(inputs);
    double s = 0.0;
    for (std::size_t i = 0; i < out.data().size(); ++i) s += out.data()[i] * upstream.data()[i];
    return s;
  };
  x = saved + step;
  const double up = weighted();
  x = saved - step;
  const double down = weighted();
  x = saved;
  return (up - down) / (2.0 * step);
}

}  // namespace

TEST_CASE("every registered op: analytic backward matches finite differences") {
  Rng rng(101);
  for (const auto& op : differentiable_ops()) {
    CAPTURE(op->name());
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<Matrix> inputs = op->sample_inputs(rng);
      const Matrix out = op->forward(inputs);
      Matrix upstream(out.rows(), out.cols());
      for (auto& v : upstream.data()) v = 2.0 * rng.next_double() - 1.0;

      const std::vector<Matrix> analytic = op->backward(inputs, upstream);
      REQUIRE(analytic.size() == inputs.size());
      for (std::size_t in = 0; in < inputs.size(); ++in) {
        REQUIRE(analytic[in].same_shape(inputs[in]));
        for (std::size_t e = 0; e < inputs[in].data().size(); ++e) {
          const double fd = fd_gradient(*op, inputs, upstream, in, e);
          const double err = testing::rel_error(analytic[in].data()[e], fd);
          if (err >= 1e-4) {
            CAPTURE(trial);
            CAPTURE(in);
            CAPTURE(e);
          }
          CHECK(err < 1e-4);
        }
      }
    }
  }
}

TEST_CASE("op forwards stay finite on sampled inputs") {
  Rng rng(102);
  for (const auto& op : differentiable_ops()) {
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<Matrix> inputs = op->sample_inputs(rng);
      CHECK(op->forward(inputs).is_finite());
    }
  }
}
