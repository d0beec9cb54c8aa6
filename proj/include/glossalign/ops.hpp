#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "glossalign/matrix.hpp"
#include "glossalign/rng.hpp"

namespace glossalign {

/// Contract every trainable operation obeys: a pure forward and an analytic
/// backward that must agree with central finite differences of the forward.
/// The concrete ops delegate to the same kernels the model head uses.
class DifferentiableOp {
 public:
  virtual ~DifferentiableOp() = default;

  virtual const char* name() const = 0;

  virtual Matrix forward(std::span<const Matrix> inputs) const = 0;

  /// Gradients of sum(upstream ⊙ forward(inputs)) w.r.t. each input.
  virtual std::vector<Matrix> backward(std::span<const Matrix> inputs,
                                       const Matrix& upstream) const = 0;

  /// Draws a random well-formed input set (small shapes) for contract checks.
  virtual std::vector<Matrix> sample_inputs(Rng& rng) const = 0;
};

/// All registered ops, for the finite-difference contract test and gradcheck.
std::vector<std::unique_ptr<const DifferentiableOp>> differentiable_ops();

}  // namespace glossalign
