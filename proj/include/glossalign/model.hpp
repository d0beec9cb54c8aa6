#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "glossalign/matrix.hpp"

namespace glossalign {

/// Shape and regularization of the context head. `base()` / `large()` carry
/// the published presets; synthetic corpora use smaller dims read from the
/// embedding files.
struct HeadConfig {
  std::size_t d_h = 768;
  std::size_t d_model = 768;
  std::size_t n_heads = 3;
  std::size_t n_proj_layers = 1;
  double dropout_rate = 0.3;
  bool attention_bias = true;
  bool output_projection = true;

  static HeadConfig base() { return HeadConfig{768, 768, 3, 1, 0.3, true, true}; }
  static HeadConfig large() { return HeadConfig{1024, 768, 4, 2, 0.3, true, true}; }

  std::size_t head_dim() const { return d_h / n_heads; }

  /// Throws ConfigInvalid on violated invariants (divisibility, ranges).
  void validate() const;
};

struct TensorSpec {
  std::string name;
  std::size_t rows, cols;
};

/// Fixed tensor order for a config: per-head q/k/v projections (+ biases),
/// attention output projection, then the projection stack. Checkpoints,
/// the optimizer, and gradcheck all iterate this layout.
std::vector<TensorSpec> tensor_layout(const HeadConfig& config);

/// All trainable tensors of the context head, stored in layout order.
struct ContextHeadParams {
  HeadConfig config;
  std::vector<Matrix> tensors;

  // layout accessors (h = head index, l = projection layer index)
  std::size_t per_head_stride() const { return config.attention_bias ? 6 : 3; }
  const Matrix& wq(std::size_t h) const { return tensors[h * per_head_stride() + 0]; }
  const Matrix& wk(std::size_t h) const { return tensors[h * per_head_stride() + (config.attention_bias ? 2 : 1)]; }
  const Matrix& wv(std::size_t h) const { return tensors[h * per_head_stride() + (config.attention_bias ? 4 : 2)]; }
  const Matrix& bq(std::size_t h) const { return tensors[h * per_head_stride() + 1]; }
  const Matrix& bk(std::size_t h) const { return tensors[h * per_head_stride() + 3]; }
  const Matrix& bv(std::size_t h) const { return tensors[h * per_head_stride() + 5]; }
  std::size_t wo_index() const { return config.n_heads * per_head_stride(); }
  const Matrix& wo() const { return tensors[wo_index()]; }
  const Matrix& bo() const { return tensors[wo_index() + 1]; }
  std::size_t proj_base() const {
    return wo_index() + (config.output_projection ? 2 : 0);
  }
  const Matrix& proj_w(std::size_t l) const { return tensors[proj_base() + 2 * l]; }
  const Matrix& proj_b(std::size_t l) const { return tensors[proj_base() + 2 * l + 1]; }

  bool is_finite() const {
    for (const auto& t : tensors)
      if (!t.is_finite()) return false;
    return true;
  }
};

/// Gradients shaped exactly like ContextHeadParams::tensors.
using HeadGradients = std::vector<Matrix>;

HeadGradients zero_gradients(const ContextHeadParams& params);

/// Xavier-uniform weights (bound sqrt(6/(fan_in+fan_out))), zero biases,
/// deterministic in (config, seed).
ContextHeadParams init_params(const HeadConfig& config, std::uint64_t seed);

/// Half-open token range [start, end) of the target word.
struct Span {
  std::size_t start = 0;
  std::size_t end = 0;
};

/// Train/eval switch plus the seed for the per-forward dropout stream.
struct DropoutState {
  bool training = false;
  std::uint64_t seed = 0;

  static DropoutState eval() { return {false, 0}; }
  static DropoutState train(std::uint64_t seed) { return {true, seed}; }
};

/// Intermediate activations of one forward pass, kept for the backward
/// pass. Reused across instances to avoid per-call allocation.
struct ForwardCache {
  Vec q;                        // pooled query, d_h
  std::vector<Vec> qp;          // per head, d_k
  std::vector<Matrix> k, v;     // per head, n×d_k
  std::vector<Vec> scores;      // per head, n (already scaled)
  std::vector<Vec> weights;     // per head, n
  Vec concat;                   // d_h
  Vec attn;                     // d_h (after output projection)
  Vec dropout_scale;            // d_h; empty in eval mode
  std::vector<Vec> proj_in;     // input of each projection layer
  std::vector<Vec> proj_z;      // pre-activation of each projection layer
  Vec e;                        // unit-norm output, d_model
};

/// Arithmetic mean of rows [span.start, span.end). Throws SpanOutOfRange.
Vec mean_pool_span(const Matrix& h, Span span);

/// Scaled dot-product attention with a single pooled query; heads are
/// concatenated and passed through the output projection. Dropout is
/// applied to the result in train mode only.
Vec multi_head_attention(const Vec& q, const Matrix& h, const ContextHeadParams& params,
                         DropoutState dropout);

/// Projection stack (ReLU between layers, none after the last), then
/// L2-normalization. Throws ZeroRow when the projected vector is
/// numerically zero.
Vec project(const Vec& v, const ContextHeadParams& params);

/// Full head: mean_pool_span -> multi_head_attention -> project.
/// Returns the unit-norm context embedding.
Vec context_forward(const Matrix& h_c, Span span, const ContextHeadParams& params,
                    DropoutState dropout);

/// Same, recording activations for context_backward.
Vec context_forward_cached(const Matrix& h_c, Span span, const ContextHeadParams& params,
                           DropoutState dropout, ForwardCache& cache);

/// Accumulates d(loss)/d(params) into grads given the upstream gradient on
/// the unit-norm output. The token matrix is a frozen input, so no gradient
/// is propagated into it.
void context_backward(const Matrix& h_c, Span span, const ContextHeadParams& params,
                      const ForwardCache& cache, const Vec& grad_e, HeadGradients& grads);

}  // namespace glossalign
