#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "glossalign/matrix.hpp"
#include "glossalign/model.hpp"

namespace glossalign {

/// One learning-rate group. The artifact keeps the dual-rate recipe even
/// though every head tensor lands in "custom"; "base" is reserved for
/// encoder fine-tuning and stays empty by default.
struct ParamGroup {
  std::string name;
  double lr = 3e-4;
  double weight_decay = 0.01;
  std::vector<std::size_t> tensor_indices;
};

/// base (lr 4e-5, empty) + custom (lr 3e-4, all head tensors).
std::vector<ParamGroup> default_groups(const ContextHeadParams& params, double lr_base = 4e-5,
                                       double lr_custom = 3e-4, double weight_decay = 0.01);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamWState {
  std::uint64_t step = 0;
  std::vector<Matrix> m;
  std::vector<Matrix> v;

  static AdamWState for_params(const ContextHeadParams& params);
};

/// Decoupled-decay AdamW step over all groups:
///   m <- β1 m + (1-β1) g;  v <- β2 v + (1-β2) g²
///   θ <- θ - lr·m̂/(√v̂ + eps) - lr·wd·θ
/// Throws NonFiniteGradient if any gradient entry is NaN/Inf.
void adamw_step(ContextHeadParams& params, const HeadGradients& grads, AdamWState& state,
                const std::vector<ParamGroup>& groups, const AdamConfig& cfg = {});

struct PlateauConfig {
  std::size_t patience = 5;
  double factor = 0.5;
  double min_lr = 1e-7;
  double threshold = 1e-4;  // relative

  void validate() const;
};

/// Reduce-on-plateau over a minimized metric (validation total loss).
struct PlateauState {
  PlateauConfig config;
  double best = std::numeric_limits<double>::infinity();
  std::size_t bad_epochs = 0;
};

/// Improvement means metric < best·(1-threshold). After more than
/// `patience` consecutive non-improving epochs every group lr is multiplied
/// by `factor` (floored at min_lr) and the counter resets. Learning rates
/// never increase.
void plateau_update(PlateauState& state, double epoch_metric, std::vector<ParamGroup>& groups);

}  // namespace glossalign
