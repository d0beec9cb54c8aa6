#pragma once

#include <filesystem>
#include <optional>

#include "glossalign/model.hpp"
#include "glossalign/optim.hpp"

namespace glossalign {

// Checkpoint layout (little-endian):
//   magic "VCBH", version u32
//   config: 5×u32 (d_h, d_model, n_heads, n_proj_layers, flags) + f32 dropout
//     flags bit0 = attention biases, bit1 = output projection
//   tensors back to back: name-length u16, name UTF-8, rows u32, cols u32,
//     f32 row-major data
//   optional trailing section tagged "OPT1" framing optimizer/scheduler
//   state with the same tensor records ("step", "lr.base", "lr.custom",
//   "plateau.best", "plateau.bad" as 1×1 tensors, then m.* / v.* moments)

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct OptimizerSnapshot {
  AdamWState adam;
  double lr_base = 4e-5;
  double lr_custom = 3e-4;
  double plateau_best = 0.0;
  std::uint64_t plateau_bad_epochs = 0;
};

struct Checkpoint {
  ContextHeadParams params;
  std::optional<OptimizerSnapshot> optimizer;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace glossalign
