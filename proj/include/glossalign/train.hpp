#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "glossalign/data.hpp"
#include "glossalign/losses.hpp"
#include "glossalign/model.hpp"
#include "glossalign/optim.hpp"

namespace glossalign {

struct TrainConfig {
  std::size_t epochs = 100;
  std::size_t batch_size = 64;
  LossConfig loss;
  double lr_base = 4e-5;
  double lr_custom = 3e-4;
  double weight_decay = 0.01;
  PlateauConfig scheduler;
  std::uint64_t seed = 42;
  double validation_fraction = 0.1;
  std::size_t checkpoint_every = 0;  // 0 = only the rolling + final files
  HeadConfig head;

  void validate() const;
};

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr_base = 0.0;
  double lr_custom = 0.0;
  double secs = 0.0;

  std::string to_json() const;
};

struct TrainLog {
  std::vector<EpochLog> epochs;
};

struct TrainResult {
  ContextHeadParams params;
  TrainLog log;
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> val_indices;
};

/// Sense-stratified split: per sense, floor(m·fraction) instances move to
/// validation, capped at m-1 so every validation sense also appears in
/// training. Deterministic in seed.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_by_sense(
    const Corpus& corpus, double validation_fraction, std::uint64_t seed);

/// Full training loop: seeded split, sense-grouped batches, train-mode
/// forwards, total loss, manual backprop through the head, AdamW, plateau
/// scheduling on validation loss. When out_dir is non-empty, writes
/// train_log.jsonl, a rolling checkpoint_last.vcbh each epoch, periodic
/// checkpoint_epoch_NNNN.vcbh, and checkpoint.vcbh on success — all
/// atomically. A non-finite loss aborts with NonFiniteLoss; files already
/// on disk stay untouched.
TrainResult train(const Corpus& corpus, const TrainConfig& cfg,
                  const std::filesystem::path& out_dir = {});

/// Mean total loss over the subset in eval mode (no dropout, no updates).
double evaluate_loss(const Corpus& corpus, const std::vector<std::size_t>& subset,
                     const ContextHeadParams& params, const LossConfig& loss_cfg,
                     std::size_t batch_size, std::uint64_t seed);

struct GradCheckCase {
  LossConfig loss;
  std::size_t n_heads = 1;
  std::size_t n_proj_layers = 1;
  std::size_t d_h = 4;
  std::size_t d_model = 3;
  std::size_t n_tokens = 3;
  std::size_t batch = 2;
  bool attention_bias = true;
  bool output_projection = true;
  // negative-control hook: scales the analytic gradient of one tensor so
  // the comparison must fail
  std::string corrupt_tensor;
  double corrupt_scale = 1.0;

  std::string describe() const;
};

struct GradCheckEntry {
  std::string tensor;
  double max_rel_error = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> tensors;
  double max_rel_error = 0.0;
  std::string worst_tensor;
  bool passed = false;  // max_rel_error < 1e-4

  std::string to_text() const;
};

/// Compares the analytic d(total loss)/dθ of a random tiny head against
/// central finite differences (step 1e-5) for every parameter entry.
GradCheckReport gradcheck(const GradCheckCase& config, std::uint64_t seed);

/// The acceptance sweep: λ ∈ {0,1} × τ ∈ {0.3,1.0} × both denominator
/// modes × n_heads ∈ {1,2} × n_proj_layers ∈ {1,2}.
std::vector<GradCheckCase> gradcheck_default_cases();

}  // namespace glossalign
