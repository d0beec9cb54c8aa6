#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "glossalign/matrix.hpp"

namespace glossalign {

/// How the alignment-loss denominator ranges over the batch. The printed
/// formula sums over k != i (which permits negative loss values); the
/// all-contexts variant restores the standard non-negative supervised
/// contrastive form.
enum class DenominatorMode {
  LiteralExcludeAnchor,
  AllContexts,
};

DenominatorMode denominator_mode_from_string(const std::string& s);
const char* to_string(DenominatorMode mode);

struct LossConfig {
  double tau = 0.3;
  double lambda = 1.0;
  double epsilon = 1e-8;
  DenominatorMode denominator_mode = DenominatorMode::LiteralExcludeAnchor;

  void validate() const;
};

/// Aligned context/gloss rows for one batch. `positives[i]` holds every
/// batch index with the same sense as anchor i, including i itself.
struct BatchEmbeddings {
  Matrix contexts;  // N×d, trainable path
  Matrix glosses;   // N×d, frozen
  std::vector<std::vector<std::size_t>> positives;

  std::size_t size() const { return contexts.rows(); }
};

struct LossResult {
  double value = 0.0;
  Matrix grad_contexts;  // d(loss)/d(C_B), same shape as contexts
};

/// Gloss-context alignment loss: mean over anchors of
/// -log( Σ_{j∈P_i} exp(g_i·c_j/τ) / (D_i + ε) ), with D_i per the
/// denominator mode. Stable log-sum-exp; exact analytic gradient.
LossResult info_nce_loss(const BatchEmbeddings& batch, const LossConfig& cfg);

/// Seam below the embedding level: the same loss given the score matrix
/// S_ik = g_i·c_k/τ directly; grad is d(loss)/dS.
LossResult info_nce_from_scores(const Matrix& scores,
                                const std::vector<std::vector<std::size_t>>& positives,
                                DenominatorMode mode, double epsilon);

/// MSE between the batch dissimilarity matrices 1 - C·Cᵀ and 1 - G·Gᵀ,
/// averaged over all N² entries.
LossResult semantic_structure_loss(const BatchEmbeddings& batch);

/// InfoNCE + λ · structure loss.
LossResult total_loss(const BatchEmbeddings& batch, const LossConfig& cfg);

}  // namespace glossalign
