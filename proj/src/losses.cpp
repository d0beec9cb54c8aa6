#include "glossalign/losses.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "glossalign/kernels.hpp"

namespace glossalign {

DenominatorMode denominator_mode_from_string(const std::string& s) {
  if (s == "literal-exclude-anchor") return DenominatorMode::LiteralExcludeAnchor;
  if (s == "all-contexts") return DenominatorMode::AllContexts;
  throw Error(Err::ConfigInvalid, "unknown denominator_mode '" + s + "'");
}

const char* to_string(DenominatorMode mode) {
  return mode == DenominatorMode::LiteralExcludeAnchor ? "literal-exclude-anchor" : "all-contexts";
}

void LossConfig::validate() const {
  if (!(tau > 0.0)) throw Error(Err::ConfigInvalid, "tau must be > 0");
  if (lambda < 0.0) throw Error(Err::ConfigInvalid, "lambda must be >= 0");
  if (epsilon < 0.0) throw Error(Err::ConfigInvalid, "epsilon must be >= 0");
}

namespace {

void check_batch(const BatchEmbeddings& batch) {
  if (!batch.contexts.same_shape(batch.glosses))
    throw Error(Err::DimMismatch, "C_B and G_B shapes differ");
  if (!batch.contexts.is_finite() || !batch.glosses.is_finite())
    throw Error(Err::NonFiniteInput, "batch embeddings contain NaN/Inf");
  if (batch.positives.size() != batch.size())
    throw Error(Err::DimMismatch, "positives size vs batch size");
}

}  // namespace

LossResult info_nce_from_scores(const Matrix& scores,
                                const std::vector<std::vector<std::size_t>>& positives,
                                DenominatorMode mode, double epsilon) {
  const std::size_t n = scores.rows();
  if (scores.cols() != n) throw Error(Err::DimMismatch, "score matrix must be square");
  if (n == 0) throw Error(Err::BatchTooSmall, "empty batch");
  if (mode == DenominatorMode::LiteralExcludeAnchor && n < 2)
    throw Error(Err::BatchTooSmall, "literal denominator needs N >= 2");
  if (!scores.is_finite()) throw Error(Err::NonFiniteInput, "scores contain NaN/Inf");

  LossResult res;
  res.grad_contexts = Matrix(n, n);
  Vec terms(n, 0.0);

  const std::int64_t ni = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static) if (ni > 8)
  for (std::int64_t ii = 0; ii < ni; ++ii) {
    const std::size_t i = static_cast<std::size_t>(ii);
    const double* s = scores.row(i);
    double mx = s[0];
    for (std::size_t k = 1; k < n; ++k) mx = std::max(mx, s[k]);

    double num = 0.0;  // Σ_{j∈P_i} e^{s_ij - mx}
    for (std::size_t j : positives[i]) num += std::exp(s[j] - mx);
    double den = 0.0;  // Σ_{k∈K_i} e^{s_ik - mx}
    for (std::size_t k = 0; k < n; ++k) {
      if (mode == DenominatorMode::LiteralExcludeAnchor && k == i) continue;
      den += std::exp(s[k] - mx);
    }
    const double eps_shift = epsilon * std::exp(-mx);
    terms[i] = std::log(den + eps_shift) - std::log(num);

    // d(term_i)/ds_ik
    double* g = res.grad_contexts.row(i);
    for (std::size_t k = 0; k < n; ++k) {
      double d = 0.0;
      if (mode == DenominatorMode::AllContexts || k != i)
        d += std::exp(s[k] - mx) / (den + eps_shift);
      g[k] = d;
    }
    for (std::size_t j : positives[i]) g[j] -= std::exp(s[j] - mx) / num;
  }

  double sum = 0.0;  // fixed reduction order for bit reproducibility
  for (std::size_t i = 0; i < n; ++i) sum += terms[i];
  res.value = sum / static_cast<double>(n);
  for (auto& v : res.grad_contexts.data()) v /= static_cast<double>(n);
  return res;
}

LossResult info_nce_loss(const BatchEmbeddings& batch, const LossConfig& cfg) {
  cfg.validate();
  check_batch(batch);
  const std::size_t n = batch.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (batch.positives[i].empty()) throw Error(Err::ConfigInvalid, "empty positive set");
    if (std::find(batch.positives[i].begin(), batch.positives[i].end(), i) ==
        batch.positives[i].end())
      throw Error(Err::ConfigInvalid, "anchor missing from its positive set");
  }

  Matrix scores = kernels::matmul_transb(batch.glosses, batch.contexts);
  for (auto& v : scores.data()) v /= cfg.tau;

  LossResult at_scores =
      info_nce_from_scores(scores, batch.positives, cfg.denominator_mode, cfg.epsilon);

  LossResult res;
  res.value = at_scores.value;
  // S = G·Cᵀ/τ  =>  dC = dSᵀ·G / τ
  res.grad_contexts = kernels::matmul_transa(at_scores.grad_contexts, batch.glosses);
  for (auto& v : res.grad_contexts.data()) v /= cfg.tau;
  return res;
}

LossResult semantic_structure_loss(const BatchEmbeddings& batch) {
  check_batch(batch);
  const std::size_t n = batch.size();

  // D_C - D_G == S_G - S_C; the loss only needs the difference.
  Matrix sim_c = kernels::matmul_transb(batch.contexts, batch.contexts);
  Matrix sim_g = kernels::matmul_transb(batch.glosses, batch.glosses);

  const double inv_n2 = 1.0 / static_cast<double>(n * n);
  double sum = 0.0;
  Matrix diff(n, n);  // S_C - S_G
  for (std::size_t idx = 0; idx < diff.data().size(); ++idx) {
    const double d = sim_c.data()[idx] - sim_g.data()[idx];
    diff.data()[idx] = d;
    sum += d * d;
  }

  LossResult res;
  res.value = sum * inv_n2;
  // d/dC of (1/N²)|S_G - S_C|² = (4/N²)(S_C - S_G)·C  (diff is symmetric)
  res.grad_contexts = kernels::matmul(diff, batch.contexts);
  for (auto& v : res.grad_contexts.data()) v *= 4.0 * inv_n2;
  return res;
}

LossResult total_loss(const BatchEmbeddings& batch, const LossConfig& cfg) {
  LossResult info = info_nce_loss(batch, cfg);
  if (cfg.lambda == 0.0) return info;
  LossResult ss = semantic_structure_loss(batch);
  LossResult res;
  res.value = info.value + cfg.lambda * ss.value;
  res.grad_contexts = std::move(info.grad_contexts);
  for (std::size_t i = 0; i < res.grad_contexts.data().size(); ++i)
    res.grad_contexts.data()[i] += cfg.lambda * ss.grad_contexts.data()[i];
  return res;
}

}  // namespace glossalign
