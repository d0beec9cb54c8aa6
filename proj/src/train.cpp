#include "glossalign/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <json.hpp>

#include "glossalign/checkpoint.hpp"
#include "glossalign/emb_io.hpp"
#include "glossalign/kernels.hpp"
#include "glossalign/rng.hpp"

namespace glossalign {

using nlohmann::json;

void TrainConfig::validate() const {
  if (epochs < 1) throw Error(Err::ConfigInvalid, "epochs must be >= 1");
  if (batch_size < 2) throw Error(Err::ConfigInvalid, "batch_size must be >= 2");
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
    throw Error(Err::ConfigInvalid, "validation_fraction in (0,1)");
  loss.validate();
  scheduler.validate();
  head.validate();
}

std::string EpochLog::to_json() const {
  json j{{"epoch", epoch},   {"train_loss", train_loss}, {"val_loss", val_loss},
         {"lr_base", lr_base}, {"lr_custom", lr_custom},   {"secs", secs}};
  return j.dump();
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_by_sense(
    const Corpus& corpus, double validation_fraction, std::uint64_t seed) {
  std::map<std::string, std::vector<std::size_t>> by_sense;
  for (std::size_t i = 0; i < corpus.instances.size(); ++i)
    by_sense[corpus.instances[i].sense_id].push_back(i);

  Rng rng(derive_seed(seed, 0x5f11));
  std::vector<std::size_t> train_idx, val_idx;
  for (auto& [sense, members] : by_sense) {
    rng.shuffle(members);
    std::size_t n_val = static_cast<std::size_t>(
        std::floor(validation_fraction * static_cast<double>(members.size())));
    if (n_val >= members.size()) n_val = members.size() - 1;
    for (std::size_t i = 0; i < members.size(); ++i)
      (i < n_val ? val_idx : train_idx).push_back(members[i]);
  }
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(val_idx.begin(), val_idx.end());
  return {std::move(train_idx), std::move(val_idx)};
}

namespace {

struct BatchWork {
  Matrix contexts;                 // N×d_model
  Matrix glosses;                  // N×d_model
  std::vector<ForwardCache> caches;
};

// Forward every instance of the batch (parallel; each row/cache slot is
// written by exactly one iteration) and assemble C_B / G_B.
void batch_forward(const Corpus& corpus, const BatchPlan& plan, const ContextHeadParams& params,
                   bool training, std::uint64_t dropout_base, BatchWork& work) {
  const std::size_t n = plan.instances.size();
  const std::size_t d = params.config.d_model;
  work.contexts.resize(n, d);
  work.glosses.resize(n, d);
  work.caches.resize(n);

  std::exception_ptr failure = nullptr;
  const std::int64_t ni = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static)
  for (std::int64_t ii = 0; ii < ni; ++ii) {
    try {
      const std::size_t i = static_cast<std::size_t>(ii);
      const ContextInstance& inst = corpus.instances[plan.instances[i]];
      DropoutState drop = training
                              ? DropoutState::train(derive_seed(dropout_base, plan.instances[i]))
                              : DropoutState::eval();
      const Vec e = context_forward_cached(inst.h_c, inst.span, params, drop, work.caches[i]);
      std::copy(e.begin(), e.end(), work.contexts.row(i));
    } catch (...) {
#pragma omp critical(glossalign_batch_forward_err)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  for (std::size_t i = 0; i < n; ++i) {
    const ContextInstance& inst = corpus.instances[plan.instances[i]];
    const Vec& g = corpus.gloss(inst.gloss_id).e_g;
    if (g.size() != d) throw Error(Err::DimMismatch, "gloss dim vs head d_model");
    std::copy(g.begin(), g.end(), work.glosses.row(i));
  }
}

// Per-instance backward into per-thread buffers, then a reduction in
// ascending thread order. Bit-reproducible for a fixed thread count.
void batch_backward(const Corpus& corpus, const BatchPlan& plan, const ContextHeadParams& params,
                    const BatchWork& work, const Matrix& grad_contexts, HeadGradients& grads) {
  int n_threads = 1;
#ifdef _OPENMP
  n_threads = omp_get_max_threads();
#endif
  std::vector<HeadGradients> buffers;
  buffers.reserve(static_cast<std::size_t>(n_threads));
  for (int t = 0; t < n_threads; ++t) buffers.push_back(zero_gradients(params));

  std::exception_ptr failure = nullptr;
  const std::int64_t ni = static_cast<std::int64_t>(plan.instances.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t ii = 0; ii < ni; ++ii) {
    try {
      int tid = 0;
#ifdef _OPENMP
      tid = omp_get_thread_num();
#endif
      const std::size_t i = static_cast<std::size_t>(ii);
      const ContextInstance& inst = corpus.instances[plan.instances[i]];
      context_backward(inst.h_c, inst.span, params, work.caches[i],
                       grad_contexts.row_vec(i), buffers[static_cast<std::size_t>(tid)]);
    } catch (...) {
#pragma omp critical(glossalign_batch_backward_err)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  for (int t = 0; t < n_threads; ++t)
    for (std::size_t k = 0; k < grads.size(); ++k)
      for (std::size_t j = 0; j < grads[k].data().size(); ++j)
        grads[k].data()[j] += buffers[static_cast<std::size_t>(t)][k].data()[j];
}

BatchEmbeddings to_batch(const BatchWork& work, const BatchPlan& plan) {
  BatchEmbeddings batch;
  batch.contexts = work.contexts;
  batch.glosses = work.glosses;
  batch.positives = plan.positives;
  return batch;
}

}  // namespace

double evaluate_loss(const Corpus& corpus, const std::vector<std::size_t>& subset,
                     const ContextHeadParams& params, const LossConfig& loss_cfg,
                     std::size_t batch_size, std::uint64_t seed) {
  // fixed epoch key so the validation batches (and hence the metric) are
  // comparable across epochs and identical across repeats
  const auto plans = make_batches(corpus, subset, batch_size, derive_seed(seed, 0x7a1), 0);
  BatchWork work;
  double weighted = 0.0;
  std::size_t total = 0;
  for (const auto& plan : plans) {
    batch_forward(corpus, plan, params, false, 0, work);
    BatchEmbeddings batch = to_batch(work, plan);
    const LossResult res = total_loss(batch, loss_cfg);
    weighted += res.value * static_cast<double>(plan.instances.size());
    total += plan.instances.size();
  }
  return weighted / static_cast<double>(total);
}

TrainResult train(const Corpus& corpus, const TrainConfig& cfg,
                  const std::filesystem::path& out_dir) {
  cfg.validate();
  {
    std::map<std::string, std::size_t> senses;
    for (const auto& inst : corpus.instances) senses[inst.sense_id]++;
    if (senses.size() < 2) throw Error(Err::DatasetTooSmall, "need >= 2 senses");
  }
  if (corpus.d_h != cfg.head.d_h)
    throw Error(Err::ConfigInvalid, "corpus token dim " + std::to_string(corpus.d_h) +
                                        " vs head d_h " + std::to_string(cfg.head.d_h));
  if (corpus.d_g != cfg.head.d_model)
    throw Error(Err::ConfigInvalid, "gloss dim " + std::to_string(corpus.d_g) +
                                        " vs head d_model " + std::to_string(cfg.head.d_model));

  TrainResult result;
  std::tie(result.train_indices, result.val_indices) =
      split_by_sense(corpus, cfg.validation_fraction, cfg.seed);
  // corpora too small to spare a held-out batch monitor the train subset
  const std::vector<std::size_t>& monitor =
      result.val_indices.size() >= 2 ? result.val_indices : result.train_indices;

  ContextHeadParams params = init_params(cfg.head, cfg.seed);
  AdamWState adam = AdamWState::for_params(params);
  std::vector<ParamGroup> groups =
      default_groups(params, cfg.lr_base, cfg.lr_custom, cfg.weight_decay);
  PlateauState plateau;
  plateau.config = cfg.scheduler;

  const bool write_files = !out_dir.empty();
  std::string log_lines;
  if (write_files) std::filesystem::create_directories(out_dir);

  auto snapshot = [&]() {
    Checkpoint ckpt;
    ckpt.params = params;
    OptimizerSnapshot opt;
    opt.adam = adam;
    opt.lr_base = groups[0].lr;
    opt.lr_custom = groups[1].lr;
    opt.plateau_best = plateau.best;
    opt.plateau_bad_epochs = plateau.bad_epochs;
    ckpt.optimizer = std::move(opt);
    return ckpt;
  };

  BatchWork work;
  HeadGradients grads = zero_gradients(params);

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto plans = make_batches(corpus, result.train_indices, cfg.batch_size, cfg.seed, epoch);

    double weighted_loss = 0.0;
    std::size_t total = 0;
    for (std::size_t b = 0; b < plans.size(); ++b) {
      const BatchPlan& plan = plans[b];
      const std::uint64_t dropout_base = derive_seed(cfg.seed, 0xd0, epoch, b);
      batch_forward(corpus, plan, params, true, dropout_base, work);
      BatchEmbeddings batch = to_batch(work, plan);
      LossResult res;
      try {
        res = total_loss(batch, cfg.loss);
      } catch (const Error& e) {
        if (e.code() == Err::NonFiniteInput)
          throw Error(Err::NonFiniteLoss, "epoch " + std::to_string(epoch) + " batch " +
                                              std::to_string(b) + " (" + e.what() + ")");
        throw;
      }
      if (!std::isfinite(res.value))
        throw Error(Err::NonFiniteLoss, "epoch " + std::to_string(epoch) + " batch " +
                                            std::to_string(b));
      weighted_loss += res.value * static_cast<double>(plan.instances.size());
      total += plan.instances.size();

      for (auto& g : grads) g.fill(0.0);
      batch_backward(corpus, plan, params, work, res.grad_contexts, grads);
      adamw_step(params, grads, adam, groups);
    }
    const double train_loss = weighted_loss / static_cast<double>(total);

    const double val_loss =
        evaluate_loss(corpus, monitor, params, cfg.loss, cfg.batch_size, cfg.seed);
    if (!std::isfinite(val_loss))
      throw Error(Err::NonFiniteLoss, "validation, epoch " + std::to_string(epoch));

    EpochLog entry;
    entry.epoch = epoch;
    entry.train_loss = train_loss;
    entry.val_loss = val_loss;
    entry.lr_base = groups[0].lr;
    entry.lr_custom = groups[1].lr;
    entry.secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.log.epochs.push_back(entry);

    plateau_update(plateau, val_loss, groups);

    if (write_files) {
      log_lines += entry.to_json();
      log_lines += '\n';
      atomic_write_file(out_dir / "train_log.jsonl", log_lines);
      save_checkpoint(out_dir / "checkpoint_last.vcbh", snapshot());
      if (cfg.checkpoint_every > 0 && epoch % cfg.checkpoint_every == 0) {
        char name[48];
        std::snprintf(name, sizeof(name), "checkpoint_epoch_%04zu.vcbh", epoch);
        save_checkpoint(out_dir / name, snapshot());
      }
    }
  }

  if (write_files) save_checkpoint(out_dir / "checkpoint.vcbh", snapshot());
  result.params = std::move(params);
  return result;
}

std::string GradCheckCase::describe() const {
  std::ostringstream out;
  out << "lambda=" << loss.lambda << " tau=" << loss.tau << " mode=" << to_string(loss.denominator_mode)
      << " heads=" << n_heads << " proj=" << n_proj_layers << " d_h=" << d_h << " N=" << batch;
  if (!attention_bias) out << " no-bias";
  if (!output_projection) out << " no-wo";
  return out.str();
}

std::string GradCheckReport::to_text() const {
  std::ostringstream out;
  for (const auto& e : tensors) {
    out << "  " << e.tensor;
    for (std::size_t i = e.tensor.size(); i < 16; ++i) out << ' ';
    out << e.max_rel_error << "\n";
  }
  out << (passed ? "PASS" : "FAIL") << " max_rel_error=" << max_rel_error << " worst="
      << worst_tensor << "\n";
  return out.str();
}

namespace {

double rel_error(double a, double b) {
  const double denom = std::max(std::fabs(a) + std::fabs(b), 1e-3);
  return std::fabs(a - b) / denom;
}

}  // namespace

GradCheckReport gradcheck(const GradCheckCase& config, std::uint64_t seed) {
  HeadConfig head;
  head.d_h = config.d_h;
  head.d_model = config.d_model;
  head.n_heads = config.n_heads;
  head.n_proj_layers = config.n_proj_layers;
  head.dropout_rate = 0.0;  // FD needs a deterministic forward
  head.attention_bias = config.attention_bias;
  head.output_projection = config.output_projection;

  ContextHeadParams params = init_params(head, derive_seed(seed, 0x9c1));
  Rng rng(derive_seed(seed, 0x9c2));

  // random batch: token matrices, spans, gloss rows, positive sets
  std::vector<Matrix> tokens(config.batch);
  std::vector<Span> spans(config.batch);
  Matrix glosses(config.batch, config.d_model);
  for (std::size_t i = 0; i < config.batch; ++i) {
    tokens[i] = Matrix(config.n_tokens, config.d_h);
    for (auto& v : tokens[i].data()) v = 2.0 * rng.next_double() - 1.0;
    const std::size_t len = 1 + rng.next_below(config.n_tokens);
    const std::size_t start = rng.next_below(config.n_tokens - len + 1);
    spans[i] = {start, start + len};
    const Vec g = rng.next_unit_vector(config.d_model);
    std::copy(g.begin(), g.end(), glosses.row(i));
  }
  // pair up anchors so some P_i have size > 1
  std::vector<std::vector<std::size_t>> positives(config.batch);
  for (std::size_t i = 0; i < config.batch; ++i) positives[i].push_back(i);
  if (config.batch >= 2) {
    positives[0].push_back(1);
    positives[1].insert(positives[1].begin(), 0);
    // shared sense means shared gloss row
    for (std::size_t j = 0; j < config.d_model; ++j) glosses(1, j) = glosses(0, j);
  }

  auto loss_at = [&](const ContextHeadParams& p) {
    Matrix contexts(config.batch, config.d_model);
    for (std::size_t i = 0; i < config.batch; ++i) {
      const Vec e = context_forward(tokens[i], spans[i], p, DropoutState::eval());
      std::copy(e.begin(), e.end(), contexts.row(i));
    }
    BatchEmbeddings batch;
    batch.contexts = std::move(contexts);
    batch.glosses = glosses;
    batch.positives = positives;
    return total_loss(batch, config.loss);
  };

  // analytic gradient
  HeadGradients analytic = zero_gradients(params);
  {
    Matrix contexts(config.batch, config.d_model);
    std::vector<ForwardCache> caches(config.batch);
    for (std::size_t i = 0; i < config.batch; ++i) {
      const Vec e =
          context_forward_cached(tokens[i], spans[i], params, DropoutState::eval(), caches[i]);
      std::copy(e.begin(), e.end(), contexts.row(i));
    }
    BatchEmbeddings batch;
    batch.contexts = std::move(contexts);
    batch.glosses = glosses;
    batch.positives = positives;
    const LossResult res = total_loss(batch, config.loss);
    for (std::size_t i = 0; i < config.batch; ++i)
      context_backward(tokens[i], spans[i], params, caches[i], res.grad_contexts.row_vec(i),
                       analytic);
  }

  const auto layout = tensor_layout(head);
  if (!config.corrupt_tensor.empty()) {
    for (std::size_t t = 0; t < layout.size(); ++t)
      if (layout[t].name == config.corrupt_tensor)
        for (auto& v : analytic[t].data()) v *= config.corrupt_scale;
  }

  GradCheckReport report;
  const double step = 1e-5;
  for (std::size_t t = 0; t < layout.size(); ++t) {
    GradCheckEntry entry;
    entry.tensor = layout[t].name;
    for (std::size_t j = 0; j < params.tensors[t].data().size(); ++j) {
      const double saved = params.tensors[t].data()[j];
      params.tensors[t].data()[j] = saved + step;
      const double up = loss_at(params).value;
      params.tensors[t].data()[j] = saved - step;
      const double down = loss_at(params).value;
      params.tensors[t].data()[j] = saved;
      const double fd = (up - down) / (2.0 * step);
      entry.max_rel_error =
          std::max(entry.max_rel_error, rel_error(analytic[t].data()[j], fd));
    }
    if (entry.max_rel_error > report.max_rel_error) {
      report.max_rel_error = entry.max_rel_error;
      report.worst_tensor = entry.tensor;
    }
    report.tensors.push_back(std::move(entry));
  }
  report.passed = report.max_rel_error < 1e-4;
  return report;
}

std::vector<GradCheckCase> gradcheck_default_cases() {
  std::vector<GradCheckCase> cases;
  for (double lambda : {0.0, 1.0})
    for (double tau : {0.3, 1.0})
      for (DenominatorMode mode :
           {DenominatorMode::LiteralExcludeAnchor, DenominatorMode::AllContexts})
        for (std::size_t heads : {std::size_t{1}, std::size_t{2}})
          for (std::size_t proj : {std::size_t{1}, std::size_t{2}}) {
            GradCheckCase c;
            c.loss.lambda = lambda;
            c.loss.tau = tau;
            c.loss.denominator_mode = mode;
            c.n_heads = heads;
            c.n_proj_layers = proj;
            c.d_h = heads == 1 ? 4 : 6;
            c.d_model = 3;
            c.n_tokens = 3;
            c.batch = proj == 1 ? 2 : 4;
            cases.push_back(c);
          }
  return cases;
}

}  // namespace glossalign
