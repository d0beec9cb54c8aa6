#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unistd.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include "glossalign/checkpoint.hpp"
#include "glossalign/train.hpp"
#include "test_helpers.hpp"

using namespace glossalign;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("glossalign_train_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

SynthConfig tiny_corpus_config() {
  SynthConfig cfg;
  cfg.n_synsets = 4;
  cfg.words_per_synset = 2;
  cfg.contexts_per_word = 6;
  cfg.n_tokens = 5;
  cfg.d_h = 12;
  cfg.d_g = 12;
  cfg.seed = 17;
  return cfg;
}

TrainConfig tiny_train_config() {
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 8;
  cfg.seed = 5;
  cfg.validation_fraction = 0.2;
  cfg.head.d_h = 12;
  cfg.head.d_model = 12;
  cfg.head.n_heads = 2;
  cfg.head.n_proj_layers = 1;
  cfg.head.dropout_rate = 0.3;
  return cfg;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("gradcheck passes on a representative case subset") {
  // the full 32-case sweep runs in the acceptance suite
  std::vector<GradCheckCase> cases;
  {
    GradCheckCase c;  // defaults: literal mode, λ=1, τ=0.3
    cases.push_back(c);
  }
  {
    GradCheckCase c;
    c.loss.lambda = 0.0;
    c.loss.denominator_mode = DenominatorMode::AllContexts;
    c.n_heads = 2;
    c.d_h = 6;
    c.n_proj_layers = 2;
    c.batch = 4;
    cases.push_back(c);
  }
  {
    GradCheckCase c;  // toggles off: no attention biases, no output projection
    c.attention_bias = false;
    c.output_projection = false;
    c.n_heads = 2;
    c.d_h = 6;
    c.batch = 4;
    cases.push_back(c);
  }
  for (const auto& c : cases) {
    const GradCheckReport report = gradcheck(c, 11);
    CAPTURE(c.describe());
    CAPTURE(report.worst_tensor);
    CHECK(report.passed);
    CHECK(report.max_rel_error < 1e-4);
  }
}

TEST_CASE("gradcheck negative control: a corrupted backward is reported by tensor name") {
  GradCheckCase c;
  c.corrupt_tensor = "attn.h0.wk";
  c.corrupt_scale = 2.0;
  const GradCheckReport report = gradcheck(c, 11);
  CHECK_FALSE(report.passed);
  CHECK(report.worst_tensor == "attn.h0.wk");
}

TEST_CASE("split_by_sense: stratified, every val sense also trains") {
  SynthResult r = synth_generate(tiny_corpus_config());
  auto [train_idx, val_idx] = split_by_sense(r.corpus, 0.25, 9);
  CHECK(train_idx.size() + val_idx.size() == r.corpus.instances.size());
  std::set<std::string> train_senses, val_senses;
  for (auto i : train_idx) train_senses.insert(r.corpus.instances[i].sense_id);
  for (auto i : val_idx) val_senses.insert(r.corpus.instances[i].sense_id);
  for (const auto& s : val_senses) CHECK(train_senses.count(s) == 1);
  CHECK(val_idx.size() > 0);

  auto [t2, v2] = split_by_sense(r.corpus, 0.25, 9);
  CHECK(t2 == train_idx);
  CHECK(v2 == val_idx);
}

TEST_CASE("train: zero learning rates freeze parameters and losses") {
  SynthResult r = synth_generate(tiny_corpus_config());
  TrainConfig cfg = tiny_train_config();
  cfg.lr_base = 0.0;
  cfg.lr_custom = 0.0;
  cfg.weight_decay = 0.0;
  cfg.scheduler.min_lr = 0.0;

  const ContextHeadParams initial = init_params(cfg.head, cfg.seed);
  TrainResult result = train(r.corpus, cfg);
  REQUIRE(result.params.tensors.size() == initial.tensors.size());
  for (std::size_t t = 0; t < initial.tensors.size(); ++t)
    CHECK(result.params.tensors[t] == initial.tensors[t]);
  // validation loss is dropout-free and params never move, so it is constant
  for (const auto& e : result.log.epochs)
    CHECK(e.val_loss == result.log.epochs.front().val_loss);
}

TEST_CASE("train: two identical seeded runs agree bit for bit") {
  SynthResult r = synth_generate(tiny_corpus_config());
  TrainConfig cfg = tiny_train_config();
  TrainResult a = train(r.corpus, cfg);
  TrainResult b = train(r.corpus, cfg);
  REQUIRE(a.params.tensors.size() == b.params.tensors.size());
  for (std::size_t t = 0; t < a.params.tensors.size(); ++t)
    CHECK(a.params.tensors[t] == b.params.tensors[t]);
  REQUIRE(a.log.epochs.size() == b.log.epochs.size());
  for (std::size_t e = 0; e < a.log.epochs.size(); ++e) {
    CHECK(a.log.epochs[e].train_loss == b.log.epochs[e].train_loss);
    CHECK(a.log.epochs[e].val_loss == b.log.epochs[e].val_loss);
    CHECK(a.log.epochs[e].lr_custom == b.log.epochs[e].lr_custom);
  }
}

TEST_CASE("train: gloss embeddings stay frozen") {
  SynthResult r = synth_generate(tiny_corpus_config());
  std::vector<Vec> before;
  for (const auto& g : r.corpus.glosses) before.push_back(g.e_g);
  TrainConfig cfg = tiny_train_config();
  train(r.corpus, cfg);
  for (std::size_t g = 0; g < before.size(); ++g) CHECK(r.corpus.glosses[g].e_g == before[g]);
}

TEST_CASE("train: validation loss is reproducible outside the loop") {
  SynthResult r = synth_generate(tiny_corpus_config());
  TrainConfig cfg = tiny_train_config();
  TrainResult result = train(r.corpus, cfg);
  const double replay = evaluate_loss(r.corpus, result.val_indices, result.params, cfg.loss,
                                      cfg.batch_size, cfg.seed);
  const double replay2 = evaluate_loss(r.corpus, result.val_indices, result.params, cfg.loss,
                                       cfg.batch_size, cfg.seed);
  CHECK(replay == replay2);
  CHECK(replay == result.log.epochs.back().val_loss);
}

TEST_CASE("train: writes log and checkpoints; checkpoint round-trips") {
  TempDir tmp;
  SynthResult r = synth_generate(tiny_corpus_config());
  TrainConfig cfg = tiny_train_config();
  cfg.checkpoint_every = 2;
  TrainResult result = train(r.corpus, cfg, tmp.path);

  CHECK(fs::exists(tmp.path / "train_log.jsonl"));
  CHECK(fs::exists(tmp.path / "checkpoint.vcbh"));
  CHECK(fs::exists(tmp.path / "checkpoint_last.vcbh"));
  CHECK(fs::exists(tmp.path / "checkpoint_epoch_0002.vcbh"));

  const std::string log = slurp(tmp.path / "train_log.jsonl");
  CHECK(std::count(log.begin(), log.end(), '\n') == 3);
  for (const char* key : {"epoch", "train_loss", "val_loss", "lr_base", "lr_custom", "secs"})
    CHECK(log.find(key) != std::string::npos);

  Checkpoint ckpt = load_checkpoint(tmp.path / "checkpoint.vcbh");
  CHECK(ckpt.params.config.d_h == cfg.head.d_h);
  CHECK(ckpt.params.config.n_heads == cfg.head.n_heads);
  REQUIRE(ckpt.optimizer.has_value());
  CHECK(ckpt.optimizer->adam.step > 0);
  REQUIRE(ckpt.params.tensors.size() == result.params.tensors.size());
  for (std::size_t t = 0; t < ckpt.params.tensors.size(); ++t)
    for (std::size_t j = 0; j < ckpt.params.tensors[t].data().size(); ++j)
      CHECK(ckpt.params.tensors[t].data()[j] ==
            static_cast<double>(static_cast<float>(result.params.tensors[t].data()[j])));
}

TEST_CASE("checkpoint: config flags (no biases / no output projection) round-trip") {
  TempDir tmp;
  HeadConfig head{6, 4, 2, 1, 0.1, false, false};
  Checkpoint ckpt;
  ckpt.params = init_params(head, 11);
  save_checkpoint(tmp.path / "flags.vcbh", ckpt);
  Checkpoint back = load_checkpoint(tmp.path / "flags.vcbh");
  CHECK(back.params.config.attention_bias == false);
  CHECK(back.params.config.output_projection == false);
  CHECK(back.params.config.dropout_rate == doctest::Approx(0.1).epsilon(1e-7));
  CHECK(back.params.tensors.size() == ckpt.params.tensors.size());
  // the reduced layout (no bias, no W^O tensors) survives the trip
  CHECK(tensor_layout(back.params.config).size() == back.params.tensors.size());
}

TEST_CASE("checkpoint: corrupted magic and truncation use the named errors") {
  TempDir tmp;
  HeadConfig head;
  head.d_h = 6;
  head.d_model = 4;
  head.n_heads = 2;
  Checkpoint ckpt;
  ckpt.params = init_params(head, 3);
  save_checkpoint(tmp.path / "ok.vcbh", ckpt);

  std::string bytes = slurp(tmp.path / "ok.vcbh");
  std::string bad = bytes;
  bad[0] = 'X';
  std::ofstream(tmp.path / "bad.vcbh", std::ios::binary) << bad;
  CHECK(testing::thrown_code([&] { load_checkpoint(tmp.path / "bad.vcbh"); }) == Err::BadMagic);

  std::ofstream(tmp.path / "trunc.vcbh", std::ios::binary)
      << bytes.substr(0, bytes.size() - 17);
  CHECK(testing::thrown_code([&] { load_checkpoint(tmp.path / "trunc.vcbh"); }) ==
        Err::TruncatedFile);

  // loaded params match the saved ones at f32
  Checkpoint back = load_checkpoint(tmp.path / "ok.vcbh");
  CHECK_FALSE(back.optimizer.has_value());
  for (std::size_t t = 0; t < back.params.tensors.size(); ++t)
    for (std::size_t j = 0; j < back.params.tensors[t].data().size(); ++j)
      CHECK(back.params.tensors[t].data()[j] ==
            static_cast<double>(static_cast<float>(ckpt.params.tensors[t].data()[j])));
}

TEST_CASE("train: non-finite loss aborts and leaves prior checkpoints untouched") {
  TempDir tmp;
  SynthResult r = synth_generate(tiny_corpus_config());
  TrainConfig cfg = tiny_train_config();
  cfg.epochs = 2;
  train(r.corpus, cfg, tmp.path);
  const std::string last_before = slurp(tmp.path / "checkpoint_last.vcbh");
  const std::string final_before = slurp(tmp.path / "checkpoint.vcbh");
  REQUIRE(!last_before.empty());

  // poison one token matrix: the first epoch touches every instance, so
  // the rerun aborts before writing anything
  r.corpus.instances[3].h_c(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK(testing::thrown_code([&] { train(r.corpus, cfg, tmp.path); }) == Err::NonFiniteLoss);
  CHECK(slurp(tmp.path / "checkpoint_last.vcbh") == last_before);
  CHECK(slurp(tmp.path / "checkpoint.vcbh") == final_before);
}

TEST_CASE("train config validation") {
  TrainConfig cfg = tiny_train_config();
  cfg.validation_fraction = 1.5;
  SynthResult r = synth_generate(tiny_corpus_config());
  CHECK(testing::thrown_code([&] { train(r.corpus, cfg); }) == Err::ConfigInvalid);

  TrainConfig mismatched = tiny_train_config();
  mismatched.head.d_h = 10;  // corpus says 12
  CHECK(testing::thrown_code([&] { train(r.corpus, mismatched); }) == Err::ConfigInvalid);
}
