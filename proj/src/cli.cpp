#include "glossalign/cli.hpp"

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "glossalign/checkpoint.hpp"
#include "glossalign/data.hpp"
#include "glossalign/emb_io.hpp"
#include "glossalign/eval.hpp"
#include "glossalign/pca.hpp"
#include "glossalign/train.hpp"

namespace glossalign {

namespace {

using nlohmann::json;

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Err::IoError, "cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(Err::ParseError, path + ": " + e.what());
  }
}

SynthConfig parse_synth_config(const json& j) {
  SynthConfig cfg;
  try {
    if (j.contains("n_synsets")) cfg.n_synsets = j["n_synsets"].get<std::size_t>();
    if (j.contains("words_per_synset")) cfg.words_per_synset = j["words_per_synset"].get<std::size_t>();
    if (j.contains("contexts_per_word")) cfg.contexts_per_word = j["contexts_per_word"].get<std::size_t>();
    if (j.contains("ambiguous_fraction")) cfg.ambiguous_fraction = j["ambiguous_fraction"].get<double>();
    if (j.contains("n_tokens")) cfg.n_tokens = j["n_tokens"].get<std::size_t>();
    if (j.contains("d_h")) cfg.d_h = j["d_h"].get<std::size_t>();
    if (j.contains("d_g")) cfg.d_g = j["d_g"].get<std::size_t>();
    if (j.contains("noise_sigma")) cfg.noise_sigma = j["noise_sigma"].get<double>();
    if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("n_supersenses")) cfg.n_supersenses = j["n_supersenses"].get<std::size_t>();
    if (j.contains("cluster_spread")) cfg.cluster_spread = j["cluster_spread"].get<double>();
  } catch (const json::exception& e) {
    throw Error(Err::ConfigInvalid, std::string("gen config: ") + e.what());
  }
  return cfg;
}

TrainConfig parse_train_config(const json& j) {
  TrainConfig cfg;
  try {
    if (j.contains("epochs")) cfg.epochs = j["epochs"].get<std::size_t>();
    if (j.contains("batch_size")) cfg.batch_size = j["batch_size"].get<std::size_t>();
    if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("validation_fraction"))
      cfg.validation_fraction = j["validation_fraction"].get<double>();
    if (j.contains("checkpoint_every")) cfg.checkpoint_every = j["checkpoint_every"].get<std::size_t>();
    if (j.contains("loss")) {
      const json& l = j["loss"];
      if (l.contains("tau")) cfg.loss.tau = l["tau"].get<double>();
      if (l.contains("lambda")) cfg.loss.lambda = l["lambda"].get<double>();
      if (l.contains("epsilon")) cfg.loss.epsilon = l["epsilon"].get<double>();
      if (l.contains("denominator_mode"))
        cfg.loss.denominator_mode =
            denominator_mode_from_string(l["denominator_mode"].get<std::string>());
    }
    if (j.contains("optimizer")) {
      const json& o = j["optimizer"];
      if (o.contains("lr_base")) cfg.lr_base = o["lr_base"].get<double>();
      if (o.contains("lr_custom")) cfg.lr_custom = o["lr_custom"].get<double>();
      if (o.contains("weight_decay")) cfg.weight_decay = o["weight_decay"].get<double>();
    }
    if (j.contains("scheduler")) {
      const json& s = j["scheduler"];
      if (s.contains("patience")) cfg.scheduler.patience = s["patience"].get<std::size_t>();
      if (s.contains("factor")) cfg.scheduler.factor = s["factor"].get<double>();
      if (s.contains("min_lr")) cfg.scheduler.min_lr = s["min_lr"].get<double>();
      if (s.contains("threshold")) cfg.scheduler.threshold = s["threshold"].get<double>();
    }
    if (j.contains("head")) {
      const json& h = j["head"];
      if (h.contains("preset")) {
        const std::string preset = h["preset"].get<std::string>();
        if (preset == "base")
          cfg.head = HeadConfig::base();
        else if (preset == "large")
          cfg.head = HeadConfig::large();
        else
          throw Error(Err::ConfigInvalid, "unknown head preset '" + preset + "'");
      }
      if (h.contains("d_h")) cfg.head.d_h = h["d_h"].get<std::size_t>();
      if (h.contains("d_model")) cfg.head.d_model = h["d_model"].get<std::size_t>();
      if (h.contains("n_heads")) cfg.head.n_heads = h["n_heads"].get<std::size_t>();
      if (h.contains("n_proj_layers")) cfg.head.n_proj_layers = h["n_proj_layers"].get<std::size_t>();
      if (h.contains("dropout_rate")) cfg.head.dropout_rate = h["dropout_rate"].get<double>();
      if (h.contains("attention_bias")) cfg.head.attention_bias = h["attention_bias"].get<bool>();
      if (h.contains("output_projection"))
        cfg.head.output_projection = h["output_projection"].get<bool>();
    }
  } catch (const json::exception& e) {
    throw Error(Err::ConfigInvalid, std::string("train config: ") + e.what());
  }
  return cfg;
}

std::vector<std::size_t> parse_k_list(const std::string& ks) {
  std::vector<std::size_t> out;
  std::stringstream ss(ks);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      const long v = std::stol(item);
      if (v < 1) throw std::out_of_range("k");
      out.push_back(static_cast<std::size_t>(v));
    } catch (const std::exception&) {
      throw Error(Err::ConfigInvalid, "bad k value '" + item + "'");
    }
  }
  if (out.empty()) throw Error(Err::ConfigInvalid, "empty k list");
  return out;
}

int cmd_gen(const std::string& config_path, const std::string& out_dir,
            std::optional<std::uint64_t> seed) {
  SynthConfig cfg;
  if (!config_path.empty()) cfg = parse_synth_config(load_json_file(config_path));
  if (seed) cfg.seed = *seed;
  SynthResult result = synth_generate(cfg);
  write_corpus(result.corpus, out_dir);

  VectorTable latents;
  latents.dim = static_cast<std::uint32_t>(cfg.d_g);
  for (std::size_t s = 0; s < result.gloss_latents.size(); ++s)
    latents.entries.emplace_back(result.corpus.glosses[s].sense_id, result.gloss_latents[s]);
  write_vector_table(std::filesystem::path(out_dir) / kLatentFile, latents);

  std::cout << "generated " << result.corpus.instances.size() << " instances, "
            << result.corpus.glosses.size() << " glosses ("
            << result.ambiguous_words.size() << " ambiguous words) in " << out_dir << "\n";
  return 0;
}

int cmd_train(const std::string& corpus_dir, const std::string& config_path,
              const std::string& out_dir, std::optional<std::uint64_t> seed) {
  TrainConfig cfg;
  if (!config_path.empty()) cfg = parse_train_config(load_json_file(config_path));
  if (seed) cfg.seed = *seed;

  Corpus corpus = load_corpus(corpus_dir);
  // head dims always follow the corpus embedding files
  cfg.head.d_h = corpus.d_h;
  cfg.head.d_model = corpus.d_g;

  TrainResult result = train(corpus, cfg, out_dir);
  std::cout << "trained " << cfg.epochs << " epochs; final val_loss="
            << result.log.epochs.back().val_loss << "; checkpoints in " << out_dir << "\n";
  return 0;
}

struct EvalArgs {
  std::string corpus_dir;
  std::string checkpoint;
  std::string pairs;
  std::string out;
  std::string ks = "1,5,10";
  std::string split = "all";
  double validation_fraction = 0.1;
  bool ambiguous_only = false;
  std::uint64_t seed = 42;
};

std::vector<std::size_t> select_subset(const Corpus& corpus, const EvalArgs& args) {
  std::vector<std::size_t> subset;
  if (args.split == "all") {
    subset = all_instance_indices(corpus);
  } else {
    auto [train_idx, val_idx] = split_by_sense(corpus, args.validation_fraction, args.seed);
    subset = args.split == "val" ? val_idx : train_idx;
  }
  if (args.ambiguous_only) {
    // a word is ambiguous when its inventory spans >= 2 senses
    std::map<std::string, std::set<std::string>> senses_of;
    for (const auto& g : corpus.glosses)
      for (const auto& w : g.word_forms) senses_of[w].insert(g.sense_id);
    std::vector<std::size_t> filtered;
    for (std::size_t idx : subset)
      if (senses_of[corpus.instances[idx].word].size() >= 2) filtered.push_back(idx);
    subset = std::move(filtered);
  }
  return subset;
}

int cmd_eval(const std::string& task, const EvalArgs& args) {
  if (args.split != "all" && args.split != "train" && args.split != "val")
    throw Error(Err::ConfigInvalid, "--split must be all|train|val");
  Corpus corpus = load_corpus(args.corpus_dir);
  Checkpoint ckpt = load_checkpoint(args.checkpoint);

  MetricsReport report;
  if (task == "wsd") {
    report = eval_wsd(corpus, select_subset(corpus, args), ckpt.params);
  } else if (task == "retrieval") {
    report = eval_retrieval(corpus, select_subset(corpus, args), ckpt.params, parse_k_list(args.ks));
  } else if (task == "simpairs") {
    if (args.pairs.empty()) throw Error(Err::UsageError, "simpairs needs --pairs");
    report = eval_simpairs(corpus, ckpt.params, load_pairs_tsv(args.pairs, false), args.seed);
  } else if (task == "synant") {
    if (args.pairs.empty()) throw Error(Err::UsageError, "synant needs --pairs");
    report = eval_synant(corpus, ckpt.params, load_pairs_tsv(args.pairs, true), args.seed);
  } else {
    throw Error(Err::UsageError, "unknown eval task '" + task + "'");
  }

  std::cout << report.to_table();
  if (!args.out.empty()) atomic_write_file(args.out, report.to_json());
  return 0;
}

int cmd_embed(const std::string& corpus_dir, const std::string& checkpoint,
              const std::string& out_path) {
  Corpus corpus = load_corpus(corpus_dir);
  Checkpoint ckpt = load_checkpoint(checkpoint);
  MatrixTable table;
  table.dim = static_cast<std::uint32_t>(ckpt.params.config.d_model);
  for (const auto& inst : corpus.instances) {
    const Vec e = context_forward(inst.h_c, inst.span, ckpt.params, DropoutState::eval());
    table.entries.emplace_back(inst.id, Matrix::from_row(e));
  }
  write_matrix_table(out_path, table);
  std::cout << "wrote " << table.entries.size() << " context embeddings to " << out_path << "\n";
  return 0;
}

int cmd_project(const std::string& in_path, const std::string& out_path,
                const std::string& corpus_dir) {
  std::vector<std::pair<std::string, Vec>> points;
  const std::string magic = sniff_magic(in_path);
  if (magic == "GEM1") {
    VectorTable t = read_vector_table(in_path);
    points = std::move(t.entries);
  } else {
    MatrixTable t = read_matrix_table(in_path);
    for (auto& [id, m] : t.entries) {
      // multi-row records are reduced to their row mean
      Vec v(m.cols(), 0.0);
      for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) v[j] += m(i, j);
      for (auto& x : v) x /= static_cast<double>(m.rows() ? m.rows() : 1);
      points.emplace_back(id, std::move(v));
    }
  }
  if (points.empty()) throw Error(Err::DegenerateSpread, "no points to project");

  std::map<std::string, std::string> labels;
  if (!corpus_dir.empty()) {
    Corpus corpus = load_corpus(corpus_dir);
    for (const auto& inst : corpus.instances) labels[inst.id] = inst.sense_id;
    for (const auto& g : corpus.glosses) labels[g.gloss_id] = g.sense_id;
  }

  Matrix data(points.size(), points.front().second.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (points[i].second.size() != data.cols())
      throw Error(Err::DimMismatch, "inconsistent vector dims in " + in_path);
    std::copy(points[i].second.begin(), points[i].second.end(), data.row(i));
  }
  Matrix coords = pca_project_2d(data);

  std::ostringstream csv;
  csv << "id,x,y,label\n";
  csv.precision(17);
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto it = labels.find(points[i].first);
    csv << points[i].first << "," << coords(i, 0) << "," << coords(i, 1) << ","
        << (it == labels.end() ? "" : it->second) << "\n";
  }
  atomic_write_file(out_path, csv.str());
  std::cout << "wrote " << points.size() << " projected points to " << out_path << "\n";
  return 0;
}

int cmd_gradcheck(std::uint64_t seed, const std::string& out_path) {
  bool all_passed = true;
  std::ostringstream lines;
  for (const auto& c : gradcheck_default_cases()) {
    const GradCheckReport report = gradcheck(c, seed);
    all_passed = all_passed && report.passed;
    lines << (report.passed ? "PASS " : "FAIL ") << c.describe()
          << " max_rel_error=" << report.max_rel_error;
    if (!report.passed) lines << " worst=" << report.worst_tensor;
    lines << "\n";
  }
  lines << (all_passed ? "gradcheck: all cases passed\n" : "gradcheck: FAILURES\n");
  std::cout << lines.str();
  if (!out_path.empty()) atomic_write_file(out_path, lines.str());
  return all_passed ? 0 : 1;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"gloss-aligned context embedding trainer and evaluation suite"};
  app.require_subcommand(1);

  std::optional<std::uint64_t> seed_flag;
  std::string config_path, corpus_dir, out_path, checkpoint_path, in_path;

  auto* gen = app.add_subcommand("gen", "generate a synthetic sense corpus");
  gen->add_option("--config", config_path, "SynthConfig JSON");
  gen->add_option("--out", out_path, "output corpus directory")->required();
  gen->add_option("--seed", seed_flag, "override the config seed");

  auto* train_cmd = app.add_subcommand("train", "train the context head");
  train_cmd->add_option("--corpus", corpus_dir, "corpus directory")->required();
  train_cmd->add_option("--config", config_path, "TrainConfig JSON");
  train_cmd->add_option("--out", out_path, "checkpoint/log directory")->required();
  train_cmd->add_option("--seed", seed_flag, "override the config seed");

  EvalArgs eval_args;
  std::string eval_task;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  eval_cmd->add_option("task", eval_task, "wsd | retrieval | simpairs | synant")->required();
  eval_cmd->add_option("--corpus", eval_args.corpus_dir, "corpus directory")->required();
  eval_cmd->add_option("--checkpoint", eval_args.checkpoint, "VCBH checkpoint")->required();
  eval_cmd->add_option("--pairs", eval_args.pairs, "pair TSV (simpairs/synant)");
  eval_cmd->add_option("--k", eval_args.ks, "comma-separated k list (retrieval)");
  eval_cmd->add_option("--split", eval_args.split, "all | train | val");
  eval_cmd->add_option("--validation-fraction", eval_args.validation_fraction,
                       "fraction used by --split train/val");
  eval_cmd->add_flag("--ambiguous-only", eval_args.ambiguous_only,
                     "restrict to words with >= 2 senses");
  eval_cmd->add_option("--out", eval_args.out, "write the report JSON here");
  eval_cmd->add_option("--seed", eval_args.seed, "split/sampling seed");

  auto* embed = app.add_subcommand("embed", "export all context embeddings as CEM1");
  embed->add_option("--corpus", corpus_dir, "corpus directory")->required();
  embed->add_option("--checkpoint", checkpoint_path, "VCBH checkpoint")->required();
  embed->add_option("--out", out_path, "output CEM1 path")->required();
  embed->add_option("--seed", seed_flag, "unused; accepted for uniformity");

  std::string project_corpus;
  auto* project = app.add_subcommand("project", "project embeddings to 2-D PCA CSV");
  project->add_option("--in", in_path, "GEM1 or CEM1 input")->required();
  project->add_option("--out", out_path, "output CSV path")->required();
  project->add_option("--corpus", project_corpus, "corpus directory for labels");
  project->add_option("--seed", seed_flag, "unused; accepted for uniformity");

  std::uint64_t gradcheck_seed = 42;
  auto* grad = app.add_subcommand("gradcheck", "finite-difference check of the training gradient");
  grad->add_option("--seed", gradcheck_seed, "randomization seed");
  std::string grad_out;
  grad->add_option("--out", grad_out, "also write the report here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {  // --help
      std::cout << app.help();
      return 0;
    }
    std::cerr << e.what() << "\n";
    return 1;
  }

  try {
    if (gen->parsed()) return cmd_gen(config_path, out_path, seed_flag);
    if (train_cmd->parsed()) return cmd_train(corpus_dir, config_path, out_path, seed_flag);
    if (eval_cmd->parsed()) return cmd_eval(eval_task, eval_args);
    if (embed->parsed()) return cmd_embed(corpus_dir, checkpoint_path, out_path);
    if (project->parsed()) return cmd_project(in_path, out_path, project_corpus);
    if (grad->parsed()) return cmd_gradcheck(gradcheck_seed, grad_out);
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return is_io_error(e.code()) ? 2 : 1;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace glossalign
