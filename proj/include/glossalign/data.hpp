#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "glossalign/matrix.hpp"
#include "glossalign/model.hpp"

namespace glossalign {

enum class Pos { Noun, Verb, Adj, Adv };

const char* to_string(Pos pos);
Pos pos_from_string(const std::string& s);

/// One context sentence: token embeddings from the frozen encoder plus the
/// target-word span and its gold sense labels.
struct ContextInstance {
  std::string id;
  std::string word;
  std::string sense_id;
  std::string synset_id;
  std::string gloss_id;
  Pos pos = Pos::Noun;
  Span span;
  Matrix h_c;  // n×d_h
};

/// A gloss with its frozen unit-norm embedding and synset metadata.
struct GlossEntry {
  std::string gloss_id;
  std::string sense_id;
  std::string synset_id;
  std::vector<std::string> word_forms;
  Vec e_g;  // d_g, unit norm
};

struct Corpus {
  std::vector<ContextInstance> instances;
  std::vector<GlossEntry> glosses;  // sorted by gloss_id
  std::unordered_map<std::string, std::size_t> gloss_index;
  std::size_t d_h = 0;
  std::size_t d_g = 0;

  const GlossEntry& gloss(const std::string& gloss_id) const;
  void rebuild_index();
};

// On-disk layout inside a corpus directory:
inline constexpr const char* kCorpusFile = "corpus.jsonl";
inline constexpr const char* kGlossFile = "glosses.gem1";
inline constexpr const char* kContextFile = "contexts.cem1";
inline constexpr const char* kLatentFile = "latents.gem1";  // written by the generator only

/// Loads and cross-validates corpus.jsonl + glosses.gem1 + contexts.cem1.
Corpus load_corpus(const std::filesystem::path& dir);

/// Inverse of load_corpus; every file written atomically.
void write_corpus(const Corpus& corpus, const std::filesystem::path& dir);

/// Desk-scale stand-in for the frozen encoders: senses are latent unit
/// vectors, gloss embeddings and span tokens are noisy copies of the
/// latent, non-span tokens are unit noise.
struct SynthConfig {
  std::size_t n_synsets = 50;
  std::size_t words_per_synset = 3;
  std::size_t contexts_per_word = 23;
  double ambiguous_fraction = 0.05;
  std::size_t n_tokens = 12;
  std::size_t d_h = 48;
  std::size_t d_g = 48;
  double noise_sigma = 0.05;
  std::uint64_t seed = 42;
  // 0 = i.i.d. latents on the sphere (default). > 0 groups synsets under
  // that many supersense cluster centers, giving the gloss space a
  // topology the structure loss can preserve.
  std::size_t n_supersenses = 0;
  double cluster_spread = 0.1;  // per-coordinate sigma around the center

  void validate() const;
};

struct SynthResult {
  Corpus corpus;
  // one latent per synset, in each space (shared vector when d_h == d_g)
  std::vector<Vec> gloss_latents;
  std::vector<Vec> context_latents;
  std::vector<std::string> ambiguous_words;
};

SynthResult synth_generate(const SynthConfig& cfg);

/// One mini-batch: corpus-level instance indices plus the positive sets
/// P_i (batch-local indices, i always included).
struct BatchPlan {
  std::vector<std::size_t> instances;
  std::vector<std::vector<std::size_t>> positives;
};

/// Deterministic sense-grouped batching over `subset` (corpus-level
/// indices). Same-sense instances are packed as pairs so every sense with
/// >= 2 remaining instances lands with a positive partner in some batch;
/// a trailing singleton batch is merged into its predecessor.
std::vector<BatchPlan> make_batches(const Corpus& corpus, const std::vector<std::size_t>& subset,
                                    std::size_t batch_size, std::uint64_t seed,
                                    std::uint64_t epoch);

}  // namespace glossalign
