#pragma once

#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "glossalign/data.hpp"
#include "glossalign/matrix.hpp"
#include "glossalign/model.hpp"

namespace glossalign {

/// Candidates ranked by descending cosine score, ties broken by ascending
/// candidate id.
struct RankedList {
  std::string query_id;
  std::vector<std::string> ranked;
  std::set<std::string> relevant;
};

RankedList make_ranked_list(std::string query_id,
                            std::vector<std::pair<std::string, double>> scored,
                            std::set<std::string> relevant);

/// Set-based P/R at k against the relevant set; harmonic mean (0 when both
/// are 0). Throws EmptyRelevantSet.
double f1_at_k(const RankedList& ranked, std::size_t k);

/// Binary-gain NDCG: DCG = Σ_{r<=k} rel_r/log2(r+1), IDCG over the ideal
/// arrangement of min(|relevant|, k) items. Throws EmptyRelevantSet.
double ndcg_at_k(const RankedList& ranked, std::size_t k);

struct PairJudgment {
  std::string word_a;
  std::string word_b;
  double human_score = 0.0;   // graded-similarity tasks
  std::string label;          // "SYN"/"ANT" relation tasks
  std::optional<Pos> pos;
  double model_score = 0.0;
};

/// Spearman's ρ with average-rank tie handling (Pearson of the rank
/// vectors). Throws DegenerateRanks when either side has no rank variance.
double spearman_rho(std::span<const PairJudgment> pairs);

/// AP over pairs sorted by descending model score (ties by ascending pair
/// id): mean over positives of precision at their rank. Throws NoPositives.
double average_precision(std::span<const PairJudgment> pairs, const std::string& positive_label);

/// Nearest gloss by cosine among the word's own sense inventory; exact ties
/// go to the lexicographically smallest gloss_id. Throws EmptyCandidates.
std::string wsd_predict(const Vec& e_c, std::span<const GlossEntry> candidates);

struct WsdF1 {
  double overall = 0.0;
  std::map<Pos, double> per_pos;  // empty POS subsets are absent
};

/// Single-label micro-F1 (== accuracy), overall and per POS subset.
WsdF1 wsd_f1(std::span<const std::string> predictions, std::span<const std::string> gold,
             std::span<const Pos> pos_tags);

/// Type-level embedding for pair tasks: mean of unit context embeddings
/// over up to 16 deterministically sampled contexts of the word,
/// re-normalized. A word with no contexts but present in some gloss's
/// word_forms falls back to a single-token context built from that gloss
/// embedding (requires d_h == d_g). Throws UnknownWord.
Vec word_embedding_for_pairs(const std::string& word, const Corpus& corpus,
                             const ContextHeadParams& params, std::uint64_t seed);

struct MetricsReport {
  std::map<std::size_t, double> f1_at_k;
  std::map<std::size_t, double> ndcg_at_k;
  std::optional<WsdF1> wsd;
  std::optional<double> spearman;
  // relation -> pos-bucket ("adj"/"noun"/"verb"/"adv"/"all") -> AP
  std::map<std::string, std::map<std::string, double>> ap;

  std::string to_json() const;
  std::string to_table() const;
};

// Harnesses over a trained head (eval-mode forwards).

/// Nearest-gloss retrieval over the full gloss table; macro-averaged F1@k
/// and NDCG@k for each requested k.
MetricsReport eval_retrieval(const Corpus& corpus, const std::vector<std::size_t>& subset,
                             const ContextHeadParams& params, const std::vector<std::size_t>& ks);

/// WSD over each instance's own sense inventory; overall and per-POS F1.
MetricsReport eval_wsd(const Corpus& corpus, const std::vector<std::size_t>& subset,
                       const ContextHeadParams& params);

MetricsReport eval_simpairs(const Corpus& corpus, const ContextHeadParams& params,
                            std::vector<PairJudgment> pairs, std::uint64_t seed);

MetricsReport eval_synant(const Corpus& corpus, const ContextHeadParams& params,
                          std::vector<PairJudgment> pairs, std::uint64_t seed);

/// Parses `word_a<TAB>word_b<TAB>score_or_label[<TAB>pos]` lines.
std::vector<PairJudgment> load_pairs_tsv(const std::filesystem::path& path, bool labeled);

/// Gold sense predicted by cosine between an instance's context embedding
/// (eval mode) and its word's inventory. Exposed for harness reuse.
std::vector<std::size_t> all_instance_indices(const Corpus& corpus);

}  // namespace glossalign
