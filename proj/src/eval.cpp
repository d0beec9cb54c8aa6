#include "glossalign/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "glossalign/kernels.hpp"
#include "glossalign/rng.hpp"

namespace glossalign {

using nlohmann::json;

RankedList make_ranked_list(std::string query_id,
                            std::vector<std::pair<std::string, double>> scored,
                            std::set<std::string> relevant) {
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  RankedList out;
  out.query_id = std::move(query_id);
  out.ranked.reserve(scored.size());
  for (auto& [id, score] : scored) out.ranked.push_back(std::move(id));
  out.relevant = std::move(relevant);
  return out;
}

double f1_at_k(const RankedList& ranked, std::size_t k) {
  if (k < 1) throw Error(Err::ConfigInvalid, "k must be >= 1");
  if (ranked.relevant.empty()) throw Error(Err::EmptyRelevantSet, ranked.query_id);
  std::size_t hits = 0;
  const std::size_t top = std::min(k, ranked.ranked.size());
  for (std::size_t r = 0; r < top; ++r)
    if (ranked.relevant.count(ranked.ranked[r])) ++hits;
  const double p = static_cast<double>(hits) / static_cast<double>(k);
  const double rec = static_cast<double>(hits) / static_cast<double>(ranked.relevant.size());
  if (p + rec == 0.0) return 0.0;
  return 2.0 * p * rec / (p + rec);
}

double ndcg_at_k(const RankedList& ranked, std::size_t k) {
  if (k < 1) throw Error(Err::ConfigInvalid, "k must be >= 1");
  if (ranked.relevant.empty()) throw Error(Err::EmptyRelevantSet, ranked.query_id);
  double dcg = 0.0;
  const std::size_t top = std::min(k, ranked.ranked.size());
  for (std::size_t r = 0; r < top; ++r)
    if (ranked.relevant.count(ranked.ranked[r]))
      dcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
  double idcg = 0.0;
  const std::size_t ideal = std::min(k, ranked.relevant.size());
  for (std::size_t r = 0; r < ideal; ++r) idcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
  return dcg / idcg;
}

namespace {

// fractional (average) ranks, 1-based
Vec rank_with_ties(const Vec& values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  Vec ranks(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double avg = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = avg;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman_rho(std::span<const PairJudgment> pairs) {
  if (pairs.size() < 2) throw Error(Err::DatasetTooSmall, "need >= 2 pairs");
  Vec human(pairs.size()), model(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (!std::isfinite(pairs[i].human_score) || !std::isfinite(pairs[i].model_score))
      throw Error(Err::NonFiniteInput, "pair scores");
    human[i] = pairs[i].human_score;
    model[i] = pairs[i].model_score;
  }
  const Vec rh = rank_with_ties(human);
  const Vec rm = rank_with_ties(model);

  const double n = static_cast<double>(pairs.size());
  double mh = 0.0, mm = 0.0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    mh += rh[i];
    mm += rm[i];
  }
  mh /= n;
  mm /= n;
  double cov = 0.0, vh = 0.0, vm = 0.0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    cov += (rh[i] - mh) * (rm[i] - mm);
    vh += (rh[i] - mh) * (rh[i] - mh);
    vm += (rm[i] - mm) * (rm[i] - mm);
  }
  if (vm == 0.0 || vh == 0.0) throw Error(Err::DegenerateRanks, "no rank variance");
  return cov / std::sqrt(vh * vm);
}

double average_precision(std::span<const PairJudgment> pairs,
                         const std::string& positive_label) {
  if (pairs.empty()) throw Error(Err::NoPositives, "no pairs");
  std::vector<std::size_t> order(pairs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  auto pair_id = [&](std::size_t i) { return pairs[i].word_a + "\t" + pairs[i].word_b; };
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (pairs[a].model_score != pairs[b].model_score)
      return pairs[a].model_score > pairs[b].model_score;
    return pair_id(a) < pair_id(b);
  });
  double sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t r = 0; r < order.size(); ++r) {
    if (pairs[order[r]].label == positive_label) {
      ++n_pos;
      sum += static_cast<double>(n_pos) / static_cast<double>(r + 1);
    }
  }
  if (n_pos == 0) throw Error(Err::NoPositives, "label " + positive_label);
  return sum / static_cast<double>(n_pos);
}

std::string wsd_predict(const Vec& e_c, std::span<const GlossEntry> candidates) {
  if (candidates.empty()) throw Error(Err::EmptyCandidates, "empty sense inventory");
  const GlossEntry* best = nullptr;
  double best_score = 0.0;
  for (const auto& g : candidates) {
    const double score = dot(e_c, g.e_g);
    if (!best || score > best_score ||
        (score == best_score && g.gloss_id < best->gloss_id)) {
      best = &g;
      best_score = score;
    }
  }
  return best->gloss_id;
}

WsdF1 wsd_f1(std::span<const std::string> predictions, std::span<const std::string> gold,
             std::span<const Pos> pos_tags) {
  if (predictions.size() != gold.size() || predictions.size() != pos_tags.size())
    throw Error(Err::LengthMismatch, "predictions/gold/pos lengths");
  WsdF1 out;
  std::map<Pos, std::pair<std::size_t, std::size_t>> per_pos;  // correct, total
  std::size_t correct = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    auto& [c, t] = per_pos[pos_tags[i]];
    ++t;
    if (predictions[i] == gold[i]) {
      ++c;
      ++correct;
    }
  }
  out.overall =
      predictions.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(gold.size());
  for (const auto& [pos, ct] : per_pos)
    out.per_pos[pos] = static_cast<double>(ct.first) / static_cast<double>(ct.second);
  return out;
}

namespace {

Vec eval_embedding(const Corpus& corpus, std::size_t instance, const ContextHeadParams& params) {
  const ContextInstance& inst = corpus.instances[instance];
  return context_forward(inst.h_c, inst.span, params, DropoutState::eval());
}

std::vector<GlossEntry> sense_inventory(const Corpus& corpus, const std::string& word) {
  std::vector<GlossEntry> inv;
  for (const auto& g : corpus.glosses)
    if (std::find(g.word_forms.begin(), g.word_forms.end(), word) != g.word_forms.end())
      inv.push_back(g);
  return inv;
}

}  // namespace

std::vector<std::size_t> all_instance_indices(const Corpus& corpus) {
  std::vector<std::size_t> idx(corpus.instances.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return idx;
}

Vec word_embedding_for_pairs(const std::string& word, const Corpus& corpus,
                             const ContextHeadParams& params, std::uint64_t seed) {
  std::vector<std::size_t> contexts;
  for (std::size_t i = 0; i < corpus.instances.size(); ++i)
    if (corpus.instances[i].word == word) contexts.push_back(i);

  if (contexts.empty()) {
    // fall back to a single-token context built from a gloss embedding
    auto inv = sense_inventory(corpus, word);
    if (inv.empty() || corpus.d_h != corpus.d_g)
      throw Error(Err::UnknownWord, word);
    Matrix h = Matrix::from_row(inv.front().e_g);
    return context_forward(h, Span{0, 1}, params, DropoutState::eval());
  }

  constexpr std::size_t kMaxContexts = 16;
  if (contexts.size() > kMaxContexts) {
    // FNV-1a: std::hash would be implementation-defined, breaking
    // cross-toolchain reproducibility of the sample
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : word) h = (h ^ c) * 0x100000001b3ULL;
    Rng rng(derive_seed(seed, 0x30bd, h));
    rng.shuffle(contexts);
    contexts.resize(kMaxContexts);
    std::sort(contexts.begin(), contexts.end());
  }

  Vec mean(params.config.d_model, 0.0);
  for (std::size_t idx : contexts) {
    const Vec e = eval_embedding(corpus, idx, params);
    axpy(1.0, e, mean);
  }
  const double n = norm2(mean);
  if (n <= 1e-12) throw Error(Err::ZeroRow, "context embeddings cancel for " + word);
  for (auto& v : mean) v /= n;
  return mean;
}

MetricsReport eval_retrieval(const Corpus& corpus, const std::vector<std::size_t>& subset,
                             const ContextHeadParams& params,
                             const std::vector<std::size_t>& ks) {
  MetricsReport report;
  if (subset.empty()) return report;

  // gloss ids with the same sense form the gold set of a query
  std::vector<Vec> f1_per_query(ks.size(), Vec(subset.size(), 0.0));
  std::vector<Vec> ndcg_per_query(ks.size(), Vec(subset.size(), 0.0));

  const std::int64_t n = static_cast<std::int64_t>(subset.size());
  std::exception_ptr failure = nullptr;
#pragma omp parallel for schedule(static)
  for (std::int64_t qi = 0; qi < n; ++qi) {
    try {
      const ContextInstance& inst = corpus.instances[subset[static_cast<std::size_t>(qi)]];
      const Vec e = context_forward(inst.h_c, inst.span, params, DropoutState::eval());
      std::vector<std::pair<std::string, double>> scored;
      scored.reserve(corpus.glosses.size());
      std::set<std::string> relevant{inst.gloss_id};
      for (const auto& g : corpus.glosses) {
        scored.emplace_back(g.gloss_id, dot(e, g.e_g));
        if (g.sense_id == inst.sense_id) relevant.insert(g.gloss_id);
      }
      RankedList ranked = make_ranked_list(inst.id, std::move(scored), std::move(relevant));
      for (std::size_t ki = 0; ki < ks.size(); ++ki) {
        f1_per_query[ki][static_cast<std::size_t>(qi)] = f1_at_k(ranked, ks[ki]);
        ndcg_per_query[ki][static_cast<std::size_t>(qi)] = ndcg_at_k(ranked, ks[ki]);
      }
    } catch (...) {
#pragma omp critical(glossalign_eval_retrieval_err)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  for (std::size_t ki = 0; ki < ks.size(); ++ki) {
    double f1 = 0.0, nd = 0.0;  // macro average, fixed reduction order
    for (std::size_t q = 0; q < subset.size(); ++q) {
      f1 += f1_per_query[ki][q];
      nd += ndcg_per_query[ki][q];
    }
    report.f1_at_k[ks[ki]] = f1 / static_cast<double>(subset.size());
    report.ndcg_at_k[ks[ki]] = nd / static_cast<double>(subset.size());
  }
  return report;
}

MetricsReport eval_wsd(const Corpus& corpus, const std::vector<std::size_t>& subset,
                       const ContextHeadParams& params) {
  std::vector<std::string> predictions(subset.size()), gold(subset.size());
  std::vector<Pos> pos(subset.size());

  const std::int64_t n = static_cast<std::int64_t>(subset.size());
  std::exception_ptr failure = nullptr;
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    try {
      const std::size_t q = static_cast<std::size_t>(i);
      const ContextInstance& inst = corpus.instances[subset[q]];
      const Vec e = context_forward(inst.h_c, inst.span, params, DropoutState::eval());
      const auto inventory = sense_inventory(corpus, inst.word);
      predictions[q] = wsd_predict(e, inventory);
      gold[q] = inst.gloss_id;
      pos[q] = inst.pos;
    } catch (...) {
#pragma omp critical(glossalign_eval_wsd_err)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  MetricsReport report;
  report.wsd = wsd_f1(predictions, gold, pos);
  return report;
}

namespace {

MetricsReport eval_pairs_common(const Corpus& corpus, const ContextHeadParams& params,
                                std::vector<PairJudgment>& pairs, std::uint64_t seed,
                                bool labeled) {
  std::map<std::string, Vec> cache;
  for (auto& p : pairs) {
    for (const std::string& w : {p.word_a, p.word_b})
      if (!cache.count(w)) cache[w] = word_embedding_for_pairs(w, corpus, params, seed);
    p.model_score = dot(cache[p.word_a], cache[p.word_b]);
  }

  MetricsReport report;
  if (!labeled) {
    report.spearman = spearman_rho(pairs);
    return report;
  }

  auto bucket_name = [](std::optional<Pos> pos) {
    return pos ? std::string(to_string(*pos)) : std::string("all");
  };
  std::map<std::string, std::vector<PairJudgment>> buckets;
  for (const auto& p : pairs) buckets[bucket_name(p.pos)].push_back(p);
  for (const auto& [bucket, members] : buckets) {
    for (const char* rel : {"SYN", "ANT"}) {
      bool has = std::any_of(members.begin(), members.end(),
                             [&](const PairJudgment& p) { return p.label == rel; });
      if (has) report.ap[rel][bucket] = average_precision(members, rel);
    }
  }
  return report;
}

}  // namespace

MetricsReport eval_simpairs(const Corpus& corpus, const ContextHeadParams& params,
                            std::vector<PairJudgment> pairs, std::uint64_t seed) {
  return eval_pairs_common(corpus, params, pairs, seed, false);
}

MetricsReport eval_synant(const Corpus& corpus, const ContextHeadParams& params,
                          std::vector<PairJudgment> pairs, std::uint64_t seed) {
  return eval_pairs_common(corpus, params, pairs, seed, true);
}

std::vector<PairJudgment> load_pairs_tsv(const std::filesystem::path& path, bool labeled) {
  std::ifstream in(path);
  if (!in) throw Error(Err::IoError, "cannot open " + path.string());
  std::vector<PairJudgment> pairs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, '\t')) fields.push_back(field);
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (fields.size() != 3 && fields.size() != 4)
      throw Error(Err::ParseError, where + ": expected 3 or 4 tab-separated fields");
    PairJudgment p;
    p.word_a = fields[0];
    p.word_b = fields[1];
    if (labeled) {
      if (fields[2] != "SYN" && fields[2] != "ANT")
        throw Error(Err::ParseError, where + ": label must be SYN or ANT");
      p.label = fields[2];
    } else {
      try {
        p.human_score = std::stod(fields[2]);
      } catch (const std::exception&) {
        throw Error(Err::ParseError, where + ": bad score '" + fields[2] + "'");
      }
    }
    if (fields.size() == 4) p.pos = pos_from_string(fields[3]);
    pairs.push_back(std::move(p));
  }
  return pairs;
}

std::string MetricsReport::to_json() const {
  json j = json::object();
  if (!f1_at_k.empty()) {
    json m = json::object();
    for (const auto& [k, v] : f1_at_k) m[std::to_string(k)] = v;
    j["f1_at_k"] = m;
  }
  if (!ndcg_at_k.empty()) {
    json m = json::object();
    for (const auto& [k, v] : ndcg_at_k) m[std::to_string(k)] = v;
    j["ndcg_at_k"] = m;
  }
  if (wsd) {
    json m = json::object();
    m["overall"] = wsd->overall;
    for (const auto& [pos, v] : wsd->per_pos) m[to_string(pos)] = v;
    j["wsd_f1"] = m;
  }
  if (spearman) j["spearman_rho"] = *spearman;
  if (!ap.empty()) {
    json m = json::object();
    for (const auto& [rel, buckets] : ap) {
      json b = json::object();
      for (const auto& [bucket, v] : buckets) b[bucket] = v;
      m[rel] = b;
    }
    j["ap"] = m;
  }
  return j.dump(2) + "\n";
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

}  // namespace

std::string MetricsReport::to_table() const {
  std::ostringstream out;
  auto row = [&](const std::string& name, const std::string& value) {
    out << name;
    for (std::size_t i = name.size(); i < 24; ++i) out << ' ';
    out << value << "\n";
  };
  for (const auto& [k, v] : f1_at_k) row("f1@" + std::to_string(k), fmt(v));
  for (const auto& [k, v] : ndcg_at_k) row("ndcg@" + std::to_string(k), fmt(v));
  if (wsd) {
    row("wsd_f1", fmt(wsd->overall));
    for (const auto& [pos, v] : wsd->per_pos) row(std::string("wsd_f1.") + to_string(pos), fmt(v));
  }
  if (spearman) row("spearman_rho", fmt(*spearman));
  for (const auto& [rel, buckets] : ap)
    for (const auto& [bucket, v] : buckets) row("ap." + rel + "." + bucket, fmt(v));
  return out.str();
}

}  // namespace glossalign
