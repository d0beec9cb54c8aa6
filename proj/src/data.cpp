#include "glossalign/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "glossalign/emb_io.hpp"
#include "glossalign/rng.hpp"

namespace glossalign {

using nlohmann::json;

const char* to_string(Pos pos) {
  switch (pos) {
    case Pos::Noun: return "noun";
    case Pos::Verb: return "verb";
    case Pos::Adj: return "adj";
    case Pos::Adv: return "adv";
  }
  return "noun";
}

Pos pos_from_string(const std::string& s) {
  if (s == "noun") return Pos::Noun;
  if (s == "verb") return Pos::Verb;
  if (s == "adj") return Pos::Adj;
  if (s == "adv") return Pos::Adv;
  throw Error(Err::ParseError, "unknown pos '" + s + "'");
}

const GlossEntry& Corpus::gloss(const std::string& gloss_id) const {
  auto it = gloss_index.find(gloss_id);
  if (it == gloss_index.end()) throw Error(Err::DanglingGloss, gloss_id);
  return glosses[it->second];
}

void Corpus::rebuild_index() {
  gloss_index.clear();
  for (std::size_t i = 0; i < glosses.size(); ++i) {
    if (!gloss_index.emplace(glosses[i].gloss_id, i).second)
      throw Error(Err::DuplicateId, glosses[i].gloss_id);
  }
}

namespace {

json instance_to_json(const ContextInstance& inst) {
  return json{{"id", inst.id},
              {"word", inst.word},
              {"sense_id", inst.sense_id},
              {"synset_id", inst.synset_id},
              {"gloss_id", inst.gloss_id},
              {"pos", to_string(inst.pos)},
              {"span", {inst.span.start, inst.span.end}},
              {"n_tokens", inst.h_c.rows()}};
}

}  // namespace

void write_corpus(const Corpus& corpus, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);

  std::string jsonl;
  for (const auto& inst : corpus.instances) {
    jsonl += instance_to_json(inst).dump();
    jsonl += '\n';
  }
  atomic_write_file(dir / kCorpusFile, jsonl);

  VectorTable glosses;
  glosses.dim = static_cast<std::uint32_t>(corpus.d_g);
  for (const auto& g : corpus.glosses) glosses.entries.emplace_back(g.gloss_id, g.e_g);
  write_vector_table(dir / kGlossFile, glosses);

  // gloss metadata rides alongside the embeddings
  json meta = json::array();
  for (const auto& g : corpus.glosses)
    meta.push_back(json{{"gloss_id", g.gloss_id},
                        {"sense_id", g.sense_id},
                        {"synset_id", g.synset_id},
                        {"word_forms", g.word_forms}});
  atomic_write_file(dir / "glosses.jsonl", [&] {
    std::string out;
    for (const auto& g : meta) {
      out += g.dump();
      out += '\n';
    }
    return out;
  }());

  MatrixTable contexts;
  contexts.dim = static_cast<std::uint32_t>(corpus.d_h);
  for (const auto& inst : corpus.instances) contexts.entries.emplace_back(inst.id, inst.h_c);
  write_matrix_table(dir / kContextFile, contexts);
}

Corpus load_corpus(const std::filesystem::path& dir) {
  const auto corpus_path = dir / kCorpusFile;
  std::ifstream in(corpus_path);
  if (!in) throw Error(Err::IoError, "cannot open " + corpus_path.string());

  Corpus corpus;

  VectorTable gloss_vecs = read_vector_table(dir / kGlossFile);
  corpus.d_g = gloss_vecs.dim;
  std::unordered_map<std::string, Vec> gloss_emb;
  for (auto& [id, vec] : gloss_vecs.entries) gloss_emb.emplace(id, std::move(vec));

  // optional sense/synset metadata
  std::unordered_map<std::string, GlossEntry> gloss_meta;
  const auto meta_path = dir / "glosses.jsonl";
  if (std::filesystem::exists(meta_path)) {
    std::ifstream meta_in(meta_path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(meta_in, line)) {
      ++line_no;
      if (line.empty()) continue;
      json j;
      try {
        j = json::parse(line);
        GlossEntry g;
        g.gloss_id = j.at("gloss_id").get<std::string>();
        g.sense_id = j.at("sense_id").get<std::string>();
        g.synset_id = j.at("synset_id").get<std::string>();
        g.word_forms = j.at("word_forms").get<std::vector<std::string>>();
        gloss_meta.emplace(g.gloss_id, std::move(g));
      } catch (const json::exception& e) {
        throw Error(Err::ParseError,
                    meta_path.string() + ":" + std::to_string(line_no) + ": " + e.what());
      }
    }
  }

  for (auto& [id, vec] : gloss_emb) {
    GlossEntry g;
    auto it = gloss_meta.find(id);
    if (it != gloss_meta.end()) g = it->second;
    g.gloss_id = id;
    if (g.sense_id.empty()) g.sense_id = id;
    if (g.synset_id.empty()) g.synset_id = id;
    g.e_g = vec;
    const double n = norm2(g.e_g);
    if (std::fabs(n - 1.0) > 1e-5) {
      if (n <= 1e-12) throw Error(Err::ZeroRow, "gloss embedding " + id);
      for (auto& v : g.e_g) v /= n;  // f32 storage drifts a hair off unit norm
    }
    corpus.glosses.push_back(std::move(g));
  }
  std::sort(corpus.glosses.begin(), corpus.glosses.end(),
            [](const GlossEntry& a, const GlossEntry& b) { return a.gloss_id < b.gloss_id; });
  corpus.rebuild_index();

  MatrixTable ctx = read_matrix_table(dir / kContextFile);
  corpus.d_h = ctx.dim;
  std::unordered_map<std::string, Matrix> ctx_emb;
  for (auto& [id, m] : ctx.entries) ctx_emb.emplace(id, std::move(m));

  std::string line;
  std::size_t line_no = 0;
  std::unordered_set<std::string> instance_ids;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = corpus_path.string() + ":" + std::to_string(line_no);
    ContextInstance inst;
    std::size_t n_tokens = 0;
    try {
      json j = json::parse(line);
      inst.id = j.at("id").get<std::string>();
      inst.word = j.at("word").get<std::string>();
      inst.sense_id = j.at("sense_id").get<std::string>();
      inst.synset_id = j.at("synset_id").get<std::string>();
      inst.gloss_id = j.at("gloss_id").get<std::string>();
      inst.pos = pos_from_string(j.at("pos").get<std::string>());
      const auto& span = j.at("span");
      if (!span.is_array() || span.size() != 2) throw Error(Err::ParseError, where + ": span");
      inst.span.start = span[0].get<std::size_t>();
      inst.span.end = span[1].get<std::size_t>();
      n_tokens = j.at("n_tokens").get<std::size_t>();
    } catch (const json::exception& e) {
      throw Error(Err::ParseError, where + ": " + e.what());
    } catch (const Error& e) {
      if (e.code() == Err::ParseError) throw;
      throw Error(Err::ParseError, where + ": " + e.what());
    }
    if (n_tokens < 1 || inst.span.start >= inst.span.end || inst.span.end > n_tokens)
      throw Error(Err::ParseError, where + ": invalid span [" + std::to_string(inst.span.start) +
                                       "," + std::to_string(inst.span.end) + ") for " +
                                       std::to_string(n_tokens) + " tokens");
    if (!instance_ids.insert(inst.id).second) throw Error(Err::DuplicateId, inst.id);
    if (corpus.gloss_index.find(inst.gloss_id) == corpus.gloss_index.end())
      throw Error(Err::DanglingGloss, inst.gloss_id);
    auto it = ctx_emb.find(inst.id);
    if (it == ctx_emb.end()) throw Error(Err::MissingEmbedding, "no token matrix for " + inst.id);
    inst.h_c = it->second;
    if (inst.h_c.rows() != n_tokens)
      throw Error(Err::DimMismatch, inst.id + ": n_tokens vs stored rows");
    if (inst.h_c.cols() != corpus.d_h) throw Error(Err::DimMismatch, inst.id + ": token dim");
    corpus.instances.push_back(std::move(inst));
  }
  return corpus;
}

void SynthConfig::validate() const {
  if (n_synsets < 1 || words_per_synset < 1 || contexts_per_word < 1 || n_tokens < 1 || d_h < 1 ||
      d_g < 1)
    throw Error(Err::ConfigInvalid, "synth counts must be >= 1");
  if (ambiguous_fraction < 0.0 || ambiguous_fraction > 1.0)
    throw Error(Err::ConfigInvalid, "ambiguous_fraction in [0,1]");
  if (noise_sigma < 0.0) throw Error(Err::ConfigInvalid, "noise_sigma must be >= 0");
  if (cluster_spread < 0.0) throw Error(Err::ConfigInvalid, "cluster_spread must be >= 0");
}

namespace {

std::string zero_pad(std::size_t v, int width = 4) {
  std::string s = std::to_string(v);
  while (static_cast<int>(s.size()) < width) s.insert(s.begin(), '0');
  return s;
}

Vec noisy_copy(const Vec& latent, double sigma, Rng& rng) {
  Vec v = latent;
  for (auto& x : v) x += sigma * rng.next_gaussian();
  const double n = norm2(v);
  if (n <= 1e-12) return latent;
  for (auto& x : v) x /= n;
  return v;
}

}  // namespace

SynthResult synth_generate(const SynthConfig& cfg) {
  cfg.validate();
  SynthResult result;
  Corpus& corpus = result.corpus;
  corpus.d_h = cfg.d_h;
  corpus.d_g = cfg.d_g;

  Rng rng(derive_seed(cfg.seed, 0x5e45));

  // one latent per synset; the gloss- and context-space latents coincide
  // when the dims match so span-mean retrieval has an exact target. With
  // supersenses enabled, synsets are spread around shared cluster centers
  // (round-robin assignment) instead of drawn i.i.d.
  std::vector<Vec> centers_g, centers_c;
  for (std::size_t c = 0; c < cfg.n_supersenses; ++c) {
    Vec gc = rng.next_unit_vector(cfg.d_g);
    Vec cc = (cfg.d_h == cfg.d_g) ? gc : rng.next_unit_vector(cfg.d_h);
    centers_g.push_back(std::move(gc));
    centers_c.push_back(std::move(cc));
  }
  result.gloss_latents.reserve(cfg.n_synsets);
  result.context_latents.reserve(cfg.n_synsets);
  for (std::size_t s = 0; s < cfg.n_synsets; ++s) {
    Vec g_latent, c_latent;
    if (cfg.n_supersenses > 0) {
      const std::size_t c = s % cfg.n_supersenses;
      g_latent = noisy_copy(centers_g[c], cfg.cluster_spread, rng);
      c_latent = (cfg.d_h == cfg.d_g) ? g_latent : noisy_copy(centers_c[c], cfg.cluster_spread, rng);
    } else {
      g_latent = rng.next_unit_vector(cfg.d_g);
      c_latent = (cfg.d_h == cfg.d_g) ? g_latent : rng.next_unit_vector(cfg.d_h);
    }
    result.gloss_latents.push_back(std::move(g_latent));
    result.context_latents.push_back(std::move(c_latent));
  }

  // words: words_per_synset per synset, then an ambiguous subset gains 1-2
  // extra senses from other synsets
  struct WordInfo {
    std::string word;
    std::vector<std::size_t> synsets;
    Pos pos;
  };
  std::vector<WordInfo> words;
  for (std::size_t s = 0; s < cfg.n_synsets; ++s)
    for (std::size_t k = 0; k < cfg.words_per_synset; ++k) {
      WordInfo w;
      w.word = "w" + zero_pad(s) + "_" + std::to_string(k);
      w.synsets.push_back(s);
      w.pos = static_cast<Pos>(words.size() % 4);
      words.push_back(std::move(w));
    }

  const std::size_t n_ambiguous = static_cast<std::size_t>(
      std::ceil(cfg.ambiguous_fraction * static_cast<double>(words.size())));
  std::vector<std::size_t> order(words.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);
  for (std::size_t a = 0; a < n_ambiguous && a < words.size(); ++a) {
    WordInfo& w = words[order[a]];
    if (cfg.n_synsets < 2) break;
    const std::size_t extra = 1 + rng.next_below(2);  // 2 or 3 senses total
    for (std::size_t e = 0; e < extra; ++e) {
      std::size_t s;
      do {
        s = rng.next_below(cfg.n_synsets);
      } while (std::find(w.synsets.begin(), w.synsets.end(), s) != w.synsets.end());
      w.synsets.push_back(s);
    }
    result.ambiguous_words.push_back(w.word);
  }
  std::sort(result.ambiguous_words.begin(), result.ambiguous_words.end());

  // glosses: one per synset; word_forms collected from the final word list
  std::vector<std::vector<std::string>> forms(cfg.n_synsets);
  for (const auto& w : words)
    for (std::size_t s : w.synsets) forms[s].push_back(w.word);
  for (std::size_t s = 0; s < cfg.n_synsets; ++s) {
    GlossEntry g;
    g.gloss_id = "gloss" + zero_pad(s);
    g.sense_id = "sense" + zero_pad(s);
    g.synset_id = "syn" + zero_pad(s);
    g.word_forms = forms[s];
    g.e_g = noisy_copy(result.gloss_latents[s], cfg.noise_sigma, rng);
    corpus.glosses.push_back(std::move(g));
  }
  corpus.rebuild_index();

  // contexts: contexts_per_word per word, senses assigned round-robin for
  // ambiguous words so every sense of the word is exercised
  std::size_t counter = 0;
  for (const auto& w : words) {
    for (std::size_t c = 0; c < cfg.contexts_per_word; ++c) {
      const std::size_t synset = w.synsets[c % w.synsets.size()];
      ContextInstance inst;
      inst.id = "ctx" + zero_pad(counter++, 6);
      inst.word = w.word;
      inst.sense_id = "sense" + zero_pad(synset);
      inst.synset_id = "syn" + zero_pad(synset);
      inst.gloss_id = "gloss" + zero_pad(synset);
      inst.pos = w.pos;

      const std::size_t span_len = std::min<std::size_t>(cfg.n_tokens, 1 + rng.next_below(2));
      const std::size_t start = rng.next_below(cfg.n_tokens - span_len + 1);
      inst.span = {start, start + span_len};

      inst.h_c = Matrix(cfg.n_tokens, cfg.d_h);
      for (std::size_t t = 0; t < cfg.n_tokens; ++t) {
        Vec row;
        if (t >= inst.span.start && t < inst.span.end)
          row = noisy_copy(result.context_latents[synset], cfg.noise_sigma, rng);
        else
          row = rng.next_unit_vector(cfg.d_h);
        std::copy(row.begin(), row.end(), inst.h_c.row(t));
      }
      corpus.instances.push_back(std::move(inst));
    }
  }
  return result;
}

std::vector<BatchPlan> make_batches(const Corpus& corpus, const std::vector<std::size_t>& subset,
                                    std::size_t batch_size, std::uint64_t seed,
                                    std::uint64_t epoch) {
  if (batch_size < 2) throw Error(Err::ConfigInvalid, "batch_size must be >= 2");
  if (subset.size() < 2) throw Error(Err::DatasetTooSmall, "need >= 2 instances");

  Rng rng(derive_seed(seed, 0xba7c, epoch));

  // group by sense, shuffle within groups, then chunk each group into
  // pairs (plus one singleton for odd counts); pairs never split across a
  // batch boundary, so every sense with >= 2 instances keeps a positive
  // partner in some batch
  std::map<std::string, std::vector<std::size_t>> by_sense;
  for (std::size_t idx : subset) by_sense[corpus.instances[idx].sense_id].push_back(idx);

  std::vector<std::vector<std::size_t>> chunks;
  for (auto& [sense, members] : by_sense) {
    rng.shuffle(members);
    for (std::size_t i = 0; i + 1 < members.size(); i += 2)
      chunks.push_back({members[i], members[i + 1]});
    if (members.size() % 2 == 1) chunks.push_back({members.back()});
  }
  rng.shuffle(chunks);

  std::vector<std::vector<std::size_t>> batches;
  batches.emplace_back();
  for (const auto& chunk : chunks) {
    if (batches.back().size() + chunk.size() > batch_size) batches.emplace_back();
    for (std::size_t idx : chunk) batches.back().push_back(idx);
  }
  // merge undersized batches (trailing remainder, or a pair that could not
  // fit behind a singleton) into their predecessor
  for (std::size_t b = batches.size(); b-- > 0;) {
    if (batches[b].size() >= 2) continue;
    const std::size_t target = b > 0 ? b - 1 : b + 1;
    if (target >= batches.size()) throw Error(Err::DatasetTooSmall, "cannot form a batch of 2");
    auto& dst = batches[target];
    dst.insert(dst.end(), batches[b].begin(), batches[b].end());
    batches.erase(batches.begin() + static_cast<long>(b));
  }

  std::vector<BatchPlan> plans;
  plans.reserve(batches.size());
  for (auto& ids : batches) {
    BatchPlan plan;
    plan.instances = std::move(ids);
    plan.positives.resize(plan.instances.size());
    for (std::size_t i = 0; i < plan.instances.size(); ++i) {
      const std::string& sense = corpus.instances[plan.instances[i]].sense_id;
      for (std::size_t j = 0; j < plan.instances.size(); ++j)
        if (corpus.instances[plan.instances[j]].sense_id == sense) plan.positives[i].push_back(j);
    }
    plans.push_back(std::move(plan));
  }
  return plans;
}

}  // namespace glossalign
