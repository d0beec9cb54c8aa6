#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include "glossalign/eval.hpp"
#include "glossalign/rng.hpp"
#include "reference_metrics.hpp"
#include "test_helpers.hpp"

using namespace glossalign;
using namespace glossalign::testing;

namespace {

RankedList random_ranked_list(Rng& rng) {
  const std::size_t n = 1 + rng.next_below(20);
  std::vector<std::pair<std::string, double>> scored;
  for (std::size_t i = 0; i < n; ++i) {
    // coarse scores so ties actually happen
    const double s = static_cast<double>(rng.next_below(6)) / 5.0;
    scored.emplace_back("c" + std::to_string(i), s);
  }
  std::set<std::string> relevant;
  const std::size_t n_rel = 1 + rng.next_below(std::min<std::size_t>(5, n));
  while (relevant.size() < n_rel) relevant.insert("c" + std::to_string(rng.next_below(n)));
  return make_ranked_list("q", std::move(scored), std::move(relevant));
}

}  // namespace

TEST_CASE("wsd_predict: nearest axis, single candidate, tie rule") {
  GlossEntry g1{"g1", "s1", "y1", {}, {1.0, 0.0}};
  GlossEntry g2{"g2", "s2", "y2", {}, {0.0, 1.0}};
  const double n = std::sqrt(0.81 + 0.01);
  Vec e{0.9 / n, 0.1 / n};
  std::vector<GlossEntry> both{g1, g2};
  CHECK(wsd_predict(e, both) == "g1");

  std::vector<GlossEntry> single{g2};
  CHECK(wsd_predict(e, single) == "g2");

  // exact tie: order in the candidate list must not matter
  Vec mid{std::sqrt(0.5), std::sqrt(0.5)};
  std::vector<GlossEntry> reversed{g2, g1};
  CHECK(wsd_predict(mid, both) == "g1");
  CHECK(wsd_predict(mid, reversed) == "g1");

  CHECK(testing::thrown_code([&] { wsd_predict(e, std::vector<GlossEntry>{}); }) ==
        Err::EmptyCandidates);
}

TEST_CASE("wsd_predict is invariant under positive scaling of e_c") {
  Rng rng(51);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<GlossEntry> candidates;
    for (int g = 0; g < 5; ++g)
      candidates.push_back(
          {"g" + std::to_string(g), "s", "y", {}, rng.next_unit_vector(8)});
    Vec e = rng.next_unit_vector(8);
    const std::string base = wsd_predict(e, candidates);
    for (double c : {0.01, 3.0, 250.0}) {
      Vec scaled = e;
      for (auto& v : scaled) v *= c;
      CHECK(wsd_predict(scaled, candidates) == base);
    }
  }
}

TEST_CASE("wsd_f1: counting example and empty POS subsets") {
  std::vector<std::string> pred{"a", "b", "c", "x"};
  std::vector<std::string> gold{"a", "b", "c", "d"};
  std::vector<Pos> pos{Pos::Noun, Pos::Noun, Pos::Verb, Pos::Verb};
  WsdF1 f1 = wsd_f1(pred, gold, pos);
  CHECK(f1.overall == doctest::Approx(0.75));
  CHECK(f1.per_pos.at(Pos::Noun) == doctest::Approx(1.0));
  CHECK(f1.per_pos.at(Pos::Verb) == doctest::Approx(0.5));
  CHECK(f1.per_pos.count(Pos::Adv) == 0);
  CHECK(f1.per_pos.count(Pos::Adj) == 0);

  WsdF1 all = wsd_f1(gold, gold, pos);
  CHECK(all.overall == 1.0);
  for (const auto& [p, v] : all.per_pos) CHECK(v == 1.0);

  CHECK(testing::thrown_code([&] {
          wsd_f1(pred, gold, std::vector<Pos>{Pos::Noun});
        }) == Err::LengthMismatch);
}

TEST_CASE("f1_at_k examples") {
  RankedList r = make_ranked_list(
      "q", {{"a", 0.9}, {"b", 0.8}, {"c", 0.7}, {"d", 0.6}, {"e", 0.5}}, {"a"});
  CHECK(f1_at_k(r, 5) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(f1_at_k(r, 1) == doctest::Approx(1.0).epsilon(1e-12));

  RankedList miss = make_ranked_list("q", {{"a", 0.9}, {"b", 0.8}}, {"zzz"});
  CHECK(f1_at_k(miss, 2) == 0.0);

  CHECK(testing::thrown_code([&] {
          f1_at_k(make_ranked_list("q", {{"a", 1.0}}, {}), 1);
        }) == Err::EmptyRelevantSet);
}

TEST_CASE("ndcg_at_k examples") {
  RankedList first = make_ranked_list("q", {{"a", 0.9}, {"b", 0.8}}, {"a"});
  CHECK(ndcg_at_k(first, 1) == doctest::Approx(1.0).epsilon(1e-12));

  RankedList second = make_ranked_list("q", {{"a", 0.9}, {"b", 0.8}}, {"b"});
  CHECK(ndcg_at_k(second, 2) == doctest::Approx(1.0 / std::log2(3.0)).epsilon(1e-9));
  CHECK(ndcg_at_k(second, 2) == doctest::Approx(0.6309).epsilon(1e-4));

  RankedList out = make_ranked_list("q", {{"a", 0.9}, {"b", 0.8}, {"c", 0.7}}, {"c"});
  CHECK(ndcg_at_k(out, 2) == 0.0);
}

TEST_CASE("spearman examples: identity, reversal, closed form") {
  auto mk = [](std::vector<double> h, std::vector<double> m) {
    std::vector<PairJudgment> ps;
    for (std::size_t i = 0; i < h.size(); ++i) {
      PairJudgment p;
      p.word_a = "a" + std::to_string(i);
      p.word_b = "b";
      p.human_score = h[i];
      p.model_score = m[i];
      ps.push_back(p);
    }
    return ps;
  };
  CHECK(spearman_rho(mk({1, 2, 3, 4}, {10, 20, 30, 40})) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(spearman_rho(mk({1, 2, 3, 4}, {9, 7, 5, 3})) == doctest::Approx(-1.0).epsilon(1e-12));
  // human ranks (1,2,3), model ranks (3,1,2): Σd² = 6 -> ρ = 1 - 36/24 = -0.5
  CHECK(spearman_rho(mk({1, 2, 3}, {30, 10, 20})) == doctest::Approx(-0.5).epsilon(1e-12));

  CHECK(testing::thrown_code([&] { spearman_rho(mk({1, 2, 3}, {5, 5, 5})); }) ==
        Err::DegenerateRanks);
}

TEST_CASE("spearman is invariant under strictly monotone transforms of model scores") {
  Rng rng(52);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<PairJudgment> ps;
    for (int i = 0; i < 15; ++i) {
      PairJudgment p;
      p.word_a = "w" + std::to_string(i);
      p.word_b = "x";
      p.human_score = static_cast<double>(rng.next_below(8));
      p.model_score = 2.0 * rng.next_double() - 1.0;
      ps.push_back(p);
    }
    double rho;
    try {
      rho = spearman_rho(ps);
    } catch (const Error&) {
      continue;  // degenerate human draw
    }
    auto transformed = ps;
    for (auto& p : transformed) p.model_score = std::exp(3.0 * p.model_score) + 7.0;
    CHECK(spearman_rho(transformed) == doctest::Approx(rho).epsilon(1e-12));
  }
}

TEST_CASE("average_precision examples") {
  auto mk = [](std::vector<std::pair<double, const char*>> rows) {
    std::vector<PairJudgment> ps;
    int i = 0;
    for (auto& [score, label] : rows) {
      PairJudgment p;
      p.word_a = "p" + std::to_string(i++);
      p.word_b = "q";
      p.model_score = score;
      p.label = label;
      ps.push_back(p);
    }
    return ps;
  };
  CHECK(average_precision(mk({{0.9, "SYN"}, {0.8, "ANT"}, {0.7, "SYN"}}), "SYN") ==
        doctest::Approx((1.0 + 2.0 / 3.0) / 2.0).epsilon(1e-12));
  CHECK(average_precision(mk({{0.9, "SYN"}, {0.8, "SYN"}, {0.7, "ANT"}, {0.6, "ANT"}}), "SYN") ==
        doctest::Approx(1.0).epsilon(1e-12));
  // single positive ranked last of n -> 1/n
  CHECK(average_precision(mk({{0.9, "ANT"}, {0.8, "ANT"}, {0.7, "ANT"}, {0.6, "SYN"}}), "SYN") ==
        doctest::Approx(0.25).epsilon(1e-12));
  CHECK(testing::thrown_code([&] {
          average_precision(mk({{0.9, "ANT"}}), "SYN");
        }) == Err::NoPositives);
}

TEST_CASE("AP is invariant under strictly monotone transforms of model scores") {
  Rng rng(53);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<PairJudgment> ps;
    for (int i = 0; i < 12; ++i) {
      PairJudgment p;
      p.word_a = "w" + std::to_string(i);
      p.word_b = "x";
      p.model_score = 2.0 * rng.next_double() - 1.0;
      p.label = rng.next_double() < 0.4 ? "SYN" : "ANT";
      ps.push_back(p);
    }
    if (std::none_of(ps.begin(), ps.end(),
                     [](const PairJudgment& p) { return p.label == "SYN"; }))
      ps[0].label = "SYN";
    const double ap = average_precision(ps, "SYN");
    for (auto& p : ps) p.model_score = std::atan(5.0 * p.model_score) - 2.0;
    CHECK(average_precision(ps, "SYN") == doctest::Approx(ap).epsilon(1e-12));
  }
}

TEST_CASE("metrics match brute-force references on 200 random instances") {
  Rng rng(54);
  for (int trial = 0; trial < 200; ++trial) {
    RankedList r = random_ranked_list(rng);
    for (std::size_t k : {std::size_t{1}, std::size_t{3}, std::size_t{5}, std::size_t{10}}) {
      CHECK(f1_at_k(r, k) == ref_f1_at_k(r, k));  // exact
      CHECK(std::fabs(ndcg_at_k(r, k) - ref_ndcg_at_k(r, k)) < 1e-12);
    }

    std::vector<PairJudgment> pairs;
    const std::size_t n = 2 + rng.next_below(19);
    for (std::size_t i = 0; i < n; ++i) {
      PairJudgment p;
      p.word_a = "w" + std::to_string(i);  // unique pair id keeps tie-breaks total
      p.word_b = "v" + std::to_string(rng.next_below(30));
      p.human_score = static_cast<double>(rng.next_below(10));
      p.model_score = static_cast<double>(rng.next_below(12)) / 11.0;
      p.label = rng.next_double() < 0.5 ? "SYN" : "ANT";
      pairs.push_back(p);
    }
    if (std::none_of(pairs.begin(), pairs.end(),
                     [](const PairJudgment& p) { return p.label == "SYN"; }))
      pairs[0].label = "SYN";
    CHECK(average_precision(pairs, "SYN") == ref_average_precision(pairs, "SYN"));  // exact
    try {
      const double rho = spearman_rho(pairs);
      CHECK(std::fabs(rho - ref_spearman(pairs)) < 1e-12);
    } catch (const Error& e) {
      CHECK(e.code() == Err::DegenerateRanks);
    }
  }
}

TEST_CASE("F1@k and NDCG@k ignore permutations strictly below rank k") {
  Rng rng(55);
  for (int trial = 0; trial < 30; ++trial) {
    RankedList r = random_ranked_list(rng);
    const std::size_t k = 1 + rng.next_below(8);
    if (r.ranked.size() <= k + 1) continue;
    const double f1 = f1_at_k(r, k);
    const double nd = ndcg_at_k(r, k);
    RankedList shuffled = r;
    // permute the tail [k, end)
    std::vector<std::string> tail(shuffled.ranked.begin() + static_cast<long>(k),
                                  shuffled.ranked.end());
    rng.shuffle(tail);
    std::copy(tail.begin(), tail.end(), shuffled.ranked.begin() + static_cast<long>(k));
    CHECK(f1_at_k(shuffled, k) == f1);
    CHECK(ndcg_at_k(shuffled, k) == nd);
  }
}

TEST_CASE("ranked lists break score ties by ascending candidate id") {
  RankedList r = make_ranked_list("q", {{"zebra", 0.5}, {"apple", 0.5}, {"mango", 0.9}}, {"apple"});
  REQUIRE(r.ranked.size() == 3);
  CHECK(r.ranked[0] == "mango");
  CHECK(r.ranked[1] == "apple");
  CHECK(r.ranked[2] == "zebra");
}

TEST_CASE("word_embedding_for_pairs: single context, mean idempotence, unknown word") {
  SynthConfig cfg;
  cfg.n_synsets = 4;
  cfg.words_per_synset = 2;
  cfg.contexts_per_word = 1;
  cfg.n_tokens = 4;
  cfg.d_h = 12;
  cfg.d_g = 12;
  cfg.seed = 3;
  SynthResult r = synth_generate(cfg);
  HeadConfig head;
  head.d_h = 12;
  head.d_model = 12;
  head.n_heads = 2;
  ContextHeadParams params = init_params(head, 8);

  const ContextInstance& inst = r.corpus.instances.front();
  Vec via_word = word_embedding_for_pairs(inst.word, r.corpus, params, 1);
  Vec direct = context_forward(inst.h_c, inst.span, params, DropoutState::eval());
  for (std::size_t j = 0; j < direct.size(); ++j)
    CHECK(via_word[j] == doctest::Approx(direct[j]).epsilon(1e-12));

  CHECK(testing::thrown_code([&] {
          word_embedding_for_pairs("not-a-word", r.corpus, params, 1);
        }) == Err::UnknownWord);
}

TEST_CASE("word_embedding_for_pairs: identical contexts collapse to one vector") {
  SynthConfig cfg;
  cfg.n_synsets = 2;
  cfg.words_per_synset = 1;
  cfg.contexts_per_word = 2;
  cfg.n_tokens = 3;
  cfg.d_h = 8;
  cfg.d_g = 8;
  cfg.seed = 12;
  cfg.ambiguous_fraction = 0.0;
  SynthResult r = synth_generate(cfg);
  // make the word's two contexts byte-identical
  r.corpus.instances[1].h_c = r.corpus.instances[0].h_c;
  r.corpus.instances[1].span = r.corpus.instances[0].span;
  HeadConfig head;
  head.d_h = 8;
  head.d_model = 8;
  head.n_heads = 2;
  ContextHeadParams params = init_params(head, 2);

  Vec single = context_forward(r.corpus.instances[0].h_c, r.corpus.instances[0].span, params,
                               DropoutState::eval());
  Vec mean = word_embedding_for_pairs(r.corpus.instances[0].word, r.corpus, params, 3);
  for (std::size_t j = 0; j < single.size(); ++j)
    CHECK(mean[j] == doctest::Approx(single[j]).epsilon(1e-12));
}

TEST_CASE("word_embedding_for_pairs: the >16-context sample is seed-deterministic") {
  SynthConfig cfg;
  cfg.n_synsets = 2;
  cfg.words_per_synset = 1;
  cfg.contexts_per_word = 23;
  cfg.n_tokens = 4;
  cfg.d_h = 12;
  cfg.d_g = 12;
  cfg.seed = 6;
  cfg.ambiguous_fraction = 0.0;
  SynthResult r = synth_generate(cfg);
  HeadConfig head;
  head.d_h = 12;
  head.d_model = 12;
  head.n_heads = 2;
  ContextHeadParams params = init_params(head, 2);
  const std::string word = r.corpus.instances.front().word;

  Vec a = word_embedding_for_pairs(word, r.corpus, params, 9);
  Vec b = word_embedding_for_pairs(word, r.corpus, params, 9);
  CHECK(a == b);
  Vec c = word_embedding_for_pairs(word, r.corpus, params, 10);
  CHECK(a != c);  // a different seed samples a different context subset
}

TEST_CASE("pair TSV loading and the simpairs/synant harnesses") {
  SynthConfig cfg;
  cfg.n_synsets = 5;
  cfg.words_per_synset = 2;
  cfg.contexts_per_word = 3;
  cfg.n_tokens = 4;
  cfg.d_h = 12;
  cfg.d_g = 12;
  cfg.seed = 21;
  cfg.ambiguous_fraction = 0.0;
  SynthResult r = synth_generate(cfg);
  HeadConfig head;
  head.d_h = 12;
  head.d_model = 12;
  head.n_heads = 2;
  ContextHeadParams params = init_params(head, 4);

  const auto tmp = std::filesystem::temp_directory_path() / "glossalign_pairs_test";
  std::filesystem::create_directories(tmp);

  // graded pairs: same-synset words should score above cross-synset ones
  {
    std::ofstream tsv(tmp / "sim.tsv");
    tsv << "# comment line\n";
    tsv << "w0000_0\tw0000_1\t9.1\n";   // same synset
    tsv << "w0001_0\tw0001_1\t8.7\n";   // same synset
    tsv << "w0000_0\tw0001_0\t1.0\n";   // different synsets
    tsv << "w0002_0\tw0003_0\t0.5\tnoun\n";
  }
  auto pairs = load_pairs_tsv(tmp / "sim.tsv", false);
  REQUIRE(pairs.size() == 4);
  CHECK(pairs[0].human_score == doctest::Approx(9.1));
  CHECK(pairs[3].pos.has_value());
  MetricsReport sim = eval_simpairs(r.corpus, params, pairs, 5);
  REQUIRE(sim.spearman.has_value());
  CHECK(*sim.spearman >= -1.0);
  CHECK(*sim.spearman <= 1.0);

  {
    std::ofstream tsv(tmp / "rel.tsv");
    tsv << "w0000_0\tw0000_1\tSYN\tnoun\n";
    tsv << "w0001_0\tw0001_1\tSYN\tnoun\n";
    tsv << "w0000_0\tw0002_0\tANT\tnoun\n";
    tsv << "w0003_0\tw0004_0\tANT\tverb\n";
    tsv << "w0003_0\tw0003_1\tSYN\tverb\n";
  }
  auto rel = load_pairs_tsv(tmp / "rel.tsv", true);
  MetricsReport synant = eval_synant(r.corpus, params, rel, 5);
  REQUIRE(synant.ap.count("SYN") == 1);
  REQUIRE(synant.ap.count("ANT") == 1);
  CHECK(synant.ap.at("SYN").count("noun") == 1);
  CHECK(synant.ap.at("SYN").count("verb") == 1);
  CHECK(synant.ap.at("ANT").at("noun") > 0.0);

  {
    std::ofstream tsv(tmp / "bad.tsv");
    tsv << "only_two\tfields\n";
  }
  CHECK(testing::thrown_code([&] { load_pairs_tsv(tmp / "bad.tsv", false); }) == Err::ParseError);
  {
    std::ofstream tsv(tmp / "badlabel.tsv");
    tsv << "a\tb\tMAYBE\n";
  }
  CHECK(testing::thrown_code([&] { load_pairs_tsv(tmp / "badlabel.tsv", true); }) ==
        Err::ParseError);

  std::filesystem::remove_all(tmp);
}

TEST_CASE("report serialization exposes the documented fields") {
  MetricsReport report;
  report.f1_at_k[1] = 0.5;
  report.ndcg_at_k[1] = 0.75;
  WsdF1 w;
  w.overall = 0.9;
  w.per_pos[Pos::Noun] = 1.0;
  report.wsd = w;
  report.spearman = -0.25;
  report.ap["SYN"]["all"] = 0.8;
  const std::string j = report.to_json();
  for (const char* key : {"f1_at_k", "ndcg_at_k", "wsd_f1", "overall", "noun", "spearman_rho",
                          "ap", "SYN"})
    CHECK(j.find(key) != std::string::npos);
  const std::string table = report.to_table();
  CHECK(table.find("wsd_f1") != std::string::npos);
  CHECK(table.find("0.9000") != std::string::npos);
}
