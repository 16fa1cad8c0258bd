#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "selfdesc/codec.hpp"
#include "selfdesc/evaluator.hpp"
#include "support/paths.hpp"
#include "support/synthetic.hpp"

using namespace selfdesc;
using namespace selfdesc::eval;

namespace {

SpanPrediction span(TypeId type, std::size_t start, std::size_t end) {
  return {"x", std::move(type), start, end};
}

bool same_span(const SpanPrediction& a, const SpanPrediction& b) {
  return a.type == b.type && a.start == b.start && a.end == b.end;
}

// Maximum bipartite matching by exhaustive search over assignments.
std::size_t brute_matching(const std::vector<SpanPrediction>& gold,
                           const std::vector<SpanPrediction>& pred, std::size_t gi,
                           std::vector<bool>& used) {
  if (gi == gold.size()) return 0;
  std::size_t best = brute_matching(gold, pred, gi + 1, used);
  for (std::size_t p = 0; p < pred.size(); ++p) {
    if (used[p] || !same_span(gold[gi], pred[p])) continue;
    used[p] = true;
    best = std::max(best, 1 + brute_matching(gold, pred, gi + 1, used));
    used[p] = false;
  }
  return best;
}

std::vector<SpanPrediction> random_spans(Rng& rng) {
  static const std::vector<TypeId> types = {"a", "b"};
  std::vector<SpanPrediction> out;
  const auto n = rng.below(7);
  for (std::size_t i = 0; i < n; ++i) {
    const auto start = rng.below(3);
    out.push_back(span(types[rng.below(2)], start, start + 1 + rng.below(2)));
  }
  return out;
}

}  // namespace

TEST_CASE("identical streams score 1") {
  std::vector<SentenceSpans> gold = {{"s1", {span("a", 0, 2), span("b", 3, 5)}},
                                     {"s2", {span("a", 1, 4)}}};
  const auto r = score(gold, gold);
  CHECK(r.precision == 1.0);
  CHECK(r.recall == 1.0);
  CHECK(r.f1 == 1.0);
  CHECK(r.counts.matched == 3);
  CHECK(r.per_type.at("a").matched == 2);
}

TEST_CASE("empty predictions score 0") {
  std::vector<SentenceSpans> gold = {{"s1", {span("a", 0, 2)}}};
  std::vector<SentenceSpans> pred = {{"s1", {}}};
  const auto r = score(gold, pred);
  CHECK(r.f1 == 0.0);
  CHECK(r.recall == 0.0);
  CHECK(r.precision == 0.0);
  CHECK(r.counts.gold == 1);
  const auto nothing = score({{"s1", {}}}, {{"s1", {}}});
  CHECK(nothing.f1 == 0.0);
}

TEST_CASE("exact matching on type and offsets") {
  std::vector<SentenceSpans> gold = {{"s1", {span("a", 0, 2)}}};
  CHECK(score(gold, {{"s1", {span("b", 0, 2)}}}).counts.matched == 0);
  CHECK(score(gold, {{"s1", {span("a", 0, 3)}}}).counts.matched == 0);
  CHECK(score(gold, {{"s1", {span("a", 1, 2)}}}).counts.matched == 0);
  // Surface text is not part of the key.
  CHECK(score(gold, {{"s1", {{"other text", "a", 0, 2}}}}).counts.matched == 1);
  // A duplicate prediction is a false positive.
  const auto dup = score(gold, {{"s1", {span("a", 0, 2), span("a", 0, 2)}}});
  CHECK(dup.counts.matched == 1);
  CHECK(dup.counts.predicted == 2);
  CHECK(dup.precision == 0.5);
  CHECK(dup.recall == 1.0);
  CHECK(dup.f1 == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("score equals the brute-force matching oracle") {
  Rng rng(99);
  for (int trial = 0; trial < 3000; ++trial) {
    std::vector<SentenceSpans> gold, pred;
    std::size_t matched = 0, ng = 0, np = 0;
    std::map<TypeId, std::size_t> type_matched;
    const auto sentences = 1 + rng.below(4);
    for (std::size_t i = 0; i < sentences; ++i) {
      const auto id = "s" + std::to_string(i);
      gold.push_back({id, random_spans(rng)});
      pred.push_back({id, random_spans(rng)});
      std::vector<bool> used(pred.back().spans.size(), false);
      matched += brute_matching(gold.back().spans, pred.back().spans, 0, used);
      for (const TypeId t : {"a", "b"}) {
        std::vector<SpanPrediction> g, p;
        std::copy_if(gold.back().spans.begin(), gold.back().spans.end(), std::back_inserter(g),
                     [&](const auto& s) { return s.type == t; });
        std::copy_if(pred.back().spans.begin(), pred.back().spans.end(), std::back_inserter(p),
                     [&](const auto& s) { return s.type == t; });
        std::vector<bool> u(p.size(), false);
        type_matched[t] += brute_matching(g, p, 0, u);
      }
      ng += gold.back().spans.size();
      np += pred.back().spans.size();
    }
    const auto r = score(gold, pred);
    REQUIRE(r.counts.matched == matched);
    CHECK(r.counts.gold == ng);
    CHECK(r.counts.predicted == np);
    CHECK(r.counts.matched <= std::min(ng, np));
    for (const auto& [t, c] : r.per_type) CHECK(c.matched == type_matched[t]);
    const double p = np ? double(matched) / np : 0.0;
    const double rc = ng ? double(matched) / ng : 0.0;
    CHECK(r.f1 == doctest::Approx(p + rc > 0 ? 2 * p * rc / (p + rc) : 0.0).epsilon(1e-12));

    // Permuting sentences and spans changes nothing.
    auto g2 = gold;
    auto p2 = pred;
    rng.shuffle(g2);
    rng.shuffle(p2);
    for (auto& s : g2) rng.shuffle(s.spans);
    for (auto& s : p2) rng.shuffle(s.spans);
    const auto r2 = score(g2, p2);
    CHECK(r2.counts.matched == r.counts.matched);
    CHECK(r2.f1 == r.f1);
  }
}

TEST_CASE("mismatched sentence ids are faults") {
  std::vector<SentenceSpans> gold = {{"s1", {}}, {"s2", {}}};
  CHECK_THROWS_AS(score(gold, {{"s1", {}}}), DataError);
  CHECK_THROWS_AS(score(gold, {{"s1", {}}, {"s2", {}}, {"s3", {}}}), DataError);
  CHECK_THROWS_AS(score(gold, {{"s1", {}}, {"s1", {}}}), DataError);
  CHECK_NOTHROW(score(gold, {{"s2", {}}, {"s1", {}}}));
}

TEST_CASE("report json") {
  std::vector<SentenceSpans> gold = {{"s1", {span("a", 0, 2), span("b", 3, 5)}}};
  std::vector<SentenceSpans> pred = {{"s1", {span("a", 0, 2)}}};
  auto r = score(gold, pred);
  r.seed = 4;
  r.k = 5;
  const auto j = to_json(r);
  CHECK(j.at("precision").get<double>() == 1.0);
  CHECK(j.at("recall").get<double>() == 0.5);
  CHECK(j.at("matched").get<int>() == 1);
  CHECK(j.at("per_type").at("b").at("gold").get<int>() == 1);
  CHECK(j.at("per_type").at("b").at("f1").get<double>() == 0.0);
  CHECK(j.at("seed").get<int>() == 4);
  CHECK(j.at("k").get<int>() == 5);
}

TEST_CASE("interpreting a generation") {
  const Sentence s{"t6", "Chris Hill was in China a few days ago."};
  const auto p = interpret(s, "China is GPE. a few days ago is date.");
  REQUIRE(p.spans.size() == 2);
  CHECK(p.spans[0] == SpanPrediction{"China", "GPE", 18, 23});
  CHECK(p.spans[1] == SpanPrediction{"a few days ago", "date", 24, 38});
  CHECK(p.diagnostics.empty());

  const auto missing = interpret(s, "Paris is GPE.");
  CHECK(missing.spans.empty());
  CHECK(missing.diagnostics.size() == 1);

  const auto dir = testing::scratch_dir("predictions");
  write_predictions(dir / "p.jsonl", {p, missing});
  const auto back = read_predictions(dir / "p.jsonl");
  REQUIRE(back.size() == 2);
  CHECK(back[0].spans == p.spans);
  CHECK(back[0].generated == p.generated);
  CHECK(back[1].diagnostics == missing.diagnostics);
  io::write_file(dir / "bad.jsonl", "{\"id\": \"x\"}\n");
  CHECK_THROWS_AS(read_predictions(dir / "bad.jsonl"), DataError);
}

TEST_CASE("gold targets through the pipeline score 1") {
  for (const auto* path : {"fixtures/golden_corpus.jsonl", "fixtures/small_corpus.jsonl",
                           "synthetic/train.jsonl"}) {
    INFO(path);
    const auto corpus = io::read_corpus(testing::data_path(path));
    std::vector<Prediction> preds;
    for (const auto& s : corpus) {
      preds.push_back(interpret(s.sentence, codec::serialize_target(gold_target(s))));
    }
    const auto r = score(gold_spans(corpus), predicted_spans(preds));
    CHECK(r.counts.gold > 0);
    CHECK(r.f1 == 1.0);
  }
}

TEST_CASE("md describer reads labels per surface") {
  Generator fake = [](const std::string& prompt, const std::string&) {
    CHECK(prompt == "[MD] Anna; Oslo; Bo");
    return std::string("Oslo is city, place; Anna is person; Anna is human.");
  };
  const AnnotatedSentence s{{"x", "Anna and Bo saw Oslo."}, {}};
  const auto labels = md_describer(fake)(s, {"Anna", "Oslo", "Bo"});
  REQUIRE(labels.size() == 3);
  CHECK(labels[0] == std::vector<TypeId>{"person"});
  CHECK(labels[1] == std::vector<TypeId>{"city", "place"});
  CHECK(labels[2].empty());
}

TEST_CASE("episodes with the gold model") {
  const auto train = io::read_corpus(testing::data_path("synthetic/train.jsonl"));
  const auto test = io::read_corpus(testing::data_path("synthetic/test.jsonl"));
  const auto schema = testing::synthetic_schema();
  GoldEpisodeModel gold(test);
  EpisodeConfig cfg;
  cfg.k = 5;
  cfg.runs = 3;
  std::vector<Prediction> preds;
  const auto one = run_episode(train, test, schema, gold, cfg, 0, &preds);
  CHECK(one.f1 == 1.0);
  CHECK(preds.size() == test.size());
  const auto r = run_episodes(train, test, schema, gold, cfg);
  CHECK(r.runs.size() == 3);
  CHECK(r.f1_mean == 1.0);
  CHECK(r.f1_sd == 0.0);
  // The gold describer feeds real labels into the descriptions.
  const auto narrow = std::vector<TypeId>{"person", "city"};
  CHECK(run_episode(train, test, narrow, gold, cfg, 1).f1 == 1.0);
}

TEST_CASE("constant model mean equals its single-run score") {
  const auto train = io::read_corpus(testing::data_path("synthetic/train.jsonl"));
  const auto test = io::read_corpus(testing::data_path("synthetic/test.jsonl"));
  const auto schema = testing::synthetic_schema();
  ConstantEpisodeModel constant(test.front().mentions.front().surface + " is " +
                                test.front().mentions.front().types.front() + ".");
  EpisodeConfig cfg;
  cfg.runs = 10;
  const auto single = run_episode(train, test, schema, constant, cfg, 0);
  CHECK(single.f1 > 0.0);
  const auto r = run_episodes(train, test, schema, constant, cfg);
  REQUIRE(r.runs.size() == 10);
  CHECK(std::abs(r.f1_mean - single.f1) <= 1e-12);
  CHECK(r.f1_sd <= 1e-12);
  for (std::size_t i = 0; i < r.runs.size(); ++i) CHECK(r.runs[i].seed == i);

  cfg.runs = 1;
  const auto degenerate = run_episodes(train, test, schema, constant, cfg);
  CHECK(degenerate.f1_mean == single.f1);
  CHECK(to_json(degenerate).dump() == to_json(run_episodes(train, test, schema, constant, cfg)).dump());
}

TEST_CASE("failing episodes are reported and the rest continue") {
  struct Flaky : EpisodeModel {
    std::string describe(const std::string&, const std::string&) override { return ""; }
    Generator fine_tune(const std::vector<sampler::TrainingInstance>&,
                        std::uint64_t seed) override {
      if (seed == 1) throw std::runtime_error("boom");
      return [](const std::string&, const std::string&) { return std::string(); };
    }
  } flaky;
  const auto corpus = io::read_corpus(testing::data_path("fixtures/small_corpus.jsonl"));
  EpisodeConfig cfg;
  cfg.k = 1;
  cfg.runs = 3;
  const auto r = run_episodes(corpus, corpus, testing::synthetic_schema(), flaky, cfg);
  CHECK(r.runs.size() == 2);
  REQUIRE(r.failures.size() == 1);
  CHECK(r.failures[0].seed == 1);
  CHECK(r.failures[0].message == "boom");
  CHECK(r.f1_mean == 0.0);
  cfg.runs = 0;
  CHECK_THROWS_AS(cfg.validate(), PreconditionError);
}

TEST_CASE("bundled synthetic data matches its generator") {
  const auto train = testing::synthetic_corpus(200, 7, "syn");
  const auto test = testing::synthetic_corpus(60, 8, "syn-test", train);
  CHECK(io::read_corpus(testing::data_path("synthetic/train.jsonl")) == train);
  CHECK(io::read_corpus(testing::data_path("synthetic/test.jsonl")) == test);
  CHECK(io::read_corpus(testing::data_path("fixtures/small_corpus.jsonl")) ==
        testing::synthetic_corpus(20, 9, "small"));
  CHECK(io::Json::parse(io::read_file(testing::data_path("synthetic/schema.json")))
            .get<std::vector<TypeId>>() == testing::synthetic_schema());
  for (const auto& s : train) CHECK(validate_annotated_sentence(s).ok());
}
