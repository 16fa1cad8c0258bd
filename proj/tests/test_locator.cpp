#include <doctest.h>

#include <map>

#include "selfdesc/codec.hpp"
#include "selfdesc/locator.hpp"
#include "selfdesc/text.hpp"
#include "support/oracles.hpp"

using namespace selfdesc;

namespace {

TargetSequence eg(std::vector<std::pair<std::string, std::string>> pairs) {
  TargetSequence t{Task::EntityGeneration, {}};
  for (auto& [s, l] : pairs) t.pairs.push_back({s, {l}});
  return t;
}

}  // namespace

TEST_CASE("locate: offsets in a two-entity sentence") {
  const Sentence s{"t6", "Chris Hill was in China a few days ago."};
  const auto r = locate(s, eg({{"China", "GPE"}, {"a few days ago", "date"}}));
  CHECK(r.unlocated.empty());
  REQUIRE(r.spans.size() == 2);
  CHECK(r.spans[0] == SpanPrediction{"China", "GPE", 18, 23});
  CHECK(r.spans[1] == SpanPrediction{"a few days ago", "date", 24, 38});
}

TEST_CASE("locate: i-th occurrence rule") {
  const auto r = locate({"s", "a b a"}, eg({{"a", "t"}, {"a", "t"}}));
  REQUIRE(r.spans.size() == 2);
  CHECK(r.spans[0].start == 0);
  CHECK(r.spans[0].end == 1);
  CHECK(r.spans[1].start == 4);
  CHECK(r.spans[1].end == 5);

  const auto extra = locate({"s", "a b a"}, eg({{"a", "t"}, {"a", "t"}, {"a", "t"}}));
  CHECK(extra.spans.size() == 2);
  CHECK(extra.unlocated.size() == 1);
}

TEST_CASE("locate: absent surface is unlocated") {
  const auto r = locate({"s", "hello"}, eg({{"world", "t"}}));
  CHECK(r.spans.empty());
  CHECK(r.unlocated.size() == 1);
}

TEST_CASE("locate: same-surface occurrences never overlap; raw substrings match") {
  const auto r = locate({"s", "aaaa"}, eg({{"aa", "t"}, {"aa", "t"}, {"aa", "t"}}));
  REQUIRE(r.spans.size() == 2);
  CHECK(r.spans[0].start == 0);
  CHECK(r.spans[1].start == 2);
  CHECK(r.unlocated.size() == 1);
  // No word-boundary check.
  CHECK(locate({"s", "Indochina"}, eg({{"china", "GPE"}})).spans.size() == 1);
  // Case-sensitive.
  CHECK(locate({"s", "Indochina"}, eg({{"China", "GPE"}})).spans.empty());
}

TEST_CASE("locate: multi-type clauses for one mention share its span") {
  const auto r = locate({"s", "Rowling met Rowling"},
                        eg({{"Rowling", "person"}, {"Rowling", "writer"}}));
  REQUIRE(r.spans.size() == 2);
  CHECK(r.spans[0].start == 0);
  CHECK(r.spans[1].start == 0);
}

TEST_CASE("locate: offsets in scalar values") {
  const auto r = locate({"s", "北京 and Beijing"}, eg({{"Beijing", "GPE"}}));
  REQUIRE(r.spans.size() == 1);
  CHECK(r.spans[0].start == 7);
  CHECK(text::slice("北京 and Beijing", r.spans[0].start, r.spans[0].end) ==
        "Beijing");
}

TEST_CASE("property: locate agrees with brute-force occurrence enumeration") {
  Rng rng(31);
  for (int trial = 0; trial < 500; ++trial) {
    const auto sentence = testing::planted_sentence(rng);
    const auto result = locate(sentence.sentence, sentence.parsed);
    const auto expected = testing::brute_force_locate(sentence.sentence, sentence.parsed);
    CHECK(result.spans == expected.spans);
    CHECK(result.unlocated == expected.unlocated);
    // Spans slice back verbatim.
    for (const auto& s : result.spans) {
      CHECK(text::slice(sentence.sentence.text, s.start, s.end) == s.surface);
    }
  }
}

TEST_CASE("property: gold serialize -> parse -> locate reproduces gold spans") {
  Rng rng(8);
  for (int trial = 0; trial < 300; ++trial) {
    const auto gold = testing::random_annotated_sentence(rng);
    const auto text = codec::serialize_target(gold_target(gold));
    const auto parsed = codec::parse_generated(Task::EntityGeneration, text);
    CHECK(parsed.diagnostics.empty());
    const auto located = locate(gold.sentence, parsed.target);
    CHECK(located.unlocated.empty());
    CHECK(located.spans == testing::brute_force_gold_spans(gold));
  }
}
