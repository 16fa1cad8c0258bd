#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>

#include "selfdesc/descriptions.hpp"
#include "selfdesc/rng.hpp"
#include "support/generators.hpp"
#include "support/oracles.hpp"
#include "support/paths.hpp"

using namespace selfdesc;
using namespace selfdesc::descriptions;

namespace {

AnnotatedSentence sentence(std::vector<std::pair<std::string, std::vector<TypeId>>> ms) {
  AnnotatedSentence s{{"s", ""}, {}};
  for (auto& [surface, types] : ms) {
    s.sentence.text += (s.sentence.text.empty() ? "" : " ") + surface;
    s.mentions.push_back({surface, types});
  }
  return s;
}

MentionDescription md(std::vector<TypeId> c) { return {"m", std::move(c)}; }

}  // namespace

TEST_CASE("co-occurrence descriptions: person example") {
  const auto map = build_cooccurrence_descriptions(
      {sentence({{"Steve Jobs", {"person", "businessman", "CEO"}},
                 {"Beethoven", {"person", "musician", "pianist"}}})});
  CHECK(map.concepts("person") ==
        std::vector<TypeId>{"businessman", "CEO", "musician", "pianist"});
  CHECK(map.concepts("CEO") == std::vector<TypeId>{"person", "businessman"});
}

TEST_CASE("co-occurrence descriptions: lone type and other") {
  const auto map = build_cooccurrence_descriptions(
      {sentence({{"x", {"solo_type"}}, {"y", {"other"}}, {"z", {"a", "other"}}})});
  REQUIRE(map.find("solo_type") != nullptr);
  CHECK(map.concepts("solo_type").empty());
  CHECK(map.find("other") == nullptr);
  CHECK(map.concepts("a").empty());
}

TEST_CASE("property: co-occurrence equals the pairwise oracle") {
  Rng rng(3);
  for (int trial = 0; trial < 400; ++trial) {
    const auto corpus = testing::random_typed_corpus(rng);
    const auto map = build_cooccurrence_descriptions(corpus);
    const auto oracle = testing::cooccurrence_oracle(corpus);
    CHECK(map.size() == oracle.size());
    for (const auto& [t, concepts] : oracle) CHECK(map.concepts(t) == concepts);
    for (const auto& e : map.entries()) {
      CHECK(std::find(e.concepts.begin(), e.concepts.end(), e.type) == e.concepts.end());
      CHECK(std::find(e.concepts.begin(), e.concepts.end(), "other") == e.concepts.end());
    }
  }
}

TEST_CASE("concept sampling") {
  DescriptionConfig cfg;
  cfg.rng_seed = 11;
  const std::vector<TypeId> four = {"a", "b", "c", "d"};
  CHECK(sample_concepts(four, cfg, 1) == four);

  std::vector<TypeId> many;
  for (int i = 0; i < 25; ++i) many.push_back("c" + std::to_string(i));
  const auto picked = sample_concepts(many, cfg, 1);
  CHECK(picked.size() == 10);
  CHECK(picked == sample_concepts(many, cfg, 1));
  for (const auto& c : picked) {
    CHECK(std::find(many.begin(), many.end(), c) != many.end());
  }
  CHECK(std::is_sorted(picked.begin(), picked.end(), [&](const auto& x, const auto& y) {
    return std::find(many.begin(), many.end(), x) < std::find(many.begin(), many.end(), y);
  }));

  int collisions = 0;
  for (std::uint64_t key = 0; key < 1000; ++key) {
    if (sample_concepts(many, cfg, key) == sample_concepts(many, cfg, key + 1000)) {
      ++collisions;
    }
  }
  CHECK(collisions < 1000);
  CHECK(collisions < 10);
}

TEST_CASE("fusion") {
  auto fused = fuse_mention_descriptions(
      {{"GPE", {md({"country"}), md({"capital", "city"})}}});
  CHECK(fused.concepts("GPE") == std::vector<TypeId>{"country", "capital", "city"});
  fused = fuse_mention_descriptions({{"t", {md({"other"}), md({"other"})}}});
  REQUIRE(fused.find("t") != nullptr);
  CHECK(fused.concepts("t").empty());
  fused = fuse_mention_descriptions({{"t", {md({"x", "y"}), md({"y", "x", "t"})}}});
  CHECK(fused.concepts("t") == std::vector<TypeId>{"x", "y"});
}

TEST_CASE("filtering thresholds") {
  const DescriptionConfig cfg;
  auto five = [](int others) {
    std::vector<MentionDescription> v;
    for (int i = 0; i < 5; ++i) v.push_back(i < others ? md({"other"}) : md({"city"}));
    return v;
  };
  auto r = apply_filtering({{"t", five(3)}}, cfg);
  CHECK(r.report[0].other_frequency == doctest::Approx(0.6));
  CHECK(r.report[0].filtered);
  CHECK(r.map.find("t")->filtered);
  CHECK(r.map.concepts("t").empty());

  r = apply_filtering({{"t", five(2)}}, cfg);
  CHECK_FALSE(r.report[0].filtered);
  CHECK(r.map.concepts("t") == std::vector<TypeId>{"city"});

  r = apply_filtering({{"t", {md({"other"}), md({"city"})}}}, cfg);
  CHECK(r.report[0].other_frequency == 0.5);
  CHECK_FALSE(r.report[0].filtered);

  // Only exactly ["other"] counts per description.
  r = apply_filtering({{"t", {md({"other", "city"}), md({"other", "x"})}}}, cfg);
  CHECK(r.report[0].other_frequency == 0.0);

  DescriptionConfig per_concept = cfg;
  per_concept.counting = OtherCounting::kPerConcept;
  r = apply_filtering({{"t", {md({"other", "city"}), md({"other", "x"}), md({"other"})}}},
                      per_concept);
  CHECK(r.report[0].other_frequency == doctest::Approx(0.6));
  CHECK(r.report[0].filtered);

  CHECK_THROWS_AS(apply_filtering({{"t", {}}}, cfg), PreconditionError);
}

TEST_CASE("property: threshold extremes") {
  Rng rng(17);
  for (int trial = 0; trial < 300; ++trial) {
    DescriptionsByType per_type;
    const auto n = 1 + rng.below(4);
    for (std::size_t t = 0; t < n; ++t) {
      std::vector<MentionDescription> descs;
      const auto m = 1 + rng.below(6);
      for (std::size_t i = 0; i < m; ++i) {
        descs.push_back(rng.below(3) == 0 ? md({"other"}) : md({"c" + std::to_string(rng.below(4))}));
      }
      per_type.push_back({"t" + std::to_string(t), descs});
    }
    DescriptionConfig all;
    all.other_threshold = 1.0;
    DescriptionConfig none;
    none.other_threshold = 0.0;
    const auto keep = apply_filtering(per_type, all);
    const auto drop = apply_filtering(per_type, none);
    for (std::size_t t = 0; t < n; ++t) {
      const auto& descs = per_type[t].second;
      const auto others = std::count_if(descs.begin(), descs.end(), [](const auto& d) {
        return d.concepts == std::vector<TypeId>{"other"};
      });
      // Strict inequality: a threshold of 1 never filters.
      CHECK_FALSE(keep.report[t].filtered);
      CHECK(drop.report[t].filtered == (others > 0));
      for (const auto& e : keep.map.entries()) {
        CHECK(std::find(e.concepts.begin(), e.concepts.end(), "other") == e.concepts.end());
      }
    }
  }
}

TEST_CASE("mention descriptions are grouped by gold type") {
  const std::vector<AnnotatedSentence> corpus = {
      sentence({{"Beijing", {"GPE"}}, {"Bob", {"person"}}}),
      sentence({{"America", {"GPE"}}})};
  const auto grouped = collect_mention_descriptions(
      corpus, [](const AnnotatedSentence&, const std::vector<std::string>& surfaces) {
        std::vector<std::vector<TypeId>> out;
        for (const auto& s : surfaces) {
          if (s == "Beijing") out.push_back({"capital", "city"});
          else if (s == "America") out.push_back({"country"});
          else out.push_back({});
        }
        return out;
      });
  REQUIRE(grouped.size() == 2);
  CHECK(grouped[0].first == "GPE");
  CHECK(grouped[0].second.size() == 2);
  CHECK(grouped[1].second[0].concepts == std::vector<TypeId>{"other"});
  const auto fused = fuse_mention_descriptions(grouped);
  CHECK(fused.concepts("GPE") == std::vector<TypeId>{"capital", "city", "country"});
}

TEST_CASE("description JSONL: manual WNUT fixture and round-trip") {
  const auto wnut = read_descriptions(testing::data_path("descriptions/wnut_manual.jsonl"));
  REQUIRE(wnut.size() == 6);
  CHECK(wnut.entries()[0].type == "person");
  CHECK(wnut.concepts("location").size() == 8);
  CHECK(wnut.concepts("creative-work").back() == "film");

  const auto path = testing::scratch_dir("descriptions") / "d.jsonl";
  write_descriptions(path, wnut);
  CHECK(read_descriptions(path) == wnut);
}
