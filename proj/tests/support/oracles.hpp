#pragma once

// Independent reference implementations used to check the library.

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "selfdesc/core.hpp"
#include "selfdesc/locator.hpp"
#include "selfdesc/rng.hpp"
#include "selfdesc/text.hpp"

namespace selfdesc::testing {

// Every start index where `needle` matches, overlapping ones included.
inline std::vector<std::size_t> all_occurrences(const std::u32string& hay,
                                                const std::u32string& needle) {
  std::vector<std::size_t> out;
  if (needle.empty() || needle.size() > hay.size()) return out;
  for (std::size_t i = 0; i + needle.size() <= hay.size(); ++i) {
    bool match = true;
    for (std::size_t k = 0; k < needle.size(); ++k) {
      if (hay[i + k] != needle[k]) {
        match = false;
        break;
      }
    }
    if (match) out.push_back(i);
  }
  return out;
}

// The i-th element of the leftmost non-overlapping chain of occurrences.
inline std::optional<std::size_t> ith_chain_occurrence(
    const std::vector<std::size_t>& occurrences, std::size_t len, std::size_t i) {
  std::vector<std::size_t> chain;
  for (auto pos : occurrences) {
    if (chain.empty() || pos >= chain.back() + len) chain.push_back(pos);
  }
  if (i < chain.size()) return chain[i];
  return std::nullopt;
}

inline LocateResult brute_force_locate(const Sentence& sentence,
                                       const TargetSequence& parsed) {
  LocateResult out;
  const auto hay = text::decode(sentence.text);
  for (std::size_t k = 0; k < parsed.pairs.size(); ++k) {
    const auto& p = parsed.pairs[k];
    std::size_t earlier = 0;
    for (std::size_t j = 0; j < k; ++j) {
      if (parsed.pairs[j].surface == p.surface &&
          parsed.pairs[j].labels.front() == p.labels.front()) {
        ++earlier;
      }
    }
    const auto needle = text::decode(p.surface);
    // Earlier clauses that were themselves unlocated do not consume occurrences.
    const auto pos = ith_chain_occurrence(all_occurrences(hay, needle),
                                          needle.size(), earlier);
    if (pos) {
      out.spans.push_back({p.surface, p.labels.front(), *pos, *pos + needle.size()});
    } else {
      out.unlocated.push_back(p);
    }
  }
  return out;
}

inline std::vector<SpanPrediction> brute_force_gold_spans(const AnnotatedSentence& s) {
  std::vector<SpanPrediction> out;
  const auto hay = text::decode(s.sentence.text);
  std::map<std::pair<std::string, std::string>, std::size_t> seen;
  for (const auto& m : s.mentions) {
    const auto needle = text::decode(m.surface);
    for (const auto& t : m.types) {
      const auto i = seen[{m.surface, t}]++;
      const auto pos = ith_chain_occurrence(all_occurrences(hay, needle),
                                            needle.size(), i);
      if (pos) out.push_back({m.surface, t, *pos, *pos + needle.size()});
    }
  }
  return out;
}

struct PlantedCase {
  Sentence sentence;
  TargetSequence parsed;
};

// Sentence over a tiny vocabulary so surfaces repeat, plus parsed clauses
// drawn from present and absent surfaces.
inline PlantedCase planted_sentence(Rng& rng) {
  static const std::vector<std::string> words = {"ab", "b", "ba", "aba", "c",
                                                 "北", "x y", "ab b"};
  static const std::vector<std::string> types = {"t1", "t2"};
  std::vector<std::string> toks;
  const auto n = 1 + rng.below(10);
  for (std::size_t i = 0; i < n; ++i) toks.push_back(words[rng.below(words.size())]);
  PlantedCase c;
  c.sentence = {"p", text::join(toks, " ")};
  c.parsed.task = Task::EntityGeneration;
  const auto m = rng.below(7);
  for (std::size_t i = 0; i < m; ++i) {
    std::string surface = rng.below(5) == 0 ? "zz" : words[rng.below(words.size())];
    c.parsed.pairs.push_back({surface, {types[rng.below(types.size())]}});
  }
  return c;
}

inline AnnotatedSentence random_annotated_sentence(Rng& rng) {
  static const std::vector<std::string> words = {"Paris", "is", "big", "Anna",
                                                 "met", "Anna", "Lee", "in",
                                                 "北京", "Paris Lee"};
  static const std::vector<std::string> types = {"person", "GPE", "org"};
  std::vector<std::string> toks;
  const auto n = 2 + rng.below(9);
  for (std::size_t i = 0; i < n; ++i) toks.push_back(words[rng.below(words.size())]);
  AnnotatedSentence s{{"r", text::join(toks, " ")}, {}};
  const auto m = rng.below(5);
  for (std::size_t i = 0; i < m; ++i) {
    const auto a = rng.below(toks.size());
    const auto len = 1 + rng.below(std::min<std::size_t>(2, toks.size() - a));
    std::vector<std::string> span(toks.begin() + static_cast<long>(a),
                                  toks.begin() + static_cast<long>(a + len));
    auto surface = text::join(span, " ");
    if (surface == "is" || surface.rfind("is ", 0) == 0 ||
        (surface.size() >= 3 && surface.compare(surface.size() - 3, 3, " is") == 0) ||
        text::contains(surface, " is ")) {
      continue;
    }
    if (std::any_of(s.mentions.begin(), s.mentions.end(),
                    [&](const TypedMention& x) { return x.surface == surface; })) {
      continue;
    }
    std::vector<TypeId> ts = {types[rng.below(types.size())]};
    if (rng.below(3) == 0) {
      const auto extra = types[rng.below(types.size())];
      if (extra != ts.front()) ts.push_back(extra);
    }
    s.mentions.push_back({surface, ts});
  }
  sort_mentions(s);
  return s;
}

// Pairwise oracle: (first global position, concept) for each co-occurring
// pair, ordered by that position.
inline std::map<TypeId, std::vector<TypeId>> cooccurrence_oracle(
    const std::vector<AnnotatedSentence>& corpus) {
  std::map<TypeId, std::map<TypeId, std::size_t>> first;
  std::set<TypeId> seen;
  std::size_t pos = 0;
  for (const auto& s : corpus) {
    for (const auto& m : s.mentions) {
      for (std::size_t i = 0; i < m.types.size(); ++i) {
        if (m.types[i] == "other") continue;
        seen.insert(m.types[i]);
        for (std::size_t j = 0; j < m.types.size(); ++j) {
          ++pos;
          if (i == j || m.types[j] == "other" || m.types[j] == m.types[i]) continue;
          first[m.types[i]].try_emplace(m.types[j], pos);
        }
      }
    }
  }
  std::map<TypeId, std::vector<TypeId>> out;
  for (const auto& t : seen) {
    out[t];
    std::vector<std::pair<std::size_t, TypeId>> v;
    for (const auto& [u, p] : first[t]) v.emplace_back(p, u);
    std::sort(v.begin(), v.end());
    for (auto& [p, u] : v) out[t].push_back(u);
  }
  return out;
}


}  // namespace selfdesc::testing
