#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "selfdesc/core.hpp"

namespace selfdesc {

// A typed span over a sentence; [start, end) counts Unicode scalar values.
struct SpanPrediction {
  std::string surface;
  TypeId type;
  std::size_t start = 0;
  std::size_t end = 0;

  friend bool operator==(const SpanPrediction&, const SpanPrediction&) = default;
};

struct LocateResult {
  std::vector<SpanPrediction> spans;
  std::vector<TargetPair> unlocated;
};

// Maps the k-th clause carrying a given (surface, type) to the k-th
// non-overlapping occurrence of that surface in the sentence. Clauses that
// run out of occurrences are reported as unlocated. Matching is exact and
// case-sensitive with no word-boundary check.
LocateResult locate(const Sentence& sentence, const TargetSequence& parsed);

// Gold EG target of an annotated sentence: one clause per (mention, type)
// in mention order. With a non-empty `schema`, only schema types are kept,
// in schema order per mention.
TargetSequence gold_target(const AnnotatedSentence& sentence,
                           const std::vector<TypeId>& schema = {});

// locate(gold_target(...)); every gold clause must be locatable.
std::vector<SpanPrediction> gold_spans(const AnnotatedSentence& sentence,
                                       const std::vector<TypeId>& schema = {});

}  // namespace selfdesc
