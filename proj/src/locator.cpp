#include "selfdesc/locator.hpp"

#include <algorithm>
#include <map>
#include <utility>

#include "selfdesc/text.hpp"

namespace selfdesc {

LocateResult locate(const Sentence& sentence, const TargetSequence& parsed) {
  if (parsed.task != Task::EntityGeneration) {
    throw PreconditionError("locate expects an EG target");
  }
  LocateResult result;
  const auto haystack = text::decode(sentence.text);
  // (surface, type) -> first position a further occurrence may start at
  std::map<std::pair<std::string, TypeId>, std::size_t> cursor;
  for (const auto& pair : parsed.pairs) {
    if (pair.labels.empty()) {
      result.unlocated.push_back(pair);
      continue;
    }
    const auto needle = text::decode(pair.surface);
    auto& from = cursor[{pair.surface, pair.labels.front()}];
    const auto pos = text::find(haystack, needle, from);
    if (!pos) {
      result.unlocated.push_back(pair);
      continue;
    }
    from = *pos + needle.size();
    result.spans.push_back(
        {pair.surface, pair.labels.front(), *pos, *pos + needle.size()});
  }
  return result;
}

TargetSequence gold_target(const AnnotatedSentence& sentence,
                           const std::vector<TypeId>& schema) {
  TargetSequence target{Task::EntityGeneration, {}};
  for (const auto& m : sentence.mentions) {
    if (schema.empty()) {
      for (const auto& t : m.types) target.pairs.push_back({m.surface, {t}});
      continue;
    }
    for (const auto& t : schema) {
      if (std::find(m.types.begin(), m.types.end(), t) != m.types.end()) {
        target.pairs.push_back({m.surface, {t}});
      }
    }
  }
  return target;
}

std::vector<SpanPrediction> gold_spans(const AnnotatedSentence& sentence,
                                       const std::vector<TypeId>& schema) {
  auto located = locate(sentence.sentence, gold_target(sentence, schema));
  if (!located.unlocated.empty()) {
    throw DataError("gold mention '" + located.unlocated.front().surface +
                    "' cannot be located in sentence " + sentence.sentence.id);
  }
  return std::move(located.spans);
}

}  // namespace selfdesc
