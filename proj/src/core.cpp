#include "selfdesc/core.hpp"

#include <algorithm>
#include <set>

#include "selfdesc/text.hpp"

namespace selfdesc {

TypeId make_type_id(std::string_view raw) {
  return text::normalize_identifier(raw, /*fold_case=*/false);
}

std::string_view task_name(Task task) {
  return task == Task::MentionDescribing ? "MD" : "EG";
}

Task parse_task(std::string_view name) {
  if (name == "MD") return Task::MentionDescribing;
  if (name == "EG") return Task::EntityGeneration;
  throw DataError("unknown task '" + std::string(name) + "'");
}

TypeDictionary::TypeDictionary() { entries_[std::string(kOtherType)] = 0; }

void TypeDictionary::set(const TypeId& type, std::size_t count) {
  entries_[type] = count;
}

bool TypeDictionary::contains(const TypeId& type) const {
  return entries_.count(type) > 0;
}

std::size_t TypeDictionary::count(const TypeId& type) const {
  const auto it = entries_.find(type);
  return it == entries_.end() ? 0 : it->second;
}

std::vector<TypeId> TypeDictionary::types() const {
  std::vector<TypeId> out;
  for (const auto& [type, n] : entries_) {
    if (type != kOtherType) out.push_back(type);
  }
  return out;
}

PromptMD::PromptMD(std::vector<std::string> targets)
    : targets_(std::move(targets)) {
  if (targets_.empty()) throw PreconditionError("PromptMD needs a target");
  std::set<std::string> seen;
  for (const auto& t : targets_) {
    if (!seen.insert(t).second) {
      throw PreconditionError("duplicate PromptMD target '" + t + "'");
    }
  }
}

PromptEG::PromptEG(std::vector<ConceptDescription> entries)
    : entries_(std::move(entries)) {
  if (entries_.empty()) throw PreconditionError("PromptEG needs a type");
  std::set<TypeId> seen;
  for (const auto& e : entries_) {
    if (!seen.insert(e.type).second) {
      throw PreconditionError("duplicate PromptEG type '" + e.type + "'");
    }
  }
}

std::vector<TypeId> PromptEG::types() const {
  std::vector<TypeId> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.type);
  return out;
}

namespace {

ValidationReport violation(Violation v, std::string mention, std::string msg) {
  return {v, std::move(mention), std::move(msg)};
}

}  // namespace

ValidationReport validate_annotated_sentence(const AnnotatedSentence& candidate) {
  const auto& text = candidate.sentence.text;
  if (text::trim(text).empty()) {
    return violation(Violation::kEmptyText, "", "sentence text is empty");
  }
  const auto cps = text::decode(text);
  std::optional<MentionOrderKey> previous;
  for (const auto& m : candidate.mentions) {
    if (m.surface.empty()) {
      return violation(Violation::kEmptySurface, m.surface, "empty surface");
    }
    if (text::trim(m.surface).size() != m.surface.size()) {
      return violation(Violation::kSurfaceWhitespace, m.surface,
                       "surface has leading or trailing whitespace");
    }
    const auto pos = text::find(cps, text::decode(m.surface));
    if (!pos) {
      return violation(Violation::kSurfaceNotFound, m.surface,
                       "surface not found in sentence");
    }
    if (m.types.empty()) {
      return violation(Violation::kEmptyTypes, m.surface, "mention has no types");
    }
    std::set<TypeId> seen;
    for (const auto& t : m.types) {
      if (!seen.insert(t).second) {
        return violation(Violation::kDuplicateType, m.surface,
                         "duplicate type '" + t + "'");
      }
    }
    const MentionOrderKey key{*pos,
                              -static_cast<long long>(text::length(m.surface))};
    if (previous && key < *previous) {
      return violation(Violation::kOrder, m.surface,
                       "mention precedes an earlier-listed mention in the text");
    }
    previous = key;
  }
  return {};
}

MentionOrderKey mention_order_key(std::string_view sentence_text,
                                  std::string_view surface) {
  const auto needle = text::decode(surface);
  const auto pos = text::find(text::decode(sentence_text), needle);
  if (!pos) {
    throw SurfaceAbsentError("surface '" + std::string(surface) +
                             "' does not occur in sentence");
  }
  return {*pos, -static_cast<long long>(needle.size())};
}

void sort_mentions(AnnotatedSentence& sentence) {
  std::vector<std::pair<MentionOrderKey, TypedMention>> keyed;
  keyed.reserve(sentence.mentions.size());
  for (auto& m : sentence.mentions) {
    keyed.emplace_back(mention_order_key(sentence.sentence.text, m.surface),
                       std::move(m));
  }
  std::stable_sort(keyed.begin(), keyed.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  sentence.mentions.clear();
  for (auto& [key, m] : keyed) sentence.mentions.push_back(std::move(m));
}

}  // namespace selfdesc
