#pragma once

#include <compare>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "selfdesc/errors.hpp"

namespace selfdesc {

// Type and concept identifiers share one space. Identifiers are
// whitespace-normalized; case is preserved so dataset schemas such as "GPE"
// survive. Knowledge-base labels are case-folded where they enter
// (see corpus::truncate_type_name).
using TypeId = std::string;

inline constexpr std::string_view kOtherType = "other";

TypeId make_type_id(std::string_view raw);

enum class Task { MentionDescribing, EntityGeneration };

std::string_view task_name(Task task);  // "MD" / "EG"
Task parse_task(std::string_view name);

struct Sentence {
  std::string id;
  std::string text;

  friend bool operator==(const Sentence&, const Sentence&) = default;
};

struct TypedMention {
  std::string surface;
  std::vector<TypeId> types;

  friend bool operator==(const TypedMention&, const TypedMention&) = default;
};

struct AnnotatedSentence {
  Sentence sentence;
  std::vector<TypedMention> mentions;

  friend bool operator==(const AnnotatedSentence&,
                         const AnnotatedSentence&) = default;
};

// Type universe with per-type instance counts. `other` is always present
// and carries no count constraint.
class TypeDictionary {
 public:
  TypeDictionary();

  void set(const TypeId& type, std::size_t count);
  bool contains(const TypeId& type) const;
  std::size_t count(const TypeId& type) const;

  // Non-reserved types in lexicographic order.
  std::vector<TypeId> types() const;
  const std::map<TypeId, std::size_t>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

 private:
  std::map<TypeId, std::size_t> entries_;
};

struct ConceptDescription {
  TypeId type;
  std::vector<TypeId> concepts;  // empty: bare type name in prompts

  friend bool operator==(const ConceptDescription&,
                         const ConceptDescription&) = default;
};

class PromptMD {
 public:
  // Throws PreconditionError on an empty list or duplicate surfaces.
  explicit PromptMD(std::vector<std::string> targets);

  const std::vector<std::string>& targets() const { return targets_; }

 private:
  std::vector<std::string> targets_;
};

class PromptEG {
 public:
  // Throws PreconditionError on an empty list or duplicate type ids.
  explicit PromptEG(std::vector<ConceptDescription> entries);

  const std::vector<ConceptDescription>& entries() const { return entries_; }
  std::vector<TypeId> types() const;

 private:
  std::vector<ConceptDescription> entries_;
};

struct TargetPair {
  std::string surface;
  std::vector<std::string> labels;

  friend bool operator==(const TargetPair&, const TargetPair&) = default;
};

struct TargetSequence {
  Task task = Task::EntityGeneration;
  std::vector<TargetPair> pairs;

  friend bool operator==(const TargetSequence&, const TargetSequence&) = default;
};

enum class Violation {
  kNone,
  kEmptyText,
  kEmptySurface,
  kSurfaceWhitespace,
  kSurfaceNotFound,
  kEmptyTypes,
  kDuplicateType,
  kOrder,
};

struct ValidationReport {
  Violation violation = Violation::kNone;
  std::string mention;  // offending surface, if any
  std::string message;

  bool ok() const { return violation == Violation::kNone; }
  friend bool operator==(const ValidationReport&,
                         const ValidationReport&) = default;
};

ValidationReport validate_annotated_sentence(const AnnotatedSentence& candidate);

// Sort key for mentions: first occurrence (scalar values), then longer
// surfaces first.
struct MentionOrderKey {
  std::size_t first_occurrence = 0;
  long long negative_length = 0;

  friend auto operator<=>(const MentionOrderKey&,
                          const MentionOrderKey&) = default;
};

class SurfaceAbsentError : public PreconditionError {
 public:
  using PreconditionError::PreconditionError;
};

MentionOrderKey mention_order_key(std::string_view sentence_text,
                                  std::string_view surface);

// Stable sort of mentions by mention_order_key.
void sort_mentions(AnnotatedSentence& sentence);

}  // namespace selfdesc
