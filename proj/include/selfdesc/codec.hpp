#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "selfdesc/core.hpp"

namespace selfdesc::codec {

// Literals of the prompt and target grammar.
struct CodecConfig {
  static constexpr std::string_view md_descriptor = "[MD]";
  static constexpr std::string_view eg_descriptor = "[EG]";
  static constexpr std::string_view pair_separator_emit = "; ";
  static constexpr std::string_view pair_separator_alt = ". ";
  static constexpr std::string_view clause_terminator = ".";
  static constexpr std::string_view copula = " is ";
  static constexpr std::string_view concept_separator = ", ";
  static constexpr std::string_view type_desc_open = "{";
  static constexpr std::string_view type_desc_close = "}";
  static constexpr std::string_view type_list_separator = "; ";
  static constexpr std::string_view type_desc_colon = ": ";
};

// "[MD] e1; e2"
std::string serialize_prompt_md(const PromptMD& prompt);

// "[EG] t1: {c1, c2}; t2" -- an empty description renders the bare type name.
std::string serialize_prompt_eg(const PromptEG& prompt);

// "e1 is t1; e2 is t2." (EG) or "e1 is c1, c2; e2 is c3." (MD). An empty
// target serializes to "".
std::string serialize_target(const TargetSequence& target);

struct ParseResult {
  TargetSequence target;
  std::vector<std::string> diagnostics;
};

// Tolerant reader for model output. Clauses may be separated by "; " or ". ";
// a ". " piece without a copula is glued to the following piece so that
// abbreviations such as "J.K. Rowling" survive. Each clause splits on its
// rightmost " is ". Never throws on content.
ParseResult parse_generated(Task task, std::string_view text);

// Inverse of serialize_prompt_*; also accepts "t: {}" for an empty
// description. Throws DataError on a missing descriptor or empty list.
PromptMD parse_prompt_md(std::string_view text);
PromptEG parse_prompt_eg(std::string_view text);

// True iff s contains any of " is ", "; ", ", ", ".".
bool contains_reserved_separator(std::string_view s);

// Surfaces that survive serialize_target -> parse_generated unchanged in
// any position of a well-formed target. Weaker than
// !contains_reserved_separator: an inner ". " (as in "J.K. Rowling") is fine.
bool is_round_trip_safe_surface(std::string_view surface);

}  // namespace selfdesc::codec
