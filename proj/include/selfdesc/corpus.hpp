#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "selfdesc/core.hpp"
#include "selfdesc/io.hpp"

namespace selfdesc::corpus {

struct KbItem {
  std::string id;
  std::string label;
  std::vector<std::string> aliases;
  std::vector<std::string> instance_of;
  std::vector<std::string> subclass_of;
  std::vector<std::string> occupation;
};

struct Anchor {
  std::string surface;
  std::string target;   // KB item id
  std::size_t offset;   // scalar values into WikiPage::text
};

struct WikiPage {
  std::string title;
  std::string text;
  std::vector<Anchor> anchors;
};

struct BuildConfig {
  std::size_t min_type_instances = 5;
  std::size_t max_type_tokens = 3;
  std::size_t top_np_count = 3;
  std::vector<std::string> preposition_stoplist = {"of", "in",   "for",
                                                   "on", "at",   "by",
                                                   "with", "from", "to"};
  std::size_t jobs = 1;

  void validate() const;
};

struct BuildDiagnostics {
  std::size_t malformed_items = 0;
  std::size_t malformed_pages = 0;
  std::size_t invalid_anchors = 0;
  std::size_t unknown_anchor_targets = 0;
  std::size_t unsafe_mentions = 0;
  std::size_t cross_sentence_mentions = 0;
  std::size_t dropped_sentences = 0;

  BuildDiagnostics& operator+=(const BuildDiagnostics& o);
  io::Json to_json() const;
};

// Item lookup by id and by label/alias.
class KnowledgeBase {
 public:
  KnowledgeBase() = default;
  explicit KnowledgeBase(std::vector<KbItem> items);

  const std::vector<KbItem>& items() const { return items_; }
  const KbItem* find(const std::string& id) const;
  // Item whose label (then alias) equals `title`; first in dump order.
  const KbItem* find_by_name(const std::string& title) const;
  // A claim value names either an item id (resolved to its label) or a
  // literal type name.
  std::string resolve_claim(const std::string& value) const;

 private:
  std::vector<KbItem> items_;
  std::unordered_map<std::string, std::size_t> by_id_;
  std::unordered_map<std::string, std::size_t> by_label_;
  std::unordered_map<std::string, std::size_t> by_alias_;
};

// Reads the simplified KB / page JSONL dumps. Malformed records are skipped
// and counted.
std::vector<KbItem> read_kb(const std::filesystem::path& path,
                            BuildDiagnostics& diag);
std::vector<WikiPage> read_pages(const std::filesystem::path& path,
                                 BuildDiagnostics& diag);
bool kb_item_from_json(const io::Json& j, KbItem& out);
bool page_from_json(const io::Json& j, WikiPage& out);

// Lower-cases and whitespace-normalizes; names longer than max_type_tokens
// keep the prefix before the first stoplist preposition, capped at
// max_type_tokens tokens.
TypeId truncate_type_name(std::string_view name, const BuildConfig& cfg);

TypeDictionary build_type_dictionary(const KnowledgeBase& kb,
                                     const BuildConfig& cfg);

// Dictionary types of an item, in claim order, or {"other"}.
std::vector<TypeId> item_types(const KbItem& item, const KnowledgeBase& kb,
                               const TypeDictionary& dict,
                               const BuildConfig& cfg);

// Rule-based splitter. Spans are [start, end) in scalar values and exclude
// surrounding whitespace.
std::vector<std::pair<std::size_t, std::size_t>> split_sentences(
    std::string_view text);

std::vector<AnnotatedSentence> harvest_mentions(const WikiPage& page,
                                                const KnowledgeBase& kb,
                                                const TypeDictionary& dict,
                                                const BuildConfig& cfg,
                                                BuildDiagnostics& diag);

struct CorpusBuild {
  TypeDictionary dictionary;
  std::vector<AnnotatedSentence> sentences;
  BuildDiagnostics diagnostics;
};

// Dictionary pass, then per-page harvesting on up to cfg.jobs workers.
// Output order is page order regardless of jobs.
CorpusBuild build_corpus(const KnowledgeBase& kb,
                         const std::vector<WikiPage>& pages,
                         const BuildConfig& cfg);

// Dictionary whose counts are the mentions carrying each type in `corpus`.
TypeDictionary count_types(const std::vector<AnnotatedSentence>& corpus);

void write_dictionary(const std::filesystem::path& path,
                      const TypeDictionary& dict);
TypeDictionary read_dictionary(const std::filesystem::path& path);

}  // namespace selfdesc::corpus
