#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "selfdesc/core.hpp"

namespace selfdesc::descriptions {

enum class OtherCounting {
  kPerDescription,  // a description counts iff it is exactly ["other"]
  kPerConcept,      // fraction of concept tokens equal to "other"
};

struct DescriptionConfig {
  std::size_t max_concepts = 10;
  double other_threshold = 0.5;
  std::uint64_t rng_seed = 0;
  OtherCounting counting = OtherCounting::kPerDescription;

  void validate() const;
};

struct MentionDescription {
  std::string surface;
  std::vector<TypeId> concepts;

  friend bool operator==(const MentionDescription&,
                         const MentionDescription&) = default;
};

struct DescriptionEntry {
  TypeId type;
  std::vector<TypeId> concepts;
  bool filtered = false;

  friend bool operator==(const DescriptionEntry&,
                         const DescriptionEntry&) = default;
};

// Type -> concept collection, kept in insertion order.
class DescriptionMap {
 public:
  // Replaces an existing entry for the same type in place.
  void put(DescriptionEntry entry);
  const DescriptionEntry* find(const TypeId& type) const;
  // Concepts of `type`, or empty when absent.
  const std::vector<TypeId>& concepts(const TypeId& type) const;

  const std::vector<DescriptionEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  friend bool operator==(const DescriptionMap& a, const DescriptionMap& b) {
    return a.entries_ == b.entries_;
  }

 private:
  std::vector<DescriptionEntry> entries_;
  std::unordered_map<TypeId, std::size_t> index_;
};

// Mention descriptions grouped by type, in first-seen type order.
using DescriptionsByType =
    std::vector<std::pair<TypeId, std::vector<MentionDescription>>>;

// Each type is described by every other type it shares a mention with.
DescriptionMap build_cooccurrence_descriptions(
    const std::vector<AnnotatedSentence>& corpus);

// At most cfg.max_concepts concepts, keeping input order. Larger
// collections are subsampled with a generator keyed on (rng_seed, draw_key).
std::vector<TypeId> sample_concepts(const std::vector<TypeId>& full,
                                    const DescriptionConfig& cfg,
                                    std::uint64_t draw_key);

DescriptionMap fuse_mention_descriptions(const DescriptionsByType& per_type);

struct FilterRecord {
  TypeId type;
  double other_frequency = 0.0;
  bool filtered = false;
};

struct FilterResult {
  DescriptionMap map;
  std::vector<FilterRecord> report;
};

// Types whose other-frequency exceeds cfg.other_threshold get an empty
// description; the rest get the fusion of their non-other descriptions.
FilterResult apply_filtering(const DescriptionsByType& per_type,
                             const DescriptionConfig& cfg);

// Runs `describe` (an MD generator: sentence + surfaces -> one label list
// per surface, or empty on a miss) over every mention of the corpus and
// groups the results by gold type. Misses become ["other"].
using Describer = std::function<std::vector<std::vector<TypeId>>(
    const AnnotatedSentence&, const std::vector<std::string>& surfaces)>;
DescriptionsByType collect_mention_descriptions(
    const std::vector<AnnotatedSentence>& corpus, const Describer& describe);

void write_descriptions(const std::filesystem::path& path,
                        const DescriptionMap& map);
DescriptionMap read_descriptions(const std::filesystem::path& path);

}  // namespace selfdesc::descriptions
