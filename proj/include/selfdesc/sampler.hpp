#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "selfdesc/core.hpp"
#include "selfdesc/descriptions.hpp"
#include "selfdesc/io.hpp"

namespace selfdesc::sampler {

struct SamplerConfig {
  std::uint64_t rng_seed = 0;
  double md_target_fraction = 1.0;
  std::size_t max_negative_types = 3;
  std::size_t max_positive_types = 5;
  std::size_t max_concepts = 10;

  void validate() const;
};

struct TrainingInstance {
  Task task = Task::EntityGeneration;
  std::string prompt;
  std::string input;
  std::string target;

  friend bool operator==(const TrainingInstance&,
                         const TrainingInstance&) = default;
};

io::Json to_json(const TrainingInstance& inst);
TrainingInstance training_instance_from_json(const io::Json& j);
void write_instances(const std::filesystem::path& path,
                     const std::vector<TrainingInstance>& instances);
std::vector<TrainingInstance> read_instances(const std::filesystem::path& path);

// Distinct surfaces in mention order, each with the union of its types.
std::vector<TargetPair> surface_types(const AnnotatedSentence& s);

TrainingInstance make_md_instance(const AnnotatedSentence& s,
                                  const SamplerConfig& cfg,
                                  std::uint64_t draw_key);

// Positive/negative type split drawn for one EG instance.
struct EgDraw {
  std::vector<TypeId> positives;  // T_p
  std::vector<TypeId> negatives;  // T_n
  std::vector<TypeId> prompt;     // T' in prompt order
};

EgDraw draw_eg_types(const AnnotatedSentence& s, const TypeDictionary& dict,
                     const SamplerConfig& cfg, std::uint64_t draw_key);

TrainingInstance make_eg_instance(const AnnotatedSentence& s,
                                  const TypeDictionary& dict,
                                  const descriptions::DescriptionMap& desc,
                                  const SamplerConfig& cfg,
                                  std::uint64_t draw_key);

// EG target of `s` restricted to `positives`: one clause per (mention,
// matched type), mentions in textual order, types in `positives` order.
TargetSequence eg_target(const AnnotatedSentence& s,
                         const std::vector<TypeId>& positives);

// The fixed schema prompt shared by fine-tuning and prediction.
PromptEG schema_prompt(const std::vector<TypeId>& schema_types,
                       const descriptions::DescriptionMap& desc,
                       std::size_t max_concepts = 10,
                       std::uint64_t rng_seed = 0);

TrainingInstance make_finetune_instance(const AnnotatedSentence& s,
                                        const PromptEG& prompt);
TrainingInstance make_finetune_instance(const AnnotatedSentence& s,
                                        const std::vector<TypeId>& schema_types,
                                        const descriptions::DescriptionMap& desc);

// One MD and one EG instance per sentence; EG is skipped for sentences
// whose mentions are all `other`.
std::vector<TrainingInstance> make_pretrain_instances(
    const std::vector<AnnotatedSentence>& corpus, const TypeDictionary& dict,
    const descriptions::DescriptionMap& desc, const SamplerConfig& cfg,
    std::uint64_t epoch = 0);

struct KShotResult {
  std::vector<AnnotatedSentence> support;
  std::vector<TypeId> unsatisfiable;  // types with fewer than k sentences
};

// Seeded shuffle, then a greedy pass keeping every sentence that raises
// the sentence count of some schema type still below k.
KShotResult sample_kshot(const std::vector<AnnotatedSentence>& corpus,
                         std::size_t k, const std::vector<TypeId>& schema_types,
                         std::uint64_t rng_seed);

}  // namespace selfdesc::sampler
