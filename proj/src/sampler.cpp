#include "selfdesc/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <unordered_set>

#include "selfdesc/codec.hpp"
#include "selfdesc/rng.hpp"

namespace selfdesc::sampler {

namespace {

bool has(const std::vector<TypeId>& v, const TypeId& t) {
  return std::find(v.begin(), v.end(), t) != v.end();
}

std::vector<ConceptDescription> describe(const std::vector<TypeId>& types,
                                         const descriptions::DescriptionMap& desc,
                                         std::size_t max_concepts,
                                         std::uint64_t seed,
                                         std::uint64_t draw_key) {
  descriptions::DescriptionConfig dc;
  dc.max_concepts = max_concepts;
  dc.rng_seed = seed;
  std::vector<ConceptDescription> entries;
  for (const auto& t : types) {
    entries.push_back(
        {t, descriptions::sample_concepts(desc.concepts(t), dc,
                                          derive_seed(draw_key, fnv1a64(t)))});
  }
  return entries;
}

AnnotatedSentence sorted_copy(const AnnotatedSentence& s) {
  auto copy = s;
  sort_mentions(copy);
  return copy;
}

}  // namespace

void SamplerConfig::validate() const {
  if (!(md_target_fraction > 0.0 && md_target_fraction <= 1.0)) {
    throw PreconditionError("md_target_fraction must lie in (0, 1]");
  }
  if (max_positive_types < 1) throw PreconditionError("max_positive_types must be >= 1");
  if (max_concepts < 1) throw PreconditionError("max_concepts must be >= 1");
}

io::Json to_json(const TrainingInstance& inst) {
  return io::Json{{"task", std::string(task_name(inst.task))},
                  {"prompt", inst.prompt},
                  {"input", inst.input},
                  {"target", inst.target}};
}

TrainingInstance training_instance_from_json(const io::Json& j) {
  try {
    TrainingInstance inst;
    inst.task = parse_task(j.at("task").get<std::string>());
    inst.prompt = j.at("prompt").get<std::string>();
    inst.input = j.at("input").get<std::string>();
    inst.target = j.at("target").get<std::string>();
    return inst;
  } catch (const io::Json::exception& e) {
    throw DataError(std::string("bad training instance: ") + e.what());
  }
}

void write_instances(const std::filesystem::path& path,
                     const std::vector<TrainingInstance>& instances) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& inst : instances) io::write_jsonl_line(out, to_json(inst));
}

std::vector<TrainingInstance> read_instances(const std::filesystem::path& path) {
  std::vector<TrainingInstance> out;
  io::for_each_jsonl(path, [&](const io::Json& j) {
    out.push_back(training_instance_from_json(j));
  });
  return out;
}

std::vector<TargetPair> surface_types(const AnnotatedSentence& s) {
  std::vector<TargetPair> out;
  for (const auto& m : s.mentions) {
    auto it = std::find_if(out.begin(), out.end(),
                           [&](const TargetPair& p) { return p.surface == m.surface; });
    if (it == out.end()) {
      out.push_back({m.surface, {}});
      it = out.end() - 1;
    }
    for (const auto& t : m.types) {
      if (!has(it->labels, t)) it->labels.push_back(t);
    }
  }
  return out;
}

TrainingInstance make_md_instance(const AnnotatedSentence& s,
                                  const SamplerConfig& cfg,
                                  std::uint64_t draw_key) {
  cfg.validate();
  if (s.mentions.empty()) {
    throw PreconditionError("MD instance needs a mention: " + s.sentence.id);
  }
  const auto all = surface_types(sorted_copy(s));
  const auto want = static_cast<std::size_t>(
      std::ceil(cfg.md_target_fraction * static_cast<double>(all.size())));
  Rng rng(derive_seed(derive_seed(cfg.rng_seed, "md"), draw_key));
  TargetSequence target{Task::MentionDescribing, {}};
  std::vector<std::string> surfaces;
  for (auto i : rng.sample_indices(all.size(), std::max<std::size_t>(1, want))) {
    target.pairs.push_back(all[i]);
    surfaces.push_back(all[i].surface);
  }
  return {Task::MentionDescribing,
          codec::serialize_prompt_md(PromptMD(surfaces)), s.sentence.text,
          codec::serialize_target(target)};
}

EgDraw draw_eg_types(const AnnotatedSentence& s, const TypeDictionary& dict,
                     const SamplerConfig& cfg, std::uint64_t draw_key) {
  cfg.validate();
  std::vector<TypeId> present;
  for (const auto& m : s.mentions) {
    for (const auto& t : m.types) {
      if (t != kOtherType && !has(present, t)) present.push_back(t);
    }
  }
  if (present.empty()) {
    throw PreconditionError("EG instance needs a typed mention: " + s.sentence.id);
  }
  std::vector<TypeId> pool;
  for (const auto& t : dict.types()) {
    if (!has(present, t)) pool.push_back(t);
  }

  Rng rng(derive_seed(derive_seed(cfg.rng_seed, "eg"), draw_key));
  EgDraw draw;
  const auto n_pos =
      1 + rng.below(std::min(cfg.max_positive_types, present.size()));
  for (auto i : rng.sample_indices(present.size(), n_pos)) {
    draw.positives.push_back(present[i]);
  }
  const auto n_neg = rng.below(std::min(cfg.max_negative_types, pool.size()) + 1);
  for (auto i : rng.sample_indices(pool.size(), n_neg)) {
    draw.negatives.push_back(pool[i]);
  }
  draw.prompt = draw.positives;
  draw.prompt.insert(draw.prompt.end(), draw.negatives.begin(), draw.negatives.end());
  rng.shuffle(draw.prompt);
  return draw;
}

TargetSequence eg_target(const AnnotatedSentence& s,
                         const std::vector<TypeId>& positives) {
  TargetSequence target{Task::EntityGeneration, {}};
  for (const auto& m : sorted_copy(s).mentions) {
    for (const auto& t : positives) {
      if (has(m.types, t)) target.pairs.push_back({m.surface, {t}});
    }
  }
  return target;
}

TrainingInstance make_eg_instance(const AnnotatedSentence& s,
                                  const TypeDictionary& dict,
                                  const descriptions::DescriptionMap& desc,
                                  const SamplerConfig& cfg,
                                  std::uint64_t draw_key) {
  const auto draw = draw_eg_types(s, dict, cfg, draw_key);
  const PromptEG prompt(
      describe(draw.prompt, desc, cfg.max_concepts, cfg.rng_seed, draw_key));
  return {Task::EntityGeneration, codec::serialize_prompt_eg(prompt),
          s.sentence.text, codec::serialize_target(eg_target(s, draw.positives))};
}

PromptEG schema_prompt(const std::vector<TypeId>& schema_types,
                       const descriptions::DescriptionMap& desc,
                       std::size_t max_concepts, std::uint64_t rng_seed) {
  if (schema_types.empty()) throw PreconditionError("schema must not be empty");
  return PromptEG(describe(schema_types, desc, max_concepts, rng_seed, 0));
}

TrainingInstance make_finetune_instance(const AnnotatedSentence& s,
                                        const PromptEG& prompt) {
  return {Task::EntityGeneration, codec::serialize_prompt_eg(prompt),
          s.sentence.text, codec::serialize_target(eg_target(s, prompt.types()))};
}

TrainingInstance make_finetune_instance(const AnnotatedSentence& s,
                                        const std::vector<TypeId>& schema_types,
                                        const descriptions::DescriptionMap& desc) {
  return make_finetune_instance(s, schema_prompt(schema_types, desc));
}

std::vector<TrainingInstance> make_pretrain_instances(
    const std::vector<AnnotatedSentence>& corpus, const TypeDictionary& dict,
    const descriptions::DescriptionMap& desc, const SamplerConfig& cfg,
    std::uint64_t epoch) {
  std::vector<TrainingInstance> out;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& s = corpus[i];
    if (s.mentions.empty()) continue;
    const auto key = derive_seed(epoch, i);
    out.push_back(make_md_instance(s, cfg, key));
    const bool typed = std::any_of(
        s.mentions.begin(), s.mentions.end(), [](const TypedMention& m) {
          return std::any_of(m.types.begin(), m.types.end(),
                             [](const TypeId& t) { return t != kOtherType; });
        });
    if (typed) out.push_back(make_eg_instance(s, dict, desc, cfg, key));
  }
  return out;
}

KShotResult sample_kshot(const std::vector<AnnotatedSentence>& corpus,
                         std::size_t k, const std::vector<TypeId>& schema_types,
                         std::uint64_t rng_seed) {
  if (k < 1) throw PreconditionError("k must be >= 1");
  std::vector<std::size_t> order(corpus.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(derive_seed(rng_seed, "kshot"));
  rng.shuffle(order);

  std::map<TypeId, std::size_t> counts;
  for (const auto& t : schema_types) counts[t] = 0;
  std::size_t open = counts.size();
  KShotResult result;
  for (auto idx : order) {
    if (open == 0) break;
    const auto& s = corpus[idx];
    std::vector<TypeId> types;
    for (const auto& m : s.mentions) {
      for (const auto& t : m.types) {
        if (counts.contains(t) && !has(types, t)) types.push_back(t);
      }
    }
    const bool useful = std::any_of(types.begin(), types.end(),
                                    [&](const TypeId& t) { return counts[t] < k; });
    if (!useful) continue;
    for (const auto& t : types) {
      if (++counts[t] == k) --open;
    }
    result.support.push_back(s);
  }
  for (const auto& t : schema_types) {
    if (counts[t] < k) result.unsatisfiable.push_back(t);
  }
  return result;
}

}  // namespace selfdesc::sampler
