#include "selfdesc/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <tuple>
#include <unordered_map>

#include "selfdesc/codec.hpp"
#include "selfdesc/errors.hpp"

namespace selfdesc::eval {

double Counts::precision() const {
  return predicted ? static_cast<double>(matched) / static_cast<double>(predicted) : 0.0;
}

double Counts::recall() const {
  return gold ? static_cast<double>(matched) / static_cast<double>(gold) : 0.0;
}

double Counts::f1() const {
  const double p = precision();
  const double r = recall();
  return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
}

namespace {

using SpanKey = std::tuple<TypeId, std::size_t, std::size_t>;

std::map<SpanKey, std::size_t> multiset_of(const std::vector<SpanPrediction>& spans) {
  std::map<SpanKey, std::size_t> out;
  for (const auto& s : spans) ++out[{s.type, s.start, s.end}];
  return out;
}

std::unordered_map<std::string, const SentenceSpans*> index_by_id(
    const std::vector<SentenceSpans>& stream, const char* name) {
  std::unordered_map<std::string, const SentenceSpans*> out;
  for (const auto& s : stream) {
    if (!out.emplace(s.sentence_id, &s).second) {
      throw DataError(std::string("duplicate sentence id '") + s.sentence_id + "' in " + name);
    }
  }
  return out;
}

}  // namespace

EvalReport score(const std::vector<SentenceSpans>& gold,
                 const std::vector<SentenceSpans>& pred) {
  const auto gold_index = index_by_id(gold, "gold");
  const auto pred_index = index_by_id(pred, "predictions");
  for (const auto& [id, _] : pred_index) {
    if (!gold_index.contains(id)) {
      throw DataError("sentence '" + id + "' has predictions but no gold entry");
    }
  }
  EvalReport r;
  for (const auto& g : gold) {
    const auto it = pred_index.find(g.sentence_id);
    if (it == pred_index.end()) {
      throw DataError("sentence '" + g.sentence_id + "' has no prediction entry");
    }
    const auto gm = multiset_of(g.spans);
    const auto pm = multiset_of(it->second->spans);
    for (const auto& [key, n] : gm) {
      r.counts.gold += n;
      r.per_type[std::get<0>(key)].gold += n;
    }
    for (const auto& [key, n] : pm) {
      r.counts.predicted += n;
      auto& t = r.per_type[std::get<0>(key)];
      t.predicted += n;
      const auto hit = gm.find(key);
      if (hit != gm.end()) {
        const auto m = std::min(n, hit->second);
        r.counts.matched += m;
        t.matched += m;
      }
    }
  }
  r.precision = r.counts.precision();
  r.recall = r.counts.recall();
  r.f1 = r.counts.f1();
  return r;
}

namespace {

io::Json counts_json(const Counts& c) {
  return io::Json{{"precision", c.precision()}, {"recall", c.recall()}, {"f1", c.f1()},
                  {"gold", c.gold},             {"predicted", c.predicted},
                  {"matched", c.matched}};
}

io::Json span_json(const SpanPrediction& s) {
  return io::Json{{"surface", s.surface}, {"type", s.type}, {"start", s.start}, {"end", s.end}};
}

}  // namespace

io::Json to_json(const EvalReport& report) {
  io::Json per_type = io::Json::object();
  for (const auto& [t, c] : report.per_type) per_type[t] = counts_json(c);
  auto j = counts_json(report.counts);
  j["per_type"] = std::move(per_type);
  j["seed"] = report.seed;
  j["k"] = report.k;
  return j;
}

io::Json to_json(const Prediction& p) {
  io::Json spans = io::Json::array();
  for (const auto& s : p.spans) spans.push_back(span_json(s));
  return io::Json{{"id", p.sentence_id},
                  {"text", p.text},
                  {"generated", p.generated},
                  {"spans", std::move(spans)},
                  {"diagnostics", p.diagnostics}};
}

Prediction prediction_from_json(const io::Json& j) {
  try {
    Prediction p;
    p.sentence_id = j.at("id").get<std::string>();
    p.text = j.value("text", std::string());
    p.generated = j.value("generated", std::string());
    for (const auto& s : j.at("spans")) {
      SpanPrediction span{s.at("surface").get<std::string>(), s.at("type").get<std::string>(),
                          s.at("start").get<std::size_t>(), s.at("end").get<std::size_t>()};
      if (span.end < span.start) throw DataError("span ends before it starts");
      p.spans.push_back(std::move(span));
    }
    if (j.contains("diagnostics")) {
      p.diagnostics = j.at("diagnostics").get<std::vector<std::string>>();
    }
    return p;
  } catch (const io::Json::exception& e) {
    throw DataError(std::string("malformed prediction record: ") + e.what());
  }
}

void write_predictions(const std::filesystem::path& path,
                       const std::vector<Prediction>& predictions) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& p : predictions) io::write_jsonl_line(out, to_json(p));
}

std::vector<Prediction> read_predictions(const std::filesystem::path& path) {
  std::vector<Prediction> out;
  io::for_each_jsonl(path, [&](const io::Json& j) { out.push_back(prediction_from_json(j)); });
  return out;
}

Prediction interpret(const Sentence& sentence, const std::string& generated) {
  Prediction p;
  p.sentence_id = sentence.id;
  p.text = sentence.text;
  p.generated = generated;
  auto parsed = codec::parse_generated(Task::EntityGeneration, generated);
  p.diagnostics = std::move(parsed.diagnostics);
  auto located = locate(sentence, parsed.target);
  p.spans = std::move(located.spans);
  for (const auto& u : located.unlocated) {
    p.diagnostics.push_back("unlocated clause '" + u.surface + " is " +
                            (u.labels.empty() ? std::string() : u.labels.front()) + "'");
  }
  return p;
}

std::vector<SentenceSpans> gold_spans(const std::vector<AnnotatedSentence>& corpus,
                                      const std::vector<TypeId>& schema) {
  std::vector<SentenceSpans> out;
  for (const auto& s : corpus) out.push_back({s.sentence.id, selfdesc::gold_spans(s, schema)});
  return out;
}

std::vector<SentenceSpans> predicted_spans(const std::vector<Prediction>& predictions) {
  std::vector<SentenceSpans> out;
  for (const auto& p : predictions) out.push_back({p.sentence_id, p.spans});
  return out;
}

descriptions::Describer md_describer(Generator generate) {
  return [generate = std::move(generate)](const AnnotatedSentence& s,
                                          const std::vector<std::string>& surfaces) {
    const auto prompt = codec::serialize_prompt_md(PromptMD(surfaces));
    const auto parsed =
        codec::parse_generated(Task::MentionDescribing, generate(prompt, s.sentence.text));
    std::vector<std::vector<TypeId>> out(surfaces.size());
    for (std::size_t i = 0; i < surfaces.size(); ++i) {
      for (const auto& pair : parsed.target.pairs) {
        if (pair.surface != surfaces[i]) continue;
        for (const auto& label : pair.labels) {
          if (std::find(out[i].begin(), out[i].end(), label) == out[i].end()) {
            out[i].push_back(label);
          }
        }
        break;
      }
    }
    return out;
  };
}

Seq2SeqEpisodeModel::Seq2SeqEpisodeModel(model::Seq2Seq<float> base, model::TrainConfig cfg,
                                         std::size_t max_len)
    : base_(std::move(base)), cfg_(cfg), max_len_(max_len) {
  cfg_.validate();
}

std::string Seq2SeqEpisodeModel::describe(const std::string& prompt, const std::string& input) {
  return model::generate(base_.params, base_.vocab, prompt, input, max_len_);
}

Generator Seq2SeqEpisodeModel::fine_tune(const std::vector<sampler::TrainingInstance>& support,
                                         std::uint64_t seed) {
  auto cfg = cfg_;
  cfg.seed = seed;
  auto tuned = std::make_shared<model::Seq2Seq<float>>(base_);
  const auto source = model::finetune_source(support, tuned->vocab, cfg);
  model::train(tuned->params, source, cfg);
  const auto max_len = max_len_;
  return [tuned, max_len](const std::string& prompt, const std::string& input) {
    return model::generate(tuned->params, tuned->vocab, prompt, input, max_len);
  };
}

Generator ConstantEpisodeModel::fine_tune(const std::vector<sampler::TrainingInstance>&,
                                          std::uint64_t) {
  return [out = output_](const std::string&, const std::string&) { return out; };
}

GoldEpisodeModel::GoldEpisodeModel(const std::vector<AnnotatedSentence>& corpus) {
  for (const auto& s : corpus) by_text_.emplace(s.sentence.text, s);
}

std::string GoldEpisodeModel::describe(const std::string& prompt, const std::string& input) {
  const auto it = by_text_.find(input);
  if (it == by_text_.end()) return "";
  const auto wanted = codec::parse_prompt_md(prompt).targets();
  TargetSequence t{Task::MentionDescribing, {}};
  for (auto& pair : sampler::surface_types(it->second)) {
    if (std::find(wanted.begin(), wanted.end(), pair.surface) != wanted.end()) {
      t.pairs.push_back(std::move(pair));
    }
  }
  return codec::serialize_target(t);
}

Generator GoldEpisodeModel::fine_tune(const std::vector<sampler::TrainingInstance>&,
                                      std::uint64_t) {
  return [this](const std::string& prompt, const std::string& input) -> std::string {
    const auto it = by_text_.find(input);
    if (it == by_text_.end()) return "";
    return codec::serialize_target(gold_target(it->second, codec::parse_prompt_eg(prompt).types()));
  };
}

void EpisodeConfig::validate() const {
  if (k < 1) throw PreconditionError("k must be >= 1");
  if (runs < 1) throw PreconditionError("runs must be >= 1");
  descriptions.validate();
}

EvalReport run_episode(const std::vector<AnnotatedSentence>& train,
                       const std::vector<AnnotatedSentence>& test,
                       const std::vector<TypeId>& schema, EpisodeModel& model,
                       const EpisodeConfig& cfg, std::uint64_t seed,
                       std::vector<Prediction>* predictions) {
  cfg.validate();
  const auto shot = sampler::sample_kshot(train, cfg.k, schema, seed);
  if (shot.support.empty()) throw DataError("the k-shot support set is empty");

  auto desc_cfg = cfg.descriptions;
  desc_cfg.rng_seed = seed;
  const auto per_type = descriptions::collect_mention_descriptions(
      shot.support, md_describer([&](const std::string& p, const std::string& x) {
        return model.describe(p, x);
      }));
  const auto filtered = descriptions::apply_filtering(per_type, desc_cfg);
  const auto prompt = sampler::schema_prompt(schema, filtered.map, cfg.max_concepts, seed);
  const auto prompt_text = codec::serialize_prompt_eg(prompt);

  std::vector<sampler::TrainingInstance> instances;
  for (const auto& s : shot.support) instances.push_back(sampler::make_finetune_instance(s, prompt));
  const auto generate = model.fine_tune(instances, seed);

  std::vector<Prediction> preds;
  for (const auto& s : test) preds.push_back(interpret(s.sentence, generate(prompt_text, s.sentence.text)));
  auto report = score(gold_spans(test, schema), predicted_spans(preds));
  report.seed = seed;
  report.k = cfg.k;
  if (predictions) *predictions = std::move(preds);
  return report;
}

EpisodesReport run_episodes(const std::vector<AnnotatedSentence>& train,
                            const std::vector<AnnotatedSentence>& test,
                            const std::vector<TypeId>& schema, EpisodeModel& model,
                            const EpisodeConfig& cfg) {
  cfg.validate();
  EpisodesReport out;
  out.k = cfg.k;
  for (std::size_t i = 0; i < cfg.runs; ++i) {
    const auto seed = cfg.seed + i;
    try {
      out.runs.push_back(run_episode(train, test, schema, model, cfg, seed));
    } catch (const std::exception& e) {
      out.failures.push_back({seed, e.what()});
    }
  }
  std::sort(out.runs.begin(), out.runs.end(),
            [](const EvalReport& a, const EvalReport& b) { return a.seed < b.seed; });
  const auto n = static_cast<double>(out.runs.size());
  if (out.runs.empty()) return out;
  for (const auto& r : out.runs) {
    out.f1_mean += r.f1;
    out.precision_mean += r.precision;
    out.recall_mean += r.recall;
  }
  out.f1_mean /= n;
  out.precision_mean /= n;
  out.recall_mean /= n;
  if (out.runs.size() > 1) {
    double ss = 0.0;
    for (const auto& r : out.runs) ss += (r.f1 - out.f1_mean) * (r.f1 - out.f1_mean);
    out.f1_sd = std::sqrt(ss / (n - 1));
  }
  return out;
}

io::Json to_json(const EpisodesReport& report) {
  io::Json runs = io::Json::array();
  io::Json f1s = io::Json::array();
  for (const auto& r : report.runs) {
    runs.push_back(to_json(r));
    f1s.push_back(r.f1);
  }
  io::Json failures = io::Json::array();
  for (const auto& f : report.failures) {
    failures.push_back(io::Json{{"seed", f.seed}, {"error", f.message}});
  }
  return io::Json{{"k", report.k},
                  {"completed_runs", report.runs.size()},
                  {"f1_mean", report.f1_mean},
                  {"f1_sd", report.f1_sd},
                  {"precision_mean", report.precision_mean},
                  {"recall_mean", report.recall_mean},
                  {"f1_runs", std::move(f1s)},
                  {"runs", std::move(runs)},
                  {"failures", std::move(failures)}};
}

}  // namespace selfdesc::eval
