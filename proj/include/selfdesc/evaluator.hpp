#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "selfdesc/descriptions.hpp"
#include "selfdesc/io.hpp"
#include "selfdesc/locator.hpp"
#include "selfdesc/sampler.hpp"
#include "selfdesc/train.hpp"

namespace selfdesc::eval {

struct SentenceSpans {
  std::string sentence_id;
  std::vector<SpanPrediction> spans;
};

struct Counts {
  std::size_t gold = 0;
  std::size_t predicted = 0;
  std::size_t matched = 0;

  double precision() const;
  double recall() const;
  double f1() const;  // 2PR / (P + R), 0 when P + R == 0
};

struct EvalReport {
  Counts counts;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::map<TypeId, Counts> per_type;
  std::uint64_t seed = 0;
  std::size_t k = 0;
};

// Exact (sentence, type, start, end) matching; each gold span pairs with at
// most one prediction. Both streams must cover the same sentence ids.
EvalReport score(const std::vector<SentenceSpans>& gold,
                 const std::vector<SentenceSpans>& pred);

io::Json to_json(const EvalReport& report);

// Model output for one sentence, as written by `predict`.
struct Prediction {
  std::string sentence_id;
  std::string text;
  std::string generated;
  std::vector<SpanPrediction> spans;
  std::vector<std::string> diagnostics;
};

io::Json to_json(const Prediction& p);
Prediction prediction_from_json(const io::Json& j);
void write_predictions(const std::filesystem::path& path,
                       const std::vector<Prediction>& predictions);
std::vector<Prediction> read_predictions(const std::filesystem::path& path);

// parse_generated -> locate on one EG generation.
Prediction interpret(const Sentence& sentence, const std::string& generated);

// Gold spans of a corpus restricted to `schema` (all types when empty).
std::vector<SentenceSpans> gold_spans(const std::vector<AnnotatedSentence>& corpus,
                                      const std::vector<TypeId>& schema = {});
std::vector<SentenceSpans> predicted_spans(const std::vector<Prediction>& predictions);

// Text generator: (prompt, input) -> output text.
using Generator = std::function<std::string(const std::string&, const std::string&)>;

// Describer backed by an MD generator: the i-th clause of a surface gives
// its labels; surfaces without a clause are misses.
descriptions::Describer md_describer(Generator generate);

// What an episode needs from a model.
class EpisodeModel {
 public:
  virtual ~EpisodeModel() = default;
  // MD generations of the base model, for description building.
  virtual std::string describe(const std::string& prompt, const std::string& input) = 0;
  // Fine-tunes a fresh copy of the base model.
  virtual Generator fine_tune(const std::vector<sampler::TrainingInstance>& support,
                              std::uint64_t seed) = 0;
};

class Seq2SeqEpisodeModel : public EpisodeModel {
 public:
  Seq2SeqEpisodeModel(model::Seq2Seq<float> base, model::TrainConfig cfg,
                      std::size_t max_len = 128);
  std::string describe(const std::string& prompt, const std::string& input) override;
  Generator fine_tune(const std::vector<sampler::TrainingInstance>& support,
                      std::uint64_t seed) override;

 private:
  model::Seq2Seq<float> base_;
  model::TrainConfig cfg_;
  std::size_t max_len_;
};

// Emits the same text for every input.
class ConstantEpisodeModel : public EpisodeModel {
 public:
  explicit ConstantEpisodeModel(std::string output) : output_(std::move(output)) {}
  std::string describe(const std::string&, const std::string&) override { return ""; }
  Generator fine_tune(const std::vector<sampler::TrainingInstance>&,
                      std::uint64_t) override;

 private:
  std::string output_;
};

// Emits the serialized gold target of each known sentence, restricted to
// the types of the prompt.
class GoldEpisodeModel : public EpisodeModel {
 public:
  explicit GoldEpisodeModel(const std::vector<AnnotatedSentence>& corpus);
  std::string describe(const std::string& prompt, const std::string& input) override;
  Generator fine_tune(const std::vector<sampler::TrainingInstance>&,
                      std::uint64_t) override;

 private:
  std::map<std::string, AnnotatedSentence> by_text_;
};

struct EpisodeConfig {
  std::size_t k = 5;
  std::size_t runs = 10;
  std::uint64_t seed = 0;  // episode i uses seed + i
  descriptions::DescriptionConfig descriptions;
  std::size_t max_concepts = 10;

  void validate() const;
};

struct EpisodeFailure {
  std::uint64_t seed = 0;
  std::string message;
};

struct EpisodesReport {
  std::vector<EvalReport> runs;  // ascending seed
  std::vector<EpisodeFailure> failures;
  double f1_mean = 0.0;
  double f1_sd = 0.0;  // sample standard deviation, 0 for a single run
  double precision_mean = 0.0;
  double recall_mean = 0.0;
  std::size_t k = 0;
};

// One episode: k-shot support -> descriptions from MD over the support ->
// fine-tune -> predict every test sentence with the schema prompt -> score.
EvalReport run_episode(const std::vector<AnnotatedSentence>& train,
                       const std::vector<AnnotatedSentence>& test,
                       const std::vector<TypeId>& schema, EpisodeModel& model,
                       const EpisodeConfig& cfg, std::uint64_t seed,
                       std::vector<Prediction>* predictions = nullptr);

// Runs cfg.runs episodes. A failing episode is recorded and the rest
// continue.
EpisodesReport run_episodes(const std::vector<AnnotatedSentence>& train,
                            const std::vector<AnnotatedSentence>& test,
                            const std::vector<TypeId>& schema, EpisodeModel& model,
                            const EpisodeConfig& cfg);

io::Json to_json(const EpisodesReport& report);

}  // namespace selfdesc::eval
