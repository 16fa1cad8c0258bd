#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <type_traits>
#include <vector>

#include "selfdesc/descriptions.hpp"
#include "selfdesc/model.hpp"
#include "selfdesc/sampler.hpp"
#include "selfdesc/tokenizer.hpp"

namespace selfdesc::model {

// Per-task mean token cross-entropy. total = md_term + eg_term; a task
// absent from the batch contributes 0.
struct LossReport {
  double total = 0.0;
  double md_term = 0.0;
  double eg_term = 0.0;
  std::size_t md_tokens = 0;
  std::size_t eg_tokens = 0;
};

// Scratch gradient buffers reused across steps.
template <class S>
struct GradWorkspace {
  std::vector<Params<S>> buffers;
};

// Loss of a batch and, when `grads` is non-null, its gradient (grads is
// overwritten). Each sequence's gradient is computed into its own buffer
// and the buffers are summed in batch order, so any `jobs` value gives
// bit-identical results.
template <class S>
LossReport batch_loss(const Params<S>& params, const std::vector<Example>& batch,
                      std::type_identity_t<Params<S>>* grads,
                      std::type_identity_t<GradWorkspace<S>>* ws = nullptr,
                      std::size_t jobs = 1);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

// Adam with decoupled weight decay. Gains and biases are not decayed.
template <class S>
class AdamW {
 public:
  AdamW(const Params<S>& like, AdamConfig cfg);
  void step(Params<S>& params, const Params<S>& grads, double lr);
  long steps() const { return t_; }

 private:
  AdamConfig cfg_;
  Params<S> m_, v_;
  std::vector<bool> decay_;
  long t_ = 0;
};

enum class Schedule { kConstant, kLinearWarmupDecay };

struct TrainConfig {
  std::size_t batch = 4;
  double lr = 1e-4;
  Schedule schedule = Schedule::kLinearWarmupDecay;
  double warmup_fraction = 0.06;
  std::size_t steps = 0;   // pretraining: explicit step count
  std::size_t epochs = 0;  // fine-tuning: passes over the instances
  AdamConfig adam;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;

  static TrainConfig pretrain_defaults();  // batch 16, lr 5e-5, constant
  static TrainConfig finetune_defaults();  // batch 4, lr 1e-4, 6% warmup, 50 epochs
  void validate() const;
};

// Learning rate at `step` (0-based) of `total` steps. Linear warmup from 0
// to the peak over ceil(warmup_fraction * total) steps, then linear decay
// towards 0.
double learning_rate(const TrainConfig& cfg, std::size_t step, std::size_t total);

struct StepLog {
  std::size_t step = 0;
  double lr = 0.0;
  LossReport loss;
};

// Supplies the batch for a given step.
struct BatchSource {
  std::size_t total_steps = 0;
  std::function<std::vector<Example>(std::size_t step)> batch;
};

// Runs AdamW over every step of `source`. Throws std::runtime_error naming
// the step when the loss or the parameters stop being finite.
template <class S>
std::vector<StepLog> train(Params<S>& params, const BatchSource& source,
                           const TrainConfig& cfg,
                           const std::function<void(const StepLog&)>& on_step = {});

Example make_example(const sampler::TrainingInstance& inst, const Vocab& vocab,
                     std::size_t max_input = kDefaultMaxInput);

// Fine-tuning: seeded reshuffle of the instances every epoch, batches of
// cfg.batch (the last batch of an epoch may be short).
BatchSource finetune_source(const std::vector<sampler::TrainingInstance>& instances,
                            const Vocab& vocab, const TrainConfig& cfg);

// Pretraining: every step takes cfg.batch sentences (seeded reshuffle per
// pass over the corpus) and emits an MD and an EG example for each, with
// fresh E' / T_p / T_n draws on every pass.
BatchSource pretrain_source(const std::vector<AnnotatedSentence>& corpus,
                            const TypeDictionary& dict,
                            const descriptions::DescriptionMap& desc,
                            const sampler::SamplerConfig& sampler_cfg,
                            const Vocab& vocab, const TrainConfig& cfg);

// Every prompt/input/target text a pretraining or fine-tuning run can
// produce, for vocabulary construction.
std::vector<std::string> vocabulary_texts(
    const std::vector<AnnotatedSentence>& corpus, const TypeDictionary& dict,
    const descriptions::DescriptionMap& desc);

template <class S>
std::string generate(const Params<S>& params, const Vocab& vocab,
                     const std::string& prompt, const std::string& input,
                     std::size_t max_len = 128);

// A model with its vocabulary, as stored in checkpoints.
template <class S>
struct Seq2Seq {
  Vocab vocab;
  Params<S> params;
};

// JSON checkpoint: format tag, version, precision, shape, vocabulary and
// named tensors. Loading converts to the requested precision.
template <class S>
void save_checkpoint(const std::filesystem::path& path, const Seq2Seq<S>& model);
template <class S>
Seq2Seq<S> load_checkpoint(const std::filesystem::path& path);

}  // namespace selfdesc::model
