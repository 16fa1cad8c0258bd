#include "selfdesc/train.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>
#include <thread>

#include "selfdesc/io.hpp"
#include "selfdesc/rng.hpp"

namespace selfdesc::model {

namespace {

bool decayed(const std::string& name) {
  return !(name.ends_with(".gain") || name.ends_with(".bias") ||
           name.ends_with(".b1") || name.ends_with(".b2") || name == "out_bias");
}

template <class S>
std::vector<Mat<S>*> tensors(Params<S>& p) {
  std::vector<Mat<S>*> out;
  p.visit([&](const std::string&, Mat<S>& m) { out.push_back(&m); });
  return out;
}

template <class S>
std::vector<const Mat<S>*> tensors(const Params<S>& p) {
  std::vector<const Mat<S>*> out;
  p.visit([&](const std::string&, const Mat<S>& m) { out.push_back(&m); });
  return out;
}

}  // namespace

template <class S>
LossReport batch_loss(const Params<S>& params, const std::vector<Example>& batch,
                      std::type_identity_t<Params<S>>* grads,
                      std::type_identity_t<GradWorkspace<S>>* ws, std::size_t jobs) {
  if (batch.empty()) throw PreconditionError("empty batch");
  LossReport report;
  for (const auto& ex : batch) {
    (ex.is_md ? report.md_tokens : report.eg_tokens) += ex.tgt.size() + 1;
  }
  const S md_weight = report.md_tokens ? static_cast<S>(1.0 / report.md_tokens) : S(0);
  const S eg_weight = report.eg_tokens ? static_cast<S>(1.0 / report.eg_tokens) : S(0);

  std::vector<SequenceLoss> losses(batch.size());
  GradWorkspace<S> local;
  if (!ws) ws = &local;
  jobs = std::max<std::size_t>(1, std::min(jobs, batch.size()));
  const bool parallel = grads != nullptr && jobs > 1;
  const std::size_t needed = grads == nullptr ? 0 : (parallel ? batch.size() : 1);
  while (ws->buffers.size() < needed) ws->buffers.push_back(Params<S>::zeros(params.shape));

  if (grads) grads->set_zero();
  auto run = [&](std::size_t i, Params<S>* buffer) {
    const auto& ex = batch[i];
    if (buffer) buffer->set_zero();
    losses[i] = sequence_loss(params, ex, ex.is_md ? md_weight : eg_weight, buffer);
  };

  if (!parallel) {
    for (std::size_t i = 0; i < batch.size(); ++i) {
      run(i, grads ? &ws->buffers[0] : nullptr);
      if (grads) *grads += ws->buffers[0];
    }
  } else {
    std::vector<std::thread> workers;
    std::vector<std::exception_ptr> errors(jobs);
    for (std::size_t w = 0; w < jobs; ++w) {
      workers.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < batch.size(); i += jobs) run(i, &ws->buffers[i]);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : workers) t.join();
    for (const auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
    for (std::size_t i = 0; i < batch.size(); ++i) *grads += ws->buffers[i];
  }

  double md_sum = 0.0;
  double eg_sum = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    (batch[i].is_md ? md_sum : eg_sum) += losses[i].sum;
  }
  report.md_term = report.md_tokens ? md_sum / static_cast<double>(report.md_tokens) : 0.0;
  report.eg_term = report.eg_tokens ? eg_sum / static_cast<double>(report.eg_tokens) : 0.0;
  report.total = report.md_term + report.eg_term;
  return report;
}

template <class S>
AdamW<S>::AdamW(const Params<S>& like, AdamConfig cfg)
    : cfg_(cfg), m_(Params<S>::zeros(like.shape)), v_(Params<S>::zeros(like.shape)) {
  like.visit([&](const std::string& name, const Mat<S>&) {
    decay_.push_back(decayed(name));
  });
}

template <class S>
void AdamW<S>::step(Params<S>& params, const Params<S>& grads, double lr) {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  const S b1 = static_cast<S>(cfg_.beta1);
  const S b2 = static_cast<S>(cfg_.beta2);
  const S step_size = static_cast<S>(lr / bc1);
  const S inv_sqrt_bc2 = static_cast<S>(1.0 / std::sqrt(bc2));
  const S eps = static_cast<S>(cfg_.eps);
  const S decay = static_cast<S>(lr * cfg_.weight_decay);
  auto p = tensors(params);
  auto g = tensors(grads);
  auto m = tensors(m_);
  auto v = tensors(v_);
  for (std::size_t i = 0; i < p.size(); ++i) {
    auto& pm = *p[i];
    const auto& gm = *g[i];
    m[i]->array() = b1 * m[i]->array() + (1 - b1) * gm.array();
    v[i]->array() = b2 * v[i]->array() + (1 - b2) * gm.array().square();
    if (decay_[i]) pm.array() -= decay * pm.array();
    pm.array() -= step_size * m[i]->array() /
                  (v[i]->array().sqrt() * inv_sqrt_bc2 + eps);
  }
}

TrainConfig TrainConfig::pretrain_defaults() {
  TrainConfig c;
  c.batch = 16;
  c.lr = 5e-5;
  c.schedule = Schedule::kConstant;
  c.steps = 2000;
  return c;
}

TrainConfig TrainConfig::finetune_defaults() {
  TrainConfig c;
  c.batch = 4;
  c.lr = 1e-4;
  c.schedule = Schedule::kLinearWarmupDecay;
  c.warmup_fraction = 0.06;
  c.epochs = 50;
  return c;
}

void TrainConfig::validate() const {
  if (batch < 1) throw PreconditionError("batch must be >= 1");
  if (!(lr > 0.0)) throw PreconditionError("learning rate must be positive");
  if (!(warmup_fraction >= 0.0 && warmup_fraction < 1.0)) {
    throw PreconditionError("warmup fraction must lie in [0, 1)");
  }
  if (jobs < 1) throw PreconditionError("jobs must be >= 1");
}

double learning_rate(const TrainConfig& cfg, std::size_t step, std::size_t total) {
  if (cfg.schedule == Schedule::kConstant) return cfg.lr;
  const auto warmup = static_cast<std::size_t>(
      std::ceil(cfg.warmup_fraction * static_cast<double>(total)));
  if (step < warmup) {
    return cfg.lr * static_cast<double>(step) / static_cast<double>(warmup);
  }
  if (total <= warmup) return cfg.lr;
  const double remaining = static_cast<double>(total - step);
  return cfg.lr * std::max(0.0, remaining / static_cast<double>(total - warmup));
}

template <class S>
std::vector<StepLog> train(Params<S>& params, const BatchSource& source,
                           const TrainConfig& cfg,
                           const std::function<void(const StepLog&)>& on_step) {
  cfg.validate();
  AdamW<S> opt(params, cfg.adam);
  auto grads = Params<S>::zeros(params.shape);
  GradWorkspace<S> ws;
  std::vector<StepLog> log;
  for (std::size_t step = 0; step < source.total_steps; ++step) {
    const auto batch = source.batch(step);
    StepLog entry;
    entry.step = step;
    entry.lr = learning_rate(cfg, step, source.total_steps);
    try {
      entry.loss = batch_loss(params, batch, &grads, &ws, cfg.jobs);
    } catch (const std::runtime_error& e) {
      throw std::runtime_error("training diverged at step " + std::to_string(step) +
                               ": " + e.what());
    }
    opt.step(params, grads, entry.lr);
    if (!params.all_finite()) {
      throw std::runtime_error("training diverged at step " + std::to_string(step) +
                               ": non-finite parameters");
    }
    if (on_step) on_step(entry);
    log.push_back(entry);
  }
  return log;
}

Example make_example(const sampler::TrainingInstance& inst, const Vocab& vocab,
                     std::size_t max_input) {
  Example ex;
  ex.src = encode_input(inst.prompt, inst.input, vocab, max_input);
  ex.tgt = vocab.encode(inst.target);
  ex.is_md = inst.task == Task::MentionDescribing;
  ex.id = inst.input;
  return ex;
}

BatchSource finetune_source(const std::vector<sampler::TrainingInstance>& instances,
                            const Vocab& vocab, const TrainConfig& cfg) {
  cfg.validate();
  if (instances.empty()) throw PreconditionError("no fine-tuning instances");
  auto examples = std::make_shared<std::vector<Example>>();
  for (const auto& inst : instances) examples->push_back(make_example(inst, vocab));
  const std::size_t per_epoch = (examples->size() + cfg.batch - 1) / cfg.batch;
  auto order_cache = std::make_shared<std::pair<std::size_t, std::vector<std::size_t>>>(
      SIZE_MAX, std::vector<std::size_t>{});
  const auto seed = derive_seed(cfg.seed, "finetune-order");
  const auto batch = cfg.batch;
  BatchSource src;
  src.total_steps = per_epoch * cfg.epochs;
  src.batch = [=](std::size_t step) {
    const std::size_t epoch = step / per_epoch;
    if (order_cache->first != epoch) {
      std::vector<std::size_t> order(examples->size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      Rng rng(derive_seed(seed, epoch));
      rng.shuffle(order);
      *order_cache = {epoch, std::move(order)};
    }
    const auto& order = order_cache->second;
    const std::size_t begin = (step % per_epoch) * batch;
    const std::size_t end = std::min(begin + batch, order.size());
    std::vector<Example> out;
    for (std::size_t i = begin; i < end; ++i) out.push_back((*examples)[order[i]]);
    return out;
  };
  return src;
}

BatchSource pretrain_source(const std::vector<AnnotatedSentence>& corpus,
                            const TypeDictionary& dict,
                            const descriptions::DescriptionMap& desc,
                            const sampler::SamplerConfig& sampler_cfg,
                            const Vocab& vocab, const TrainConfig& cfg) {
  cfg.validate();
  auto sentences = std::make_shared<std::vector<AnnotatedSentence>>();
  for (const auto& s : corpus) {
    if (!s.mentions.empty()) sentences->push_back(s);
  }
  if (sentences->empty()) throw PreconditionError("no sentences with mentions");
  const std::size_t per_pass = (sentences->size() + cfg.batch - 1) / cfg.batch;
  const auto seed = derive_seed(cfg.seed, "pretrain-order");
  const auto batch = cfg.batch;
  auto order_cache = std::make_shared<std::pair<std::size_t, std::vector<std::size_t>>>(
      SIZE_MAX, std::vector<std::size_t>{});
  BatchSource src;
  src.total_steps = cfg.steps;
  src.batch = [=, &vocab](std::size_t step) {
    const std::size_t pass = step / per_pass;
    if (order_cache->first != pass) {
      std::vector<std::size_t> order(sentences->size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      Rng rng(derive_seed(seed, pass));
      rng.shuffle(order);
      *order_cache = {pass, std::move(order)};
    }
    const auto& order = order_cache->second;
    const std::size_t begin = (step % per_pass) * batch;
    const std::size_t end = std::min(begin + batch, order.size());
    std::vector<Example> out;
    for (std::size_t i = begin; i < end; ++i) {
      const auto idx = order[i];
      const auto& s = (*sentences)[idx];
      const auto key = derive_seed(pass, idx);
      out.push_back(make_example(sampler::make_md_instance(s, sampler_cfg, key), vocab));
      const bool typed = std::any_of(s.mentions.begin(), s.mentions.end(), [](const auto& m) {
        return std::any_of(m.types.begin(), m.types.end(),
                           [](const TypeId& t) { return t != kOtherType; });
      });
      if (typed) {
        out.push_back(make_example(
            sampler::make_eg_instance(s, dict, desc, sampler_cfg, key), vocab));
      }
    }
    return out;
  };
  return src;
}

std::vector<std::string> vocabulary_texts(const std::vector<AnnotatedSentence>& corpus,
                                          const TypeDictionary& dict,
                                          const descriptions::DescriptionMap& desc) {
  std::set<std::string> names;
  std::vector<std::string> texts = {"[MD] [EG] x is y"};
  for (const auto& s : corpus) {
    texts.push_back(s.sentence.text);
    for (const auto& m : s.mentions) {
      texts.push_back(m.surface);
      names.insert(m.types.begin(), m.types.end());
    }
  }
  for (const auto& t : dict.types()) names.insert(t);
  for (const auto& e : desc.entries()) {
    names.insert(e.type);
    names.insert(e.concepts.begin(), e.concepts.end());
  }
  // Every glued form a name can take in prompts and targets.
  for (const auto& n : names) texts.push_back(n + ": {" + n + ", " + n + "}; " + n + ".");
  return texts;
}

template <class S>
std::string generate(const Params<S>& params, const Vocab& vocab,
                     const std::string& prompt, const std::string& input,
                     std::size_t max_len) {
  const auto src = encode_input(prompt, input, vocab,
                                static_cast<std::size_t>(params.shape.max_src));
  return vocab.decode(greedy_decode(params, src, max_len));
}

namespace {

constexpr const char* kFormat = "selfdesc-seq2seq";
constexpr int kVersion = 1;

template <class S>
constexpr const char* precision_name() {
  return sizeof(S) == 4 ? "float32" : "float64";
}

io::Json shape_json(const ModelShape& s) {
  return io::Json{{"vocab", s.vocab}, {"d", s.d},           {"layers", s.layers},
                  {"heads", s.heads}, {"ffn", s.ffn},       {"max_src", s.max_src},
                  {"max_tgt", s.max_tgt}};
}

ModelShape shape_from_json(const io::Json& j) {
  ModelShape s;
  s.vocab = j.at("vocab").get<int>();
  s.d = j.at("d").get<int>();
  s.layers = j.at("layers").get<int>();
  s.heads = j.at("heads").get<int>();
  s.ffn = j.at("ffn").get<int>();
  s.max_src = j.at("max_src").get<int>();
  s.max_tgt = j.at("max_tgt").get<int>();
  return s;
}

template <class S, class T>
void read_tensors(const io::Json& j, Params<T>& params) {
  const auto& list = j.at("tensors");
  std::size_t i = 0;
  params.visit([&](const std::string& name, Mat<T>& m) {
    if (i >= list.size()) throw DataError("checkpoint is missing tensor " + name);
    const auto& t = list.at(i++);
    if (t.at("name").get<std::string>() != name || t.at("rows").get<long>() != m.rows() ||
        t.at("cols").get<long>() != m.cols()) {
      throw DataError("checkpoint tensor mismatch at " + name);
    }
    const auto& data = t.at("data");
    if (static_cast<long>(data.size()) != m.size()) {
      throw DataError("checkpoint tensor " + name + " has the wrong size");
    }
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        m(r, c) = static_cast<T>(data[static_cast<std::size_t>(r * m.cols() + c)].get<S>());
      }
    }
  });
  if (i != list.size()) throw DataError("checkpoint has extra tensors");
}

}  // namespace

template <class S>
void save_checkpoint(const std::filesystem::path& path, const Seq2Seq<S>& model) {
  io::Json tensors = io::Json::array();
  model.params.visit([&](const std::string& name, const Mat<S>& m) {
    io::Json data = io::Json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
    }
    tensors.push_back(io::Json{{"name", name}, {"rows", m.rows()}, {"cols", m.cols()},
                               {"data", std::move(data)}});
  });
  io::Json j{{"format", kFormat},
             {"version", kVersion},
             {"precision", precision_name<S>()},
             {"shape", shape_json(model.params.shape)},
             {"vocab", model.vocab.tokens()},
             {"tensors", std::move(tensors)}};
  io::write_file(path, j.dump() + "\n");
}

template <class S>
Seq2Seq<S> load_checkpoint(const std::filesystem::path& path) {
  io::Json j;
  try {
    j = io::Json::parse(io::read_file(path));
  } catch (const io::Json::exception& e) {
    throw DataError(path.string() + ": not a checkpoint: " + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != kFormat) {
      throw DataError(path.string() + ": unknown checkpoint format");
    }
    if (j.at("version").get<int>() != kVersion) {
      throw DataError(path.string() + ": unsupported checkpoint version");
    }
    auto tokens = j.at("vocab").get<std::vector<std::string>>();
    Seq2Seq<S> model;
    model.vocab = Vocab::from_tokens(
        std::vector<std::string>(tokens.begin() + std::min<std::ptrdiff_t>(
                                                      static_cast<std::ptrdiff_t>(Vocab::kSpecialCount),
                                                      static_cast<std::ptrdiff_t>(tokens.size())),
                                 tokens.end()));
    if (model.vocab.tokens() != tokens) throw DataError(path.string() + ": bad vocabulary");
    const auto shape = shape_from_json(j.at("shape"));
    if (static_cast<std::size_t>(shape.vocab) != model.vocab.size()) {
      throw DataError(path.string() + ": vocabulary size does not match the shape");
    }
    model.params = Params<S>::zeros(shape);
    const auto precision = j.at("precision").get<std::string>();
    if (precision == "float32") {
      read_tensors<float>(j, model.params);
    } else if (precision == "float64") {
      read_tensors<double>(j, model.params);
    } else {
      throw DataError(path.string() + ": unknown precision " + precision);
    }
    return model;
  } catch (const io::Json::exception& e) {
    throw DataError(path.string() + ": malformed checkpoint: " + e.what());
  } catch (const PreconditionError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

template LossReport batch_loss<float>(const Params<float>&, const std::vector<Example>&,
                                      Params<float>*, GradWorkspace<float>*, std::size_t);
template LossReport batch_loss<double>(const Params<double>&, const std::vector<Example>&,
                                       Params<double>*, GradWorkspace<double>*,
                                       std::size_t);
template class AdamW<float>;
template class AdamW<double>;
template std::vector<StepLog> train<float>(Params<float>&, const BatchSource&,
                                           const TrainConfig&,
                                           const std::function<void(const StepLog&)>&);
template std::vector<StepLog> train<double>(Params<double>&, const BatchSource&,
                                            const TrainConfig&,
                                            const std::function<void(const StepLog&)>&);
template std::string generate<float>(const Params<float>&, const Vocab&,
                                     const std::string&, const std::string&, std::size_t);
template std::string generate<double>(const Params<double>&, const Vocab&,
                                      const std::string&, const std::string&, std::size_t);
template void save_checkpoint<float>(const std::filesystem::path&, const Seq2Seq<float>&);
template void save_checkpoint<double>(const std::filesystem::path&, const Seq2Seq<double>&);
template Seq2Seq<float> load_checkpoint<float>(const std::filesystem::path&);
template Seq2Seq<double> load_checkpoint<double>(const std::filesystem::path&);

}  // namespace selfdesc::model
