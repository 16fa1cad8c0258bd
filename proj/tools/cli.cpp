#include "cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <sstream>

#include "selfdesc/codec.hpp"
#include "selfdesc/corpus.hpp"
#include "selfdesc/descriptions.hpp"
#include "selfdesc/evaluator.hpp"
#include "selfdesc/io.hpp"
#include "selfdesc/rng.hpp"
#include "selfdesc/sampler.hpp"
#include "selfdesc/text.hpp"
#include "selfdesc/train.hpp"

namespace selfdesc::cli {

namespace {

namespace fs = std::filesystem;
using io::Json;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Options of one subcommand that can also come from a config file.
class Settings {
 public:
  explicit Settings(CLI::App* app) : app_(app) {}

  template <class T>
  CLI::Option* add(const std::string& name, T& var, const std::string& help) {
    auto* opt = app_->add_option("--" + name, var, help);
    entries_.push_back(
        {name, opt, [&var, name](const Json& cfg) { var = cfg.at(name).template get<T>(); },
         [&var](Json& out, const std::string& key) { out[key] = var; }});
    return opt;
  }

  template <class T>
  CLI::Option* add_required(const std::string& name, T& var, const std::string& help) {
    required_.push_back(name);
    return add(name, var, help + " (required)");
  }

  bool given(const std::string& name) const {
    for (const auto& e : entries_) {
      if (e.name == name) return e.option->count() > 0;
    }
    return false;
  }

  // Flags win over the config file; the file wins over defaults.
  void resolve(const Json& cfg) {
    for (const auto& e : entries_) {
      if (e.option->count() > 0 || !cfg.contains(e.name)) continue;
      try {
        e.apply(cfg);
      } catch (const Json::exception& ex) {
        throw UsageError("config value for '" + e.name + "' has the wrong type: " + ex.what());
      }
    }
    for (const auto& [key, _] : cfg.items()) {
      bool known = false;
      for (const auto& e : entries_) known = known || e.name == key;
      if (!known) throw UsageError("unknown config key '" + key + "'");
    }
    for (const auto& name : required_) {
      if (!given(name) && !cfg.contains(name)) {
        throw UsageError("missing required option --" + name);
      }
    }
  }

  Json dump() const {
    Json out = Json::object();
    for (const auto& e : entries_) e.dump(out, e.name);
    return out;
  }

 private:
  struct Entry {
    std::string name;
    CLI::Option* option;
    std::function<void(const Json&)> apply;
    std::function<void(Json&, const std::string&)> dump;
  };
  CLI::App* app_;
  std::vector<Entry> entries_;
  std::vector<std::string> required_;
};

std::string hex64(std::uint64_t v) {
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << v;
  return s.str();
}

// Common options and the run manifest.
struct Common {
  std::string config;
  std::string manifest;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  Json inputs = Json::array();
  Json outputs = Json::array();
  std::function<void()> write_manifest;

  // Called once inputs are read, before any output is written.
  void manifest_ready() {
    if (write_manifest) write_manifest();
  }
};

class Command {
 public:
  virtual ~Command() = default;
  virtual std::string name() const = 0;
  virtual std::string help() const = 0;
  virtual void options(Settings& s) = 0;
  virtual void run(Common& c) = 0;
  // Where the manifest goes when --manifest is not given; empty for none.
  virtual std::string primary_output() const { return ""; }
};

void add_input(Common& c, const std::string& role, const std::string& path) {
  if (path.empty()) return;
  if (!fs::exists(path)) throw DataError("input file not found: " + path);
  c.inputs.push_back(
      Json{{"role", role}, {"path", path}, {"fnv1a64", hex64(fnv1a64(io::read_file(path)))}});
}

void add_output(Common& c, const std::string& role, const std::string& path) {
  if (!path.empty()) c.outputs.push_back(Json{{"role", role}, {"path", path}});
}

std::vector<TypeId> read_schema(const std::string& path) {
  try {
    const auto j = Json::parse(io::read_file(path));
    auto types = j.get<std::vector<std::string>>();
    if (types.empty()) throw DataError(path + ": empty schema");
    std::vector<TypeId> out;
    for (const auto& t : types) out.push_back(make_type_id(t));
    return out;
  } catch (const Json::exception& e) {
    throw DataError(path + ": a schema is a JSON array of type names: " + e.what());
  }
}

void emit(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
  } else {
    io::write_file(path, text);
  }
}

std::string jsonl(const std::vector<Json>& records) {
  std::ostringstream out;
  for (const auto& r : records) io::write_jsonl_line(out, r);
  return out.str();
}

descriptions::DescriptionMap load_descriptions(
    const std::string& path, const std::vector<AnnotatedSentence>& corpus) {
  return path.empty() ? descriptions::build_cooccurrence_descriptions(corpus)
                      : descriptions::read_descriptions(path);
}

descriptions::OtherCounting parse_counting(const std::string& s) {
  if (s == "per-description") return descriptions::OtherCounting::kPerDescription;
  if (s == "per-concept") return descriptions::OtherCounting::kPerConcept;
  throw UsageError("--counting must be per-description or per-concept");
}

// Sampler knobs shared by pretraining and data generation.
struct SamplerOptions {
  double md_fraction = 1.0;
  std::size_t max_positive = 5;
  std::size_t max_negative = 3;
  std::size_t max_concepts = 10;

  void add(Settings& s) {
    s.add("md-fraction", md_fraction, "Fraction of surfaces in an MD prompt");
    s.add("max-positive", max_positive, "Most present types in an EG prompt");
    s.add("max-negative", max_negative, "Most absent types in an EG prompt");
    s.add("max-concepts", max_concepts, "Most concepts per type description");
  }
  sampler::SamplerConfig config(std::uint64_t seed) const {
    sampler::SamplerConfig c;
    c.rng_seed = derive_seed(seed, "sampler");
    c.md_target_fraction = md_fraction;
    c.max_positive_types = max_positive;
    c.max_negative_types = max_negative;
    c.max_concepts = max_concepts;
    c.validate();
    return c;
  }
};

void write_log(const std::string& path, const std::vector<model::StepLog>& log) {
  if (path.empty()) return;
  std::vector<Json> records;
  for (const auto& l : log) {
    records.push_back(Json{{"step", l.step},
                           {"lr", l.lr},
                           {"total", l.loss.total},
                           {"md", l.loss.md_term},
                           {"eg", l.loss.eg_term}});
  }
  io::write_file(path, jsonl(records));
}

std::function<void(const model::StepLog&)> progress(std::size_t total) {
  const std::size_t every = std::max<std::size_t>(1, total / 20);
  return [every, total](const model::StepLog& l) {
    if ((l.step + 1) % every == 0 || l.step + 1 == total) {
      std::cerr << "step " << l.step + 1 << "/" << total << " loss " << l.loss.total << "\n";
    }
  };
}

class BuildCorpus : public Command {
 public:
  std::string name() const override { return "build-corpus"; }
  std::string help() const override { return "Harvest typed sentences from KB and page dumps"; }
  void options(Settings& s) override {
    s.add_required("kb", kb_, "Knowledge-base JSONL dump");
    s.add_required("pages", pages_, "Page JSONL dump");
    s.add_required("out", out_, "Corpus JSONL output");
    s.add("dictionary-out", dict_out_, "Type dictionary JSONL output");
    s.add("min-type-instances", cfg_.min_type_instances, "Minimum instances per type");
    s.add("max-type-tokens", cfg_.max_type_tokens, "Longest type name in tokens");
    s.add("top-np", cfg_.top_np_count, "Self-mention phrases per page");
  }
  std::string primary_output() const override { return out_; }
  void run(Common& c) override {
    add_input(c, "kb", kb_);
    add_input(c, "pages", pages_);
    add_output(c, "corpus", out_);
    add_output(c, "dictionary", dict_out_);
    cfg_.jobs = c.jobs;
    cfg_.validate();
    corpus::BuildDiagnostics diag;
    corpus::KnowledgeBase kb(corpus::read_kb(kb_, diag));
    const auto pages = corpus::read_pages(pages_, diag);
    c.manifest_ready();
    auto build = corpus::build_corpus(kb, pages, cfg_);
    build.diagnostics += diag;
    io::write_corpus(fs::path(out_), build.sentences);
    if (!dict_out_.empty()) corpus::write_dictionary(dict_out_, build.dictionary);
    std::cerr << build.sentences.size() << " sentences, " << build.dictionary.types().size()
              << " types\n"
              << build.diagnostics.to_json().dump() << "\n";
  }

 private:
  std::string kb_, pages_, out_, dict_out_;
  corpus::BuildConfig cfg_;
};

class BuildDescriptions : public Command {
 public:
  std::string name() const override { return "build-descriptions"; }
  std::string help() const override { return "Build concept descriptions for types"; }
  void options(Settings& s) override {
    s.add_required("corpus", corpus_, "Annotated corpus JSONL");
    s.add_required("out", out_, "Descriptions JSONL output");
    s.add("mode", mode_, "cooccurrence (from gold types) or model (MD generation)")
        ->check(CLI::IsMember({"cooccurrence", "model"}));
    s.add("model", model_, "Checkpoint for model mode");
    s.add("max-concepts", max_concepts_, "Most concepts kept per type");
    s.add("other-threshold", threshold_, "Filter types whose other-frequency exceeds this");
    s.add("counting", counting_, "per-description or per-concept");
    s.add("report", report_, "Filtering report JSONL output");
  }
  std::string primary_output() const override { return out_; }
  void run(Common& c) override {
    if (mode_ == "model" && model_.empty()) throw UsageError("--mode model requires --model");
    add_input(c, "corpus", corpus_);
    add_input(c, "model", model_);
    add_output(c, "descriptions", out_);
    add_output(c, "report", report_);
    descriptions::DescriptionConfig cfg;
    cfg.max_concepts = max_concepts_;
    cfg.other_threshold = threshold_;
    cfg.counting = parse_counting(counting_);
    cfg.rng_seed = derive_seed(c.seed, "descriptions");
    cfg.validate();
    const auto corpus = io::read_corpus(corpus_);
    if (mode_ == "cooccurrence") {
      c.manifest_ready();
      const auto full = descriptions::build_cooccurrence_descriptions(corpus);
      descriptions::DescriptionMap capped;
      for (const auto& e : full.entries()) {
        capped.put({e.type, descriptions::sample_concepts(e.concepts, cfg, fnv1a64(e.type)),
                    e.filtered});
      }
      descriptions::write_descriptions(out_, capped);
      return;
    }
    const auto m = model::load_checkpoint<float>(model_);
    c.manifest_ready();
    const auto per_type = descriptions::collect_mention_descriptions(
        corpus, eval::md_describer([&](const std::string& p, const std::string& x) {
          return model::generate(m.params, m.vocab, p, x);
        }));
    const auto result = descriptions::apply_filtering(per_type, cfg);
    descriptions::write_descriptions(out_, result.map);
    std::vector<Json> report;
    for (const auto& r : result.report) {
      report.push_back(
          Json{{"type", r.type}, {"other_frequency", r.other_frequency}, {"filtered", r.filtered}});
    }
    if (!report_.empty()) io::write_file(report_, jsonl(report));
  }

 private:
  std::string corpus_, out_, mode_ = "cooccurrence", model_, counting_ = "per-description",
                             report_;
  std::size_t max_concepts_ = 10;
  double threshold_ = 0.5;
};

class MakePretrainData : public Command {
 public:
  std::string name() const override { return "make-pretrain-data"; }
  std::string help() const override { return "Write MD and EG pretraining instances"; }
  void options(Settings& s) override {
    s.add_required("corpus", corpus_, "Annotated corpus JSONL");
    s.add("dictionary", dictionary_, "Type dictionary JSONL (default: counted from the corpus)");
    s.add("descriptions", descriptions_, "Descriptions JSONL (default: co-occurrence)");
    s.add_required("out", out_, "Instances JSONL output");
    s.add("epoch", epoch_, "Draw key of this pass over the corpus");
    sampler_.add(s);
  }
  std::string primary_output() const override { return out_; }
  void run(Common& c) override {
    add_input(c, "corpus", corpus_);
    add_input(c, "dictionary", dictionary_);
    add_input(c, "descriptions", descriptions_);
    add_output(c, "instances", out_);
    const auto sc = sampler_.config(c.seed);
    const auto corpus = io::read_corpus(corpus_);
    const auto dict =
        dictionary_.empty() ? corpus::count_types(corpus) : corpus::read_dictionary(dictionary_);
    const auto desc = load_descriptions(descriptions_, corpus);
    c.manifest_ready();
    sampler::write_instances(out_, sampler::make_pretrain_instances(corpus, dict, desc, sc, epoch_));
  }

 private:
  std::string corpus_, dictionary_, descriptions_, out_;
  std::uint64_t epoch_ = 0;
  SamplerOptions sampler_;
};

class MakeFinetuneData : public Command {
 public:
  std::string name() const override { return "make-finetune-data"; }
  std::string help() const override { return "Write EG fine-tuning instances for a schema"; }
  void options(Settings& s) override {
    s.add_required("corpus", corpus_, "Annotated corpus JSONL");
    s.add_required("schema", schema_, "JSON array of schema types");
    s.add("descriptions", descriptions_, "Descriptions JSONL (default: bare type names)");
    s.add_required("out", out_, "Instances JSONL output");
    s.add("max-concepts", max_concepts_, "Most concepts per type in the prompt");
  }
  std::string primary_output() const override { return out_; }
  void run(Common& c) override {
    add_input(c, "corpus", corpus_);
    add_input(c, "schema", schema_);
    add_input(c, "descriptions", descriptions_);
    add_output(c, "instances", out_);
    const auto corpus = io::read_corpus(corpus_);
    const auto schema = read_schema(schema_);
    const auto desc = descriptions_.empty() ? descriptions::DescriptionMap{}
                                            : descriptions::read_descriptions(descriptions_);
    c.manifest_ready();
    const auto prompt =
        sampler::schema_prompt(schema, desc, max_concepts_, derive_seed(c.seed, "sampler"));
    std::vector<sampler::TrainingInstance> out;
    for (const auto& s : corpus) out.push_back(sampler::make_finetune_instance(s, prompt));
    sampler::write_instances(out_, out);
  }

 private:
  std::string corpus_, schema_, descriptions_, out_;
  std::size_t max_concepts_ = 10;
};

class SampleKshot : public Command {
 public:
  std::string name() const override { return "sample-kshot"; }
  std::string help() const override { return "Sample a k-shot support set"; }
  void options(Settings& s) override {
    s.add_required("corpus", corpus_, "Annotated corpus JSONL");
    s.add_required("schema", schema_, "JSON array of schema types");
    s.add("k", k_, "Sentences per type");
    s.add_required("out", out_, "Support corpus JSONL output");
  }
  std::string primary_output() const override { return out_; }
  void run(Common& c) override {
    add_input(c, "corpus", corpus_);
    add_input(c, "schema", schema_);
    add_output(c, "support", out_);
    if (k_ < 1) throw UsageError("--k must be at least 1");
    const auto corpus = io::read_corpus(corpus_);
    const auto schema = read_schema(schema_);
    c.manifest_ready();
    const auto r = sampler::sample_kshot(corpus, k_, schema, c.seed);
    io::write_corpus(fs::path(out_), r.support);
    for (const auto& t : r.unsatisfiable) {
      std::cerr << "warning: type '" << t << "' has fewer than " << k_ << " sentences\n";
    }
  }

 private:
  std::string corpus_, schema_, out_;
  std::size_t k_ = 5;
};

class Pretrain : public Command {
 public:
  std::string name() const override { return "pretrain"; }
  std::string help() const override { return "Pretrain a model on MD and EG"; }
  void options(Settings& s) override {
    s.add_required("corpus", corpus_, "Annotated corpus JSONL");
    s.add("dictionary", dictionary_, "Type dictionary JSONL (default: counted from the corpus)");
    s.add("descriptions", descriptions_, "Descriptions JSONL (default: co-occurrence)");
    s.add("vocab-extra", extra_, "Further corpora whose tokens join the vocabulary");
    s.add_required("out", out_, "Checkpoint output");
    s.add("log", log_, "Per-step loss log JSONL");
    s.add("steps", cfg_.steps, "Optimizer steps");
    s.add("batch", cfg_.batch, "Sentences per step");
    s.add("lr", cfg_.lr, "Learning rate");
    s.add("d", shape_.d, "Model width");
    s.add("layers", shape_.layers, "Encoder and decoder layers");
    s.add("heads", shape_.heads, "Attention heads");
    s.add("ffn", shape_.ffn, "Feed-forward width");
    s.add("max-src", shape_.max_src, "Longest encoder input");
    s.add("max-tgt", shape_.max_tgt, "Longest target");
    sampler_.add(s);
  }
  std::string primary_output() const override { return out_; }
  void run(Common& c) override {
    add_input(c, "corpus", corpus_);
    add_input(c, "dictionary", dictionary_);
    add_input(c, "descriptions", descriptions_);
    for (const auto& e : extra_) add_input(c, "vocab-extra", e);
    add_output(c, "checkpoint", out_);
    add_output(c, "log", log_);
    const auto sc = sampler_.config(c.seed);
    const auto corpus = io::read_corpus(corpus_);
    const auto dict =
        dictionary_.empty() ? corpus::count_types(corpus) : corpus::read_dictionary(dictionary_);
    const auto desc = load_descriptions(descriptions_, corpus);
    auto texts = model::vocabulary_texts(corpus, dict, desc);
    for (const auto& e : extra_) {
      const auto more = io::read_corpus(e);
      const auto t = model::vocabulary_texts(more, corpus::count_types(more), {});
      texts.insert(texts.end(), t.begin(), t.end());
    }
    cfg_.schedule = model::Schedule::kConstant;
    cfg_.seed = derive_seed(c.seed, "model");
    cfg_.jobs = c.jobs;
    cfg_.validate();
    model::Seq2Seq<float> m;
    m.vocab = model::Vocab::build(texts);
    shape_.vocab = static_cast<int>(m.vocab.size());
    shape_.validate();
    c.manifest_ready();
    m.params = model::Params<float>::init(shape_, derive_seed(c.seed, "model"));
    const auto source = model::pretrain_source(corpus, dict, desc, sc, m.vocab, cfg_);
    const auto log = model::train(m.params, source, cfg_, progress(source.total_steps));
    model::save_checkpoint(out_, m);
    write_log(log_, log);
  }

 private:
  std::string corpus_, dictionary_, descriptions_, out_, log_;
  std::vector<std::string> extra_;
  model::TrainConfig cfg_ = model::TrainConfig::pretrain_defaults();
  model::ModelShape shape_;
  SamplerOptions sampler_;
};

struct FinetuneOptions {
  model::TrainConfig cfg = model::TrainConfig::finetune_defaults();

  void add(Settings& s) {
    s.add("epochs", cfg.epochs, "Passes over the instances");
    s.add("batch", cfg.batch, "Instances per step");
    s.add("lr", cfg.lr, "Peak learning rate");
    s.add("warmup", cfg.warmup_fraction, "Warmup fraction of all steps");
  }
  model::TrainConfig config(const Common& c) const {
    auto out = cfg;
    out.seed = derive_seed(c.seed, "model");
    out.jobs = c.jobs;
    out.validate();
    return out;
  }
};

class Finetune : public Command {
 public:
  std::string name() const override { return "finetune"; }
  std::string help() const override { return "Fine-tune a checkpoint on EG instances"; }
  void options(Settings& s) override {
    s.add_required("model", model_, "Checkpoint to start from");
    s.add_required("data", data_, "Training instances JSONL");
    s.add_required("out", out_, "Checkpoint output");
    s.add("log", log_, "Per-step loss log JSONL");
    opts_.add(s);
  }
  std::string primary_output() const override { return out_; }
  void run(Common& c) override {
    add_input(c, "model", model_);
    add_input(c, "data", data_);
    add_output(c, "checkpoint", out_);
    add_output(c, "log", log_);
    const auto cfg = opts_.config(c);
    auto m = model::load_checkpoint<float>(model_);
    const auto instances = sampler::read_instances(data_);
    c.manifest_ready();
    const auto source = model::finetune_source(instances, m.vocab, cfg);
    const auto log = model::train(m.params, source, cfg, progress(source.total_steps));
    model::save_checkpoint(out_, m);
    write_log(log_, log);
  }

 private:
  std::string model_, data_, out_, log_;
  FinetuneOptions opts_;
};

class Predict : public Command {
 public:
  std::string name() const override { return "predict"; }
  std::string help() const override { return "Generate, parse and locate entities"; }
  void options(Settings& s) override {
    s.add_required("model", model_, "Checkpoint");
    s.add("input", input_, "JSONL of {\"id\", \"text\"} records");
    s.add("text", text_, "A single sentence instead of --input");
    s.add("prompt-file", prompt_file_, "File holding the EG prompt text");
    s.add("schema", schema_, "JSON array of types (prompt built from descriptions)");
    s.add("descriptions", descriptions_, "Descriptions JSONL for --schema");
    s.add("max-concepts", max_concepts_, "Most concepts per type in the prompt");
    s.add("max-len", max_len_, "Longest generation in tokens");
    s.add("out", out_, "Predictions JSONL output (default: stdout)");
  }
  std::string primary_output() const override { return out_; }
  void run(Common& c) override {
    if (input_.empty() == text_.empty()) throw UsageError("give exactly one of --input and --text");
    if (prompt_file_.empty() == schema_.empty()) {
      throw UsageError("give exactly one of --prompt-file and --schema");
    }
    add_input(c, "model", model_);
    add_input(c, "input", input_);
    add_input(c, "prompt", prompt_file_);
    add_input(c, "schema", schema_);
    add_input(c, "descriptions", descriptions_);
    add_output(c, "predictions", out_);
    std::string prompt;
    if (!prompt_file_.empty()) {
      prompt = codec::serialize_prompt_eg(
          codec::parse_prompt_eg(std::string(text::trim(io::read_file(prompt_file_)))));
    } else {
      const auto desc = descriptions_.empty() ? descriptions::DescriptionMap{}
                                              : descriptions::read_descriptions(descriptions_);
      prompt = codec::serialize_prompt_eg(sampler::schema_prompt(
          read_schema(schema_), desc, max_concepts_, derive_seed(c.seed, "sampler")));
    }
    std::vector<Sentence> sentences;
    if (!text_.empty()) {
      sentences.push_back({"text", text_});
    } else {
      io::for_each_jsonl(input_, [&](const Json& j) {
        try {
          sentences.push_back({j.at("id").get<std::string>(), j.at("text").get<std::string>()});
        } catch (const Json::exception& e) {
          throw DataError(input_ + ": records need string \"id\" and \"text\": " + e.what());
        }
      });
    }
    const auto m = model::load_checkpoint<float>(model_);
    c.manifest_ready();
    std::vector<Json> records;
    for (const auto& s : sentences) {
      const auto generated = model::generate(m.params, m.vocab, prompt, s.text, max_len_);
      records.push_back(eval::to_json(eval::interpret(s, generated)));
    }
    emit(out_, jsonl(records));
  }

 private:
  std::string model_, input_, text_, prompt_file_, schema_, descriptions_, out_;
  std::size_t max_concepts_ = 10;
  std::size_t max_len_ = 128;
};

class Evaluate : public Command {
 public:
  std::string name() const override { return "evaluate"; }
  std::string help() const override { return "Score predictions against a gold corpus"; }
  void options(Settings& s) override {
    s.add_required("gold", gold_, "Annotated gold corpus JSONL");
    s.add_required("pred", pred_, "Predictions JSONL");
    s.add("schema", schema_, "Restrict gold spans to these types");
    s.add("out", out_, "Report JSON output (default: stdout)");
  }
  std::string primary_output() const override { return out_; }
  void run(Common& c) override {
    add_input(c, "gold", gold_);
    add_input(c, "pred", pred_);
    add_input(c, "schema", schema_);
    add_output(c, "report", out_);
    const auto gold = io::read_corpus(gold_);
    const auto pred = eval::read_predictions(pred_);
    const auto schema = schema_.empty() ? std::vector<TypeId>{} : read_schema(schema_);
    c.manifest_ready();
    const auto report = eval::score(eval::gold_spans(gold, schema), eval::predicted_spans(pred));
    emit(out_, eval::to_json(report).dump(2) + "\n");
  }

 private:
  std::string gold_, pred_, schema_, out_;
};

class RunEpisodes : public Command {
 public:
  std::string name() const override { return "run-episodes"; }
  std::string help() const override { return "k-shot fine-tune, predict and score, repeated"; }
  void options(Settings& s) override {
    s.add_required("train", train_, "Corpus to sample support sets from");
    s.add("test", test_, "Corpus to evaluate on (default: --train)");
    s.add_required("schema", schema_, "JSON array of schema types");
    s.add("model", model_, "Pretrained checkpoint");
    s.add("baseline", baseline_, "Use a built-in model instead of --model: gold")
        ->check(CLI::IsMember({"gold"}));
    s.add("k", cfg_.k, "Sentences per type in each support set");
    s.add("runs", cfg_.runs, "Episodes");
    s.add("other-threshold", cfg_.descriptions.other_threshold,
          "Filter types whose other-frequency exceeds this");
    s.add("max-concepts", cfg_.max_concepts, "Most concepts per type in the prompt");
    s.add("predictions", predictions_, "Predictions JSONL of the first episode");
    s.add("out", out_, "Report JSON output (default: stdout)");
    finetune_.add(s);
  }
  std::string primary_output() const override { return out_; }
  void run(Common& c) override {
    if (model_.empty() == baseline_.empty()) {
      throw UsageError("give exactly one of --model and --baseline");
    }
    add_input(c, "train", train_);
    add_input(c, "test", test_);
    add_input(c, "schema", schema_);
    add_input(c, "model", model_);
    add_output(c, "report", out_);
    add_output(c, "predictions", predictions_);
    cfg_.seed = c.seed;
    cfg_.validate();
    const auto ft = finetune_.config(c);
    const auto train = io::read_corpus(train_);
    const auto test = test_.empty() ? train : io::read_corpus(test_);
    const auto schema = read_schema(schema_);
    std::unique_ptr<eval::EpisodeModel> m;
    if (!model_.empty()) {
      m = std::make_unique<eval::Seq2SeqEpisodeModel>(model::load_checkpoint<float>(model_), ft);
    } else {
      m = std::make_unique<eval::GoldEpisodeModel>(test);
    }
    c.manifest_ready();
    const auto report = eval::run_episodes(train, test, schema, *m, cfg_);
    if (!predictions_.empty() && !report.runs.empty()) {
      std::vector<eval::Prediction> preds;
      eval::run_episode(train, test, schema, *m, cfg_, report.runs.front().seed, &preds);
      eval::write_predictions(predictions_, preds);
    }
    for (const auto& f : report.failures) {
      std::cerr << "episode with seed " << f.seed << " failed: " << f.message << "\n";
    }
    std::cerr << std::fixed << std::setprecision(4) << "f1 " << report.f1_mean << " +- "
              << report.f1_sd << " over " << report.runs.size() << " runs\n";
    emit(out_, eval::to_json(report).dump(2) + "\n");
    if (report.runs.empty()) throw DataError("every episode failed");
  }

 private:
  std::string train_, test_, schema_, model_, baseline_, predictions_, out_;
  eval::EpisodeConfig cfg_;
  FinetuneOptions finetune_;
};

int exit_code(const std::exception& e, int code) {
  std::cerr << "error: " << e.what() << "\n";
  return code;
}

Json read_config(const std::string& path, const std::string& subcommand) {
  Json j;
  try {
    j = Json::parse(io::read_file(path));
  } catch (const Json::exception& e) {
    throw UsageError(path + ": config is not valid JSON: " + e.what());
  }
  if (!j.is_object()) throw UsageError(path + ": config must be a JSON object");
  // Top-level keys apply to every subcommand; a section named after the
  // subcommand overrides them.
  Json out = Json::object();
  for (const auto& [key, value] : j.items()) {
    if (!value.is_object()) out[key] = value;
  }
  if (j.contains(subcommand) && j.at(subcommand).is_object()) {
    for (const auto& [key, value] : j.at(subcommand).items()) out[key] = value;
  }
  return out;
}

std::uint64_t env_seed() {
  const char* raw = std::getenv("SDNET_SEED");
  if (raw == nullptr || *raw == '\0') return 0;
  try {
    std::size_t used = 0;
    const auto v = std::stoull(raw, &used);
    if (used != std::string(raw).size()) throw std::invalid_argument(raw);
    return v;
  } catch (const std::exception&) {
    throw UsageError(std::string("SDNET_SEED is not an unsigned integer: ") + raw);
  }
}

}  // namespace

int dispatch(int argc, char** argv) {
  CLI::App app{"Self-describing entity generation toolkit"};
  app.set_version_flag("--version", SELFDESC_VERSION);
  app.require_subcommand(1);

  std::vector<std::unique_ptr<Command>> commands;
  commands.push_back(std::make_unique<BuildCorpus>());
  commands.push_back(std::make_unique<BuildDescriptions>());
  commands.push_back(std::make_unique<MakePretrainData>());
  commands.push_back(std::make_unique<MakeFinetuneData>());
  commands.push_back(std::make_unique<SampleKshot>());
  commands.push_back(std::make_unique<Pretrain>());
  commands.push_back(std::make_unique<Finetune>());
  commands.push_back(std::make_unique<Predict>());
  commands.push_back(std::make_unique<Evaluate>());
  commands.push_back(std::make_unique<RunEpisodes>());

  std::vector<Common> commons(commands.size());
  std::vector<std::unique_ptr<Settings>> settings;
  std::vector<CLI::App*> subs;
  for (std::size_t i = 0; i < commands.size(); ++i) {
    auto* sub = app.add_subcommand(commands[i]->name(), commands[i]->help());
    subs.push_back(sub);
    settings.push_back(std::make_unique<Settings>(sub));
    auto& s = *settings.back();
    auto& c = commons[i];
    sub->add_option("--config", c.config, "JSON config; flags override it")
        ->check(CLI::ExistingFile);
    sub->add_option("--manifest", c.manifest, "Run manifest output");
    s.add("seed", c.seed, "Root seed (default: $SDNET_SEED, else 0)");
    s.add("jobs", c.jobs, "Worker threads");
    commands[i]->options(s);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  }

  std::size_t chosen = 0;
  while (chosen < subs.size() && !subs[chosen]->parsed()) ++chosen;
  auto& command = *commands[chosen];
  auto& common = commons[chosen];
  auto& s = *settings[chosen];
  try {
    const Json cfg = common.config.empty() ? Json::object()
                                           : read_config(common.config, command.name());
    s.resolve(cfg);
    if (!s.given("seed") && !cfg.contains("seed")) common.seed = env_seed();
    if (common.jobs < 1) throw UsageError("--jobs must be at least 1");
    std::string manifest = common.manifest;
    if (manifest.empty() && !command.primary_output().empty()) {
      manifest = command.primary_output() + ".manifest.json";
    }
    common.write_manifest = [&, manifest] {
      if (manifest.empty()) return;
      Json m{{"subcommand", command.name()},
             {"tool_version", SELFDESC_VERSION},
             {"seed", common.seed},
             {"config", s.dump()},
             {"inputs", common.inputs},
             {"outputs", common.outputs}};
      io::write_file(manifest, m.dump(2) + "\n");
    };
    command.run(common);
    return 0;
  } catch (const UsageError& e) {
    return exit_code(e, 1);
  } catch (const PreconditionError& e) {
    return exit_code(e, 1);
  } catch (const std::exception& e) {
    return exit_code(e, 2);
  }
}

}  // namespace selfdesc::cli
