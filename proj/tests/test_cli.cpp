#include <sys/wait.h>

#include <cstdlib>
#include <doctest.h>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <string>

#include "selfdesc/codec.hpp"
#include "selfdesc/io.hpp"
#include "selfdesc/train.hpp"
#include "support/paths.hpp"

using namespace selfdesc;
using Json = nlohmann::json;

namespace {

struct Run {
  int status = -1;
  std::string out;
  std::string err;
};

std::string quote(const std::string& s) {
  std::string q = "'";
  for (char c : s) {
    if (c == '\'') {
      q += "'\\''";
    } else {
      q += c;
    }
  }
  return q + "'";
}

// Runs the tool with `args`; `env` is a prefix such as "SDNET_SEED=3".
Run run(const std::vector<std::string>& args, const std::string& env = "") {
  static const auto dir = testing::scratch_dir("cli-capture");
  std::string cmd = env.empty() ? "" : env + " ";
  cmd += quote(SELFDESC_CLI);
  for (const auto& a : args) cmd += " " + quote(a);
  cmd += " >" + quote((dir / "out").string()) + " 2>" + quote((dir / "err").string());
  Run r;
  const int raw = std::system(cmd.c_str());
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  r.out = io::read_file(dir / "out");
  r.err = io::read_file(dir / "err");
  return r;
}

std::string data(const std::string& rel) { return testing::data_path(rel).string(); }

Json read_json(const std::filesystem::path& p) { return Json::parse(io::read_file(p)); }

}  // namespace

TEST_CASE("help and version exit cleanly") {
  CHECK(run({"--help"}).status == 0);
  const auto v = run({"--version"});
  CHECK(v.status == 0);
  CHECK(v.out.find('.') != std::string::npos);
  CHECK(run({"predict", "--help"}).status == 0);
}

TEST_CASE("usage errors exit 1 and name the problem") {
  const auto unknown = run({"sample-kshot", "--corpus", data("fixtures/small_corpus.jsonl"),
                            "--no-such-flag", "1"});
  CHECK(unknown.status == 1);
  CHECK(unknown.err.find("--no-such-flag") != std::string::npos);

  const auto missing = run({"sample-kshot", "--corpus", data("fixtures/small_corpus.jsonl"),
                            "--schema", data("synthetic/schema.json")});
  CHECK(missing.status == 1);
  CHECK(missing.err.find("--out") != std::string::npos);

  CHECK(run({"no-such-command"}).status == 1);
  CHECK(run({}).status == 1);
}

TEST_CASE("data faults exit 2") {
  const auto dir = testing::scratch_dir("cli-data");
  const auto r = run({"build-corpus", "--kb", (dir / "missing.jsonl").string(), "--pages",
                      data("fixtures/pages.jsonl"), "--out", (dir / "c.jsonl").string()});
  CHECK(r.status == 2);
  CHECK(r.err.find("missing.jsonl") != std::string::npos);

  io::write_file(dir / "bad.jsonl", "{\"id\": 3}\n");
  const auto bad = run({"sample-kshot", "--corpus", (dir / "bad.jsonl").string(), "--schema",
                        data("synthetic/schema.json"), "--out", (dir / "s.jsonl").string()});
  CHECK(bad.status == 2);
}

TEST_CASE("build-corpus reproduces the golden corpus for any job count") {
  const auto dir = testing::scratch_dir("cli-corpus");
  const auto golden = io::read_file(data("fixtures/golden_corpus.jsonl"));
  std::string first_manifest;
  for (const char* jobs : {"1", "3", "1"}) {
    INFO("jobs " << jobs);
    const auto out = dir / (std::string("c") + jobs + ".jsonl");
    const auto r = run({"build-corpus", "--kb", data("fixtures/kb.jsonl"), "--pages",
                        data("fixtures/pages.jsonl"), "--out", out.string(), "--jobs", jobs});
    REQUIRE(r.status == 0);
    CHECK(io::read_file(out) == golden);
    const auto manifest = out.string() + ".manifest.json";
    REQUIRE(std::filesystem::exists(manifest));
    const auto m = read_json(manifest);
    CHECK(m.at("subcommand") == "build-corpus");
    CHECK(m.at("inputs").size() >= 2);
    if (std::string(jobs) == "1") {
      if (first_manifest.empty()) {
        first_manifest = io::read_file(manifest);
      } else {
        CHECK(io::read_file(manifest) == first_manifest);
      }
    }
  }
}

TEST_CASE("flags beat the config file, which beats the environment seed") {
  const auto dir = testing::scratch_dir("cli-config");
  io::write_file(dir / "cfg.json", R"({"seed": 5, "sample-kshot": {"k": 2}})");
  const auto base = std::vector<std::string>{
      "sample-kshot", "--corpus", data("fixtures/small_corpus.jsonl"), "--schema",
      data("synthetic/schema.json")};

  auto with = [&](std::vector<std::string> extra, const std::string& name,
                  const std::string& env = "") {
    auto args = base;
    args.insert(args.end(), extra.begin(), extra.end());
    args.push_back("--out");
    args.push_back((dir / name).string());
    REQUIRE(run(args, env).status == 0);
    return read_json((dir / name).string() + ".manifest.json");
  };

  const auto from_config = with({"--config", (dir / "cfg.json").string()}, "a.jsonl");
  CHECK(from_config.at("seed") == 5);
  CHECK(from_config.at("config").at("k") == 2);

  const auto flag = with({"--config", (dir / "cfg.json").string(), "--k", "1", "--seed", "8"},
                         "b.jsonl", "SDNET_SEED=11");
  CHECK(flag.at("seed") == 8);
  CHECK(flag.at("config").at("k") == 1);

  const auto env = with({}, "c.jsonl", "SDNET_SEED=11");
  CHECK(env.at("seed") == 11);
  CHECK(with({}, "d.jsonl").at("seed") == 0);

  // Different seeds draw different supports; the same seed draws the same.
  with({"--seed", "11"}, "e.jsonl");
  CHECK(io::read_file(dir / "e.jsonl") == io::read_file(dir / "c.jsonl"));

  io::write_file(dir / "typo.json", R"({"sample-kshot": {"kk": 2}})");
  auto args = base;
  for (const auto& a : {"--config", "", "--out", ""}) args.push_back(a);
  args[args.size() - 3] = (dir / "typo.json").string();
  args.back() = (dir / "f.jsonl").string();
  const auto typo = run(args);
  CHECK(typo.status == 1);
  CHECK(typo.err.find("kk") != std::string::npos);
}

TEST_CASE("predict follows the prompt on a memorized sentence") {
  const auto dir = testing::scratch_dir("cli-predict");
  const std::string sentence = "Chris Hill was in China a few days ago.";
  const std::string prompt_a = "[EG] GPE: {country, city}; date";
  const std::string prompt_b = "[EG] person: {human}";
  const std::string target_a = "China is GPE; a few days ago is date.";
  const std::string target_b = "Chris Hill is person.";
  CHECK(codec::serialize_prompt_eg(codec::parse_prompt_eg(prompt_a)) == prompt_a);

  const std::vector<sampler::TrainingInstance> instances = {
      {Task::EntityGeneration, prompt_a, sentence, target_a},
      {Task::EntityGeneration, prompt_b, sentence, target_b},
  };
  model::Seq2Seq<float> m;
  m.vocab = model::Vocab::build({prompt_a, prompt_b, sentence, target_a, target_b});
  model::ModelShape shape;
  shape.vocab = static_cast<int>(m.vocab.size());
  shape.d = 16;
  shape.layers = 1;
  shape.heads = 2;
  shape.ffn = 32;
  shape.max_src = 48;
  shape.max_tgt = 24;
  m.params = model::Params<float>::init(shape, 3);
  auto cfg = model::TrainConfig::finetune_defaults();
  cfg.lr = 1e-2;
  cfg.batch = 2;
  cfg.epochs = 300;
  model::train(m.params, model::finetune_source(instances, m.vocab, cfg), cfg);
  REQUIRE(model::generate(m.params, m.vocab, prompt_a, sentence) == target_a);
  REQUIRE(model::generate(m.params, m.vocab, prompt_b, sentence) == target_b);
  model::save_checkpoint(dir / "m.json", m);

  io::write_file(dir / "a.txt", prompt_a + "\n");
  io::write_file(dir / "b.txt", prompt_b + "\n");
  const auto a = run({"predict", "--model", (dir / "m.json").string(), "--text", sentence,
                      "--prompt-file", (dir / "a.txt").string()});
  REQUIRE(a.status == 0);
  const auto pa = Json::parse(a.out);
  REQUIRE(pa.at("spans").size() == 2);
  CHECK(pa["spans"][0]["surface"] == "China");
  CHECK(pa["spans"][0]["type"] == "GPE");
  CHECK(pa["spans"][0]["start"] == 18);
  CHECK(pa["spans"][0]["end"] == 23);
  CHECK(pa["spans"][1]["surface"] == "a few days ago");
  CHECK(pa["spans"][1]["type"] == "date");
  CHECK(pa["spans"][1]["start"] == 24);
  CHECK(pa["spans"][1]["end"] == 38);

  const auto b = run({"predict", "--model", (dir / "m.json").string(), "--text", sentence,
                      "--prompt-file", (dir / "b.txt").string()});
  REQUIRE(b.status == 0);
  const auto pb = Json::parse(b.out);
  REQUIRE(pb.at("spans").size() == 1);
  CHECK(pb["spans"][0]["surface"] == "Chris Hill");
  CHECK(pb["spans"][0]["start"] == 0);
  CHECK(pb["spans"][0]["end"] == 10);

  const auto both = run({"predict", "--model", (dir / "m.json").string(), "--text", sentence});
  CHECK(both.status == 1);
}

TEST_CASE("run-episodes writes a reproducible report") {
  const auto dir = testing::scratch_dir("cli-episodes");
  auto episode = [&](const std::string& name) {
    const auto r = run({"run-episodes", "--train", data("fixtures/small_corpus.jsonl"), "--test",
                        data("fixtures/small_corpus.jsonl"), "--schema",
                        data("synthetic/schema.json"), "--baseline", "gold", "--k", "1",
                        "--runs", "2", "--seed", "4", "--out", (dir / name).string()});
    REQUIRE(r.status == 0);
    return io::read_file(dir / name);
  };
  const auto first = episode("a.json");
  CHECK(first == episode("b.json"));
  const auto report = Json::parse(first);
  REQUIRE(report.at("runs").size() == 2);
  CHECK(report.at("runs")[0].at("seed") == 4);
  CHECK(report.at("runs")[1].at("seed") == 5);
  CHECK(report.at("f1_mean") == 1.0);
  CHECK(report.at("f1_sd") == 0.0);
  CHECK(std::filesystem::exists(dir / "a.json.manifest.json"));
}
