#include "negsamp/config.hpp"

#include <catch2/catch_amalgamated.hpp>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "negsamp/report.hpp"
#include "negsamp/sweep.hpp"
#include "negsamp/train.hpp"

using namespace negsamp;

TEST_CASE("kv config parses keys, comments and blank lines") {
  auto cfg = KVConfig::parse_string(
      "# comment\n"
      "optimizer.lr = 0.5\n"
      "\n"
      "name = within_batch  # trailing comment\n"
      "flag = true\n");
  CHECK(cfg.get_double("optimizer.lr", 0.0) == 0.5);
  CHECK(cfg.get("name") == "within_batch");
  CHECK(cfg.get_bool("flag", false));
  CHECK(cfg.get_or("missing", "fallback") == "fallback");
}

TEST_CASE("kv config rejects malformed input") {
  CHECK_THROWS(KVConfig::parse_string("just a line without equals\n"));
  CHECK_THROWS(KVConfig::parse_string("= value\n"));
  auto cfg = KVConfig::parse_string("x = abc\n");
  CHECK_THROWS(cfg.get_double("x", 0.0));
  CHECK_THROWS(cfg.get_int("x", 0));
  CHECK_THROWS(cfg.get_bool("x", false));
  CHECK_THROWS(cfg.get("missing"));
}

TEST_CASE("kv config lists split on commas") {
  auto cfg = KVConfig::parse_string("grid.ws = constant, importance ,tail\n");
  CHECK(cfg.get_list("grid.ws") ==
        std::vector<std::string>{"constant", "importance", "tail"});
  CHECK(cfg.get_list("absent").empty());
}

TEST_CASE("kv config serialization round trips") {
  auto cfg = KVConfig::parse_string("b = 2\na = one\n");
  auto back = KVConfig::parse_string(cfg.serialize());
  CHECK(back.get("a") == "one");
  CHECK(back.get("b") == "2");
  CHECK(cfg.serialize() == back.serialize());  // deterministic ordering
}

TEST_CASE("experiment config defaults match the standard benchmark") {
  auto cfg = ExperimentConfig::from_kv(KVConfig{});
  CHECK(cfg.profile.num_labels == 100);
  CHECK(cfg.profile.imbalance_ratio == 100.0);
  CHECK(cfg.profile.kind == ImbalanceProfile::Kind::Step);
  CHECK(cfg.dim == 64);
  CHECK(cfg.train_size == 20000);
  CHECK(cfg.noise_scale == 1.0);
  CHECK(cfg.negatives == 32);
  CHECK(cfg.lr == 0.1);
  CHECK(cfg.momentum == 0.9);
  CHECK(cfg.epochs == 50);
  CHECK(cfg.batch_size == 128);
  CHECK(cfg.sampler == ExperimentConfig::Sampler::WithinBatch);
  CHECK(cfg.weighting == "constant");
  CHECK(cfg.loss.family == LossSpec::Family::SampledSoftmax);
}

TEST_CASE("experiment config survives a kv round trip") {
  auto kv = KVConfig::parse_string(
      "profile.kind = exp\n"
      "profile.num_labels = 40\n"
      "profile.imbalance_ratio = 25\n"
      "loss = sampled_decoupled:hinge\n"
      "sampling.kind = uniform\n"
      "weighting = target_margin:logit_adjusted\n"
      "negatives = 7\n"
      "seed = 99\n");
  auto cfg = ExperimentConfig::from_kv(kv);
  auto back = ExperimentConfig::from_kv(cfg.to_kv());
  CHECK(back.profile.kind == ImbalanceProfile::Kind::Exp);
  CHECK(back.profile.num_labels == 40);
  CHECK(back.loss.name() == "sampled_decoupled:hinge");
  CHECK(back.sampler == ExperimentConfig::Sampler::Uniform);
  CHECK(back.weighting == "target_margin:logit_adjusted");
  CHECK(back.negatives == 7);
  CHECK(back.seed == 99);
  CHECK(cfg.to_kv().serialize() == back.to_kv().serialize());
}

TEST_CASE("loss spec strings parse and print") {
  CHECK(LossSpec::parse("softmax_ce").family == LossSpec::Family::SoftmaxCE);
  CHECK(LossSpec::parse("decoupled:cosine").pair.cosine_scores());
  CHECK(LossSpec::parse("margin_ce:adaptive").margin_preset == "adaptive");
  CHECK(LossSpec::parse("sampled_softmax").sampled());
  CHECK(LossSpec::parse("sampled_decoupled:softplus").name() ==
        "sampled_decoupled:softplus");
  CHECK_THROWS(LossSpec::parse("margin_ce"));
  CHECK_THROWS(LossSpec::parse("nope"));
  CHECK_THROWS(LossSpec::parse("decoupled:nope"));
}

TEST_CASE("grid expansion is the full cross product in declaration order") {
  auto kv = KVConfig::parse_string(
      "profile.num_labels = 10\n"
      "data.train_size = 50\n"
      "grid.seeds = 1, 2\n"
      "grid.samplers = uniform, within_batch\n"
      "grid.weightings = constant, tail\n"
      "grid.negatives = 4\n");
  auto configs = expand_grid(kv);
  REQUIRE(configs.size() == 8);
  CHECK(configs[0].seed == 1);
  CHECK(configs[0].sampler == ExperimentConfig::Sampler::Uniform);
  CHECK(configs[0].weighting == "constant");
  CHECK(configs[1].weighting == "tail");
  CHECK(configs[2].sampler == ExperimentConfig::Sampler::WithinBatch);
  CHECK(configs[4].seed == 2);
  for (const auto& c : configs) CHECK(c.negatives == 4);
}

TEST_CASE("sweeps record individual failures and keep going") {
  auto base = KVConfig::parse_string(
      "profile.num_labels = 8\n"
      "profile.imbalance_ratio = 5\n"
      "data.dim = 4\n"
      "data.train_size = 80\n"
      "data.test_per_class = 4\n"
      "negatives = 2\n"
      "optimizer.epochs = 2\n"
      "optimizer.batch_size = 16\n");
  std::vector<ExperimentConfig> configs;
  configs.push_back(ExperimentConfig::from_kv(base));
  auto diverging = base;
  diverging.set("loss", "decoupled:squared_hinge");
  diverging.set("optimizer.lr", 1e160);
  configs.push_back(ExperimentConfig::from_kv(diverging));
  configs.push_back(ExperimentConfig::from_kv(base));

  auto outcomes = run_sweep(configs, 2);
  REQUIRE(outcomes.size() == 3);
  CHECK(outcomes[0].ok);
  CHECK_FALSE(outcomes[1].ok);
  CHECK(outcomes[1].error.find("diverged") != std::string::npos);
  CHECK(outcomes[2].ok);
  CHECK(outcomes[0].config_id == 0);
  CHECK(outcomes[2].config_id == 2);
}

TEST_CASE("manifest digests match emitted files") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "negsamp_manifest_test";
  fs::remove_all(dir);
  fs::create_directories(dir);

  {
    std::ofstream a(dir / "a.csv");
    a << "x,y\n1,2\n";
    std::ofstream b(dir / "b.json");
    b << "{}\n";
  }
  RunManifest manifest;
  manifest.config = KVConfig::parse_string("seed = 5\n");
  manifest.seed = 5;
  manifest.started = std::chrono::system_clock::now();
  manifest.finished = manifest.started + std::chrono::seconds(1);
  manifest.write(dir, {"a.csv", "b.json"});

  std::ifstream in(dir / "manifest.json");
  REQUIRE(in.good());
  nlohmann::json j;
  in >> j;
  CHECK(j["tool_version"] == kToolVersion);
  CHECK(j["seed"] == 5);
  CHECK(j["config"]["seed"] == "5");
  REQUIRE(j["outputs"].size() == 2);

  // recompute one digest by hand (fnv1a64 of the bytes)
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (char c : std::string("x,y\n1,2\n")) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  std::ostringstream hex;
  hex << std::hex << h;
  CHECK(j["outputs"]["a.csv"] == hex.str());

  int manifests = 0;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.path().filename() == "manifest.json") ++manifests;
  CHECK(manifests == 1);
  fs::remove_all(dir);
}
