#include "negsamp/train.hpp"

#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "negsamp/dataset.hpp"
#include "negsamp/metrics.hpp"
#include "negsamp/rng.hpp"
#include "oracles.hpp"

using namespace negsamp;

namespace {

ExperimentConfig small_config() {
  auto kv = KVConfig::parse_string(
      "profile.kind = step\n"
      "profile.num_labels = 12\n"
      "profile.imbalance_ratio = 10\n"
      "data.dim = 8\n"
      "data.train_size = 600\n"
      "data.test_per_class = 25\n"
      "data.noise_scale = 0.5\n"
      "negatives = 4\n"
      "optimizer.epochs = 4\n"
      "optimizer.batch_size = 32\n"
      "optimizer.lr = 0.05\n"
      "seed = 3\n");
  return ExperimentConfig::from_kv(kv);
}

}  // namespace

TEST_CASE("datasets are byte-identical per seed") {
  auto pi = make_profile({ImbalanceProfile::Kind::Exp, 10, 20.0});
  auto a = generate_dataset(pi, 6, 200, 10, 0.7, 42);
  auto b = generate_dataset(pi, 6, 200, 10, 0.7, 42);
  CHECK(a.train_features == b.train_features);
  CHECK(a.train_labels == b.train_labels);
  CHECK(a.test_features == b.test_features);
  CHECK(a.class_means == b.class_means);
  auto c = generate_dataset(pi, 6, 200, 10, 0.7, 43);
  CHECK(a.train_features != c.train_features);
}

TEST_CASE("noiseless data sits exactly on the class means") {
  auto pi = LabelDistribution::uniform(7);
  auto data = generate_dataset(pi, 5, 100, 4, 0.0, 11);
  // nearest-mean classification is perfect
  for (int i = 0; i < data.test_size(); ++i) {
    const auto x = data.test_x(i);
    int best = -1;
    double best_d = 1e300;
    for (int y = 0; y < 7; ++y) {
      double d = 0.0;
      for (int k = 0; k < 5; ++k) {
        const double diff = x[static_cast<std::size_t>(k)] -
                            data.class_means[static_cast<std::size_t>(y) * 5 +
                                             static_cast<std::size_t>(k)];
        d += diff * diff;
      }
      if (d < best_d) {
        best_d = d;
        best = y;
      }
    }
    REQUIRE(best == data.test_labels[static_cast<std::size_t>(i)]);
  }
}

TEST_CASE("step-profile train counts follow the multinomial expectation") {
  auto pi = make_profile({ImbalanceProfile::Kind::Step, 100, 100.0});
  const int n = 10000;
  auto data = generate_dataset(pi, 4, n, 2, 1.0, 5);
  // head classes: pi = 100/5050, expected 198.02; tail: 1.98
  for (int y = 0; y < 100; ++y) {
    const double p = pi[y];
    const double expected = n * p;
    const double sigma = std::sqrt(n * p * (1.0 - p));
    CHECK(std::abs(static_cast<double>(data.train_counts[static_cast<std::size_t>(y)]) -
                   expected) <= 4.0 * sigma + 1e-9);
  }
  CHECK(pi[0] == Catch::Approx(100.0 / 5050.0).epsilon(1e-12));
}

TEST_CASE("dataset generation validates inputs") {
  auto pi = LabelDistribution::uniform(10);
  CHECK_THROWS_AS(generate_dataset(pi, 1, 100, 5, 1.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(generate_dataset(pi, 4, 5, 5, 1.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(generate_dataset(pi, 4, 100, 0, 1.0, 1), std::invalid_argument);
}

TEST_CASE("zero learning rate leaves the model at its initialization") {
  auto cfg = small_config();
  cfg.lr = 0.0;
  cfg.epochs = 2;
  const LabelDistribution pi = make_profile(cfg.profile);
  auto data = generate_dataset(pi, cfg.dim, cfg.train_size, cfg.test_per_class,
                               cfg.noise_scale, rng::derive_seed(cfg.seed, "data"));
  LinearModel model(cfg.profile.num_labels, cfg.dim, false, 0);
  train_scorer(model, cfg, data, data.empirical_pi_positive());
  for (double w : model.parameters()) CHECK(w == 0.0);  // zero-init persists
}

TEST_CASE("full softmax training solves a separable toy problem") {
  auto kv = KVConfig::parse_string(
      "profile.kind = step\n"
      "profile.num_labels = 3\n"
      "profile.imbalance_ratio = 1\n"
      "data.dim = 6\n"
      "data.train_size = 120\n"
      "data.test_per_class = 20\n"
      "data.noise_scale = 0\n"
      "loss = softmax_ce\n"
      "optimizer.epochs = 100\n"
      "optimizer.batch_size = 16\n"
      "optimizer.lr = 0.5\n"
      "seed = 2\n");
  auto result = run_experiment(ExperimentConfig::from_kv(kv));
  CHECK(result.metrics.overall.balanced_error == 0.0);
  CHECK(result.metrics.overall.recall_at_1 == 1.0);
  CHECK(result.metrics.overall.recall_at_5 == 1.0);  // k >= L covers everything
}

TEST_CASE("identical configs give identical metrics") {
  auto cfg = small_config();
  auto a = run_experiment(cfg);
  auto b = run_experiment(cfg);
  CHECK(a.metrics.overall.balanced_error == b.metrics.overall.balanced_error);
  CHECK(a.metrics.per_class_error == b.metrics.per_class_error);
  REQUIRE(a.trace.epoch_loss.size() == b.trace.epoch_loss.size());
  for (std::size_t e = 0; e < a.trace.epoch_loss.size(); ++e)
    CHECK(a.trace.epoch_loss[e] == b.trace.epoch_loss[e]);
}

TEST_CASE("sampled and unsampled softmax walk the same trajectory under full enumeration") {
  auto cfg = small_config();
  cfg.profile.num_labels = 10;
  cfg.train_size = 640;
  cfg.epochs = 1;
  cfg.batch_size = 64;

  const LabelDistribution pi = make_profile(cfg.profile);
  auto data = generate_dataset(pi, cfg.dim, cfg.train_size, cfg.test_per_class,
                               cfg.noise_scale, rng::derive_seed(cfg.seed, "data"));
  auto pi_w = data.empirical_pi_positive();

  auto sampled_cfg = cfg;
  sampled_cfg.loss = LossSpec::parse("sampled_softmax");
  sampled_cfg.sampler = ExperimentConfig::Sampler::FullEnumeration;
  sampled_cfg.weighting = "importance";
  LinearModel sampled_model(cfg.profile.num_labels, cfg.dim, false, 0);
  train_scorer(sampled_model, sampled_cfg, data, pi_w, 10);

  auto full_cfg = cfg;
  full_cfg.loss = LossSpec::parse("softmax_ce");
  LinearModel full_model(cfg.profile.num_labels, cfg.dim, false, 0);
  train_scorer(full_model, full_cfg, data, pi_w, 10);

  const auto a = sampled_model.parameters();
  const auto b = full_model.parameters();
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    worst = std::max(worst, std::abs(a[i] - b[i]));
  CHECK(worst <= 1e-10);
  CHECK(worst > 0.0);  // distinct float routes, so exact zero would be suspicious
}

TEST_CASE("a random scorer sits at chance level") {
  const int L = 20;
  auto pi = LabelDistribution::uniform(L);
  auto data = generate_dataset(pi, 10, 400, 200, 1.0, 17);
  // cosine-mode init gives nonzero random weights
  LinearModel model(L, 10, true, rng::derive_seed(17, "random-scorer"));
  auto slices = slice_labels(data.train_counts);
  auto metrics = evaluate(model, data, slices);
  CHECK(std::abs(metrics.overall.balanced_error - (1.0 - 1.0 / L)) <= 0.03);
}

TEST_CASE("slices with no classes are reported as absent") {
  auto pi = make_profile({ImbalanceProfile::Kind::Step, 10, 50.0});
  auto data = generate_dataset(pi, 4, 400, 5, 1.0, 23);
  auto slices = slice_labels(data.train_counts);
  LinearModel model(10, 4, false, 0);
  auto metrics = evaluate(model, data, slices);
  CHECK(metrics.head.has_value() == !slices.head.empty());
  CHECK(metrics.torso.has_value() == !slices.torso.empty());
  CHECK(metrics.tail.has_value() == !slices.tail.empty());
}

TEST_CASE("per-slice metrics average the right classes") {
  // two classes, heavily imbalanced counts, model that always predicts 0
  SyntheticDataset data;
  data.num_labels = 2;
  data.dim = 2;
  data.train_counts = {150, 3};
  data.test_labels = {0, 0, 1, 1};
  data.test_features = {1, 0, 1, 0, 1, 0, 1, 0};  // identical points
  LinearModel model(2, 2, false, 0);
  // zero weights: scores tie at 0, argmax picks label 0
  auto slices = slice_labels(data.train_counts);
  auto metrics = evaluate(model, data, slices);
  REQUIRE(metrics.head.has_value());
  REQUIRE(metrics.tail.has_value());
  CHECK(metrics.head->balanced_error == 0.0);
  CHECK(metrics.tail->balanced_error == 1.0);
  CHECK(metrics.overall.balanced_error == Catch::Approx(0.5));
}

TEST_CASE("literal within-batch mode trains without error") {
  auto cfg = small_config();
  cfg.batch_mode = ExperimentConfig::BatchMode::Literal;
  cfg.epochs = 2;
  auto result = run_experiment(cfg);
  CHECK(result.trace.epoch_loss.size() == 2);
  for (double loss : result.trace.epoch_loss) CHECK(std::isfinite(loss));
}

TEST_CASE("all stock samplers and weightings run end to end") {
  for (const std::string sampler : {"uniform", "within_batch", "model_based"}) {
    for (const std::string weighting :
         {"constant", "importance", "relative", "tail", "target_margin:adaptive"}) {
      auto cfg = small_config();
      cfg.epochs = 1;
      auto kv = cfg.to_kv();
      kv.set("sampling.kind", sampler);
      kv.set("weighting", weighting);
      auto result = run_experiment(ExperimentConfig::from_kv(kv));
      CHECK(std::isfinite(result.metrics.overall.balanced_error));
    }
  }
}

TEST_CASE("sampled decoupled losses train, including the cosine pair") {
  for (const std::string loss : {"sampled_decoupled:softplus", "sampled_decoupled:cosine"}) {
    auto cfg = small_config();
    cfg.epochs = 2;
    auto kv = cfg.to_kv();
    kv.set("loss", loss);
    auto result = run_experiment(ExperimentConfig::from_kv(kv));
    for (double l : result.trace.epoch_loss) CHECK(std::isfinite(l));
  }
}

TEST_CASE("the mlp model trains") {
  auto cfg = small_config();
  cfg.model = ExperimentConfig::Model::Mlp;
  cfg.hidden_width = 16;
  cfg.epochs = 2;
  auto result = run_experiment(cfg);
  CHECK(result.trace.epoch_loss.size() == 2);
  CHECK(result.trace.epoch_loss[1] < result.trace.epoch_loss[0]);
}

TEST_CASE("margin-loss baseline trains") {
  auto cfg = small_config();
  auto kv = cfg.to_kv();
  kv.set("loss", "margin_ce:logit_adjusted");
  auto result = run_experiment(ExperimentConfig::from_kv(kv));
  CHECK(result.trace.epoch_loss.back() < result.trace.epoch_loss.front());
}

TEST_CASE("divergence raises a diagnostic error") {
  // squared-hinge values overflow once the scores blow past ~1e154
  auto cfg = small_config();
  auto kv = cfg.to_kv();
  kv.set("loss", "decoupled:squared_hinge");
  kv.set("optimizer.lr", 1e160);
  kv.set("optimizer.epochs", static_cast<std::int64_t>(3));
  CHECK_THROWS_AS(run_experiment(ExperimentConfig::from_kv(kv)), DivergenceError);
}

TEST_CASE("config validation rejects bad combinations") {
  auto cfg = small_config();
  cfg.negatives = 0;
  CHECK_THROWS(cfg.validate());
  cfg = small_config();
  cfg.momentum = 1.5;
  CHECK_THROWS(cfg.validate());
  cfg = small_config();
  cfg.batch_mode = ExperimentConfig::BatchMode::Literal;
  cfg.negatives = cfg.batch_size + 1;
  CHECK_THROWS(cfg.validate());
}
