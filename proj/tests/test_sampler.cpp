#include "negsamp/sampler.hpp"

#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "negsamp/label_stats.hpp"
#include "negsamp/rng.hpp"
#include "oracles.hpp"

using namespace negsamp;

TEST_CASE("alias table for a flat distribution keeps every cell full") {
  AliasTable t(LabelDistribution::uniform(2));
  CHECK(t.prob()[0] == 1.0);
  CHECK(t.prob()[1] == 1.0);
}

TEST_CASE("alias table reproduces the source distribution") {
  AliasTable t(LabelDistribution({0.5, 0.25, 0.25}));
  auto induced = t.induced_probs();
  CHECK(std::abs(induced[0] - 0.5) <= 1e-12);
  CHECK(std::abs(induced[1] - 0.25) <= 1e-12);
  CHECK(std::abs(induced[2] - 0.25) <= 1e-12);
}

TEST_CASE("alias table on a point mass always returns the atom") {
  AliasTable t(LabelDistribution({1.0, 0.0}));
  Rng rng(7);
  for (int i = 0; i < 200; ++i) CHECK(t.sample(rng) == 0);
}

TEST_CASE("alias induced distribution matches for random inputs") {
  Rng rng(rng::derive_seed(99, "alias-prop"));
  for (int rep = 0; rep < 40; ++rep) {
    const int L = 2 + static_cast<int>(rng.uniform_index(999));
    auto dist = oracles::random_distribution(L, rng);
    AliasTable t(dist);
    auto induced = t.induced_probs();
    double worst = 0.0;
    for (int j = 0; j < L; ++j) worst = std::max(worst, std::abs(induced[j] - dist[j]));
    CHECK(worst <= 1e-12);
  }
}

TEST_CASE("alias table rejects invalid mass") {
  CHECK_THROWS_AS(AliasTable(std::vector<double>{0.5, -0.5, 1.0}), std::invalid_argument);
  CHECK_THROWS_AS(AliasTable(std::vector<double>{0.5, std::nan("")}),
                  std::invalid_argument);
}

TEST_CASE("uniform q with exclusion spreads mass over the rest") {
  SamplingScheme scheme{SamplingScheme::Kind::Uniform, 4, {}, true};
  auto q = realize_q(scheme, {}, 2);
  CHECK(q.dist[0] == Catch::Approx(1.0 / 3.0).epsilon(1e-14));
  CHECK(q.dist[1] == Catch::Approx(1.0 / 3.0).epsilon(1e-14));
  CHECK(q.dist[2] == 0.0);
  CHECK(q.dist[3] == Catch::Approx(1.0 / 3.0).epsilon(1e-14));
  CHECK(q.base[2] == Catch::Approx(0.25));
  CHECK(q.positive == 2);
}

TEST_CASE("within-batch q is the empirical batch frequency") {
  SamplingScheme scheme{SamplingScheme::Kind::WithinBatch, 4, {}, false};
  const std::vector<int> batch{0, 0, 1};
  auto q = realize_q(scheme, {.batch_labels = batch, .logits = {}}, 0);
  CHECK(q.dist[0] == Catch::Approx(2.0 / 3.0));
  CHECK(q.dist[1] == Catch::Approx(1.0 / 3.0));
  CHECK(q.dist[2] == 0.0);
  CHECK(q.dist[3] == 0.0);
}

TEST_CASE("model-based q is the softmax of the logits") {
  SamplingScheme scheme{SamplingScheme::Kind::ModelBased, 0, {}, false};
  const std::vector<double> logits{0.0, 0.0};
  auto q = realize_q(scheme, {.batch_labels = {}, .logits = logits}, 0);
  CHECK(q.dist[0] == Catch::Approx(0.5));
  CHECK(q.dist[1] == Catch::Approx(0.5));
}

TEST_CASE("realize_q validates its context") {
  SamplingScheme within{SamplingScheme::Kind::WithinBatch, 4, {}, true};
  CHECK_THROWS_AS(realize_q(within, {}, 0), std::invalid_argument);

  SamplingScheme custom{SamplingScheme::Kind::Custom, 0, LabelDistribution({1.0, 0.0}),
                        true};
  CHECK_THROWS_AS(realize_q(custom, {}, 0), std::invalid_argument);  // nothing left
}

TEST_CASE("point-mass q draws only its atom") {
  LabelDistribution q({0.0, 0.0, 0.0, 1.0});
  auto sample = draw_negatives(q, 5, 123);
  REQUIRE(sample.count() == 5);
  for (int label : sample.labels) CHECK(label == 3);
  for (double p : sample.probs) CHECK(p == 1.0);
}

TEST_CASE("draws are deterministic per seed") {
  Rng rng(rng::derive_seed(5, "det"));
  auto q = oracles::random_distribution(12, rng);
  auto a = draw_negatives(q, 64, 999);
  auto b = draw_negatives(q, 64, 999);
  CHECK(a.labels == b.labels);
  CHECK(a.probs == b.probs);
  auto c = draw_negatives(q, 64, 1000);
  CHECK(a.labels != c.labels);
}

TEST_CASE("excluded positives never appear in a sample") {
  Rng rng(rng::derive_seed(5, "excl"));
  for (int rep = 0; rep < 10; ++rep) {
    const int L = 3 + static_cast<int>(rng.uniform_index(30));
    const int positive = static_cast<int>(rng.uniform_index(static_cast<unsigned>(L)));
    SamplingScheme scheme{SamplingScheme::Kind::Custom, 0,
                          oracles::random_distribution(L, rng), true};
    auto q = realize_q(scheme, {}, positive);
    auto sample = draw_negatives(q, 200, rng.next_u64());
    for (int label : sample.labels) {
      CHECK(label != positive);
      CHECK(q.dist[label] > 0.0);
    }
  }
}

TEST_CASE("uniform draw frequencies stay within binomial bounds") {
  const int L = 100;
  const int n = 1000000;
  auto q = LabelDistribution::uniform(L);
  AliasTable table(q);
  Rng rng(rng::derive_seed(2718, "uniform-freq"));
  std::vector<std::int64_t> counts(L, 0);
  for (int i = 0; i < n; ++i) ++counts[static_cast<std::size_t>(table.sample(rng))];
  const double expected = static_cast<double>(n) / L;
  const double sigma = std::sqrt(static_cast<double>(n) * (1.0 / L) * (1.0 - 1.0 / L));
  for (int j = 0; j < L; ++j)
    CHECK(std::abs(static_cast<double>(counts[j]) - expected) <= 5.0 * sigma);
}

TEST_CASE("alias draws pass a chi-squared goodness-of-fit check") {
  // Frozen criticals are for significance 1e-4 (scipy.stats.chi2.ppf).
  const int n = 1000000;
  Rng rng(rng::derive_seed(2718, "chi2"));
  for (int L : {8, 16, 32, 64}) {
    auto q = oracles::random_distribution(L, rng, 0.5);
    AliasTable table(q);
    std::vector<std::int64_t> counts(static_cast<std::size_t>(L), 0);
    for (int i = 0; i < n; ++i) ++counts[static_cast<std::size_t>(table.sample(rng))];
    std::vector<double> expected(static_cast<std::size_t>(L));
    for (int j = 0; j < L; ++j) expected[static_cast<std::size_t>(j)] = n * q[j];
    const double stat = oracles::chi_squared_statistic(counts, expected);
    CHECK(stat < oracles::chi2_critical_1e4(L - 1));
  }
}

TEST_CASE("parallel streams with distinct seeds are independent of interleaving") {
  Rng rng(rng::derive_seed(11, "streams"));
  auto q = oracles::random_distribution(9, rng);
  AliasTable table(q);

  Rng sequential_a(rng::derive_seed(77, "stream", 0));
  Rng sequential_b(rng::derive_seed(77, "stream", 1));
  std::vector<int> a1, b1;
  for (int i = 0; i < 50; ++i) a1.push_back(table.sample(sequential_a));
  for (int i = 0; i < 50; ++i) b1.push_back(table.sample(sequential_b));

  Rng interleaved_a(rng::derive_seed(77, "stream", 0));
  Rng interleaved_b(rng::derive_seed(77, "stream", 1));
  std::vector<int> a2, b2;
  for (int i = 0; i < 50; ++i) {
    a2.push_back(table.sample(interleaved_a));
    b2.push_back(table.sample(interleaved_b));
  }
  CHECK(a1 == a2);
  CHECK(b1 == b2);
}

TEST_CASE("literal batch negatives deduplicate and drop the positive") {
  const std::vector<int> batch{3, 1, 3, 0, 1, 2};
  auto negatives = literal_batch_negatives(batch, 1, 5);
  CHECK(negatives == std::vector<int>{3, 0, 2});
}
