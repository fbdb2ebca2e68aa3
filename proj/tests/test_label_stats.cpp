#include "negsamp/label_stats.hpp"

#include <catch2/catch_amalgamated.hpp>
#include <sstream>

#include "negsamp/rng.hpp"

using namespace negsamp;

TEST_CASE("step profile with unit ratio is uniform") {
  auto pi = make_profile({ImbalanceProfile::Kind::Step, 4, 1.0});
  for (int y = 0; y < 4; ++y) CHECK(pi[y] == Catch::Approx(0.25).margin(1e-15));
}

TEST_CASE("step profile splits mass at the ratio") {
  auto pi = make_profile({ImbalanceProfile::Kind::Step, 4, 100.0});
  CHECK(pi[0] == Catch::Approx(100.0 / 202.0).epsilon(1e-14));
  CHECK(pi[1] == Catch::Approx(100.0 / 202.0).epsilon(1e-14));
  CHECK(pi[2] == Catch::Approx(1.0 / 202.0).epsilon(1e-14));
  CHECK(pi[3] == Catch::Approx(1.0 / 202.0).epsilon(1e-14));
}

TEST_CASE("step profile puts ceil(L/2) labels in the head") {
  auto pi = make_profile({ImbalanceProfile::Kind::Step, 5, 10.0});
  CHECK(pi[2] == Catch::Approx(10.0 / 32.0).epsilon(1e-14));
  CHECK(pi[3] == Catch::Approx(1.0 / 32.0).epsilon(1e-14));
}

TEST_CASE("exp profile follows geometric decay") {
  auto pi = make_profile({ImbalanceProfile::Kind::Exp, 3, 100.0});
  // weights 1, 100^{-1/2}, 100^{-1} normalized
  CHECK(pi[0] == Catch::Approx(0.900900900900901).epsilon(1e-12));
  CHECK(pi[1] == Catch::Approx(0.0900900900900901).epsilon(1e-12));
  CHECK(pi[2] == Catch::Approx(0.00900900900900901).epsilon(1e-12));
}

TEST_CASE("profiles satisfy distribution invariants across scales") {
  Rng rng(rng::derive_seed(2024, "profile-prop"));
  const int sizes[] = {2, 3, 17, 1000, 1000000};
  const double ratios[] = {1.0, 3.5, 100.0, 1e6};
  for (auto kind : {ImbalanceProfile::Kind::Exp, ImbalanceProfile::Kind::Step}) {
    for (int L : sizes) {
      for (double r : ratios) {
        auto pi = make_profile({kind, L, r});
        REQUIRE(pi.num_labels() == L);
        CHECK(std::abs(kahan_sum(pi.probs()) - 1.0) <= 1e-12);
        CHECK(pi.min_prob() >= 0.0);
        if (kind == ImbalanceProfile::Kind::Exp) {
          for (int y = 0; y + 1 < L; ++y) CHECK(pi[y] >= pi[y + 1]);
          CHECK(pi[0] / pi[L - 1] == Catch::Approx(r).epsilon(1e-9));
        } else {
          CHECK(pi.max_prob() / pi.min_prob() == Catch::Approx(r).epsilon(1e-9));
        }
      }
    }
  }
}

TEST_CASE("profile rejects invalid parameters") {
  CHECK_THROWS_AS(make_profile({ImbalanceProfile::Kind::Exp, 1, 2.0}),
                  std::invalid_argument);
  CHECK_THROWS_AS(make_profile({ImbalanceProfile::Kind::Step, 4, 0.5}),
                  std::invalid_argument);
}

TEST_CASE("slice thresholds") {
  auto s = slice_labels({150, 50, 5});
  CHECK(s.head == std::vector<int>{0});
  CHECK(s.torso == std::vector<int>{1});
  CHECK(s.tail == std::vector<int>{2});
}

TEST_CASE("slice boundaries are inclusive at hi and lo") {
  auto s = slice_labels({100, 20, 19});
  CHECK(s.head == std::vector<int>{0});
  CHECK(s.torso == std::vector<int>{1});
  CHECK(s.tail == std::vector<int>{2});
}

TEST_CASE("all-zero counts land in the tail") {
  auto s = slice_labels({0, 0, 0});
  CHECK(s.head.empty());
  CHECK(s.torso.empty());
  CHECK(s.tail == std::vector<int>{0, 1, 2});
}

TEST_CASE("slices partition the label set") {
  Rng rng(rng::derive_seed(2024, "slice-prop"));
  for (int rep = 0; rep < 20; ++rep) {
    const int L = 1 + static_cast<int>(rng.uniform_index(200));
    std::vector<std::int64_t> counts(static_cast<std::size_t>(L));
    for (auto& c : counts) c = static_cast<std::int64_t>(rng.uniform_index(300));
    auto s = slice_labels(counts);
    std::vector<int> seen(static_cast<std::size_t>(L), 0);
    for (int y : s.head) ++seen[static_cast<std::size_t>(y)];
    for (int y : s.torso) ++seen[static_cast<std::size_t>(y)];
    for (int y : s.tail) ++seen[static_cast<std::size_t>(y)];
    for (int y = 0; y < L; ++y) REQUIRE(seen[static_cast<std::size_t>(y)] == 1);
  }
}

TEST_CASE("custom slice thresholds") {
  auto s = slice_labels({9, 5, 2}, 8, 3);
  CHECK(s.head == std::vector<int>{0});
  CHECK(s.torso == std::vector<int>{1});
  CHECK(s.tail == std::vector<int>{2});
}

TEST_CASE("distribution validates probabilities") {
  CHECK_THROWS_AS(LabelDistribution({0.6, 0.6}), std::invalid_argument);
  CHECK_THROWS_AS(LabelDistribution({1.5, -0.5}), std::invalid_argument);
  CHECK_THROWS_AS(LabelDistribution(std::vector<double>{}), std::invalid_argument);
}

TEST_CASE("distribution checks counts consistency") {
  CHECK_NOTHROW(LabelDistribution({0.75, 0.25}, {3, 1}));
  CHECK_THROWS_AS(LabelDistribution({0.5, 0.5}, {3, 1}), std::invalid_argument);
}

TEST_CASE("from_counts matches ratios") {
  auto d = LabelDistribution::from_counts({6, 2, 0});
  CHECK(d[0] == Catch::Approx(0.75));
  CHECK(d[2] == 0.0);
  REQUIRE(d.counts().has_value());
}

TEST_CASE("csv round trip is lossless") {
  auto pi = make_profile({ImbalanceProfile::Kind::Exp, 37, 250.0});
  std::stringstream buffer;
  pi.save_csv(buffer);
  auto back = LabelDistribution::load_csv(buffer);
  REQUIRE(back.num_labels() == pi.num_labels());
  for (int y = 0; y < pi.num_labels(); ++y) CHECK(back[y] == pi[y]);
}

TEST_CASE("csv load rejects a bad header") {
  std::stringstream buffer("probability\n0.5\n0.5\n");
  CHECK_THROWS(LabelDistribution::load_csv(buffer));
}
