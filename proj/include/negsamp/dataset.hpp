#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "negsamp/label_stats.hpp"
#include "negsamp/rng.hpp"
#include "negsamp/sampler.hpp"

namespace negsamp {

/// Gaussian-mixture stand-in for a long-tail image benchmark: class means on
/// the unit sphere, isotropic noise, train labels drawn from pi, and a
/// label-balanced test split so plain error on it is balanced error.
struct SyntheticDataset {
  int num_labels = 0;
  int dim = 0;
  double noise_scale = 1.0;
  std::vector<double> class_means;      // L x d, unit-norm rows
  std::vector<double> train_features;   // N x d
  std::vector<int> train_labels;        // N
  std::vector<double> test_features;    // (L * test_per_class) x d
  std::vector<int> test_labels;
  std::vector<std::int64_t> train_counts;

  std::span<const double> train_x(int i) const {
    return {train_features.data() + static_cast<std::size_t>(i) * dim,
            static_cast<std::size_t>(dim)};
  }
  std::span<const double> test_x(int i) const {
    return {test_features.data() + static_cast<std::size_t>(i) * dim,
            static_cast<std::size_t>(dim)};
  }
  int train_size() const { return static_cast<int>(train_labels.size()); }
  int test_size() const { return static_cast<int>(test_labels.size()); }

  LabelDistribution empirical_pi() const {
    return LabelDistribution::from_counts(train_counts);
  }

  /// Empirical train distribution with unseen classes bumped to count 1, so
  /// weightings and margin presets that divide by pi stay finite.
  LabelDistribution empirical_pi_positive() const {
    std::vector<std::int64_t> counts = train_counts;
    for (auto& c : counts) c = std::max<std::int64_t>(c, 1);
    return LabelDistribution::from_counts(counts);
  }
};

inline SyntheticDataset generate_dataset(const LabelDistribution& pi, int dim,
                                         int train_size, int test_per_class,
                                         double noise_scale, std::uint64_t seed) {
  const int L = pi.num_labels();
  if (dim < 2) throw std::invalid_argument("generate_dataset: dim must be >= 2");
  if (train_size < L)
    throw std::invalid_argument("generate_dataset: need at least one example per label");
  if (test_per_class < 1)
    throw std::invalid_argument("generate_dataset: test_per_class must be >= 1");
  if (noise_scale < 0.0)
    throw std::invalid_argument("generate_dataset: noise_scale must be >= 0");

  SyntheticDataset data;
  data.num_labels = L;
  data.dim = dim;
  data.noise_scale = noise_scale;

  // Class means: gaussian directions normalized onto the sphere.
  Rng mean_rng(rng::derive_seed(seed, "means"));
  data.class_means.resize(static_cast<std::size_t>(L) * dim);
  for (int y = 0; y < L; ++y) {
    double* row = data.class_means.data() + static_cast<std::size_t>(y) * dim;
    double norm_sq = 0.0;
    do {
      norm_sq = 0.0;
      for (int k = 0; k < dim; ++k) {
        row[k] = mean_rng.gaussian();
        norm_sq += row[k] * row[k];
      }
    } while (norm_sq <= 1e-24);
    const double inv = 1.0 / std::sqrt(norm_sq);
    for (int k = 0; k < dim; ++k) row[k] *= inv;
  }

  // Train labels ~ pi, features = mean + noise.
  AliasTable table(pi);
  Rng label_rng(rng::derive_seed(seed, "train-labels"));
  Rng noise_rng(rng::derive_seed(seed, "train-noise"));
  data.train_labels.resize(static_cast<std::size_t>(train_size));
  data.train_features.resize(static_cast<std::size_t>(train_size) * dim);
  data.train_counts.assign(static_cast<std::size_t>(L), 0);
  for (int i = 0; i < train_size; ++i) {
    const int y = table.sample(label_rng);
    data.train_labels[static_cast<std::size_t>(i)] = y;
    ++data.train_counts[static_cast<std::size_t>(y)];
    const double* mean = data.class_means.data() + static_cast<std::size_t>(y) * dim;
    double* x = data.train_features.data() + static_cast<std::size_t>(i) * dim;
    for (int k = 0; k < dim; ++k) x[k] = mean[k] + noise_scale * noise_rng.gaussian();
  }

  // Balanced test split: test_per_class fresh draws per label.
  Rng test_rng(rng::derive_seed(seed, "test-noise"));
  const int test_n = L * test_per_class;
  data.test_labels.resize(static_cast<std::size_t>(test_n));
  data.test_features.resize(static_cast<std::size_t>(test_n) * dim);
  int row = 0;
  for (int y = 0; y < L; ++y) {
    const double* mean = data.class_means.data() + static_cast<std::size_t>(y) * dim;
    for (int r = 0; r < test_per_class; ++r, ++row) {
      data.test_labels[static_cast<std::size_t>(row)] = y;
      double* x = data.test_features.data() + static_cast<std::size_t>(row) * dim;
      for (int k = 0; k < dim; ++k) x[k] = mean[k] + noise_scale * test_rng.gaussian();
    }
  }
  return data;
}

}  // namespace negsamp
