// Test-side oracles, independent of the implementation paths they check:
// finite differences for gradients, exhaustive enumeration for sampled-loss
// moments, Welford accumulation for Monte-Carlo estimates, and frozen
// reference quantiles.
#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "negsamp/label_stats.hpp"
#include "negsamp/margin_pair.hpp"
#include "negsamp/rng.hpp"

namespace oracles {

// Central finite differences of a scalar function of a logit vector.
inline std::vector<double> finite_difference_gradient(
    const std::function<double(std::span<const double>)>& loss, std::vector<double> f,
    double step = 1e-6) {
  std::vector<double> grad(f.size());
  for (std::size_t j = 0; j < f.size(); ++j) {
    const double orig = f[j];
    f[j] = orig + step;
    const double hi = loss(f);
    f[j] = orig - step;
    const double lo = loss(f);
    f[j] = orig;
    grad[j] = (hi - lo) / (2.0 * step);
  }
  return grad;
}

// Hybrid absolute/relative agreement at unit scale.
inline bool close_rel(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max({1.0, std::abs(a), std::abs(b)});
}

struct Moments {
  double mean = 0.0;
  double variance = 0.0;  // population variance of the enumerated distribution
};

// Exhaustive expectation and variance of the sampled decoupled loss
//   phi(f_y) + sum_i w(y, n_i) varphi(-f_{n_i})
// over all |support(q)|^m equally-indexed tuples, each weighted by its
// probability. Weights enter through a caller-supplied function so this
// stays independent of the library's weighting implementation.
inline Moments enumerate_sampled_decoupled(
    int y, std::span<const double> f, const negsamp::LabelDistribution& q, int m,
    const negsamp::MarginLossPair& pair, const std::function<double(int)>& weight_of) {
  std::vector<int> support;
  for (int j = 0; j < q.num_labels(); ++j)
    if (q.prob(j) > 0.0) support.push_back(j);
  if (support.empty()) throw std::invalid_argument("enumerate: empty support");

  const double pos = pair.pos_value(f[static_cast<std::size_t>(y)]);
  const std::size_t k = support.size();
  std::vector<std::size_t> idx(static_cast<std::size_t>(m), 0);

  double mean = 0.0, second = 0.0, total_p = 0.0;
  while (true) {
    double p = 1.0, loss = pos;
    for (int i = 0; i < m; ++i) {
      const int label = support[idx[static_cast<std::size_t>(i)]];
      p *= q.prob(label);
      loss += weight_of(label) * pair.neg_value(-f[static_cast<std::size_t>(label)]);
    }
    mean += p * loss;
    second += p * loss * loss;
    total_p += p;

    // odometer over support^m
    int pos_i = 0;
    while (pos_i < m) {
      if (++idx[static_cast<std::size_t>(pos_i)] < k) break;
      idx[static_cast<std::size_t>(pos_i)] = 0;
      ++pos_i;
    }
    if (pos_i == m) break;
  }
  if (std::abs(total_p - 1.0) > 1e-9)
    throw std::logic_error("enumerate: tuple probabilities do not sum to 1");
  return {mean, second - mean * mean};
}

// Streaming mean/variance (Welford).
class RunningStats {
 public:
  void add(double x) {
    ++n_;
    const double d = x - mean_;
    mean_ += d / static_cast<double>(n_);
    m2_ += d * (x - mean_);
  }
  std::int64_t count() const { return n_; }
  double mean() const { return mean_; }
  double variance() const { return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0; }
  double stderror() const {
    return n_ > 1 ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0;
  }

 private:
  std::int64_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

// Random distribution over L labels: Dirichlet(1) mixed with the uniform so
// no entry gets pathologically small (keeps importance weights bounded).
inline negsamp::LabelDistribution random_distribution(int num_labels, negsamp::Rng& rng,
                                                      double uniform_mix = 0.0) {
  std::vector<double> w(static_cast<std::size_t>(num_labels));
  for (auto& v : w) v = -std::log(1.0 - rng.uniform01());
  double sum = 0.0;
  for (double v : w) sum += v;
  for (auto& v : w)
    v = (1.0 - uniform_mix) * (v / sum) + uniform_mix / static_cast<double>(num_labels);
  return negsamp::LabelDistribution::from_weights(w);
}

inline std::vector<double> random_logits(int num_labels, negsamp::Rng& rng, double scale) {
  std::vector<double> f(static_cast<std::size_t>(num_labels));
  for (auto& v : f) v = scale * (2.0 * rng.uniform01() - 1.0);
  return f;
}

// Draw logits whose margin-loss arguments stay clear of every kink of the
// pair by at least `clearance` (both as positives and negated negatives).
inline std::vector<double> random_logits_off_kinks(int num_labels, negsamp::Rng& rng,
                                                   double scale,
                                                   const negsamp::MarginLossPair& pair,
                                                   double clearance = 1e-3) {
  const auto pk = pair.pos_kinks();
  const auto nk = pair.neg_kinks();
  std::vector<double> f(static_cast<std::size_t>(num_labels));
  for (auto& v : f) {
    for (int attempt = 0; attempt < 1000; ++attempt) {
      v = scale * (2.0 * rng.uniform01() - 1.0);
      bool ok = true;
      for (double kink : pk)
        if (std::abs(v - kink) < clearance) ok = false;
      for (double kink : nk)
        if (std::abs(-v - kink) < clearance) ok = false;
      if (ok) break;
    }
  }
  return f;
}

// Frozen reference quantiles (scipy.stats, see tests for provenance).
inline double chi2_critical_1e4(int df) {
  switch (df) {
    case 1: return 15.136705226624;
    case 2: return 18.420680743953;
    case 3: return 21.107513466160;
    case 7: return 29.877503909225;
    case 15: return 44.263224944175;
    case 31: return 69.105692289868;
    case 63: return 113.504992851054;
    default: throw std::invalid_argument("no frozen chi2 quantile for this df");
  }
}

inline double chi_squared_statistic(const std::vector<std::int64_t>& observed,
                                    const std::vector<double>& expected) {
  double stat = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    const double d = static_cast<double>(observed[i]) - expected[i];
    stat += d * d / expected[i];
  }
  return stat;
}

}  // namespace oracles
