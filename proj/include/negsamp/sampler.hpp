#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "negsamp/label_stats.hpp"
#include "negsamp/rng.hpp"

namespace negsamp {

/// Walker/Vose alias table: O(L) construction, O(1) exact categorical draws.
class AliasTable {
 public:
  explicit AliasTable(const LabelDistribution& dist) : AliasTable(dist.probs()) {}

  explicit AliasTable(const std::vector<double>& probs) {
    const std::size_t n = probs.size();
    if (n == 0) throw std::invalid_argument("AliasTable: empty distribution");
    for (double p : probs)
      if (!std::isfinite(p) || p < 0.0)
        throw std::invalid_argument("AliasTable: probabilities must be finite and >= 0");

    prob_.assign(n, 1.0);
    alias_.assign(n, 0);
    for (std::size_t i = 0; i < n; ++i) alias_[i] = static_cast<int>(i);

    // Classic two-worklist construction on probabilities scaled by n.
    std::vector<double> scaled(n);
    std::vector<int> small, large;
    for (std::size_t i = 0; i < n; ++i) {
      scaled[i] = probs[i] * static_cast<double>(n);
      (scaled[i] < 1.0 ? small : large).push_back(static_cast<int>(i));
    }
    while (!small.empty() && !large.empty()) {
      const int s = small.back();
      const int l = large.back();
      small.pop_back();
      large.pop_back();
      prob_[static_cast<std::size_t>(s)] = scaled[static_cast<std::size_t>(s)];
      alias_[static_cast<std::size_t>(s)] = l;
      scaled[static_cast<std::size_t>(l)] -= 1.0 - scaled[static_cast<std::size_t>(s)];
      (scaled[static_cast<std::size_t>(l)] < 1.0 ? small : large).push_back(l);
    }
    // Leftovers are within rounding of 1.
    for (int i : large) prob_[static_cast<std::size_t>(i)] = 1.0;
    for (int i : small) prob_[static_cast<std::size_t>(i)] = 1.0;
  }

  int size() const { return static_cast<int>(prob_.size()); }

  int sample(Rng& rng) const {
    const auto i = rng.uniform_index(static_cast<std::uint32_t>(prob_.size()));
    return rng.uniform01() < prob_[i] ? static_cast<int>(i) : alias_[i];
  }

  const std::vector<double>& prob() const { return prob_; }
  const std::vector<int>& alias() const { return alias_; }

  /// Recomputes the distribution the table actually samples from; used to
  /// verify construction against the source distribution.
  std::vector<double> induced_probs() const {
    const std::size_t n = prob_.size();
    std::vector<double> induced(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      induced[i] += prob_[i];
      induced[static_cast<std::size_t>(alias_[i])] += 1.0 - prob_[i];
    }
    for (double& v : induced) v /= static_cast<double>(n);
    return induced;
  }

 private:
  std::vector<double> prob_;
  std::vector<int> alias_;
};

inline AliasTable build_alias(const LabelDistribution& dist) { return AliasTable(dist); }

/// How the negative-sampling distribution q is obtained for an example.
struct SamplingScheme {
  enum class Kind { Uniform, WithinBatch, ModelBased, Custom };
  Kind kind = Kind::Uniform;
  int num_labels = 0;              // required for Uniform and WithinBatch
  LabelDistribution base;          // required for Custom
  bool exclude_positive = true;    // zero q at the positive label and renormalize

  static std::string kind_name(Kind k) {
    switch (k) {
      case Kind::Uniform: return "uniform";
      case Kind::WithinBatch: return "within_batch";
      case Kind::ModelBased: return "model_based";
      case Kind::Custom: return "custom";
    }
    return "?";
  }

  static Kind parse_kind(const std::string& s) {
    if (s == "uniform") return Kind::Uniform;
    if (s == "within_batch") return Kind::WithinBatch;
    if (s == "model_based") return Kind::ModelBased;
    if (s == "custom") return Kind::Custom;
    throw std::invalid_argument("unknown sampler kind: " + s);
  }
};

/// A realized sampling distribution for one example. `dist` is what negatives
/// are drawn from; `base` is the distribution before positive exclusion
/// (weighting schemes that take density ratios consult it).
struct RealizedQ {
  LabelDistribution dist;
  LabelDistribution base;
  int positive = -1;  // excluded label, or -1 when no exclusion was applied

  RealizedQ() = default;
  explicit RealizedQ(LabelDistribution d) : dist(d), base(std::move(d)) {}
  RealizedQ(LabelDistribution d, LabelDistribution b, int pos)
      : dist(std::move(d)), base(std::move(b)), positive(pos) {}
};

/// Zeroes out `positive` and renormalizes. Errors if no mass remains.
inline RealizedQ exclude_positive(const LabelDistribution& base, int positive) {
  if (positive < 0 || positive >= base.num_labels())
    throw std::invalid_argument("exclude_positive: label out of range");
  const double keep = 1.0 - base[positive];
  if (keep <= 0.0)
    throw std::invalid_argument("exclude_positive: no mass left after exclusion");
  std::vector<double> p = base.probs();
  p[static_cast<std::size_t>(positive)] = 0.0;
  for (double& v : p) v /= keep;
  return RealizedQ(LabelDistribution(std::move(p)), base, positive);
}

/// Inputs a scheme may need to realize q: the minibatch labels (WithinBatch)
/// or the current logits (ModelBased).
struct SamplingContext {
  std::span<const int> batch_labels;
  std::span<const double> logits;
};

inline RealizedQ realize_q(const SamplingScheme& scheme, const SamplingContext& context,
                           int positive) {
  LabelDistribution base;
  switch (scheme.kind) {
    case SamplingScheme::Kind::Uniform: {
      if (scheme.num_labels < 2)
        throw std::invalid_argument("realize_q: Uniform needs num_labels >= 2");
      base = LabelDistribution::uniform(scheme.num_labels);
      break;
    }
    case SamplingScheme::Kind::WithinBatch: {
      if (context.batch_labels.empty())
        throw std::invalid_argument("realize_q: WithinBatch needs a non-empty batch");
      if (scheme.num_labels < 1)
        throw std::invalid_argument("realize_q: WithinBatch needs num_labels");
      std::vector<std::int64_t> counts(static_cast<std::size_t>(scheme.num_labels), 0);
      for (int y : context.batch_labels) {
        if (y < 0 || y >= scheme.num_labels)
          throw std::invalid_argument("realize_q: batch label out of range");
        ++counts[static_cast<std::size_t>(y)];
      }
      base = LabelDistribution::from_counts(counts);
      break;
    }
    case SamplingScheme::Kind::ModelBased: {
      if (context.logits.empty())
        throw std::invalid_argument("realize_q: ModelBased needs logits");
      // Softmax of the logits, max-shifted.
      double mx = context.logits[0];
      for (double v : context.logits) mx = std::max(mx, v);
      std::vector<double> w(context.logits.size());
      for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::exp(context.logits[i] - mx);
      base = LabelDistribution::from_weights(w);
      break;
    }
    case SamplingScheme::Kind::Custom: {
      if (scheme.base.num_labels() == 0)
        throw std::invalid_argument("realize_q: Custom needs a base distribution");
      base = scheme.base;
      break;
    }
  }
  if (scheme.exclude_positive) return exclude_positive(base, positive);
  return RealizedQ(std::move(base));
}

/// An i.i.d. sample of m negative labels (repetition allowed) together with
/// the sampling probability of each drawn label.
struct NegativeSample {
  std::vector<int> labels;
  std::vector<double> probs;
  int count() const { return static_cast<int>(labels.size()); }
};

/// Draws m i.i.d. negatives from q using a caller-owned stream.
inline NegativeSample draw_negatives(const LabelDistribution& q, const AliasTable& table,
                                     int m, Rng& rng) {
  if (m < 1) throw std::invalid_argument("draw_negatives: m must be >= 1");
  NegativeSample out;
  out.labels.resize(static_cast<std::size_t>(m));
  out.probs.resize(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    const int y = table.sample(rng);
    out.labels[static_cast<std::size_t>(i)] = y;
    out.probs[static_cast<std::size_t>(i)] = q[y];
  }
  return out;
}

inline NegativeSample draw_negatives(const LabelDistribution& q, int m, std::uint64_t seed) {
  AliasTable table(q);
  Rng rng(seed);
  return draw_negatives(q, table, m, rng);
}

inline NegativeSample draw_negatives(const RealizedQ& q, int m, std::uint64_t seed) {
  return draw_negatives(q.dist, m, seed);
}

/// Literal within-batch negatives: the deduplicated multiset of batch labels,
/// minus the positive.
inline std::vector<int> literal_batch_negatives(std::span<const int> batch_labels,
                                                int positive, int num_labels) {
  std::vector<char> seen(static_cast<std::size_t>(num_labels), 0);
  std::vector<int> out;
  for (int y : batch_labels) {
    if (y == positive) continue;
    if (y < 0 || y >= num_labels)
      throw std::invalid_argument("literal_batch_negatives: label out of range");
    if (!seen[static_cast<std::size_t>(y)]) {
      seen[static_cast<std::size_t>(y)] = 1;
      out.push_back(y);
    }
  }
  return out;
}

}  // namespace negsamp
