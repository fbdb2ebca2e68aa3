#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "negsamp/config.hpp"
#include "negsamp/dataset.hpp"
#include "negsamp/label_stats.hpp"
#include "negsamp/losses.hpp"
#include "negsamp/margin_pair.hpp"
#include "negsamp/metrics.hpp"
#include "negsamp/model.hpp"
#include "negsamp/rng.hpp"
#include "negsamp/sampler.hpp"
#include "negsamp/weighting.hpp"

namespace negsamp {

/// Which surrogate the trainer minimizes. Sampled families draw fresh
/// negatives every step; the others run over all L labels.
struct LossSpec {
  enum class Family { SoftmaxCE, Decoupled, MarginCE, SampledSoftmax, SampledDecoupled };
  Family family = Family::SampledSoftmax;
  MarginLossPair pair = MarginLossPair::softplus();  // decoupled families
  std::string margin_preset = "logit_adjusted";      // margin_ce only

  bool sampled() const {
    return family == Family::SampledSoftmax || family == Family::SampledDecoupled;
  }
  bool decoupled() const {
    return family == Family::Decoupled || family == Family::SampledDecoupled;
  }
  bool cosine_scores() const { return decoupled() && pair.cosine_scores(); }

  std::string name() const {
    switch (family) {
      case Family::SoftmaxCE: return "softmax_ce";
      case Family::Decoupled: return "decoupled:" + pair.name();
      case Family::MarginCE: return "margin_ce:" + margin_preset;
      case Family::SampledSoftmax: return "sampled_softmax";
      case Family::SampledDecoupled: return "sampled_decoupled:" + pair.name();
    }
    return "?";
  }

  /// softmax_ce | decoupled:<pair> | margin_ce:<preset> | sampled_softmax |
  /// sampled_decoupled:<pair>
  static LossSpec parse(const std::string& text) {
    LossSpec spec;
    if (text == "softmax_ce") {
      spec.family = Family::SoftmaxCE;
      return spec;
    }
    if (text == "sampled_softmax") {
      spec.family = Family::SampledSoftmax;
      return spec;
    }
    const auto colon = text.find(':');
    const std::string head = text.substr(0, colon);
    const std::string arg = colon == std::string::npos ? "" : text.substr(colon + 1);
    if (head == "decoupled" || head == "sampled_decoupled") {
      spec.family = head == "decoupled" ? Family::Decoupled : Family::SampledDecoupled;
      spec.pair = MarginLossPair::parse(arg);
      return spec;
    }
    if (head == "margin_ce") {
      if (arg.empty()) throw std::invalid_argument("margin_ce needs a preset");
      spec.family = Family::MarginCE;
      spec.margin_preset = arg;
      return spec;
    }
    throw std::invalid_argument("unknown loss spec: " + text);
  }
};

/// Full description of one harness run.
struct ExperimentConfig {
  ImbalanceProfile profile{ImbalanceProfile::Kind::Step, 100, 100.0};
  int dim = 64;
  int train_size = 20000;
  int test_per_class = 100;
  double noise_scale = 1.0;

  enum class Model { Linear, Mlp } model = Model::Linear;
  int hidden_width = 64;

  LossSpec loss;

  enum class Sampler { Uniform, WithinBatch, ModelBased, FullEnumeration } sampler =
      Sampler::WithinBatch;
  bool exclude_positive = true;
  enum class BatchMode { Frequency, Literal } batch_mode = BatchMode::Frequency;
  std::string weighting = "constant";
  int negatives = 32;  // m

  double lr = 0.1;
  double momentum = 0.9;
  int epochs = 50;
  int batch_size = 128;

  std::int64_t slice_hi = 100;
  std::int64_t slice_lo = 20;

  std::uint64_t seed = 1;

  static ExperimentConfig from_kv(const KVConfig& kv) {
    ExperimentConfig cfg;
    const std::string kind = kv.get_or("profile.kind", "step");
    if (kind == "step")
      cfg.profile.kind = ImbalanceProfile::Kind::Step;
    else if (kind == "exp")
      cfg.profile.kind = ImbalanceProfile::Kind::Exp;
    else
      throw std::runtime_error("profile.kind must be step or exp");
    cfg.profile.num_labels = static_cast<int>(kv.get_int("profile.num_labels", 100));
    cfg.profile.imbalance_ratio = kv.get_double("profile.imbalance_ratio", 100.0);

    cfg.dim = static_cast<int>(kv.get_int("data.dim", 64));
    cfg.train_size = static_cast<int>(kv.get_int("data.train_size", 20000));
    cfg.test_per_class = static_cast<int>(kv.get_int("data.test_per_class", 100));
    cfg.noise_scale = kv.get_double("data.noise_scale", 1.0);

    const std::string model = kv.get_or("model.kind", "linear");
    if (model == "linear")
      cfg.model = Model::Linear;
    else if (model == "mlp")
      cfg.model = Model::Mlp;
    else
      throw std::runtime_error("model.kind must be linear or mlp");
    cfg.hidden_width = static_cast<int>(kv.get_int("model.hidden_width", 64));

    cfg.loss = LossSpec::parse(kv.get_or("loss", "sampled_softmax"));

    const std::string sampler = kv.get_or("sampling.kind", "within_batch");
    if (sampler == "uniform")
      cfg.sampler = Sampler::Uniform;
    else if (sampler == "within_batch")
      cfg.sampler = Sampler::WithinBatch;
    else if (sampler == "model_based")
      cfg.sampler = Sampler::ModelBased;
    else if (sampler == "full_enumeration")
      cfg.sampler = Sampler::FullEnumeration;
    else
      throw std::runtime_error("unknown sampling.kind: " + sampler);
    cfg.exclude_positive = kv.get_bool("sampling.exclude_positive", true);
    const std::string mode = kv.get_or("sampling.batch_mode", "frequency");
    if (mode == "frequency")
      cfg.batch_mode = BatchMode::Frequency;
    else if (mode == "literal")
      cfg.batch_mode = BatchMode::Literal;
    else
      throw std::runtime_error("sampling.batch_mode must be frequency or literal");

    cfg.weighting = kv.get_or("weighting", "constant");
    cfg.negatives = static_cast<int>(kv.get_int("negatives", 32));

    cfg.lr = kv.get_double("optimizer.lr", 0.1);
    cfg.momentum = kv.get_double("optimizer.momentum", 0.9);
    cfg.epochs = static_cast<int>(kv.get_int("optimizer.epochs", 50));
    cfg.batch_size = static_cast<int>(kv.get_int("optimizer.batch_size", 128));

    cfg.slice_hi = kv.get_int("slices.hi", 100);
    cfg.slice_lo = kv.get_int("slices.lo", 20);

    cfg.seed = static_cast<std::uint64_t>(kv.get_int("seed", 1));
    cfg.validate();
    return cfg;
  }

  KVConfig to_kv() const {
    KVConfig kv;
    kv.set("profile.kind",
           profile.kind == ImbalanceProfile::Kind::Step ? std::string("step")
                                                        : std::string("exp"));
    kv.set("profile.num_labels", static_cast<std::int64_t>(profile.num_labels));
    kv.set("profile.imbalance_ratio", profile.imbalance_ratio);
    kv.set("data.dim", static_cast<std::int64_t>(dim));
    kv.set("data.train_size", static_cast<std::int64_t>(train_size));
    kv.set("data.test_per_class", static_cast<std::int64_t>(test_per_class));
    kv.set("data.noise_scale", noise_scale);
    kv.set("model.kind", model == Model::Linear ? std::string("linear") : std::string("mlp"));
    kv.set("model.hidden_width", static_cast<std::int64_t>(hidden_width));
    kv.set("loss", loss.name());
    kv.set("sampling.kind", sampler_name());
    kv.set("sampling.exclude_positive", exclude_positive);
    kv.set("sampling.batch_mode",
           batch_mode == BatchMode::Frequency ? std::string("frequency")
                                              : std::string("literal"));
    kv.set("weighting", weighting);
    kv.set("negatives", static_cast<std::int64_t>(negatives));
    kv.set("optimizer.lr", lr);
    kv.set("optimizer.momentum", momentum);
    kv.set("optimizer.epochs", static_cast<std::int64_t>(epochs));
    kv.set("optimizer.batch_size", static_cast<std::int64_t>(batch_size));
    kv.set("slices.hi", slice_hi);
    kv.set("slices.lo", slice_lo);
    kv.set("seed", static_cast<std::int64_t>(seed));
    return kv;
  }

  std::string sampler_name() const {
    switch (sampler) {
      case Sampler::Uniform: return "uniform";
      case Sampler::WithinBatch: return "within_batch";
      case Sampler::ModelBased: return "model_based";
      case Sampler::FullEnumeration: return "full_enumeration";
    }
    return "?";
  }

  void validate() const {
    if (profile.num_labels < 2) throw std::runtime_error("profile.num_labels must be >= 2");
    if (loss.sampled() && negatives < 1)
      throw std::runtime_error("negatives must be >= 1 for sampled losses");
    if (batch_mode == BatchMode::Literal && sampler == Sampler::WithinBatch &&
        batch_size < negatives)
      throw std::runtime_error("literal within-batch mode needs batch_size >= negatives");
    if (epochs < 0 || batch_size < 1) throw std::runtime_error("bad optimizer settings");
    if (lr < 0.0 || momentum < 0.0 || momentum >= 1.0)
      throw std::runtime_error("bad optimizer settings");
  }
};

/// Training aborted because the loss stopped being finite.
struct DivergenceError : std::runtime_error {
  DivergenceError(int epoch, int step)
      : std::runtime_error("training diverged (loss not finite) at epoch " +
                           std::to_string(epoch) + ", step " + std::to_string(step)),
        epoch(epoch),
        step(step) {}
  int epoch;
  int step;
};

namespace detail {

/// Per-run sampling machinery: realizes q and draws negatives for one
/// example, given whatever batch-level state the sampler needs.
class NegativeEngine {
 public:
  NegativeEngine(const ExperimentConfig& cfg, int num_labels, std::uint64_t seed)
      : cfg_(cfg), L_(num_labels), rng_(seed) {
    if (cfg.sampler == ExperimentConfig::Sampler::Uniform ||
        cfg.sampler == ExperimentConfig::Sampler::FullEnumeration) {
      SamplingScheme scheme{SamplingScheme::Kind::Uniform, L_, {},
                            cfg.exclude_positive ||
                                cfg.sampler == ExperimentConfig::Sampler::FullEnumeration};
      uniform_q_.reserve(static_cast<std::size_t>(L_));
      for (int y = 0; y < L_; ++y) uniform_q_.push_back(realize_q(scheme, {}, y));
    }
  }

  void begin_batch(std::span<const int> batch_labels) {
    if (cfg_.sampler != ExperimentConfig::Sampler::WithinBatch) return;
    batch_labels_.assign(batch_labels.begin(), batch_labels.end());
    std::vector<std::int64_t> counts(static_cast<std::size_t>(L_), 0);
    for (int y : batch_labels) ++counts[static_cast<std::size_t>(y)];
    batch_base_ = LabelDistribution::from_counts(counts);
    batch_alias_.emplace(batch_base_);
  }

  /// Realized q plus drawn negatives for the example. `full_scores` is
  /// consulted only by the model-based sampler.
  std::pair<RealizedQ, NegativeSample> negatives_for(
      int y, std::span<const double> full_scores) {
    switch (cfg_.sampler) {
      case ExperimentConfig::Sampler::FullEnumeration: {
        NegativeSample neg;
        neg.labels.reserve(static_cast<std::size_t>(L_ - 1));
        const RealizedQ& q = uniform_q_[static_cast<std::size_t>(y)];
        for (int j = 0; j < L_; ++j)
          if (j != y) {
            neg.labels.push_back(j);
            neg.probs.push_back(q.dist[j]);
          }
        return {q, std::move(neg)};
      }
      case ExperimentConfig::Sampler::Uniform: {
        if (cfg_.exclude_positive) {
          const RealizedQ& q = uniform_q_[static_cast<std::size_t>(y)];
          NegativeSample neg;
          neg.labels.resize(static_cast<std::size_t>(cfg_.negatives));
          neg.probs.resize(static_cast<std::size_t>(cfg_.negatives));
          for (int i = 0; i < cfg_.negatives; ++i) {
            int j = static_cast<int>(rng_.uniform_index(static_cast<unsigned>(L_ - 1)));
            if (j >= y) ++j;  // index-shift exclusion
            neg.labels[static_cast<std::size_t>(i)] = j;
            neg.probs[static_cast<std::size_t>(i)] = q.dist[j];
          }
          return {q, std::move(neg)};
        }
        RealizedQ q{LabelDistribution::uniform(L_)};
        NegativeSample neg;
        neg.labels.resize(static_cast<std::size_t>(cfg_.negatives));
        neg.probs.assign(static_cast<std::size_t>(cfg_.negatives),
                         1.0 / static_cast<double>(L_));
        for (int i = 0; i < cfg_.negatives; ++i)
          neg.labels[static_cast<std::size_t>(i)] =
              static_cast<int>(rng_.uniform_index(static_cast<unsigned>(L_)));
        return {q, std::move(neg)};
      }
      case ExperimentConfig::Sampler::WithinBatch: {
        if (!batch_alias_) throw std::logic_error("negatives_for: no batch state");
        if (cfg_.batch_mode == ExperimentConfig::BatchMode::Literal) {
          RealizedQ q = cfg_.exclude_positive ? exclude_positive(batch_base_, y)
                                              : RealizedQ(batch_base_);
          NegativeSample neg;
          neg.labels = literal_batch_negatives(batch_labels_, y, L_);
          for (int j : neg.labels) neg.probs.push_back(q.dist[j]);
          return {std::move(q), std::move(neg)};
        }
        if (cfg_.exclude_positive) {
          RealizedQ q = exclude_positive(batch_base_, y);
          NegativeSample neg = draw_rejecting(y, q.dist);
          return {std::move(q), std::move(neg)};
        }
        RealizedQ q{batch_base_};
        NegativeSample neg;
        neg.labels.resize(static_cast<std::size_t>(cfg_.negatives));
        neg.probs.resize(static_cast<std::size_t>(cfg_.negatives));
        for (int i = 0; i < cfg_.negatives; ++i) {
          const int j = batch_alias_->sample(rng_);
          neg.labels[static_cast<std::size_t>(i)] = j;
          neg.probs[static_cast<std::size_t>(i)] = batch_base_[j];
        }
        return {std::move(q), std::move(neg)};
      }
      case ExperimentConfig::Sampler::ModelBased: {
        SamplingScheme scheme{SamplingScheme::Kind::ModelBased, 0, {},
                              cfg_.exclude_positive};
        RealizedQ q = realize_q(scheme, {.batch_labels = {}, .logits = full_scores}, y);
        AliasTable table(q.dist);
        NegativeSample neg = draw_negatives(q.dist, table, cfg_.negatives, rng_);
        return {std::move(q), std::move(neg)};
      }
    }
    throw std::logic_error("negatives_for: unreachable");
  }

  bool needs_full_scores() const {
    return cfg_.sampler == ExperimentConfig::Sampler::ModelBased;
  }

 private:
  NegativeSample draw_rejecting(int y, const LabelDistribution& q_excl) {
    NegativeSample neg;
    neg.labels.resize(static_cast<std::size_t>(cfg_.negatives));
    neg.probs.resize(static_cast<std::size_t>(cfg_.negatives));
    for (int i = 0; i < cfg_.negatives; ++i) {
      int j = -1;
      for (int attempt = 0; attempt < 100000; ++attempt) {
        j = batch_alias_->sample(rng_);
        if (j != y) break;
        j = -1;
      }
      if (j < 0) throw std::logic_error("rejection sampling starved");
      neg.labels[static_cast<std::size_t>(i)] = j;
      neg.probs[static_cast<std::size_t>(i)] = q_excl[j];
    }
    return neg;
  }

  const ExperimentConfig& cfg_;
  int L_;
  Rng rng_;
  std::vector<RealizedQ> uniform_q_;
  std::vector<int> batch_labels_;
  LabelDistribution batch_base_;
  std::optional<AliasTable> batch_alias_;
};

}  // namespace detail

struct TrainTrace {
  std::vector<double> epoch_loss;  // mean per-example training loss
  int steps = 0;
};

/// Minibatch SGD with momentum on the configured loss. Deterministic given
/// the config; negatives are drawn fresh each step.
template <Scorer M>
TrainTrace train_scorer(M& model, const ExperimentConfig& cfg,
                        const SyntheticDataset& data,
                        const LabelDistribution& pi_weighting,
                        int max_steps = -1) {
  const int L = data.num_labels;
  const int n = data.train_size();
  const int m_cfg = cfg.sampler == ExperimentConfig::Sampler::FullEnumeration
                        ? L - 1
                        : cfg.negatives;

  WeightingScheme weighting = WeightingScheme::parse(cfg.weighting, pi_weighting);
  std::optional<MarginMatrix> margin;  // margin_ce family
  if (cfg.loss.family == LossSpec::Family::MarginCE)
    margin = MarginMatrix::parse_preset(cfg.loss.margin_preset, pi_weighting);

  detail::NegativeEngine engine(cfg, L, rng::derive_seed(cfg.seed, "negatives"));
  Rng shuffle_rng(rng::derive_seed(cfg.seed, "shuffle"));

  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);

  std::vector<int> all_labels(static_cast<std::size_t>(L));
  std::iota(all_labels.begin(), all_labels.end(), 0);

  typename M::Workspace ws;
  std::vector<double> full_scores(static_cast<std::size_t>(L));
  std::vector<double> full_grad(static_cast<std::size_t>(L));
  std::vector<int> cand_labels;
  std::vector<double> cand_scores, cand_grad, neg_weights, neg_scores;
  std::vector<int> batch;

  TrainTrace trace;
  const bool sampled = cfg.loss.sampled();
  const bool need_full = !sampled || engine.needs_full_scores();

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    // Fisher-Yates, seeded
    for (int i = n - 1; i > 0; --i) {
      const int j = static_cast<int>(shuffle_rng.uniform_index(static_cast<unsigned>(i + 1)));
      std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
    }

    double epoch_loss = 0.0;
    int epoch_examples = 0;
    for (int start = 0; start < n; start += cfg.batch_size) {
      if (max_steps >= 0 && trace.steps >= max_steps) return trace;
      const int stop = std::min(n, start + cfg.batch_size);
      batch.clear();
      for (int i = start; i < stop; ++i)
        batch.push_back(data.train_labels[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])]);
      engine.begin_batch(batch);

      for (int i = start; i < stop; ++i) {
        const int row = order[static_cast<std::size_t>(i)];
        const int y = data.train_labels[static_cast<std::size_t>(row)];
        const double* x = data.train_features.data() +
                          static_cast<std::size_t>(row) * data.dim;
        model.forward(x, ws);
        if (need_full) model.scores(ws, x, all_labels, full_scores);

        double example_loss = 0.0;
        if (sampled) {
          auto [q, neg] = engine.negatives_for(y, full_scores);
          const int m = cfg.batch_mode == ExperimentConfig::BatchMode::Literal &&
                                cfg.sampler == ExperimentConfig::Sampler::WithinBatch
                            ? std::max<int>(1, neg.count())
                            : m_cfg;
          const int k = neg.count();
          cand_labels.assign(1, y);
          cand_labels.insert(cand_labels.end(), neg.labels.begin(), neg.labels.end());
          cand_scores.resize(cand_labels.size());
          model.scores(ws, x, cand_labels, cand_scores);

          neg_weights.resize(static_cast<std::size_t>(k));
          for (int t = 0; t < k; ++t)
            neg_weights[static_cast<std::size_t>(t)] = negative_weight(
                weighting, y, neg.labels[static_cast<std::size_t>(t)], q, m);

          cand_grad.assign(cand_labels.size(), 0.0);
          if (cfg.loss.family == LossSpec::Family::SampledSoftmax) {
            neg_scores.assign(cand_scores.begin() + 1, cand_scores.end());
            WeightedCEKernel kernel(cand_scores[0], neg_scores, neg_weights, true);
            example_loss = kernel.loss;
            cand_grad[0] = kernel.dpos;
            for (int t = 0; t < k; ++t)
              cand_grad[static_cast<std::size_t>(t + 1)] = kernel.dneg[static_cast<std::size_t>(t)];
          } else {
            const auto& pair = cfg.loss.pair;
            example_loss = pair.pos_value(cand_scores[0]);
            cand_grad[0] = pair.pos_deriv(cand_scores[0]);
            for (int t = 0; t < k; ++t) {
              const double s = cand_scores[static_cast<std::size_t>(t + 1)];
              const double w = neg_weights[static_cast<std::size_t>(t)];
              example_loss += w * pair.neg_value(-s);
              cand_grad[static_cast<std::size_t>(t + 1)] = -w * pair.neg_deriv(-s);
            }
          }
          model.accumulate(x, ws, cand_labels, cand_grad);
        } else {
          switch (cfg.loss.family) {
            case LossSpec::Family::SoftmaxCE:
              example_loss = softmax_ce(y, full_scores);
              softmax_ce_grad(y, full_scores, full_grad);
              break;
            case LossSpec::Family::Decoupled:
              example_loss = decoupled_loss(y, full_scores, cfg.loss.pair);
              decoupled_grad(y, full_scores, cfg.loss.pair, full_grad);
              break;
            case LossSpec::Family::MarginCE:
              example_loss = margin_ce(y, full_scores, *margin);
              margin_ce_grad(y, full_scores, *margin, full_grad);
              break;
            default:
              throw std::logic_error("train: unexpected loss family");
          }
          model.accumulate(x, ws, all_labels, full_grad);
        }

        if (!std::isfinite(example_loss))
          throw DivergenceError(epoch, trace.steps);
        epoch_loss += example_loss;
        ++epoch_examples;
      }

      model.step(cfg.lr, cfg.momentum, 1.0 / static_cast<double>(stop - start));
      ++trace.steps;
    }
    if (epoch_examples > 0) trace.epoch_loss.push_back(epoch_loss / epoch_examples);
    if (!trace.epoch_loss.empty() && !std::isfinite(trace.epoch_loss.back()))
      throw DivergenceError(epoch, trace.steps);
  }
  return trace;
}

using AnyModel = std::variant<LinearModel, MlpModel>;

struct RunResult {
  SlicedMetrics metrics;
  TrainTrace trace;
  LabelSlices slices;
};

inline AnyModel make_model(const ExperimentConfig& cfg) {
  const bool cosine = cfg.loss.cosine_scores();
  const std::uint64_t init_seed = rng::derive_seed(cfg.seed, "init");
  if (cfg.model == ExperimentConfig::Model::Linear)
    return LinearModel(cfg.profile.num_labels, cfg.dim, cosine, init_seed);
  return MlpModel(cfg.profile.num_labels, cfg.dim, cfg.hidden_width, cosine, init_seed);
}

/// One full experiment: data generation, training, sliced evaluation.
inline RunResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const LabelDistribution pi = make_profile(cfg.profile);
  const SyntheticDataset data =
      generate_dataset(pi, cfg.dim, cfg.train_size, cfg.test_per_class, cfg.noise_scale,
                       rng::derive_seed(cfg.seed, "data"));
  // Weightings and margin presets see the empirical train distribution, with
  // never-seen classes floored at count 1 so ratios stay finite.
  const LabelDistribution pi_weighting = data.empirical_pi_positive();

  RunResult result;
  result.slices = slice_labels(data.train_counts, cfg.slice_hi, cfg.slice_lo);

  AnyModel model = make_model(cfg);
  std::visit(
      [&](auto& scorer) {
        result.trace = train_scorer(scorer, cfg, data, pi_weighting);
        result.metrics = evaluate(scorer, data, result.slices);
      },
      model);
  return result;
}

}  // namespace negsamp
