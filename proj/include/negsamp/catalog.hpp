#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "negsamp/label_stats.hpp"
#include "negsamp/sampler.hpp"
#include "negsamp/weighting.hpp"

namespace negsamp {

/// The catalog enumerates the implicit loss of every stock
/// (sampler x weighting) combination, for both loss families, as a
/// closed-form margin pattern plus a qualitative head/tail annotation.
///
/// Two conventions are exposed for where the positive label's mass goes.
/// Exclusive: q places zero mass on the positive and renormalizes over the
/// remaining L-1 labels (the convention the generic implicit operations
/// require). Inclusive: q is the raw base distribution over all L labels;
/// the familiar textbook patterns (e.g. 1/L for uniform+constant) arise
/// under this convention.
enum class QConvention { Exclusive, Inclusive };

enum class CatalogSampler { Uniform, WithinBatch };
enum class CatalogWeighting { Constant, Importance, Relative, Tail };
enum class LossFamily { SoftmaxCE, Decoupled };

enum class BiasDirection {
  Unbiased,          // implied margins are 1: the unsampled loss
  HeadBenefiting,    // dominant labels favored
  TailBenefiting,    // rare labels favored
  ScaledNegatives,   // uniform down/up-weighting of all negatives
};

struct CatalogRow {
  CatalogSampler sampler;
  CatalogWeighting weighting;
  LossFamily family;
  QConvention convention;
  std::string sampler_name;
  std::string weighting_name;
  std::string margin_pattern;  // printable rho(y,y')
  std::string comment;
  BiasDirection bias;
  MarginMatrix rho;  // numeric margins under `convention`
};

inline std::string catalog_sampler_name(CatalogSampler s) {
  return s == CatalogSampler::Uniform ? "uniform" : "within_batch";
}

inline std::string catalog_weighting_name(CatalogWeighting w) {
  switch (w) {
    case CatalogWeighting::Constant: return "constant";
    case CatalogWeighting::Importance: return "importance";
    case CatalogWeighting::Relative: return "relative";
    case CatalogWeighting::Tail: return "tail";
  }
  return "?";
}

/// The sampling distribution a catalog sampler realizes for positive y.
inline RealizedQ catalog_q(CatalogSampler sampler, const LabelDistribution& pi, int y,
                           QConvention convention) {
  const LabelDistribution base = sampler == CatalogSampler::Uniform
                                     ? LabelDistribution::uniform(pi.num_labels())
                                     : pi;
  if (convention == QConvention::Exclusive) return exclude_positive(base, y);
  return RealizedQ(base);
}

/// The weighting scheme a catalog row pairs with that distribution.
inline WeightingScheme catalog_weighting(CatalogWeighting weighting,
                                         const LabelDistribution& pi) {
  switch (weighting) {
    case CatalogWeighting::Constant: return WeightingScheme::constant();
    case CatalogWeighting::Importance: return WeightingScheme::importance();
    case CatalogWeighting::Relative: return WeightingScheme::relative();
    case CatalogWeighting::Tail: return WeightingScheme::tail(pi);
  }
  throw std::logic_error("catalog_weighting: unreachable");
}

inline CatalogRow catalog_row(CatalogSampler sampler, CatalogWeighting weighting,
                              LossFamily family, const LabelDistribution& pi, int m,
                              QConvention convention = QConvention::Exclusive) {
  if (m < 1) throw std::invalid_argument("catalog_row: m must be >= 1");
  if (pi.min_prob() <= 0.0)
    throw std::invalid_argument("catalog_row: pi must be strictly positive");

  const int L = pi.num_labels();
  const double md = static_cast<double>(m);
  const bool exclusive = convention == QConvention::Exclusive;
  const bool uniform = sampler == CatalogSampler::Uniform;

  CatalogRow row;
  row.sampler = sampler;
  row.weighting = weighting;
  row.family = family;
  row.convention = convention;
  row.sampler_name = catalog_sampler_name(sampler);
  row.weighting_name = catalog_weighting_name(weighting);

  auto pi_probs = pi.probs();
  switch (weighting) {
    case CatalogWeighting::Constant: {
      if (uniform) {
        // rho = q(y') : 1/L inclusive, 1/(L-1) exclusive
        const double v = exclusive ? 1.0 / static_cast<double>(L - 1)
                                   : 1.0 / static_cast<double>(L);
        row.rho = MarginMatrix::constant(v);
        row.margin_pattern = exclusive ? "1/(L-1)" : "1/L";
        row.bias = BiasDirection::ScaledNegatives;
        row.comment = family == LossFamily::SoftmaxCE
                          ? "softmax with uniformly downweighted negatives"
                          : "scaled decoupled loss";
      } else {
        row.rho = MarginMatrix::custom(
            [pi_probs, exclusive](int y, int yp) {
              const double p = pi_probs[static_cast<std::size_t>(yp)];
              return exclusive ? p / (1.0 - pi_probs[static_cast<std::size_t>(y)]) : p;
            },
            "equalised");
        row.margin_pattern = exclusive ? "pi(y')/(1-pi(y))" : "pi(y')";
        row.bias = BiasDirection::TailBenefiting;
        row.comment = family == LossFamily::SoftmaxCE
                          ? "equalised loss: rare negatives downweighted"
                          : "tail-heavy decoupled loss";
      }
      break;
    }
    case CatalogWeighting::Importance: {
      row.rho = MarginMatrix::unit();
      row.margin_pattern = "1";
      row.bias = BiasDirection::Unbiased;
      row.comment = family == LossFamily::SoftmaxCE ? "softmax cross-entropy"
                                                    : "decoupled loss";
      break;
    }
    case CatalogWeighting::Relative: {
      if (uniform) {
        const double v = exclusive ? md / static_cast<double>(L - 1)
                                   : md / static_cast<double>(L);
        row.rho = MarginMatrix::constant(v);
        row.margin_pattern = exclusive ? "m/(L-1)" : "m/L";
        row.bias = BiasDirection::ScaledNegatives;
        row.comment = family == LossFamily::SoftmaxCE
                          ? "softmax with uniformly rescaled negatives"
                          : "scaled decoupled loss";
      } else {
        row.rho = MarginMatrix::custom(
            [pi_probs, md, exclusive](int y, int) {
              const double p = pi_probs[static_cast<std::size_t>(y)];
              return exclusive ? md * p / (1.0 - p) : md * p;
            },
            "head_scaled");
        row.margin_pattern = exclusive ? "m*pi(y)/(1-pi(y))" : "m*pi(y)";
        row.bias = BiasDirection::HeadBenefiting;
        row.comment = family == LossFamily::SoftmaxCE
                          ? "softmax with upweighted head positives"
                          : "head-heavy decoupled loss";
      }
      break;
    }
    case CatalogWeighting::Tail: {
      // Same margins for either sampler: the weight absorbs q.
      row.rho = MarginMatrix::custom(
          [pi_probs](int y, int yp) {
            return pi_probs[static_cast<std::size_t>(yp)] /
                   pi_probs[static_cast<std::size_t>(y)];
          },
          "logit_adjusted");
      row.margin_pattern = "pi(y')/pi(y)";
      row.bias = BiasDirection::TailBenefiting;
      row.comment = family == LossFamily::SoftmaxCE ? "logit-adjusted loss"
                                                    : "tail-heavy decoupled loss";
      break;
    }
  }
  return row;
}

/// All 16 rows: {uniform, within-batch} x {constant, importance, relative,
/// tail} x {softmax, decoupled}.
inline std::vector<CatalogRow> full_catalog(const LabelDistribution& pi, int m,
                                            QConvention convention = QConvention::Exclusive) {
  std::vector<CatalogRow> rows;
  for (auto family : {LossFamily::SoftmaxCE, LossFamily::Decoupled})
    for (auto sampler : {CatalogSampler::Uniform, CatalogSampler::WithinBatch})
      for (auto weighting : {CatalogWeighting::Constant, CatalogWeighting::Importance,
                             CatalogWeighting::Relative, CatalogWeighting::Tail})
        rows.push_back(catalog_row(sampler, weighting, family, pi, m, convention));
  return rows;
}

/// The "tail" weighting of a catalog row needs pi; expose the mapping from a
/// row to the concrete (q, w) pair so consumers can evaluate the generic
/// implicit operations against the row's closed form.
struct CatalogInstantiation {
  RealizedQ q;
  WeightingScheme weighting;
};

inline CatalogInstantiation instantiate_row(const CatalogRow& row,
                                            const LabelDistribution& pi, int y) {
  return {catalog_q(row.sampler, pi, y, row.convention),
          catalog_weighting(row.weighting, pi)};
}

}  // namespace negsamp
