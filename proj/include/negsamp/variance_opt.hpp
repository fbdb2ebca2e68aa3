#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "negsamp/label_stats.hpp"
#include "negsamp/margin_pair.hpp"
#include "negsamp/weighting.hpp"

namespace negsamp {

/// The variance-minimizing sampling distribution for a target margin pattern,
/// when weights are chosen as w = rho/(m q) so the implicit loss is pinned.
struct VarianceProfile {
  LabelDistribution q_star;
  double achieved_variance = 0.0;
  /// True when every rho(y,y') * varphi(-f_{y'}) vanished: the loss on
  /// negatives is already zero and any q is vacuously optimal.
  bool degenerate = false;
};

/// Variance of the sampled decoupled negative-loss estimator under sampling
/// distribution q with margin-preserving weights w = rho/(m q):
///   (1/m) [ sum_{y'} rho^2 varphi^2 / q(y')  -  (sum_{y'} rho varphi)^2 ].
inline double variance_under(const LabelDistribution& q, int y,
                             std::span<const double> f, const MarginMatrix& rho, int m,
                             const MarginLossPair& pair) {
  if (m < 1) throw std::invalid_argument("variance_under: m must be >= 1");
  if (q.prob(y) > 0.0)
    throw std::invalid_argument("variance_under: q must exclude the positive label");
  double second = 0.0, mean = 0.0;
  for (int j = 0; j < q.num_labels(); ++j) {
    if (j == y) continue;
    const double term = rho(y, j) * pair.neg_value(-f[static_cast<std::size_t>(j)]);
    if (term < 0.0) throw std::domain_error("variance_under: rho must be >= 0");
    if (term == 0.0) continue;
    const double qj = q.prob(j);
    if (qj <= 0.0)
      throw std::domain_error(
          "variance_under: q must cover the support of rho * varphi");
    second += term * term / qj;
    mean += term;
  }
  double v = (second - mean * mean) / static_cast<double>(m);
  // second >= mean^2 by Cauchy-Schwarz; rounding can leave a tiny negative
  if (v < 0.0) v = 0.0;
  return v;
}

/// q*(y') proportional to rho(y,y') * varphi(-f_{y'}); samples exactly the
/// negatives that contribute to the decoupled loss. The resulting estimator
/// of the negative-loss sum is constant, so the achieved variance is zero
/// whenever the profile is proper.
inline VarianceProfile optimal_q(int y, std::span<const double> f, const MarginMatrix& rho,
                                 const MarginLossPair& pair, int m = 1) {
  const int L = static_cast<int>(f.size());
  if (L < 2) throw std::invalid_argument("optimal_q: need at least two labels");
  std::vector<double> w(static_cast<std::size_t>(L), 0.0);
  double total = 0.0;
  for (int j = 0; j < L; ++j) {
    if (j == y) continue;
    const double term = rho(y, j) * pair.neg_value(-f[static_cast<std::size_t>(j)]);
    if (term < 0.0) throw std::domain_error("optimal_q: rho must be >= 0");
    w[static_cast<std::size_t>(j)] = term;
    total += term;
  }

  VarianceProfile profile;
  if (total <= 0.0) {
    // All-zero numerator: the scorer already separates every negative.
    profile.degenerate = true;
    std::vector<double> u(static_cast<std::size_t>(L),
                          1.0 / static_cast<double>(L - 1));
    u[static_cast<std::size_t>(y)] = 0.0;
    profile.q_star = LabelDistribution::from_weights(u);
    profile.achieved_variance = 0.0;
    return profile;
  }
  profile.q_star = LabelDistribution::from_weights(w);
  profile.achieved_variance = variance_under(profile.q_star, y, f, rho, m, pair);
  return profile;
}

}  // namespace negsamp
