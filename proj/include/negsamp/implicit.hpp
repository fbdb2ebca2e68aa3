#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "negsamp/label_stats.hpp"
#include "negsamp/losses.hpp"
#include "negsamp/margin_pair.hpp"
#include "negsamp/sampler.hpp"
#include "negsamp/weighting.hpp"

namespace negsamp {

/// Closed-form description of what a (q, w, m) scheme optimizes in
/// expectation. For decoupled losses the expectation and variance are exact;
/// for the softmax cross-entropy `expected_or_bound` is the Jensen upper
/// bound and `variance` is the large-m delta-method approximation of the
/// squared deviation from it.
struct ImplicitLossReport {
  double expected_or_bound = 0.0;
  double variance = 0.0;
  bool is_exact = false;
  std::vector<double> rho_used;  // per-label implied margin; 0 at the positive
};

namespace detail {

inline void require_excluded(int y, const RealizedQ& q, const char* who) {
  if (q.dist[y] > 0.0)
    throw std::invalid_argument(std::string(who) +
                                ": q must place zero mass on the positive label");
}

/// Implied margins m*w*q over all labels; zero where q is zero.
inline std::vector<double> margins_for(int y, std::span<const double> f,
                                       const RealizedQ& q, const WeightingScheme& scheme,
                                       int m) {
  std::vector<double> rho(f.size(), 0.0);
  for (std::size_t j = 0; j < f.size(); ++j) {
    if (static_cast<int>(j) == y || q.dist[static_cast<int>(j)] <= 0.0) continue;
    rho[j] = implied_margin(scheme, y, static_cast<int>(j), q, m);
  }
  return rho;
}

}  // namespace detail

/// Exact expectation and variance of the sampled decoupled loss over the
/// draw of m i.i.d. negatives:
///   E = phi(f_y) + sum_{y'} rho(y,y') varphi(-f_{y'})
///   V = sum_{y'} w(y,y') rho(y,y') varphi^2 - (1/m) (sum_{y'} rho varphi)^2
/// with rho(y,y') = m * w(y,y') * q(y').
inline ImplicitLossReport implicit_decoupled(int y, std::span<const double> f,
                                             const RealizedQ& q,
                                             const WeightingScheme& scheme, int m,
                                             const MarginLossPair& pair) {
  detail::require_excluded(y, q, "implicit_decoupled");
  if (m < 1) throw std::invalid_argument("implicit_decoupled: m must be >= 1");

  ImplicitLossReport report;
  report.is_exact = true;
  report.rho_used = detail::margins_for(y, f, q, scheme, m);

  double mean_neg = 0.0;     // sum rho * varphi
  double second = 0.0;       // sum w * rho * varphi^2
  for (std::size_t j = 0; j < f.size(); ++j) {
    if (static_cast<int>(j) == y || q.dist[static_cast<int>(j)] <= 0.0) continue;
    const double v = pair.neg_value(-f[j]);
    const double w = negative_weight(scheme, y, static_cast<int>(j), q, m);
    const double rho = report.rho_used[j];
    mean_neg += rho * v;
    second += w * rho * v * v;
  }
  report.expected_or_bound = pair.pos_value(f[static_cast<std::size_t>(y)]) + mean_neg;
  // second >= mean^2/m holds in exact arithmetic; cancellation can leave a
  // tiny negative when the true variance is ~0
  report.variance = std::max(0.0, second - mean_neg * mean_neg / static_cast<double>(m));
  return report;
}

/// Convergence quantities for the sampled softmax cross-entropy with weights
/// w = eta/m: mu = e^{f_y} + E_{y'~q}[eta(y') e^{f_{y'}}] (the partition
/// function when eta = 1/q), and sigma_sq = V_{y'~q}[eta(y') e^{f_{y'}}].
struct ConvergenceQuantities {
  double mu = 0.0;
  double sigma_sq = 0.0;
};

inline ConvergenceQuantities convergence_quantities(
    int y, std::span<const double> f, const LabelDistribution& q,
    const std::function<double(int)>& eta) {
  if (q.prob(y) > 0.0)
    throw std::invalid_argument(
        "convergence_quantities: q must place zero mass on the positive label");
  double mean = 0.0, second = 0.0;
  for (int j = 0; j < q.num_labels(); ++j) {
    const double qj = q.prob(j);
    if (qj <= 0.0) continue;
    const double x = eta(j) * std::exp(f[static_cast<std::size_t>(j)]);
    if (!std::isfinite(x))
      throw std::domain_error("convergence_quantities: eta * e^f not finite");
    mean += qj * x;
    second += qj * x * x;
  }
  ConvergenceQuantities out;
  out.mu = std::exp(f[static_cast<std::size_t>(y)]) + mean;
  out.sigma_sq = std::max(0.0, second - mean * mean);
  return out;
}

/// Jensen upper bound on the expected sampled softmax cross-entropy:
///   E[loss] <= log[1 + sum_{y'} rho(y,y') e^{f_{y'} - f_y}],
/// i.e. the pairwise-margin loss with the scheme's implied margins. The
/// returned variance is sigma^2 / (m mu^2), the squared-error rate at which
/// the sampled loss concentrates around the bound for large m.
inline ImplicitLossReport implicit_softmax_bound(int y, std::span<const double> f,
                                                 const RealizedQ& q,
                                                 const WeightingScheme& scheme, int m) {
  detail::require_excluded(y, q, "implicit_softmax_bound");
  if (m < 1) throw std::invalid_argument("implicit_softmax_bound: m must be >= 1");

  ImplicitLossReport report;
  report.is_exact = false;
  report.rho_used = detail::margins_for(y, f, q, scheme, m);

  std::vector<double> terms;
  terms.reserve(f.size());
  for (std::size_t j = 0; j < f.size(); ++j) {
    if (report.rho_used[j] <= 0.0) continue;
    terms.push_back(std::log(report.rho_used[j]) + f[j] - f[static_cast<std::size_t>(y)]);
  }
  report.expected_or_bound = detail::log1p_sum_exp(terms);

  const auto quantities = convergence_quantities(
      y, f, q.dist, [&](int j) {
        return static_cast<double>(m) * negative_weight(scheme, y, j, q, m);
      });
  report.variance =
      quantities.sigma_sq / (static_cast<double>(m) * quantities.mu * quantities.mu);
  return report;
}

}  // namespace negsamp
