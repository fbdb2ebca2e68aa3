#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "negsamp/label_stats.hpp"
#include "negsamp/margin_pair.hpp"
#include "negsamp/sampler.hpp"
#include "negsamp/weighting.hpp"

namespace negsamp {

namespace detail {

/// log(1 + sum_j e^{t_j}), max-shifted. When every term is <= 0 the log1p
/// path keeps tiny losses (e.g. well-separated logits) at full precision.
inline double log1p_sum_exp(std::span<const double> terms) {
  double mx = 0.0;
  for (double t : terms) mx = std::max(mx, t);
  if (mx == 0.0) {
    double s = 0.0;
    for (double t : terms) s += std::exp(t);
    return std::log1p(s);
  }
  double s = std::exp(-mx);
  for (double t : terms) s += std::exp(t - mx);
  return mx + std::log(s);
}

}  // namespace detail

/// Shared kernel for weighted softmax cross-entropies over an explicit
/// negative set: loss = log[1 + sum_i w_i e^{s_i - s_pos}]. Also exposes the
/// softmax-style derivatives: d/ds_i = w_i e^{s_i - s_pos} / Z and
/// d/ds_pos = 1/Z - 1 with Z = 1 + sum.
struct WeightedCEKernel {
  double loss = 0.0;
  double dpos = 0.0;
  std::vector<double> dneg;

  WeightedCEKernel(double s_pos, std::span<const double> s_neg,
                   std::span<const double> w, bool want_grad) {
    std::vector<double> terms;
    terms.reserve(s_neg.size());
    std::vector<std::size_t> live;
    for (std::size_t i = 0; i < s_neg.size(); ++i) {
      if (w[i] == 0.0) continue;  // zero-weight entries contribute nothing
      if (w[i] < 0.0) throw std::domain_error("weighted CE: negative weight");
      terms.push_back(std::log(w[i]) + s_neg[i] - s_pos);
      live.push_back(i);
    }
    loss = detail::log1p_sum_exp(terms);
    if (!want_grad) return;
    dneg.assign(s_neg.size(), 0.0);
    // softmax over {0} u terms
    double mx = 0.0;
    for (double t : terms) mx = std::max(mx, t);
    double z = std::exp(-mx);
    for (double t : terms) z += std::exp(t - mx);
    double total = 0.0;
    for (std::size_t k = 0; k < terms.size(); ++k) {
      const double p = std::exp(terms[k] - mx) / z;
      dneg[live[k]] = p;
      total += p;
    }
    dpos = -total;
  }
};

// ---------------------------------------------------------------------------
// Full-label losses

/// Softmax cross-entropy, computed in the pairwise form
/// log[1 + sum_{y' != y} e^{f_{y'} - f_y}].
inline double softmax_ce(int y, std::span<const double> f) {
  std::vector<double> terms;
  terms.reserve(f.size() - 1);
  for (std::size_t j = 0; j < f.size(); ++j)
    if (static_cast<int>(j) != y) terms.push_back(f[j] - f[static_cast<std::size_t>(y)]);
  return detail::log1p_sum_exp(terms);
}

/// The -f_y + log sum_j e^{f_j} form of the same loss; kept separate so the
/// two algebraic routes can be checked against each other.
inline double softmax_ce_direct(int y, std::span<const double> f) {
  double mx = f[0];
  for (double v : f) mx = std::max(mx, v);
  double s = 0.0;
  for (double v : f) s += std::exp(v - mx);
  return -f[static_cast<std::size_t>(y)] + mx + std::log(s);
}

inline void softmax_ce_grad(int y, std::span<const double> f, std::span<double> grad) {
  double mx = f[0];
  for (double v : f) mx = std::max(mx, v);
  double z = 0.0;
  for (double v : f) z += std::exp(v - mx);
  for (std::size_t j = 0; j < f.size(); ++j) grad[j] = std::exp(f[j] - mx) / z;
  grad[static_cast<std::size_t>(y)] -= 1.0;
}

/// Decoupled loss: phi(f_y) + sum_{y' != y} varphi(-f_{y'}).
inline double decoupled_loss(int y, std::span<const double> f, const MarginLossPair& pair) {
  double loss = pair.pos_value(f[static_cast<std::size_t>(y)]);
  for (std::size_t j = 0; j < f.size(); ++j)
    if (static_cast<int>(j) != y) loss += pair.neg_value(-f[j]);
  return loss;
}

inline void decoupled_grad(int y, std::span<const double> f, const MarginLossPair& pair,
                           std::span<double> grad) {
  for (std::size_t j = 0; j < f.size(); ++j)
    grad[j] = static_cast<int>(j) == y ? pair.pos_deriv(f[j])
                                       : -pair.neg_deriv(-f[j]);
}

/// Pairwise-margin cross-entropy: log[1 + sum_{y' != y} rho(y,y') e^{f_{y'} - f_y}].
/// With rho == 1 this reduces to softmax_ce term for term.
inline double margin_ce(int y, std::span<const double> f, const MarginMatrix& rho) {
  std::vector<double> terms;
  terms.reserve(f.size() - 1);
  for (std::size_t j = 0; j < f.size(); ++j) {
    if (static_cast<int>(j) == y) continue;
    const double r = rho(y, static_cast<int>(j));
    if (r < 0.0) throw std::domain_error("margin_ce: rho must be >= 0");
    if (r == 0.0) continue;
    terms.push_back(std::log(r) + f[j] - f[static_cast<std::size_t>(y)]);
  }
  return detail::log1p_sum_exp(terms);
}

inline void margin_ce_grad(int y, std::span<const double> f, const MarginMatrix& rho,
                           std::span<double> grad) {
  const std::size_t L = f.size();
  std::vector<double> s_neg, w;
  std::vector<int> idx;
  s_neg.reserve(L - 1);
  w.reserve(L - 1);
  idx.reserve(L - 1);
  for (std::size_t j = 0; j < L; ++j) {
    if (static_cast<int>(j) == y) continue;
    idx.push_back(static_cast<int>(j));
    s_neg.push_back(f[j]);
    w.push_back(rho(y, static_cast<int>(j)));
  }
  WeightedCEKernel k(f[static_cast<std::size_t>(y)], s_neg, w, true);
  std::fill(grad.begin(), grad.end(), 0.0);
  grad[static_cast<std::size_t>(y)] = k.dpos;
  for (std::size_t i = 0; i < idx.size(); ++i)
    grad[static_cast<std::size_t>(idx[i])] = k.dneg[i];
}

// ---------------------------------------------------------------------------
// Sampled losses

namespace detail {

inline std::vector<double> sample_weights(int y, const NegativeSample& neg,
                                          const WeightingScheme& scheme,
                                          const RealizedQ& q) {
  const int m = neg.count();
  std::vector<double> w(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i)
    w[static_cast<std::size_t>(i)] =
        negative_weight(scheme, y, neg.labels[static_cast<std::size_t>(i)], q, m);
  return w;
}

}  // namespace detail

/// Sampled softmax cross-entropy: log[1 + sum_{y' in N} w(y,y') e^{f_{y'} - f_y}].
/// Duplicates in the sample each contribute their own term.
inline double sampled_softmax_ce(int y, std::span<const double> f,
                                 const NegativeSample& neg, const WeightingScheme& scheme,
                                 const RealizedQ& q) {
  const auto w = detail::sample_weights(y, neg, scheme, q);
  std::vector<double> s_neg(w.size());
  for (std::size_t i = 0; i < w.size(); ++i)
    s_neg[i] = f[static_cast<std::size_t>(neg.labels[i])];
  return WeightedCEKernel(f[static_cast<std::size_t>(y)], s_neg, w, false).loss;
}

/// Gradient over all L logits; zero outside {y} + sampled labels.
inline void sampled_softmax_ce_grad(int y, std::span<const double> f,
                                    const NegativeSample& neg,
                                    const WeightingScheme& scheme, const RealizedQ& q,
                                    std::span<double> grad) {
  const auto w = detail::sample_weights(y, neg, scheme, q);
  std::vector<double> s_neg(w.size());
  for (std::size_t i = 0; i < w.size(); ++i)
    s_neg[i] = f[static_cast<std::size_t>(neg.labels[i])];
  WeightedCEKernel k(f[static_cast<std::size_t>(y)], s_neg, w, true);
  std::fill(grad.begin(), grad.end(), 0.0);
  grad[static_cast<std::size_t>(y)] = k.dpos;
  for (std::size_t i = 0; i < w.size(); ++i)
    grad[static_cast<std::size_t>(neg.labels[i])] += k.dneg[i];
}

/// Sampled decoupled loss: phi(f_y) + sum_{y' in N} w(y,y') varphi(-f_{y'}).
inline double sampled_decoupled(int y, std::span<const double> f, const NegativeSample& neg,
                                const WeightingScheme& scheme, const RealizedQ& q,
                                const MarginLossPair& pair) {
  const auto w = detail::sample_weights(y, neg, scheme, q);
  double loss = pair.pos_value(f[static_cast<std::size_t>(y)]);
  for (std::size_t i = 0; i < w.size(); ++i)
    loss += w[i] * pair.neg_value(-f[static_cast<std::size_t>(neg.labels[i])]);
  return loss;
}

inline void sampled_decoupled_grad(int y, std::span<const double> f,
                                   const NegativeSample& neg, const WeightingScheme& scheme,
                                   const RealizedQ& q, const MarginLossPair& pair,
                                   std::span<double> grad) {
  const auto w = detail::sample_weights(y, neg, scheme, q);
  std::fill(grad.begin(), grad.end(), 0.0);
  grad[static_cast<std::size_t>(y)] = pair.pos_deriv(f[static_cast<std::size_t>(y)]);
  for (std::size_t i = 0; i < w.size(); ++i) {
    const auto j = static_cast<std::size_t>(neg.labels[i]);
    grad[j] += -w[i] * pair.neg_deriv(-f[j]);
  }
}

// ---------------------------------------------------------------------------
// Logit-correction view

/// The weighted sampled softmax rewritten as an unweighted one on shifted
/// scores: fbar_{y'} = f_{y'} + log w(y,y'). Zero-weight labels drop out.
struct CorrectedLogits {
  std::vector<int> labels;
  std::vector<double> values;
};

inline CorrectedLogits corrected_logits(std::span<const double> f, int y,
                                        const NegativeSample& neg,
                                        const WeightingScheme& scheme,
                                        const RealizedQ& q) {
  const auto w = detail::sample_weights(y, neg, scheme, q);
  CorrectedLogits out;
  out.labels.reserve(w.size());
  out.values.reserve(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (w[i] == 0.0) continue;
    out.labels.push_back(neg.labels[i]);
    out.values.push_back(f[static_cast<std::size_t>(neg.labels[i])] + std::log(w[i]));
  }
  return out;
}

/// Unweighted sampled softmax on already-corrected logits; matches
/// sampled_softmax_ce on the original inputs by construction.
inline double softmax_ce_on_corrected(int y, std::span<const double> f,
                                      const CorrectedLogits& corrected) {
  std::vector<double> terms(corrected.values.size());
  for (std::size_t i = 0; i < terms.size(); ++i)
    terms[i] = corrected.values[i] - f[static_cast<std::size_t>(y)];
  return detail::log1p_sum_exp(terms);
}

}  // namespace negsamp
