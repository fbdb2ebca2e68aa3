#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "negsamp/label_stats.hpp"
#include "negsamp/sampler.hpp"

namespace negsamp {

/// Pairwise label margins rho(y, y') >= 0: the multiplier a negative y' gets
/// inside a margin cross-entropy when the positive is y. log rho is the score
/// gap the loss asks for between y and y'.
class MarginMatrix {
 public:
  MarginMatrix() : MarginMatrix(unit()) {}

  double operator()(int y, int y_prime) const { return fn_(y, y_prime); }
  const std::string& name() const { return name_; }

  static MarginMatrix unit() {
    return MarginMatrix([](int, int) { return 1.0; }, "unit");
  }

  static MarginMatrix constant(double value) {
    if (!(value >= 0.0)) throw std::invalid_argument("MarginMatrix: value must be >= 0");
    return MarginMatrix([value](int, int) { return value; }, "constant");
  }

  /// rho(y, y') = (min_z pi_z / pi_y)^{1/4}: rare positives get margins near 1,
  /// dominant positives get smaller ones. Normalized so values lie in (0, 1].
  static MarginMatrix adaptive(const LabelDistribution& pi) {
    require_positive(pi, "adaptive");
    auto probs = std::make_shared<std::vector<double>>(pi.probs());
    const double pi_min = pi.min_prob();
    return MarginMatrix(
        [probs, pi_min](int y, int) {
          return std::pow(pi_min / (*probs)[static_cast<std::size_t>(y)], 0.25);
        },
        "adaptive");
  }

  /// rho(y, y') = F(pi_{y'}) for an increasing F (identity by default):
  /// rare negatives are penalized less.
  static MarginMatrix equalised(const LabelDistribution& pi,
                                std::function<double(double)> f = nullptr) {
    require_positive(pi, "equalised");
    auto probs = std::make_shared<std::vector<double>>(pi.probs());
    if (!f) f = [](double p) { return p; };
    return MarginMatrix(
        [probs, f = std::move(f)](int, int yp) {
          return f((*probs)[static_cast<std::size_t>(yp)]);
        },
        "equalised");
  }

  /// rho(y, y') = pi_{y'} / pi_y: margins grow when the positive is rare
  /// relative to the negative.
  static MarginMatrix logit_adjusted(const LabelDistribution& pi) {
    require_positive(pi, "logit_adjusted");
    auto probs = std::make_shared<std::vector<double>>(pi.probs());
    return MarginMatrix(
        [probs](int y, int yp) {
          return (*probs)[static_cast<std::size_t>(yp)] /
                 (*probs)[static_cast<std::size_t>(y)];
        },
        "logit_adjusted");
  }

  static MarginMatrix custom(std::function<double(int, int)> fn, std::string name) {
    return MarginMatrix(std::move(fn), std::move(name));
  }

  static MarginMatrix parse_preset(const std::string& name, const LabelDistribution& pi) {
    if (name == "unit") return unit();
    if (name == "adaptive") return adaptive(pi);
    if (name == "equalised") return equalised(pi);
    if (name == "logit_adjusted") return logit_adjusted(pi);
    throw std::invalid_argument("unknown margin preset: " + name);
  }

 private:
  MarginMatrix(std::function<double(int, int)> fn, std::string name)
      : fn_(std::move(fn)), name_(std::move(name)) {}

  static void require_positive(const LabelDistribution& pi, const char* what) {
    if (pi.min_prob() <= 0.0)
      throw std::invalid_argument(std::string("MarginMatrix::") + what +
                                  ": pi must be strictly positive");
  }

  std::function<double(int, int)> fn_;
  std::string name_;
};

/// Rule producing the weight w(y, y') a drawn negative y' contributes with.
struct WeightingScheme {
  enum class Kind { Constant, Importance, Relative, Tail, TargetMargin };
  Kind kind = Kind::Importance;
  LabelDistribution pi;   // Tail
  MarginMatrix rho;       // TargetMargin
  // Appendix-style positive handling: keep w(y, y) = 0 even when the sampler
  // did not exclude the positive from its domain.
  bool zero_positive = true;

  static WeightingScheme constant() { return {Kind::Constant, {}, {}, true}; }
  static WeightingScheme importance() { return {Kind::Importance, {}, {}, true}; }
  static WeightingScheme relative() { return {Kind::Relative, {}, {}, true}; }
  static WeightingScheme tail(LabelDistribution pi_marginal) {
    return {Kind::Tail, std::move(pi_marginal), {}, true};
  }
  static WeightingScheme target_margin(MarginMatrix rho_target) {
    return {Kind::TargetMargin, {}, std::move(rho_target), true};
  }

  static std::string kind_name(Kind k) {
    switch (k) {
      case Kind::Constant: return "constant";
      case Kind::Importance: return "importance";
      case Kind::Relative: return "relative";
      case Kind::Tail: return "tail";
      case Kind::TargetMargin: return "target_margin";
    }
    return "?";
  }

  std::string name() const {
    if (kind == Kind::TargetMargin) return "target_margin:" + rho.name();
    return kind_name(kind);
  }

  /// Config-string form: constant | importance | relative | tail |
  /// target_margin:<preset>. `pi` feeds Tail and the margin presets.
  static WeightingScheme parse(const std::string& spec, const LabelDistribution& pi) {
    if (spec == "constant") return constant();
    if (spec == "importance") return importance();
    if (spec == "relative") return relative();
    if (spec == "tail") return tail(pi);
    const std::string prefix = "target_margin:";
    if (spec.rfind(prefix, 0) == 0)
      return target_margin(MarginMatrix::parse_preset(spec.substr(prefix.size()), pi));
    throw std::invalid_argument("unknown weighting scheme: " + spec);
  }
};

/// Weight of negative y' for positive y given the realized sampling
/// distribution and sample size m. Density-ratio (Relative) weights consult
/// q.base, the distribution before positive exclusion; everything that
/// corrects for the actual draw probability uses q.dist.
inline double negative_weight(const WeightingScheme& scheme, int y, int y_prime,
                              const RealizedQ& q, int m) {
  if (m < 1) throw std::invalid_argument("negative_weight: m must be >= 1");
  if (scheme.zero_positive && y_prime == y) return 0.0;
  const double md = static_cast<double>(m);
  switch (scheme.kind) {
    case WeightingScheme::Kind::Constant:
      return 1.0 / md;
    case WeightingScheme::Kind::Importance: {
      const double qv = q.dist[y_prime];
      if (qv <= 0.0)
        throw std::domain_error("negative_weight: importance needs q(y') > 0");
      return 1.0 / (md * qv);
    }
    case WeightingScheme::Kind::Relative: {
      const double qv = q.base[y_prime];
      if (qv <= 0.0)
        throw std::domain_error("negative_weight: relative needs base q(y') > 0");
      return q.base[y] / qv;
    }
    case WeightingScheme::Kind::Tail: {
      const double qv = q.dist[y_prime];
      if (qv <= 0.0) throw std::domain_error("negative_weight: tail needs q(y') > 0");
      const double pi_y = scheme.pi[y];
      if (pi_y <= 0.0) throw std::domain_error("negative_weight: tail needs pi(y) > 0");
      return scheme.pi[y_prime] / (md * qv * pi_y);
    }
    case WeightingScheme::Kind::TargetMargin: {
      const double qv = q.dist[y_prime];
      if (qv <= 0.0)
        throw std::domain_error("negative_weight: target_margin needs q(y') > 0");
      return scheme.rho(y, y_prime) / (md * qv);
    }
  }
  throw std::logic_error("negative_weight: unreachable");
}

/// The margin a (q, w, m) triple implies on the pair (y, y'): m * w * q(y').
/// For TargetMargin weights the product cancels back to the requested margin.
inline double implied_margin(const WeightingScheme& scheme, int y, int y_prime,
                             const RealizedQ& q, int m) {
  return static_cast<double>(m) * negative_weight(scheme, y, y_prime, q, m) *
         q.dist[y_prime];
}

}  // namespace negsamp
