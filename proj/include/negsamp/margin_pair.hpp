#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace negsamp {

/// A pair of scalar margin losses: phi scores the positive label's logit,
/// varphi scores each negative through its negated logit, so the decoupled
/// loss reads phi(f_y) + sum_{y'} varphi(-f_{y'}). Both are nonincreasing in
/// their argument. At kinks the right derivative is reported.
class MarginLossPair {
 public:
  enum class Preset { Hinge, Softplus, SquaredHinge, CosineContrastive };

  static MarginLossPair hinge() { return MarginLossPair(Preset::Hinge, 0.0); }
  static MarginLossPair softplus() { return MarginLossPair(Preset::Softplus, 0.0); }
  static MarginLossPair squared_hinge() {
    return MarginLossPair(Preset::SquaredHinge, 0.0);
  }

  /// Squared-hinge pair on cosine scores: positives pay (1 - s)^2 below full
  /// alignment, negatives pay (s - margin)^2 above the margin (default 0).
  static MarginLossPair cosine_contrastive(double margin = 0.0) {
    return MarginLossPair(Preset::CosineContrastive, margin);
  }

  static MarginLossPair parse(const std::string& name) {
    if (name == "hinge") return hinge();
    if (name == "softplus") return softplus();
    if (name == "squared_hinge") return squared_hinge();
    if (name == "cosine") return cosine_contrastive();
    throw std::invalid_argument("unknown margin-loss pair: " + name);
  }

  std::string name() const {
    switch (preset_) {
      case Preset::Hinge: return "hinge";
      case Preset::Softplus: return "softplus";
      case Preset::SquaredHinge: return "squared_hinge";
      case Preset::CosineContrastive: return "cosine";
    }
    return "?";
  }

  Preset preset() const { return preset_; }
  double margin() const { return margin_; }

  /// True when scores are meant to be cosine similarities; the training
  /// harness switches the scorer to normalized dot products.
  bool cosine_scores() const { return preset_ == Preset::CosineContrastive; }

  double pos_value(double v) const {
    switch (preset_) {
      case Preset::Hinge: return std::max(0.0, 1.0 - v);
      case Preset::Softplus: return stable_softplus(-v);
      case Preset::SquaredHinge:
      case Preset::CosineContrastive: {
        const double t = std::max(0.0, 1.0 - v);
        return t * t;
      }
    }
    return 0.0;
  }

  double pos_deriv(double v) const {
    switch (preset_) {
      case Preset::Hinge: return v < 1.0 ? -1.0 : 0.0;
      case Preset::Softplus: return -sigmoid(-v);
      case Preset::SquaredHinge:
      case Preset::CosineContrastive: return -2.0 * std::max(0.0, 1.0 - v);
    }
    return 0.0;
  }

  double neg_value(double v) const {
    switch (preset_) {
      case Preset::Hinge: return std::max(0.0, 1.0 - v);
      case Preset::Softplus: return stable_softplus(-v);
      case Preset::SquaredHinge: {
        const double t = std::max(0.0, 1.0 - v);
        return t * t;
      }
      case Preset::CosineContrastive: {
        const double t = std::max(0.0, -v - margin_);
        return t * t;
      }
    }
    return 0.0;
  }

  double neg_deriv(double v) const {
    switch (preset_) {
      case Preset::Hinge: return v < 1.0 ? -1.0 : 0.0;
      case Preset::Softplus: return -sigmoid(-v);
      case Preset::SquaredHinge: return -2.0 * std::max(0.0, 1.0 - v);
      case Preset::CosineContrastive: return -2.0 * std::max(0.0, -v - margin_);
    }
    return 0.0;
  }

  /// Argument values where the loss is not differentiable; gradient tests
  /// keep a clearance around these.
  std::vector<double> pos_kinks() const {
    if (preset_ == Preset::Hinge) return {1.0};
    return {};
  }
  std::vector<double> neg_kinks() const {
    if (preset_ == Preset::Hinge) return {1.0};
    return {};
  }

 private:
  MarginLossPair(Preset p, double margin) : preset_(p), margin_(margin) {}

  static double stable_softplus(double x) {
    // log(1 + e^x) without overflow.
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
  }
  static double sigmoid(double x) {
    return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                    : std::exp(x) / (1.0 + std::exp(x));
  }

  Preset preset_;
  double margin_;
};

}  // namespace negsamp
