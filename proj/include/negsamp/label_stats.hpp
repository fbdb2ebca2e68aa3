#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace negsamp {

/// Compensated (Kahan) sum; keeps the L ~ 10^6 normalization checks honest.
inline double kahan_sum(const std::vector<double>& xs) {
  double sum = 0.0, comp = 0.0;
  for (double x : xs) {
    const double t = x - comp;
    const double next = sum + t;
    comp = (next - sum) - t;
    sum = next;
  }
  return sum;
}

/// A probability vector over L labels, optionally carrying the integer sample
/// counts it was estimated from. Immutable after construction.
class LabelDistribution {
 public:
  LabelDistribution() = default;

  explicit LabelDistribution(std::vector<double> probs) : probs_(std::move(probs)) {
    validate();
  }

  LabelDistribution(std::vector<double> probs, std::vector<std::int64_t> counts)
      : probs_(std::move(probs)), counts_(std::move(counts)) {
    validate();
  }

  /// Normalizes arbitrary nonnegative weights into a distribution.
  static LabelDistribution from_weights(const std::vector<double>& weights) {
    for (double w : weights)
      if (!(w >= 0.0) || !std::isfinite(w))
        throw std::invalid_argument("LabelDistribution: weights must be finite and >= 0");
    const double total = kahan_sum(weights);
    if (total <= 0.0)
      throw std::invalid_argument("LabelDistribution: total weight must be positive");
    std::vector<double> p(weights.size());
    for (std::size_t i = 0; i < weights.size(); ++i) p[i] = weights[i] / total;
    return LabelDistribution(std::move(p));
  }

  static LabelDistribution from_counts(const std::vector<std::int64_t>& counts) {
    std::int64_t total = 0;
    for (auto c : counts) {
      if (c < 0) throw std::invalid_argument("LabelDistribution: counts must be >= 0");
      total += c;
    }
    if (total <= 0) throw std::invalid_argument("LabelDistribution: empty counts");
    std::vector<double> p(counts.size());
    for (std::size_t i = 0; i < counts.size(); ++i)
      p[i] = static_cast<double>(counts[i]) / static_cast<double>(total);
    return LabelDistribution(std::move(p), counts);
  }

  static LabelDistribution uniform(int num_labels) {
    if (num_labels < 1) throw std::invalid_argument("uniform: num_labels must be >= 1");
    return LabelDistribution(
        std::vector<double>(num_labels, 1.0 / static_cast<double>(num_labels)));
  }

  int num_labels() const { return static_cast<int>(probs_.size()); }
  double prob(int y) const { return probs_[static_cast<std::size_t>(y)]; }
  double operator[](int y) const { return prob(y); }
  const std::vector<double>& probs() const { return probs_; }
  const std::optional<std::vector<std::int64_t>>& counts() const { return counts_; }

  double min_prob() const { return *std::min_element(probs_.begin(), probs_.end()); }
  double max_prob() const { return *std::max_element(probs_.begin(), probs_.end()); }

  /// Single-column CSV with header `prob`, one probability per row.
  void save_csv(std::ostream& out) const {
    out << "prob\n";
    out.precision(std::numeric_limits<double>::max_digits10);
    for (double p : probs_) out << p << "\n";
  }

  void save_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    save_csv(out);
  }

  static LabelDistribution load_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || trimmed(line) != "prob")
      throw std::runtime_error("LabelDistribution CSV: expected header 'prob'");
    std::vector<double> p;
    while (std::getline(in, line)) {
      const std::string t = trimmed(line);
      if (t.empty()) continue;
      p.push_back(std::stod(t));
    }
    return LabelDistribution(std::move(p));
  }

  static LabelDistribution load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open for reading: " + path);
    return load_csv(in);
  }

 private:
  static std::string trimmed(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
  }

  void validate() const {
    if (probs_.empty()) throw std::invalid_argument("LabelDistribution: empty");
    for (double p : probs_)
      if (!std::isfinite(p) || p < 0.0)
        throw std::invalid_argument("LabelDistribution: probs must be finite and >= 0");
    const double sum = kahan_sum(probs_);
    if (std::abs(sum - 1.0) > 1e-12)
      throw std::invalid_argument("LabelDistribution: probs must sum to 1 (got " +
                                  std::to_string(sum) + ")");
    if (counts_) {
      if (counts_->size() != probs_.size())
        throw std::invalid_argument("LabelDistribution: counts size mismatch");
      std::int64_t total = std::accumulate(counts_->begin(), counts_->end(), std::int64_t{0});
      if (total <= 0) throw std::invalid_argument("LabelDistribution: counts sum to zero");
      for (std::size_t i = 0; i < probs_.size(); ++i) {
        const double expect =
            static_cast<double>((*counts_)[i]) / static_cast<double>(total);
        if (std::abs(probs_[i] - expect) > 1e-12)
          throw std::invalid_argument("LabelDistribution: probs inconsistent with counts");
      }
    }
  }

  std::vector<double> probs_;
  std::optional<std::vector<std::int64_t>> counts_;
};

/// Long-tail label marginal profile: geometric decay (Exp) or a head/tail
/// split where the first ceil(L/2) labels carry `imbalance_ratio` times the
/// per-label mass of the rest (Step).
struct ImbalanceProfile {
  enum class Kind { Exp, Step };
  Kind kind = Kind::Exp;
  int num_labels = 2;
  double imbalance_ratio = 1.0;  // max pi / min pi
};

inline LabelDistribution make_profile(const ImbalanceProfile& profile) {
  const int L = profile.num_labels;
  const double r = profile.imbalance_ratio;
  if (L < 2) throw std::invalid_argument("make_profile: num_labels must be >= 2");
  if (!(r >= 1.0) || !std::isfinite(r))
    throw std::invalid_argument("make_profile: imbalance_ratio must be >= 1");

  std::vector<double> w(static_cast<std::size_t>(L));
  if (profile.kind == ImbalanceProfile::Kind::Exp) {
    // pi_y proportional to r^{-y/(L-1)}, y = 0..L-1; endpoints ratio is exactly r.
    const double log_r = std::log(r);
    for (int y = 0; y < L; ++y)
      w[static_cast<std::size_t>(y)] =
          std::exp(-log_r * static_cast<double>(y) / static_cast<double>(L - 1));
  } else {
    const int head = (L + 1) / 2;
    for (int y = 0; y < L; ++y) w[static_cast<std::size_t>(y)] = y < head ? r : 1.0;
  }
  return LabelDistribution::from_weights(w);
}

/// Head/torso/tail partition by training-sample count.
struct LabelSlices {
  std::vector<int> head;   // count >= hi
  std::vector<int> torso;  // lo <= count < hi
  std::vector<int> tail;   // count < lo
  std::int64_t hi = 100;
  std::int64_t lo = 20;
};

inline LabelSlices slice_labels(const std::vector<std::int64_t>& counts,
                                std::int64_t hi = 100, std::int64_t lo = 20) {
  if (lo > hi) throw std::invalid_argument("slice_labels: lo threshold exceeds hi");
  LabelSlices s;
  s.hi = hi;
  s.lo = lo;
  for (std::size_t y = 0; y < counts.size(); ++y) {
    if (counts[y] < 0) throw std::invalid_argument("slice_labels: negative count");
    if (counts[y] >= hi)
      s.head.push_back(static_cast<int>(y));
    else if (counts[y] >= lo)
      s.torso.push_back(static_cast<int>(y));
    else
      s.tail.push_back(static_cast<int>(y));
  }
  return s;
}

}  // namespace negsamp
