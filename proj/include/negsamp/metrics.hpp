#pragma once

#include <algorithm>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "negsamp/dataset.hpp"
#include "negsamp/label_stats.hpp"
#include "negsamp/model.hpp"

namespace negsamp {

struct SliceMetrics {
  double balanced_error = 0.0;  // mean of per-class error rates
  double recall_at_1 = 0.0;
  double recall_at_5 = 0.0;
  int num_classes = 0;
};

struct SlicedMetrics {
  SliceMetrics overall;
  std::optional<SliceMetrics> head, torso, tail;  // absent when the slice is empty
  std::vector<double> per_class_error;
};

namespace detail {

struct ClassTallies {
  std::vector<int> total, top1, top5;
};

inline SliceMetrics summarize(const ClassTallies& t, std::span<const int> classes) {
  SliceMetrics m;
  double err = 0.0, r1 = 0.0, r5 = 0.0;
  int counted = 0;
  for (int y : classes) {
    const auto yi = static_cast<std::size_t>(y);
    if (t.total[yi] == 0) continue;
    const double n = t.total[yi];
    err += 1.0 - t.top1[yi] / n;
    r1 += t.top1[yi] / n;
    r5 += t.top5[yi] / n;
    ++counted;
  }
  m.num_classes = counted;
  if (counted > 0) {
    m.balanced_error = err / counted;
    m.recall_at_1 = r1 / counted;
    m.recall_at_5 = r5 / counted;
  }
  return m;
}

}  // namespace detail

/// Argmax prediction on the balanced test split; per-class error rates,
/// slice means, and top-k recall for k in {1, 5}.
template <Scorer M>
SlicedMetrics evaluate(const M& model, const SyntheticDataset& data,
                       const LabelSlices& slices) {
  const int L = data.num_labels;
  detail::ClassTallies tallies;
  tallies.total.assign(static_cast<std::size_t>(L), 0);
  tallies.top1.assign(static_cast<std::size_t>(L), 0);
  tallies.top5.assign(static_cast<std::size_t>(L), 0);

  std::vector<int> all_labels(static_cast<std::size_t>(L));
  std::iota(all_labels.begin(), all_labels.end(), 0);
  std::vector<double> scores(static_cast<std::size_t>(L));
  typename M::Workspace ws;

  const int k5 = std::min(5, L);
  std::vector<int> order(static_cast<std::size_t>(L));
  for (int i = 0; i < data.test_size(); ++i) {
    const int y = data.test_labels[static_cast<std::size_t>(i)];
    const double* x = data.test_features.data() +
                      static_cast<std::size_t>(i) * data.dim;
    model.forward(x, ws);
    model.scores(ws, x, all_labels, scores);

    int best = 0;
    for (int j = 1; j < L; ++j)
      if (scores[static_cast<std::size_t>(j)] > scores[static_cast<std::size_t>(best)])
        best = j;

    std::iota(order.begin(), order.end(), 0);
    std::partial_sort(order.begin(), order.begin() + k5, order.end(),
                      [&](int a, int b) {
                        const double sa = scores[static_cast<std::size_t>(a)];
                        const double sb = scores[static_cast<std::size_t>(b)];
                        return sa != sb ? sa > sb : a < b;
                      });
    const bool in_top5 =
        std::find(order.begin(), order.begin() + k5, y) != order.begin() + k5;

    const auto yi = static_cast<std::size_t>(y);
    ++tallies.total[yi];
    if (best == y) ++tallies.top1[yi];
    if (in_top5) ++tallies.top5[yi];
  }

  SlicedMetrics out;
  out.per_class_error.assign(static_cast<std::size_t>(L), 0.0);
  for (int y = 0; y < L; ++y) {
    const auto yi = static_cast<std::size_t>(y);
    out.per_class_error[yi] =
        tallies.total[yi] > 0
            ? 1.0 - static_cast<double>(tallies.top1[yi]) / tallies.total[yi]
            : 0.0;
  }
  out.overall = detail::summarize(tallies, all_labels);
  if (!slices.head.empty()) out.head = detail::summarize(tallies, slices.head);
  if (!slices.torso.empty()) out.torso = detail::summarize(tallies, slices.torso);
  if (!slices.tail.empty()) out.tail = detail::summarize(tallies, slices.tail);
  return out;
}

}  // namespace negsamp
