#pragma once

#include <cmath>
#include <concepts>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "negsamp/rng.hpp"

namespace negsamp {

/// A trainable scorer: per-example forward state goes through a caller-owned
/// workspace so training loops stay allocation-light and models stay
/// reusable across examples.
template <typename M>
concept Scorer = requires(M m, const M cm, const double* x, typename M::Workspace ws,
                          std::span<const int> labels, std::span<double> out,
                          std::span<const double> dscores) {
  typename M::Workspace;
  { cm.num_labels() } -> std::convertible_to<int>;
  { cm.dim() } -> std::convertible_to<int>;
  { cm.forward(x, ws) };
  { cm.scores(ws, x, labels, out) };
  { m.accumulate(x, ws, labels, dscores) };
  { m.step(1.0, 0.9, 1.0) };
};

namespace detail {

inline double dot(const double* a, const double* b, int n) {
  double s = 0.0;
  for (int k = 0; k < n; ++k) s += a[k] * b[k];
  return s;
}

inline double norm(const double* a, int n) { return std::sqrt(dot(a, a, n)); }

}  // namespace detail

/// Linear scorer: score(y) = <w_y, x>, or the cosine of the two when scores
/// are meant to be similarities. Zero-initialized except in cosine mode,
/// where zero rows have no direction; there we use scaled-uniform init.
class LinearModel {
 public:
  struct Workspace {};  // stateless forward

  LinearModel(int num_labels, int dim, bool cosine_scores, std::uint64_t init_seed)
      : L_(num_labels),
        d_(dim),
        cosine_(cosine_scores),
        w_(static_cast<std::size_t>(num_labels) * dim, 0.0),
        g_(w_.size(), 0.0),
        v_(w_.size(), 0.0) {
    if (cosine_) {
      Rng rng(init_seed);
      const double bound = 1.0 / std::sqrt(static_cast<double>(dim));
      for (auto& x : w_) x = bound * (2.0 * rng.uniform01() - 1.0);
    }
  }

  int num_labels() const { return L_; }
  int dim() const { return d_; }

  void forward(const double*, Workspace&) const {}

  void scores(const Workspace&, const double* x, std::span<const int> labels,
              std::span<double> out) const {
    if (!cosine_) {
      for (std::size_t i = 0; i < labels.size(); ++i)
        out[i] = detail::dot(row(labels[i]), x, d_);
      return;
    }
    const double xn = detail::norm(x, d_);
    for (std::size_t i = 0; i < labels.size(); ++i) {
      const double* w = row(labels[i]);
      const double wn = detail::norm(w, d_);
      out[i] = (xn > 0.0 && wn > 0.0) ? detail::dot(w, x, d_) / (wn * xn) : 0.0;
    }
  }

  void accumulate(const double* x, const Workspace&, std::span<const int> labels,
                  std::span<const double> dscores) {
    if (!cosine_) {
      for (std::size_t i = 0; i < labels.size(); ++i) {
        const double ds = dscores[i];
        if (ds == 0.0) continue;
        double* g = grad_row(labels[i]);
        for (int k = 0; k < d_; ++k) g[k] += ds * x[k];
      }
      return;
    }
    const double xn = detail::norm(x, d_);
    if (xn == 0.0) return;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      const double ds = dscores[i];
      if (ds == 0.0) continue;
      const double* w = row(labels[i]);
      const double wn = detail::norm(w, d_);
      if (wn == 0.0) continue;
      const double s = detail::dot(w, x, d_) / (wn * xn);
      double* g = grad_row(labels[i]);
      // d cos / d w = (x/|x| - s w/|w|) / |w|
      for (int k = 0; k < d_; ++k) g[k] += ds * (x[k] / xn - s * w[k] / wn) / wn;
    }
  }

  void step(double lr, double momentum, double grad_scale) {
    for (std::size_t j = 0; j < w_.size(); ++j) {
      v_[j] = momentum * v_[j] - lr * grad_scale * g_[j];
      w_[j] += v_[j];
      g_[j] = 0.0;
    }
  }

  std::span<const double> parameters() const { return w_; }
  bool cosine_scores() const { return cosine_; }

 private:
  const double* row(int y) const { return w_.data() + static_cast<std::size_t>(y) * d_; }
  double* grad_row(int y) { return g_.data() + static_cast<std::size_t>(y) * d_; }

  int L_, d_;
  bool cosine_;
  std::vector<double> w_, g_, v_;
};

/// One hidden layer with ReLU: score(y) = <u_y, relu(W x)> (or its cosine).
/// Fan-in scaled-uniform init, seeded.
class MlpModel {
 public:
  struct Workspace {
    std::vector<double> hidden;       // relu(W x)
    std::vector<double> pre;          // W x
  };

  MlpModel(int num_labels, int dim, int width, bool cosine_scores,
           std::uint64_t init_seed)
      : L_(num_labels),
        d_(dim),
        h_(width),
        cosine_(cosine_scores),
        w1_(static_cast<std::size_t>(width) * dim),
        w2_(static_cast<std::size_t>(num_labels) * width),
        g1_(w1_.size(), 0.0),
        g2_(w2_.size(), 0.0),
        v1_(w1_.size(), 0.0),
        v2_(w2_.size(), 0.0) {
    if (width < 1) throw std::invalid_argument("MlpModel: width must be >= 1");
    Rng rng(init_seed);
    const double b1 = 1.0 / std::sqrt(static_cast<double>(dim));
    for (auto& x : w1_) x = b1 * (2.0 * rng.uniform01() - 1.0);
    const double b2 = 1.0 / std::sqrt(static_cast<double>(width));
    for (auto& x : w2_) x = b2 * (2.0 * rng.uniform01() - 1.0);
  }

  int num_labels() const { return L_; }
  int dim() const { return d_; }
  int width() const { return h_; }

  void forward(const double* x, Workspace& ws) const {
    ws.pre.resize(static_cast<std::size_t>(h_));
    ws.hidden.resize(static_cast<std::size_t>(h_));
    for (int j = 0; j < h_; ++j) {
      const double z = detail::dot(w1_.data() + static_cast<std::size_t>(j) * d_, x, d_);
      ws.pre[static_cast<std::size_t>(j)] = z;
      ws.hidden[static_cast<std::size_t>(j)] = z > 0.0 ? z : 0.0;
    }
  }

  void scores(const Workspace& ws, const double*, std::span<const int> labels,
              std::span<double> out) const {
    const double* h = ws.hidden.data();
    if (!cosine_) {
      for (std::size_t i = 0; i < labels.size(); ++i)
        out[i] = detail::dot(row2(labels[i]), h, h_);
      return;
    }
    const double hn = detail::norm(h, h_);
    for (std::size_t i = 0; i < labels.size(); ++i) {
      const double* u = row2(labels[i]);
      const double un = detail::norm(u, h_);
      out[i] = (hn > 0.0 && un > 0.0) ? detail::dot(u, h, h_) / (un * hn) : 0.0;
    }
  }

  void accumulate(const double* x, const Workspace& ws, std::span<const int> labels,
                  std::span<const double> dscores) {
    const double* h = ws.hidden.data();
    std::vector<double> dh(static_cast<std::size_t>(h_), 0.0);
    const double hn = cosine_ ? detail::norm(h, h_) : 0.0;
    if (cosine_ && hn == 0.0) return;

    for (std::size_t i = 0; i < labels.size(); ++i) {
      const double ds = dscores[i];
      if (ds == 0.0) continue;
      const double* u = row2(labels[i]);
      double* g = g2_.data() + static_cast<std::size_t>(labels[i]) * h_;
      if (!cosine_) {
        for (int j = 0; j < h_; ++j) {
          g[j] += ds * h[j];
          dh[static_cast<std::size_t>(j)] += ds * u[j];
        }
      } else {
        const double un = detail::norm(u, h_);
        if (un == 0.0) continue;
        const double s = detail::dot(u, h, h_) / (un * hn);
        for (int j = 0; j < h_; ++j) {
          g[j] += ds * (h[j] / hn - s * u[j] / un) / un;
          dh[static_cast<std::size_t>(j)] += ds * (u[j] / un - s * h[j] / hn) / hn;
        }
      }
    }

    for (int j = 0; j < h_; ++j) {
      if (ws.pre[static_cast<std::size_t>(j)] <= 0.0) continue;  // relu gate
      const double dj = dh[static_cast<std::size_t>(j)];
      if (dj == 0.0) continue;
      double* g = g1_.data() + static_cast<std::size_t>(j) * d_;
      for (int k = 0; k < d_; ++k) g[k] += dj * x[k];
    }
  }

  void step(double lr, double momentum, double grad_scale) {
    for (std::size_t j = 0; j < w1_.size(); ++j) {
      v1_[j] = momentum * v1_[j] - lr * grad_scale * g1_[j];
      w1_[j] += v1_[j];
      g1_[j] = 0.0;
    }
    for (std::size_t j = 0; j < w2_.size(); ++j) {
      v2_[j] = momentum * v2_[j] - lr * grad_scale * g2_[j];
      w2_[j] += v2_[j];
      g2_[j] = 0.0;
    }
  }

  std::span<const double> parameters() const { return w2_; }
  bool cosine_scores() const { return cosine_; }

 private:
  const double* row2(int y) const { return w2_.data() + static_cast<std::size_t>(y) * h_; }

  int L_, d_, h_;
  bool cosine_;
  std::vector<double> w1_, w2_, g1_, g2_, v1_, v2_;
};

static_assert(Scorer<LinearModel>);
static_assert(Scorer<MlpModel>);

}  // namespace negsamp
