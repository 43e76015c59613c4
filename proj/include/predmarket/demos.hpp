#pragma once

// Two small fixtures: a triangle learned by six half-plane participants, and
// a kernel market on a sinusoidal boundary in [-1, 1]^2.

#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numbers>
#include <random>
#include <vector>

#include "predmarket/betting.hpp"
#include "predmarket/data.hpp"
#include "predmarket/market.hpp"
#include "predmarket/metrics.hpp"
#include "predmarket/random.hpp"
#include "predmarket/training.hpp"

namespace predmarket {

// ---------------------------------------------------------------------------
// Triangle

struct Triangle {
  std::array<std::array<double, 2>, 3> v{{{0.2, 0.2}, {0.8, 0.2}, {0.5, 0.8}}};

  /// Half-plane on the triangle's side of edge i (towards the opposite vertex).
  HalfPlane inner_side(std::size_t i) const {
    const auto& a = v[i];
    const auto& b = v[(i + 1) % 3];
    const auto& o = v[(i + 2) % 3];
    std::vector<double> w{-(b[1] - a[1]), b[0] - a[0]};
    double bias = -(w[0] * a[0] + w[1] * a[1]);
    if (w[0] * o[0] + w[1] * o[1] + bias < 0.0) {
      w = {-w[0], -w[1]};
      bias = -bias;
    }
    return HalfPlane{w, bias};
  }

  HalfPlane outer_side(std::size_t i) const {
    const auto in = inner_side(i);
    return HalfPlane{{-in.w[0], -in.w[1]}, -in.b};
  }

  bool contains(const Instance& x) const {
    for (std::size_t i = 0; i < 3; ++i)
      if (!inner_side(i).contains(x)) return false;
    return true;
  }
};

/// Uniform points in [0, 1]^2: n_inside in the triangle (class 2) followed by
/// n_outside outside it (class 1).
inline Dataset sample_triangle(const Triangle& tri, std::size_t n_inside, std::size_t n_outside,
                               std::uint64_t seed) {
  Rng rng = make_rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Dataset data(2, 2);
  std::size_t in = 0, out = 0;
  while (in < n_inside || out < n_outside) {
    Instance x{u(rng), u(rng)};
    if (tri.contains(x)) {
      if (in < n_inside) {
        ++in;
        data.add(std::move(x), Label(2));
      }
    } else if (out < n_outside) {
      ++out;
      data.add(std::move(x), Label(1));
    }
  }
  return data;
}

/// Six constant-betting participants, one per side of each edge, each with
/// h set to the class frequencies of the training points in its half-plane.
inline Market make_triangle_market(const Triangle& tri, const Dataset& train, double beta0 = 1.0) {
  Market market(2);
  for (std::size_t i = 0; i < 3; ++i) {
    for (const HalfPlane& hp : {tri.inner_side(i), tri.outer_side(i)}) {
      std::vector<double> counts(2, 0.0);
      for (std::size_t n = 0; n < train.size(); ++n)
        if (hp.contains(train.instance(n))) counts[train.label(n).index()] += 1.0;
      const double total = counts[0] + counts[1];
      if (total == 0.0) continue;
      market.add(BettingFunction::specialized(hp, BettingFunction::constant({counts[0] / total, counts[1] / total})),
                 beta0);
    }
  }
  return market;
}

struct TriangleDemoResult {
  double accuracy = 0.0;
  std::size_t rejected = 0;
  Market market{2};
  TrainingTrace trace;
};

inline TriangleDemoResult run_triangle_demo(std::uint64_t seed = 0, std::size_t n_per_class = 1000,
                                            int epochs = 1, double eta = 0.01) {
  const Triangle tri;
  const Dataset train = sample_triangle(tri, n_per_class, n_per_class, derive_seed(seed, 0));
  const Dataset test = sample_triangle(tri, n_per_class, n_per_class, derive_seed(seed, 1));
  TriangleDemoResult r;
  r.market = make_triangle_market(tri, train);
  UpdateRule rule;
  rule.kind = UpdateKind::ml_incremental;
  rule.eta = eta;
  rule.epochs = epochs;
  rule.shuffle = true;
  r.trace = train_online(r.market, train, rule, {}, seed);
  const auto st = misclassification_error(r.market, test);
  r.accuracy = 1.0 - st.error;
  r.rejected = st.rejected;
  return r;
}

// ---------------------------------------------------------------------------
// Kernel market

/// Class 2 above the curve x2 = 0.5 sin(pi x1), class 1 below.
inline Label sinusoid_label(const Instance& x) {
  return Label(x[1] > 0.5 * std::sin(std::numbers::pi * x[0]) ? 2 : 1);
}

inline Dataset sample_sinusoid(std::size_t n, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Dataset data(2, 2);
  for (std::size_t i = 0; i < n; ++i) {
    Instance x{u(rng), u(rng)};
    const Label y = sinusoid_label(x);
    data.add(std::move(x), y);
  }
  return data;
}

/// One kernel participant per training example.
inline Market make_kernel_market(const Dataset& train, const KernelSpec& kernel, double beta0 = 1.0) {
  Market market(2);
  for (std::size_t i = 0; i < train.size(); ++i)
    market.add(BettingFunction::kernel(std::make_shared<const KernelReference>(
                                           KernelReference{train.instance(i), train.label(i)}),
                                       kernel),
               beta0);
  return market;
}

struct KernelDemoResult {
  double train_accuracy = 0.0;
  Market market{2};
  TrainingTrace trace;
};

inline KernelDemoResult run_kernel_demo(std::uint64_t seed = 0, std::size_t n = 1000, double sigma = 0.2,
                                        int epochs = 1, double eta = 0.1) {
  const Dataset train = sample_sinusoid(n, seed);
  KernelDemoResult r;
  r.market = make_kernel_market(train, KernelSpec{KernelKind::rbf, sigma});
  UpdateRule rule;
  rule.kind = UpdateKind::ml_incremental;
  rule.eta = eta;
  rule.epochs = epochs;
  r.trace = train_online(r.market, train, rule, {}, seed);
  r.train_accuracy = 1.0 - r.trace.epochs.back().train_error;
  return r;
}

}  // namespace predmarket
