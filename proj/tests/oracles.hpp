#pragma once

// Independent reference computations and random generators for the tests.
// Nothing here calls into the solvers or update code under test.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "predmarket/predmarket.hpp"

namespace oracle {

using predmarket::ClassifierOutput;
using predmarket::Rng;

inline ClassifierOutput random_simplex(std::size_t k, Rng& rng, double floor = 0.0) {
  std::exponential_distribution<double> e(1.0);
  ClassifierOutput h(k);
  double s = 0.0;
  for (auto& v : h) s += (v = e(rng) + floor);
  for (auto& v : h) v /= s;
  return h;
}

inline std::vector<double> random_budgets(std::size_t m, Rng& rng, double lo = 0.05, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> b(m);
  for (auto& v : b) v = u(rng);
  return b;
}

/// Constant-market price straight from the definition:
/// c_k = sum_m beta_m eta_m h_m^k / sum_m beta_m eta_m.
inline std::vector<double> constant_price(const std::vector<double>& beta, const std::vector<ClassifierOutput>& h,
                                          const std::vector<double>& eta) {
  const std::size_t K = h.front().size();
  std::vector<double> num(K, 0.0);
  double den = 0.0;
  for (std::size_t m = 0; m < beta.size(); ++m) {
    for (std::size_t k = 0; k < K; ++k) num[k] += beta[m] * eta[m] * h[m][k];
    den += beta[m] * eta[m] * std::accumulate(h[m].begin(), h[m].end(), 0.0);
  }
  for (auto& v : num) v /= den;
  return num;
}

/// Two-class linear-betting equilibrium in closed form. With
/// A_k = sum_m beta_m h_m^k the equations c_1 B = c_2 A_1, c_2 B = c_1 A_2
/// give c_2 = sqrt(A_2) / (sqrt(A_1) + sqrt(A_2)).
inline double linear_two_class_price(const std::vector<double>& beta, const std::vector<ClassifierOutput>& h) {
  double a1 = 0.0, a2 = 0.0;
  for (std::size_t m = 0; m < beta.size(); ++m) {
    a1 += beta[m] * h[m][0];
    a2 += beta[m] * h[m][1];
  }
  return std::sqrt(a2) / (std::sqrt(a1) + std::sqrt(a2));
}

/// Euclidean projection onto the simplex by bisection on the shift theta in
/// sum_i max(v_i - theta, 0) = 1.
inline std::vector<double> simplex_projection(const std::vector<double>& v) {
  double lo = *std::min_element(v.begin(), v.end()) - 1.0;
  double hi = *std::max_element(v.begin(), v.end());
  auto mass = [&](double t) {
    double s = 0.0;
    for (double x : v) s += std::max(x - t, 0.0);
    return s;
  };
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (mass(mid) > 1.0 ? lo : hi) = mid;
  }
  const double t = 0.5 * (lo + hi);
  std::vector<double> w(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) w[i] = std::max(v[i] - t, 0.0);
  return w;
}

/// Log-likelihood (1/N) sum_i ln c_{y_i} of a constant market, from the
/// definition.
/// h_per_instance[i][m] is participant m's output on instance i.
inline double constant_log_likelihood(const std::vector<double>& beta,
                                      const std::vector<std::vector<ClassifierOutput>>& h_per_instance,
                                      const std::vector<int>& labels) {
  double s = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto c = constant_price(beta, h_per_instance[i], std::vector<double>(beta.size(), 1.0));
    s += std::log(c[static_cast<std::size_t>(labels[i] - 1)]);
  }
  return s / static_cast<double>(labels.size());
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

}  // namespace oracle
