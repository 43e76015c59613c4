#pragma once

// Randomized markets and datasets shared by the unit tests and the
// acceptance binary.

#include <random>
#include <vector>

#include "oracles.hpp"
#include "predmarket/predmarket.hpp"

namespace fixture {

using namespace predmarket;

inline BettingFunction random_bettor(BetFamily family, std::size_t K, Rng& rng) {
  const auto h = oracle::random_simplex(K, rng);
  switch (family) {
    case BetFamily::constant: {
      std::uniform_real_distribution<double> u(0.1, 1.0);
      return BettingFunction::constant(h, u(rng));
    }
    case BetFamily::linear: return BettingFunction::linear(h);
    case BetFamily::aggressive: return BettingFunction::aggressive(h, 0.01);
    default: throw SpecError("random_bettor: unsupported family");
  }
}

/// M participants of one family with budgets uniform in [0.05, 1].
inline Market random_market(BetFamily family, std::size_t K, std::size_t M, Rng& rng) {
  Market market(K);
  const auto beta = oracle::random_budgets(M, rng);
  for (std::size_t m = 0; m < M; ++m) market.add(random_bettor(family, K, rng), beta[m]);
  return market;
}

/// Participants drawn from all three solver-admissible families.
inline Market random_mixed_market(std::size_t K, std::size_t M, Rng& rng) {
  Market market(K);
  const auto beta = oracle::random_budgets(M, rng);
  for (std::size_t m = 0; m < M; ++m)
    market.add(random_bettor(static_cast<BetFamily>(rng() % 3), K, rng), beta[m]);
  return market;
}

/// Two-class logistic market with one participant per feature of x.
inline Market logistic_market(std::span<const double> beta, bool clamp = false) {
  Market market(2);
  for (std::size_t m = 0; m < beta.size(); ++m) market.add(BettingFunction::logistic(m, clamp), beta[m]);
  return market;
}

/// Constant market over N one-feature instances x_i = i. Participant m bets
/// eta h_m on the instances in [lo_m, hi_m); participant 0 covers all of them,
/// so no instance is rejected. The coverage table is kept so oracles can
/// work from the definition.
struct LeafConstantMarket {
  Market market{2};
  Dataset data{2, 1};
  std::vector<ClassifierOutput> h;
  std::vector<std::vector<bool>> covers;  // covers[m][i]
};

inline LeafConstantMarket random_leaf_market(std::size_t K, std::size_t M, std::size_t N, Rng& rng,
                                             double h_floor = 0.05) {
  LeafConstantMarket t;
  t.market = Market(K);
  t.data = Dataset(K, 1);
  for (std::size_t i = 0; i < N; ++i)
    t.data.add(Instance{static_cast<double>(i)}, Label(1 + static_cast<int>(rng() % K)));
  const auto beta = oracle::random_budgets(M, rng, 0.2, 1.0);
  for (std::size_t m = 0; m < M; ++m) {
    std::size_t lo = 0, hi = N;
    if (m > 0) {
      lo = rng() % N;
      hi = lo + 1 + rng() % (N - lo);
    }
    t.h.push_back(oracle::random_simplex(K, rng, h_floor));
    std::vector<bool> cov(N, false);
    for (std::size_t i = lo; i < hi; ++i) cov[i] = true;
    t.covers.push_back(cov);
    BoxDomain box{{{0, static_cast<double>(lo) - 0.5, static_cast<double>(hi) - 0.5}}};
    t.market.add(BettingFunction::specialized(box, BettingFunction::constant(t.h.back())), beta[m]);
  }
  return t;
}

/// Mean log-likelihood of a LeafConstantMarket at budgets beta, from the
/// definition c = sum_m beta_m h_m / sum_m beta_m over covering participants.
inline double leaf_log_likelihood(const LeafConstantMarket& t, std::span<const double> beta) {
  const std::size_t N = t.data.size();
  std::vector<std::vector<ClassifierOutput>> per(N);
  std::vector<std::vector<double>> b(N);
  std::vector<int> labels;
  for (std::size_t i = 0; i < N; ++i) labels.push_back(t.data.label(i).value());
  double s = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t m = 0; m < beta.size(); ++m) {
      if (!t.covers[m][i]) continue;
      per[i].push_back(t.h[m]);
      b[i].push_back(beta[m]);
    }
    const auto c = oracle::constant_price(b[i], per[i], std::vector<double>(b[i].size(), 1.0));
    s += std::log(c[static_cast<std::size_t>(labels[i] - 1)]);
  }
  return s / static_cast<double>(N);
}

}  // namespace fixture
