#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <type_traits>
#include <vector>

#include "predmarket/data.hpp"
#include "predmarket/error.hpp"
#include "predmarket/forest.hpp"
#include "predmarket/market.hpp"
#include "predmarket/random.hpp"
#include "predmarket/solver.hpp"
#include "predmarket/types.hpp"

namespace predmarket {

/// A predictor returns class probabilities, or nothing when it rejects x.
using Prediction = std::optional<ClassifierOutput>;

struct ErrorStats {
  double error = 0.0;  // rejections count as errors
  std::size_t rejected = 0;
  std::size_t count = 0;
};

/// Index of the largest entry, ties broken toward the smallest index.
inline std::size_t argmax_class(std::span<const double> p) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < p.size(); ++k)
    if (p[k] > p[best]) best = k;
  return best;
}

template <class Predictor>
  requires std::is_invocable_r_v<Prediction, Predictor&, const Instance&>
ErrorStats misclassification_error(Predictor&& predict, const Dataset& data) {
  ErrorStats st;
  st.count = data.size();
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Prediction p = predict(data.instance(i));
    if (!p) {
      ++st.rejected;
      ++wrong;
      continue;
    }
    wrong += argmax_class(*p) != data.label(i).index();
  }
  st.error = data.empty() ? 0.0 : static_cast<double>(wrong) / static_cast<double>(data.size());
  return st;
}

/// Market prices as a predictor; rejected instances yield nothing.
inline auto market_predictor(const Market& market, const SolverConfig& cfg = {}) {
  return [&market, cfg](const Instance& x) -> Prediction {
    try {
      return solve_price(market, x, cfg).price.vector();
    } catch (const Rejected&) {
      return std::nullopt;
    }
  };
}

inline auto forest_predictor(const Forest& forest) {
  return [&forest](const Instance& x) -> Prediction { return forest_predict(forest, x); };
}

inline ErrorStats misclassification_error(const Market& market, const Dataset& data,
                                          const SolverConfig& cfg = {}) {
  return misclassification_error(market_predictor(market, cfg), data);
}

inline ErrorStats misclassification_error(const Forest& forest, const Dataset& data) {
  return misclassification_error(forest_predictor(forest), data);
}

struct ProbabilityErrorStats {
  double l2 = 0.0;  // mean squared error over priced draws
  std::size_t rejected = 0;
  std::size_t count = 0;
};

/// Monte-Carlo mean of (c_2(x) - p*(class 2 | x))^2 over draws from the
/// equal-prior mixture.
template <class Predictor>
  requires std::is_invocable_r_v<Prediction, Predictor&, const Instance&>
ProbabilityErrorStats prob_estimation_error_l2(Predictor&& predict, const GaussianPairSpec& spec,
                                               std::size_t n_eval = 1000, std::uint64_t seed = 0) {
  if (n_eval == 0) throw SpecError("n_eval must be >= 1");
  Rng rng = make_rng(seed);
  std::bernoulli_distribution coin(0.5);
  ProbabilityErrorStats st;
  st.count = n_eval;
  double sum = 0.0;
  std::size_t priced = 0;
  for (std::size_t i = 0; i < n_eval; ++i) {
    const Label y(coin(rng) ? 2 : 1);
    const Instance x = sample_gaussian_class(spec, y, rng);
    const Prediction p = predict(x);
    if (!p) {
      ++st.rejected;
      continue;
    }
    if (p->size() != 2) throw SpecError("probability error is defined for two classes");
    const double d = (*p)[1] - bayes_posterior(spec, x);
    sum += d * d;
    ++priced;
  }
  st.l2 = priced ? sum / static_cast<double>(priced) : 0.0;
  return st;
}

}  // namespace predmarket
