#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "predmarket/error.hpp"

namespace predmarket {

/// A point of the feature space. All entries must be finite.
using Instance = std::vector<double>;

/// Per-class fractions of a participant's budget, phi(x, c).
using BetAllocation = std::vector<double>;

/// Output h(x) of a classifier, a point on the probability simplex.
using ClassifierOutput = std::vector<double>;

inline constexpr double kSimplexTol = 1e-9;
inline constexpr double kAllocationSlack = 1e-12;

inline bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double a) { return std::isfinite(a); });
}

inline double sum_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0);
}

/// Class label in {1, ..., K}. Stored one-based, as it appears in data files.
class Label {
 public:
  constexpr Label() = default;
  explicit Label(int value) : value_(value) {
    if (value < 1) throw SpecError("class label must be >= 1, got " + std::to_string(value));
  }
  static Label from_index(std::size_t k) { return Label(static_cast<int>(k) + 1); }

  constexpr int value() const noexcept { return value_; }
  constexpr std::size_t index() const noexcept { return static_cast<std::size_t>(value_ - 1); }

  friend constexpr bool operator==(Label, Label) = default;
  friend constexpr auto operator<=>(Label, Label) = default;

 private:
  int value_ = 1;
};

/// Contract prices c on the K-simplex. A winning contract pays 1.
class PriceVector {
 public:
  PriceVector() = default;

  /// Throws SpecError unless every price is in [0, 1] and they sum to 1
  /// within kSimplexTol.
  explicit PriceVector(std::vector<double> prices) : prices_(std::move(prices)) {
    if (prices_.size() < 2) throw SpecError("price vector needs at least two classes");
    for (double p : prices_) {
      if (!std::isfinite(p) || p < 0.0 || p > 1.0)
        throw SpecError("contract price outside [0, 1]");
    }
    if (std::abs(sum_of(prices_) - 1.0) > kSimplexTol)
      throw SpecError("contract prices do not sum to 1");
  }

  static PriceVector uniform(std::size_t class_count) {
    return PriceVector(std::vector<double>(class_count, 1.0 / static_cast<double>(class_count)));
  }

  double operator[](std::size_t k) const { return prices_[k]; }
  std::size_t size() const noexcept { return prices_.size(); }
  std::span<const double> values() const noexcept { return prices_; }
  const std::vector<double>& vector() const noexcept { return prices_; }

  double min() const { return *std::min_element(prices_.begin(), prices_.end()); }

  /// Index of the largest price; ties go to the smallest class index.
  std::size_t argmax() const {
    return static_cast<std::size_t>(std::max_element(prices_.begin(), prices_.end()) -
                                    prices_.begin());
  }

 private:
  std::vector<double> prices_;
};

inline bool is_valid_allocation(std::span<const double> phi) {
  double total = 0.0;
  for (double f : phi) {
    if (!std::isfinite(f) || f < 0.0 || f > 1.0) return false;
    total += f;
  }
  return total <= 1.0 + kAllocationSlack;
}

inline void validate_classifier_output(std::span<const double> h) {
  if (h.size() < 2) throw SpecError("classifier output needs at least two classes");
  for (double v : h) {
    if (!std::isfinite(v) || v < 0.0 || v > 1.0)
      throw SpecError("classifier output entry outside [0, 1]");
  }
  if (std::abs(sum_of(h) - 1.0) > kSimplexTol)
    throw SpecError("classifier output does not sum to 1");
}

}  // namespace predmarket
