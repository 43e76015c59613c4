#pragma once

// Equilibrium price solvers. The equilibrium c satisfies
//   sum_m beta_m phi_m^k(x, c) = c_k B(x, c)   for every class k,
// with sum_k c_k = 1. Every solver reports the normalized residual
//   sum_k | sum_m beta_m phi_m^k / B - c_k |.

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "predmarket/error.hpp"
#include "predmarket/market.hpp"
#include "predmarket/types.hpp"

namespace predmarket {

struct SolverConfig {
  double tol = 1e-9;
  int max_mann_iters = 50;
  int max_inner_iters = 200;
  int max_outer_iters = 200;

  void validate() const {
    if (!(tol > 0.0)) throw SpecError("solver tolerance must be positive");
    if (max_mann_iters < 1 || max_inner_iters < 1 || max_outer_iters < 1)
      throw SpecError("solver iteration caps must be >= 1");
  }
};

enum class SolveMethod { analytic, two_class_bisection, double_bisection, mann, mann_fallback_bisection, single_class };

inline const char* to_string(SolveMethod m) {
  switch (m) {
    case SolveMethod::analytic: return "analytic";
    case SolveMethod::two_class_bisection: return "two_class_bisection";
    case SolveMethod::double_bisection: return "double_bisection";
    case SolveMethod::mann: return "mann";
    case SolveMethod::mann_fallback_bisection: return "mann_fallback_bisection";
    case SolveMethod::single_class: return "single_class";
  }
  return "unknown";
}

struct PriceSolution {
  PriceVector price;
  SolveMethod method = SolveMethod::analytic;
  double residual = 0.0;
  int iterations = 0;
  double total_bet = 0.0;  // B(x, c) at the returned price, the outer variable n

  bool fell_back() const noexcept { return method == SolveMethod::mann_fallback_bisection; }
};

/// Normalized residual of the price equations at c.
inline double price_residual(const BetBook& book, const PriceVector& c) {
  const auto f = book.class_bets(c);
  const double n = sum_of(f);
  if (!(n > 0.0)) throw Rejected();
  double r = 0.0;
  for (std::size_t k = 0; k < f.size(); ++k) r += std::abs(f[k] / n - c[k]);
  return r;
}

inline double price_residual(const Market& market, const Instance& x, const PriceVector& c) {
  return price_residual(BetBook(market, x), c);
}

namespace detail {

inline PriceVector normalized_price(std::vector<double> c) {
  const double s = sum_of(c);
  for (double& v : c) v = std::clamp(v / s, 0.0, 1.0);
  return PriceVector(std::move(c));
}

inline PriceSolution finish(const BetBook& book, PriceVector c, SolveMethod method, int iterations) {
  PriceSolution sol;
  sol.total_bet = book.total_bet(c);
  sol.residual = price_residual(book, c);
  sol.price = std::move(c);
  sol.method = method;
  sol.iterations = iterations;
  return sol;
}

/// Lower end of the bracket for a single class price.
inline double price_floor(const SolverConfig& cfg) { return cfg.tol * 1e-3; }

}  // namespace detail

/// Closed form for markets whose bets do not depend on the price:
/// c = sum_m beta_m phi_m(x) / sum_m sum_k beta_m phi_m^k(x).
inline PriceSolution solve_constant_analytic(const BetBook& book) {
  if (!book.price_independent())
    throw SpecError("analytic price requires price-independent betting functions");
  const auto fixed = book.fixed_class_bets();
  const double n = sum_of(fixed);
  if (book.empty() || !(n > 0.0)) throw Rejected();
  std::vector<double> c(fixed.begin(), fixed.end());
  for (double& v : c) v /= n;
  return detail::finish(book, detail::normalized_price(std::move(c)), SolveMethod::analytic, 0);
}

inline PriceSolution solve_constant_analytic(const Market& market, const Instance& x) {
  return solve_constant_analytic(BetBook(market, x));
}

/// Bisection on the two-class price equation, written with c = c_2 as
///   f_2(c) - f_1(1 - c) = 0,  f_k(c_k) = sum_m beta_m phi_m^k(x, c_k) / c_k,
/// which has the roots of (1-c) sum beta phi^2 - c sum beta phi^1 inside (0, 1)
/// and is strictly decreasing under the uniqueness hypotheses.
inline PriceSolution solve_two_class_bisection(const BetBook& book, const SolverConfig& cfg = {}) {
  cfg.validate();
  if (book.class_count() != 2) throw SpecError("two-class bisection needs K = 2");
  if (book.empty()) throw Rejected();
  const double lo0 = detail::price_floor(cfg);
  if (!(book.class_bet(0, lo0) > 0.0) || !(book.class_bet(1, lo0) > 0.0))
    throw NoRoot("two-class price: some class receives no bets at any price");

  auto g = [&](double c) { return book.class_bet(1, c) / c - book.class_bet(0, 1.0 - c) / (1.0 - c); };
  double lo = lo0, hi = 1.0 - lo0;
  int it = 0;
  if (g(lo) <= 0.0) {
    hi = lo;
  } else if (g(hi) >= 0.0) {
    lo = hi;
  } else {
    while (it < cfg.max_inner_iters) {
      ++it;
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      const double v = g(mid);
      if (v == 0.0) {
        lo = hi = mid;
        break;
      }
      (v > 0.0 ? lo : hi) = mid;
    }
  }
  const double c = 0.5 * (lo + hi);
  auto sol = detail::finish(book, PriceVector({1.0 - c, c}), SolveMethod::two_class_bisection, it);
  if (sol.residual > cfg.tol)
    throw NonConvergence("two-class bisection did not reach tolerance (residual " +
                         std::to_string(sol.residual) + ")");
  return sol;
}

inline PriceSolution solve_two_class_bisection(const Market& market, const Instance& x,
                                               const SolverConfig& cfg = {}) {
  return solve_two_class_bisection(BetBook(market, x), cfg);
}

/// Inner bisection: the price c_k(n) at which f_k(c_k) = n, taking the largest
/// such price where f_k is flat. Classes that receive no bets get price 0.
inline double class_price_for_level(const BetBook& book, std::size_t k, double n,
                                    const SolverConfig& cfg) {
  const double lo0 = detail::price_floor(cfg);
  const double support = book.class_bet(k, lo0);
  if (!(support > 0.0)) return 0.0;
  if (book.class_bet(k, 1.0) >= n) return 1.0;
  if (support / lo0 < n) return lo0;
  double lo = lo0, hi = 1.0;  // f(lo) >= n > f(hi)
  for (int it = 0; it < cfg.max_inner_iters; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (book.class_bet(k, mid) / mid >= n ? lo : hi) = mid;
  }
  return lo;
}

/// Outer bisection on the level n with sum_k c_k(n) = 1. The root never
/// exceeds the sum of active budgets.
inline PriceSolution solve_double_bisection(const BetBook& book, const SolverConfig& cfg = {}) {
  cfg.validate();
  if (book.empty()) throw Rejected();
  const std::size_t K = book.class_count();
  auto price_sum = [&](double n, std::vector<double>* out) {
    double s = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      const double ck = class_price_for_level(book, k, n, cfg);
      if (out) (*out)[k] = ck;
      s += ck;
    }
    return s;
  };
  double budget = 0.0;
  for (const auto& e : book.entries()) budget += e.budget;

  std::vector<double> c(K);
  double lo = 0.0, hi = budget * (1.0 + 1e-12);
  if (price_sum(hi, nullptr) > 1.0) {
    // Only possible when betting functions violate the budget constraint.
    for (int guard = 0; guard < 200 && price_sum(hi, nullptr) > 1.0; ++guard) hi *= 2.0;
  }
  int it = 0;
  while (it < cfg.max_outer_iters) {
    ++it;
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (price_sum(mid, nullptr) > 1.0 ? lo : hi) = mid;
  }
  // Of the two bracket ends, keep the one whose prices sum closer to one.
  std::vector<double> c_lo(K), c_hi(K);
  const double s_lo = lo > 0.0 ? price_sum(lo, &c_lo) : 0.0;
  const double s_hi = price_sum(hi, &c_hi);
  c = (lo > 0.0 && std::abs(s_lo - 1.0) < std::abs(s_hi - 1.0)) ? c_lo : c_hi;
  if (!(sum_of(c) > 0.0)) throw NoRoot("double bisection: no class receives bets");
  auto sol = detail::finish(book, detail::normalized_price(std::move(c)),
                            SolveMethod::double_bisection, it);
  if (sol.residual > cfg.tol)
    throw NonConvergence("double bisection did not reach tolerance (residual " +
                         std::to_string(sol.residual) + ")");
  return sol;
}

inline PriceSolution solve_double_bisection(const Market& market, const Instance& x,
                                            const SolverConfig& cfg = {}) {
  return solve_double_bisection(BetBook(market, x), cfg);
}

/// Averaged fixed-point iteration c <- ((i-1) c + F(c)) / i from the uniform
/// price, F(c) = (f_1, ..., f_K) / n. Falls back to double bisection when the
/// iteration cap is reached.
inline PriceSolution solve_mann(const BetBook& book, const SolverConfig& cfg = {}) {
  cfg.validate();
  if (book.empty()) throw Rejected();
  const std::size_t K = book.class_count();
  std::vector<double> c(K, 1.0 / static_cast<double>(K));
  std::vector<double> f(K);
  double r = 0.0;
  int i = 1;
  do {
    double n = 0.0;
    for (std::size_t k = 0; k < K; ++k) n += (f[k] = book.class_bet(k, c[k]));
    if (!(n > 0.0)) throw Rejected();
    r = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      f[k] /= n;
      r += std::abs(f[k] - c[k]);
      c[k] = ((i - 1) * c[k] + f[k]) / i;
    }
    ++i;
  } while (!(r <= cfg.tol) && i <= cfg.max_mann_iters);

  if (r <= cfg.tol) {
    auto sol = detail::finish(book, detail::normalized_price(c), SolveMethod::mann, i - 1);
    if (sol.residual <= cfg.tol) return sol;
  }
  auto sol = solve_double_bisection(book, cfg);
  sol.method = SolveMethod::mann_fallback_bisection;
  sol.iterations += i - 1;
  return sol;
}

inline PriceSolution solve_mann(const Market& market, const Instance& x, const SolverConfig& cfg = {}) {
  return solve_mann(BetBook(market, x), cfg);
}

namespace detail {

/// When only one class k receives bets at any price, the equations force
/// c = e_k. Returned directly because price-sensitive bets such as linear
/// betting vanish there, leaving total bet 0 at the exact root.
inline std::optional<PriceSolution> single_class_price(const BetBook& book, const SolverConfig& cfg) {
  if (book.empty()) return std::nullopt;
  const double lo0 = price_floor(cfg);
  std::optional<std::size_t> only;
  for (std::size_t k = 0; k < book.class_count(); ++k) {
    if (!(book.class_bet(k, lo0) > 0.0)) continue;
    if (only) return std::nullopt;
    only = k;
  }
  if (!only) return std::nullopt;
  std::vector<double> c(book.class_count(), 0.0);
  c[*only] = 1.0;
  PriceSolution sol;
  sol.price = PriceVector(std::move(c));
  sol.method = SolveMethod::single_class;
  sol.total_bet = book.total_bet(sol.price);
  return sol;
}

}  // namespace detail

enum class SolverChoice { automatic, analytic, two_class_bisection, double_bisection, mann };

/// Analytic when every active bet is price-independent, otherwise Mann
/// iteration with double-bisection fallback; or the requested solver.
inline PriceSolution solve_price(const BetBook& book, const SolverConfig& cfg = {},
                                 SolverChoice choice = SolverChoice::automatic) {
  switch (choice) {
    case SolverChoice::analytic: return solve_constant_analytic(book);
    case SolverChoice::two_class_bisection: return solve_two_class_bisection(book, cfg);
    case SolverChoice::double_bisection: return solve_double_bisection(book, cfg);
    case SolverChoice::mann: return solve_mann(book, cfg);
    case SolverChoice::automatic: break;
  }
  if (book.price_independent()) return solve_constant_analytic(book);
  if (auto vertex = detail::single_class_price(book, cfg)) return *std::move(vertex);
  return solve_mann(book, cfg);
}

inline PriceSolution solve_price(const Market& market, const Instance& x, const SolverConfig& cfg = {},
                                 SolverChoice choice = SolverChoice::automatic) {
  return solve_price(BetBook(market, x), cfg, choice);
}

}  // namespace predmarket
