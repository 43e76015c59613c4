#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "predmarket/betting.hpp"
#include "predmarket/error.hpp"
#include "predmarket/types.hpp"

namespace predmarket {

/// A budget paired with a betting function.
struct Participant {
  double budget = 1.0;
  BettingFunction bettor;
};

/// Budgets below this are treated as exactly zero.
inline constexpr double kBudgetFloor = 1e-15;
/// Negative budgets beyond this signal a betting function that bets more than
/// its budget.
inline constexpr double kNegativeBudgetSlack = 1e-12;
/// Relative drift of the total budget that triggers renormalization.
inline constexpr double kRenormalizeThreshold = 1e-12;
/// Drift above this is not floating-point noise (the price was not an
/// equilibrium); it is reported and left uncorrected.
inline constexpr double kRenormalizeWindow = 1e-6;

/// Outcome of a budget update.
struct UpdateReport {
  double drift = 0.0;  // |sum after - sum before| / sum before, before any correction
  bool renormalized = false;
};

/// Optional lookup that narrows down which participants can be active on an
/// instance. It covers the first covered() participants; later ones are
/// always scanned.
class CandidateIndex {
 public:
  virtual ~CandidateIndex() = default;
  virtual void candidates(const Instance& x, std::vector<std::size_t>& out) const = 0;
  virtual std::size_t covered() const = 0;
};

class Market {
 public:
  explicit Market(std::size_t class_count) : class_count_(class_count) {
    if (class_count < 2) throw SpecError("a market needs at least two classes");
  }

  void add(BettingFunction bettor, double budget) {
    if (!(budget >= 0.0) || !std::isfinite(budget)) throw SpecError("budget must be finite and >= 0");
    if (bettor.class_count() != class_count_)
      throw SpecError("betting function class count does not match the market");
    participants_.push_back(Participant{budget, std::move(bettor)});
    total_budget_ += budget;
  }

  std::size_t class_count() const noexcept { return class_count_; }
  std::size_t size() const noexcept { return participants_.size(); }
  bool empty() const noexcept { return participants_.empty(); }
  std::span<const Participant> participants() const noexcept { return participants_; }
  const Participant& operator[](std::size_t m) const { return participants_[m]; }

  /// Cached sum of budgets, kept in step with every update.
  double total_budget() const noexcept { return total_budget_; }
  double budget_sum() const {
    double s = 0.0;
    for (const auto& p : participants_) s += p.budget;
    return s;
  }

  std::vector<double> budgets() const {
    std::vector<double> b;
    b.reserve(participants_.size());
    for (const auto& p : participants_) b.push_back(p.budget);
    return b;
  }

  void set_budgets(std::span<const double> b) {
    if (b.size() != participants_.size()) throw SpecError("budget vector size mismatch");
    for (double v : b)
      if (!(v >= 0.0) || !std::isfinite(v)) throw SpecError("budget must be finite and >= 0");
    for (std::size_t m = 0; m < b.size(); ++m) participants_[m].budget = b[m];
    total_budget_ = budget_sum();
  }

  void reset_budgets(double beta0) { set_budgets(std::vector<double>(size(), beta0)); }

  BetContext context() const noexcept { return BetContext{total_budget_}; }

  void set_index(std::shared_ptr<const CandidateIndex> index) {
    if (index && index->covered() > participants_.size())
      throw SpecError("candidate index covers more participants than the market has");
    index_ = std::move(index);
  }
  const CandidateIndex* index() const noexcept { return index_.get(); }

  /// Writes new budgets for the listed participants, then enforces the budget
  /// floor and conservation bookkeeping against the total before the update.
  UpdateReport commit_budgets(std::span<const std::pair<std::size_t, double>> changes) {
    const double before = total_budget_;
    for (const auto& [m, b] : changes) {
      if (b < -kNegativeBudgetSlack * std::max(1.0, before))
        throw NumericalError("budget update produced a negative budget: the step is too large or a "
                             "betting function bets more than its budget");
      participants_[m].budget = b < kBudgetFloor ? 0.0 : b;
    }
    const double after = budget_sum();
    UpdateReport report;
    report.drift = before > 0.0 ? std::abs(after - before) / before : 0.0;
    if (report.drift > kRenormalizeThreshold && report.drift <= kRenormalizeWindow && after > 0.0) {
      const double scale = before / after;
      for (auto& p : participants_) p.budget *= scale;
      report.renormalized = true;
      total_budget_ = before;
    } else if (report.drift > kRenormalizeThreshold) {
      total_budget_ = after;
    }
    return report;
  }

 private:
  std::size_t class_count_;
  std::vector<Participant> participants_;
  double total_budget_ = 0.0;
  std::shared_ptr<const CandidateIndex> index_;
};

/// The bets placed on one instance: the participants with positive budget that
/// are active on x, with price-independent bets pre-summed per class.
class BetBook {
 public:
  struct Entry {
    std::size_t participant;
    double budget;
    const BettingFunction* core;  // the function that bets on x
    std::size_t fixed_offset;     // into fixed allocations, or npos for price-dependent
  };
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  BetBook(const Market& market, const Instance& x)
      : x_(&x), ctx_(market.context()), class_count_(market.class_count()),
        fixed_sum_(market.class_count(), 0.0) {
    if (!all_finite(x)) throw SpecError("instance has non-finite features");
    const auto parts = market.participants();
    std::vector<std::size_t> scan;
    const std::size_t first_unindexed = market.index() ? market.index()->covered() : 0;
    if (market.index()) {
      market.index()->candidates(x, scan);
      std::sort(scan.begin(), scan.end());
    }
    for (std::size_t m = first_unindexed; m < parts.size(); ++m) scan.push_back(m);
    for (std::size_t m : scan) {
      const auto& p = parts[m];
      if (p.budget <= 0.0) continue;
      const BettingFunction* core = p.bettor.active_core(x);
      if (core == nullptr) continue;
      if (core->price_independent()) {
        const auto phi = core->allocate(x, PriceVector::uniform(class_count_), ctx_);
        const std::size_t off = fixed_alloc_.size();
        fixed_alloc_.insert(fixed_alloc_.end(), phi.begin(), phi.end());
        for (std::size_t k = 0; k < class_count_; ++k) fixed_sum_[k] += p.budget * phi[k];
        entries_.push_back(Entry{m, p.budget, core, off});
      } else {
        dynamic_.push_back(entries_.size());
        entries_.push_back(Entry{m, p.budget, core, npos});
      }
    }
  }

  const Instance& instance() const noexcept { return *x_; }
  const BetContext& context() const noexcept { return ctx_; }
  std::size_t class_count() const noexcept { return class_count_; }
  std::span<const Entry> entries() const noexcept { return entries_; }
  bool empty() const noexcept { return entries_.empty(); }
  bool price_independent() const noexcept { return dynamic_.empty(); }

  /// sum_m beta_m phi_m^k(x, c_k).
  double class_bet(std::size_t k, double c_k) const {
    double s = fixed_sum_[k];
    for (std::size_t i : dynamic_) {
      const auto& e = entries_[i];
      s += e.budget * e.core->fraction(k, *x_, c_k, ctx_);
    }
    return s;
  }

  std::vector<double> class_bets(const PriceVector& c) const {
    std::vector<double> f(class_count_);
    for (std::size_t k = 0; k < class_count_; ++k) f[k] = class_bet(k, c[k]);
    return f;
  }

  /// B(x, c), the total amount bet.
  double total_bet(const PriceVector& c) const { return sum_of(class_bets(c)); }

  /// The allocation of one entry at price c.
  BetAllocation allocation(const Entry& e, const PriceVector& c) const {
    if (e.fixed_offset != npos) {
      const auto first = fixed_alloc_.begin() + static_cast<std::ptrdiff_t>(e.fixed_offset);
      return BetAllocation(first, first + static_cast<std::ptrdiff_t>(class_count_));
    }
    BetAllocation phi(class_count_);
    for (std::size_t k = 0; k < class_count_; ++k) phi[k] = e.core->fraction(k, *x_, c[k], ctx_);
    return phi;
  }

  /// Fixed (price-independent) part of the class bets.
  std::span<const double> fixed_class_bets() const noexcept { return fixed_sum_; }

 private:
  const Instance* x_;
  BetContext ctx_;
  std::size_t class_count_;
  std::vector<Entry> entries_;
  std::vector<std::size_t> dynamic_;
  std::vector<double> fixed_alloc_;
  std::vector<double> fixed_sum_;
};

inline double total_bet(const Market& market, const Instance& x, const PriceVector& c) {
  return BetBook(market, x).total_bet(c);
}

namespace detail {

/// beta_m <- beta_m + step_m * beta_m * (phi_m^y / c_y - sum_k phi_m^k) for every
/// active participant. step = 1 is the plain budget update.
template <class StepFn>
UpdateReport reward_participants(Market& market, const BetBook& book, Label y,
                                 const PriceVector& c, StepFn&& step_for) {
  if (y.index() >= market.class_count()) throw SpecError("label outside the market's classes");
  const double cy = c[y.index()];
  if (!(cy > 0.0)) throw NumericalError("budget update needs c_y > 0");
  std::vector<std::pair<std::size_t, double>> changes;
  changes.reserve(book.entries().size());
  for (const auto& e : book.entries()) {
    const auto phi = book.allocation(e, c);
    const double gain = phi[y.index()] / cy - sum_of(phi);
    changes.emplace_back(e.participant, e.budget + step_for(e) * e.budget * gain);
  }
  return market.commit_budgets(changes);
}

}  // namespace detail

/// Rewards participants for the realized class y at price c:
/// beta_m <- beta_m - sum_k beta_m phi_m^k + beta_m phi_m^y / c_y.
/// The total budget is conserved when c solves the price equations.
inline UpdateReport budget_update(Market& market, const Instance& x, Label y,
                                  const PriceVector& c) {
  const BetBook book(market, x);
  return detail::reward_participants(market, book, y, c, [](const auto&) { return 1.0; });
}

}  // namespace predmarket
