#pragma once

// Betting-function families. A betting function maps an instance x and a
// candidate price c to the fractions of a participant's budget spent on each
// class. Every family here makes phi^k depend on c only through c_k, which is
// what the price solvers exploit.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "predmarket/error.hpp"
#include "predmarket/types.hpp"

namespace predmarket {

/// Market-wide quantities some families need while betting.
struct BetContext {
  double total_budget = 1.0;  // B = sum of all participant budgets
};

// ---------------------------------------------------------------------------
// Free evaluation functions, one per family.

inline BetAllocation eval_constant(std::span<const double> h, double eta_bet) {
  if (!(eta_bet > 0.0 && eta_bet <= 1.0)) throw SpecError("constant betting needs eta in (0, 1]");
  BetAllocation phi(h.begin(), h.end());
  for (double& f : phi) f *= eta_bet;
  return phi;
}

inline BetAllocation eval_linear(std::span<const double> h, const PriceVector& c) {
  if (h.size() != c.size()) throw SpecError("classifier output and price differ in class count");
  BetAllocation phi(h.size());
  for (std::size_t k = 0; k < h.size(); ++k) phi[k] = (1.0 - c[k]) * h[k];
  return phi;
}

inline double aggressive_fraction(double h, double c, double eps) {
  if (c <= h) return h;
  if (c > h + eps) return 0.0;
  return h * (h + eps - c) / eps;
}

inline BetAllocation eval_aggressive(std::span<const double> h, const PriceVector& c,
                                     double eps) {
  if (!(eps > 0.0)) throw SpecError("aggressive betting needs eps > 0");
  if (h.size() != c.size()) throw SpecError("classifier output and price differ in class count");
  BetAllocation phi(h.size());
  for (std::size_t k = 0; k < h.size(); ++k) phi[k] = aggressive_fraction(h[k], c[k], eps);
  return phi;
}

/// Logistic fraction for one class at its own price c_k, before any clamping.
/// Class index 0 bets on the positive part of the feature, index 1 on the
/// negative part. The c_k -> 0 limit is 0.
inline double logistic_fraction_raw(std::size_t k, double feature, double c_k, double budget) {
  if (c_k <= 0.0) return 0.0;
  const double part = (k == 0) ? std::max(feature, 0.0) : -std::min(feature, 0.0);
  return c_k * (part - std::log(c_k) / budget);
}

/// Two-class logistic betting at price c = (1 - c2, c2), unclamped.
inline BetAllocation eval_logistic(const Instance& x, std::size_t feature_index,
                                   const PriceVector& c, double total_budget) {
  if (c.size() != 2) throw SpecError("logistic betting is defined for two classes");
  if (feature_index >= x.size()) throw SpecError("logistic feature index out of range");
  if (!(total_budget > 0.0)) throw SpecError("logistic betting needs a positive total budget");
  if (c[0] <= 0.0 || c[1] <= 0.0) throw NumericalError("logistic betting is singular at c in {0, 1}");
  const double v = x[feature_index];
  return {logistic_fraction_raw(0, v, c[0], total_budget),
          logistic_fraction_raw(1, v, c[1], total_budget)};
}

enum class KernelKind { cosine, rbf };

struct KernelSpec {
  KernelKind kind = KernelKind::rbf;
  double sigma = 0.2;
};

inline double kernel_similarity(const Instance& x, const Instance& ref, const KernelSpec& kernel) {
  if (x.size() != ref.size()) throw SpecError("kernel betting: dimension mismatch");
  if (kernel.kind == KernelKind::rbf) {
    double d2 = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) d2 += (x[i] - ref[i]) * (x[i] - ref[i]);
    return std::exp(-d2 / (kernel.sigma * kernel.sigma));
  }
  double dot = 0.0, nx = 0.0, nr = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    dot += x[i] * ref[i];
    nx += x[i] * x[i];
    nr += ref[i] * ref[i];
  }
  if (nx == 0.0 || nr == 0.0) throw NumericalError("cosine kernel undefined for a zero-norm instance");
  return std::clamp(dot / std::sqrt(nx * nr), -1.0, 1.0);
}

/// Bets u+ on the reference label and -u- on the other class (two classes).
inline BetAllocation eval_kernel(const Instance& x, const Instance& ref_x, Label ref_y,
                                 const KernelSpec& kernel) {
  if (ref_y.value() > 2) throw SpecError("kernel betting is defined for two classes");
  const double u = kernel_similarity(x, ref_x, kernel);
  BetAllocation phi(2, 0.0);
  phi[ref_y.index()] = std::max(u, 0.0);
  phi[1 - ref_y.index()] = std::max(-u, 0.0);
  return phi;
}

// ---------------------------------------------------------------------------
// Domains of specialized participants.

/// Half-open interval [low, high) on one feature.
struct FeatureInterval {
  std::size_t feature = 0;
  double low = -std::numeric_limits<double>::infinity();
  double high = std::numeric_limits<double>::infinity();
};

/// Axis-aligned box: the conjunction of split tests on a root-to-leaf path.
struct BoxDomain {
  std::vector<FeatureInterval> intervals;

  bool contains(const Instance& x) const {
    for (const auto& iv : intervals) {
      const double v = x.at(iv.feature);
      if (!(v >= iv.low && v < iv.high)) return false;
    }
    return true;
  }
};

/// Half-plane w.x + b >= 0.
struct HalfPlane {
  std::vector<double> w;
  double b = 0.0;

  bool contains(const Instance& x) const {
    if (x.size() != w.size()) throw SpecError("half-plane: dimension mismatch");
    double s = b;
    for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * x[i];
    return s >= 0.0;
  }
};

using DomainPredicate = std::variant<BoxDomain, HalfPlane>;

inline bool domain_contains(const DomainPredicate& d, const Instance& x) {
  return std::visit([&](const auto& dom) { return dom.contains(x); }, d);
}

// ---------------------------------------------------------------------------
// Betting function value type.

struct KernelReference {
  Instance x;
  Label y;
};

enum class BetFamily { constant, linear, aggressive, logistic, kernel, specialized };

class BettingFunction;

struct ConstantBet {
  ClassifierOutput h;
  double eta = 1.0;
};
struct LinearBet {
  ClassifierOutput h;
};
struct AggressiveBet {
  ClassifierOutput h;
  double eps = 0.01;
};
/// With clamp on, each class fraction is capped at 1/2 so the allocation never
/// exceeds the budget. With clamp off the unmodified logistic form is used.
struct LogisticBet {
  std::size_t feature = 0;
  bool clamp = true;
};
struct KernelBet {
  std::shared_ptr<const KernelReference> ref;
  KernelSpec kernel;
};
struct SpecializedBet {
  DomainPredicate domain;
  std::shared_ptr<const BettingFunction> inner;
};

inline constexpr double kLogisticClampCap = 0.5;

class BettingFunction {
 public:
  using Family = std::variant<ConstantBet, LinearBet, AggressiveBet, LogisticBet, KernelBet,
                              SpecializedBet>;

  BettingFunction(Family f) : family_(std::move(f)) { validate(); }  // NOLINT implicit
  template <class T>
    requires(!std::is_same_v<std::decay_t<T>, BettingFunction> &&
             !std::is_same_v<std::decay_t<T>, Family> && std::is_constructible_v<Family, T &&>)
  BettingFunction(T&& alternative)  // NOLINT implicit
      : BettingFunction(Family(std::forward<T>(alternative))) {}

  static BettingFunction constant(ClassifierOutput h, double eta = 1.0) {
    return ConstantBet{std::move(h), eta};
  }
  static BettingFunction linear(ClassifierOutput h) { return LinearBet{std::move(h)}; }
  static BettingFunction aggressive(ClassifierOutput h, double eps = 0.01) {
    return AggressiveBet{std::move(h), eps};
  }
  static BettingFunction logistic(std::size_t feature, bool clamp = true) {
    return LogisticBet{feature, clamp};
  }
  static BettingFunction kernel(std::shared_ptr<const KernelReference> ref, KernelSpec spec) {
    return KernelBet{std::move(ref), spec};
  }
  static BettingFunction specialized(DomainPredicate domain, BettingFunction inner) {
    return SpecializedBet{std::move(domain),
                          std::make_shared<const BettingFunction>(std::move(inner))};
  }

  const Family& family() const noexcept { return family_; }
  BetFamily kind() const noexcept { return static_cast<BetFamily>(family_.index()); }

  /// Number of classes this function bets on.
  std::size_t class_count() const {
    return std::visit(
        [](const auto& f) -> std::size_t {
          using T = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<T, SpecializedBet>) {
            return f.inner->class_count();
          } else if constexpr (std::is_same_v<T, LogisticBet> || std::is_same_v<T, KernelBet>) {
            return 2;
          } else {
            return f.h.size();
          }
        },
        family_);
  }

  /// True when the allocation does not depend on the price.
  bool price_independent() const {
    switch (kind()) {
      case BetFamily::constant:
      case BetFamily::kernel:
        return true;
      case BetFamily::specialized:
        return std::get<SpecializedBet>(family_).inner->price_independent();
      default:
        return false;
    }
  }

  /// The function that actually bets on x: itself, the inner function of a
  /// specialized participant whose domain contains x, or nullptr when a
  /// specialized participant stays out.
  const BettingFunction* active_core(const Instance& x) const {
    const BettingFunction* f = this;
    while (f->kind() == BetFamily::specialized) {
      const auto& s = std::get<SpecializedBet>(f->family_);
      if (!domain_contains(s.domain, x)) return nullptr;
      f = s.inner.get();
    }
    return f;
  }

  /// phi^k(x, c_k).
  double fraction(std::size_t k, const Instance& x, double c_k, const BetContext& ctx) const {
    return std::visit(
        [&](const auto& f) -> double {
          using T = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<T, ConstantBet>) {
            return f.eta * f.h[k];
          } else if constexpr (std::is_same_v<T, LinearBet>) {
            return (1.0 - c_k) * f.h[k];
          } else if constexpr (std::is_same_v<T, AggressiveBet>) {
            return aggressive_fraction(f.h[k], c_k, f.eps);
          } else if constexpr (std::is_same_v<T, LogisticBet>) {
            const double raw = logistic_fraction_raw(k, x.at(f.feature), c_k, ctx.total_budget);
            return f.clamp ? std::clamp(raw, 0.0, kLogisticClampCap) : raw;
          } else if constexpr (std::is_same_v<T, KernelBet>) {
            const double u = kernel_similarity(x, f.ref->x, f.kernel);
            return k == f.ref->y.index() ? std::max(u, 0.0) : std::max(-u, 0.0);
          } else {
            if (!domain_contains(f.domain, x)) return 0.0;
            return f.inner->fraction(k, x, c_k, ctx);
          }
        },
        family_);
  }

  /// phi(x, c) for all classes.
  BetAllocation allocate(const Instance& x, const PriceVector& c, const BetContext& ctx) const {
    if (const auto* core = active_core(x); core == nullptr) {
      return BetAllocation(class_count(), 0.0);
    } else if (core->kind() == BetFamily::kernel) {
      const auto& kb = std::get<KernelBet>(core->family_);
      return eval_kernel(x, kb.ref->x, kb.ref->y, kb.kernel);
    } else {
      BetAllocation phi(c.size());
      for (std::size_t k = 0; k < c.size(); ++k) phi[k] = core->fraction(k, x, c[k], ctx);
      return phi;
    }
  }

  /// Whether the logistic clamp binds for any class at price c.
  bool clamp_active(const Instance& x, const PriceVector& c, const BetContext& ctx) const {
    const auto* core = active_core(x);
    if (core == nullptr || core->kind() != BetFamily::logistic) return false;
    const auto& lb = std::get<LogisticBet>(core->family_);
    if (!lb.clamp) return false;
    for (std::size_t k = 0; k < 2; ++k) {
      const double raw = logistic_fraction_raw(k, x.at(lb.feature), c[k], ctx.total_budget);
      if (raw > kLogisticClampCap) return true;
    }
    return false;
  }

 private:
  void validate() const {
    std::visit(
        [](const auto& f) {
          using T = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<T, ConstantBet>) {
            validate_classifier_output(f.h);
            if (!(f.eta > 0.0 && f.eta <= 1.0)) throw SpecError("constant betting needs eta in (0, 1]");
          } else if constexpr (std::is_same_v<T, LinearBet>) {
            validate_classifier_output(f.h);
          } else if constexpr (std::is_same_v<T, AggressiveBet>) {
            validate_classifier_output(f.h);
            if (!(f.eps > 0.0)) throw SpecError("aggressive betting needs eps > 0");
          } else if constexpr (std::is_same_v<T, KernelBet>) {
            if (!f.ref) throw SpecError("kernel betting needs a reference example");
            if (f.ref->y.value() > 2) throw SpecError("kernel reference label must be 1 or 2");
            if (f.kernel.kind == KernelKind::rbf && !(f.kernel.sigma > 0.0))
              throw SpecError("rbf kernel needs sigma > 0");
          } else if constexpr (std::is_same_v<T, SpecializedBet>) {
            if (!f.inner) throw SpecError("specialized betting needs an inner function");
          }
        },
        family_);
  }

  Family family_;
};

inline BetAllocation eval_specialized(const BettingFunction& inner, const DomainPredicate& domain,
                                      const Instance& x, const PriceVector& c,
                                      const BetContext& ctx = {}) {
  if (!domain_contains(domain, x)) return BetAllocation(c.size(), 0.0);
  return inner.allocate(x, c, ctx);
}

// ---------------------------------------------------------------------------
// Descriptor grammar:
//   constant(eta,[h...])  linear([h...])  aggressive(eps,[h...])
//   logistic(feature) | logistic(feature,raw)
//   kernel(cosine,ref_id) | kernel(rbf:sigma,ref_id)
//   specialized([(feature,low,high),...],inner) | specialized(halfplane(w...,b),inner)
// Numbers are written with 17 significant digits so parsing is lossless.

/// Kernel reference examples, numbered in first-use order.
class ReferenceTable {
 public:
  std::size_t intern(const std::shared_ptr<const KernelReference>& ref) {
    if (auto it = ids_.find(ref.get()); it != ids_.end()) return it->second;
    const std::size_t id = refs_.size();
    refs_.push_back(ref);
    ids_.emplace(ref.get(), id);
    return id;
  }
  void add(std::shared_ptr<const KernelReference> ref) { intern(ref); }
  const std::shared_ptr<const KernelReference>& at(std::size_t id) const {
    if (id >= refs_.size()) throw SpecError("kernel reference id out of range");
    return refs_[id];
  }
  std::size_t size() const noexcept { return refs_.size(); }

 private:
  std::vector<std::shared_ptr<const KernelReference>> refs_;
  std::map<const KernelReference*, std::size_t> ids_;
};

inline std::string format_number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace detail {

inline void append_list(std::string& out, std::span<const double> v) {
  out += '[';
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += format_number(v[i]);
  }
  out += ']';
}

class DescriptorParser {
 public:
  DescriptorParser(std::string_view text, const ReferenceTable* refs) : s_(text), refs_(refs) {}

  BettingFunction parse_all() {
    BettingFunction f = parse_function();
    skip_ws();
    if (pos_ != s_.size()) fail("trailing characters");
    return f;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw SpecError("bad betting descriptor '" + std::string(s_) + "' at " +
                    std::to_string(pos_) + ": " + what);
  }
  void skip_ws() {
    while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t')) ++pos_;
  }
  bool peek(char ch) {
    skip_ws();
    return pos_ < s_.size() && s_[pos_] == ch;
  }
  void expect(char ch) {
    if (!peek(ch)) fail(std::string("expected '") + ch + "'");
    ++pos_;
  }
  std::string word() {
    skip_ws();
    const std::size_t start = pos_;
    while (pos_ < s_.size() && (std::isalpha(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_'))
      ++pos_;
    if (start == pos_) fail("expected a name");
    return std::string(s_.substr(start, pos_ - start));
  }
  double number() {
    skip_ws();
    const std::string rest(s_.substr(pos_, std::min<std::size_t>(64, s_.size() - pos_)));
    char* end = nullptr;
    const double v = std::strtod(rest.c_str(), &end);
    if (end == rest.c_str()) fail("expected a number");
    pos_ += static_cast<std::size_t>(end - rest.c_str());
    return v;
  }
  std::size_t index() {
    const double v = number();
    if (v < 0 || v != std::floor(v)) fail("expected a non-negative integer");
    return static_cast<std::size_t>(v);
  }
  std::vector<double> list() {
    expect('[');
    std::vector<double> v;
    if (!peek(']')) {
      v.push_back(number());
      while (peek(',')) {
        ++pos_;
        v.push_back(number());
      }
    }
    expect(']');
    return v;
  }

  DomainPredicate domain() {
    if (peek('[')) {
      ++pos_;
      BoxDomain box;
      if (!peek(']')) {
        do {
          if (peek(',')) ++pos_;
          expect('(');
          FeatureInterval iv;
          iv.feature = index();
          expect(',');
          iv.low = number();
          expect(',');
          iv.high = number();
          expect(')');
          box.intervals.push_back(iv);
        } while (peek(','));
      }
      expect(']');
      return box;
    }
    if (word() != "halfplane") fail("expected a box or halfplane domain");
    expect('(');
    std::vector<double> v{number()};
    while (peek(',')) {
      ++pos_;
      v.push_back(number());
    }
    expect(')');
    if (v.size() < 2) fail("halfplane needs weights and an offset");
    HalfPlane hp;
    hp.b = v.back();
    v.pop_back();
    hp.w = std::move(v);
    return hp;
  }

  BettingFunction parse_function() {
    const std::string name = word();
    expect('(');
    auto close = [&](BettingFunction f) {
      expect(')');
      return f;
    };
    if (name == "constant") {
      const double eta = number();
      expect(',');
      return close(BettingFunction::constant(list(), eta));
    }
    if (name == "linear") return close(BettingFunction::linear(list()));
    if (name == "aggressive") {
      const double eps = number();
      expect(',');
      return close(BettingFunction::aggressive(list(), eps));
    }
    if (name == "logistic") {
      const std::size_t feature = index();
      bool clamp = true;
      if (peek(',')) {
        ++pos_;
        if (word() != "raw") fail("expected 'raw'");
        clamp = false;
      }
      return close(BettingFunction::logistic(feature, clamp));
    }
    if (name == "kernel") {
      KernelSpec spec;
      const std::string kind = word();
      if (kind == "cosine") {
        spec.kind = KernelKind::cosine;
        spec.sigma = 0.0;
      } else if (kind == "rbf") {
        spec.kind = KernelKind::rbf;
        expect(':');
        spec.sigma = number();
      } else {
        fail("unknown kernel '" + kind + "'");
      }
      expect(',');
      const std::size_t id = index();
      if (refs_ == nullptr) fail("kernel descriptor without a reference table");
      return close(BettingFunction::kernel(refs_->at(id), spec));
    }
    if (name == "specialized") {
      DomainPredicate d = domain();
      expect(',');
      BettingFunction inner = parse_function();
      return close(BettingFunction::specialized(std::move(d), std::move(inner)));
    }
    fail("unknown family '" + name + "'");
  }

  std::string_view s_;
  const ReferenceTable* refs_;
  std::size_t pos_ = 0;
};

}  // namespace detail

/// Serializes a betting function. Kernel references are interned into refs.
inline std::string to_descriptor(const BettingFunction& fn, ReferenceTable* refs = nullptr) {
  std::string out;
  std::visit(
      [&](const auto& f) {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, ConstantBet>) {
          out += "constant(" + format_number(f.eta) + ",";
          detail::append_list(out, f.h);
          out += ')';
        } else if constexpr (std::is_same_v<T, LinearBet>) {
          out += "linear(";
          detail::append_list(out, f.h);
          out += ')';
        } else if constexpr (std::is_same_v<T, AggressiveBet>) {
          out += "aggressive(" + format_number(f.eps) + ",";
          detail::append_list(out, f.h);
          out += ')';
        } else if constexpr (std::is_same_v<T, LogisticBet>) {
          out += "logistic(" + std::to_string(f.feature) + (f.clamp ? ")" : ",raw)");
        } else if constexpr (std::is_same_v<T, KernelBet>) {
          if (refs == nullptr) throw SpecError("kernel descriptor needs a reference table");
          out += "kernel(";
          out += f.kernel.kind == KernelKind::cosine ? std::string("cosine")
                                                      : "rbf:" + format_number(f.kernel.sigma);
          out += "," + std::to_string(refs->intern(f.ref)) + ")";
        } else {
          out += "specialized(";
          if (const auto* box = std::get_if<BoxDomain>(&f.domain)) {
            out += '[';
            for (std::size_t i = 0; i < box->intervals.size(); ++i) {
              const auto& iv = box->intervals[i];
              if (i) out += ',';
              out += "(" + std::to_string(iv.feature) + "," + format_number(iv.low) + "," +
                     format_number(iv.high) + ")";
            }
            out += ']';
          } else {
            const auto& hp = std::get<HalfPlane>(f.domain);
            out += "halfplane(";
            for (double w : hp.w) out += format_number(w) + ",";
            out += format_number(hp.b) + ")";
          }
          out += "," + to_descriptor(*f.inner, refs) + ")";
        }
      },
      fn.family());
  return out;
}

inline BettingFunction parse_descriptor(std::string_view text,
                                        const ReferenceTable* refs = nullptr) {
  return detail::DescriptorParser(text, refs).parse_all();
}

}  // namespace predmarket
