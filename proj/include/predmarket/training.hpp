#pragma once

// Budget learning: the plain budget update, likelihood-driven incremental,
// batch and weighted updates, the online training loop, and the implicit
// online learning baseline for linear aggregation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "predmarket/data.hpp"
#include "predmarket/error.hpp"
#include "predmarket/market.hpp"
#include "predmarket/random.hpp"
#include "predmarket/solver.hpp"

namespace predmarket {

enum class UpdateKind { raw_alg1, ml_incremental, ml_batch, ml_weighted };

inline const char* to_string(UpdateKind k) {
  switch (k) {
    case UpdateKind::raw_alg1: return "raw_alg1";
    case UpdateKind::ml_incremental: return "ml_incremental";
    case UpdateKind::ml_batch: return "ml_batch";
    case UpdateKind::ml_weighted: return "ml_weighted";
  }
  return "unknown";
}

struct UpdateRule {
  UpdateKind kind = UpdateKind::ml_incremental;
  double eta = 0.1;
  std::vector<double> class_weights;  // ml_weighted: w(x) = class_weights[y - 1]
  int epochs = 1;
  bool shuffle = false;  // seeded reshuffle of the presentation order each epoch

  void validate(std::size_t class_count) const {
    if (epochs < 1) throw SpecError("epochs must be >= 1");
    if (kind != UpdateKind::raw_alg1 && !(eta > 0.0)) throw SpecError("learning rate must be > 0");
    if (kind == UpdateKind::ml_weighted) {
      if (class_weights.size() != class_count) throw SpecError("need one weight per class");
      for (double w : class_weights)
        if (!(w > 0.0)) throw SpecError("class weights must be > 0");
    }
  }
};

/// Probabilities are floored here before taking logs.
inline constexpr double kLogProbFloor = 1e-12;

// ---------------------------------------------------------------------------
// Single-example updates

/// beta_m <- beta_m + (eta / B) beta_m [phi_m^y / c_y - sum_k phi_m^k].
/// Active participants that all bet nothing at c leave the budgets unchanged.
inline UpdateReport ml_incremental_step(Market& market, const BetBook& book, Label y,
                                        const PriceVector& c, double eta) {
  if (book.empty()) throw Rejected();
  const double B = book.total_bet(c);
  if (!(B > 0.0)) return {};
  const double step = eta / B;
  return detail::reward_participants(market, book, y, c, [&](const auto&) { return step; });
}

inline UpdateReport ml_incremental_step(Market& market, const Instance& x, Label y,
                                        const PriceVector& c, double eta) {
  const BetBook book(market, x);
  return ml_incremental_step(market, book, y, c, eta);
}

/// The incremental step with eta scaled by the example weight w.
inline UpdateReport ml_weighted_step(Market& market, const BetBook& book, Label y,
                                     const PriceVector& c, double eta, double w) {
  if (!(w >= 0.0)) throw SpecError("example weight must be >= 0");
  if (w == 0.0) return {};
  return ml_incremental_step(market, book, y, c, eta * w);
}

inline UpdateReport ml_weighted_step(Market& market, const Instance& x, Label y,
                                     const PriceVector& c, double eta, double w) {
  const BetBook book(market, x);
  return ml_weighted_step(market, book, y, c, eta, w);
}

/// eta times the plain budget update (a fixed step instead of eta / B).
inline UpdateReport fixed_step_update(Market& market, const BetBook& book, Label y,
                                      const PriceVector& c, double eta) {
  return detail::reward_participants(market, book, y, c, [&](const auto&) { return eta; });
}

inline UpdateReport fixed_step_update(Market& market, const Instance& x, Label y,
                                      const PriceVector& c, double eta) {
  const BetBook book(market, x);
  return fixed_step_update(market, book, y, c, eta);
}

// ---------------------------------------------------------------------------
// Batch update for price-independent markets

struct BatchReport {
  UpdateReport update;
  std::size_t skipped = 0;  // examples whose realized class has price 0
};

/// One simultaneous update over all examples:
/// beta_m <- beta_m + beta_m (eta / N) sum_i (1 / B_i) [phi_m^{y_i} / c_{y_i} - sum_k phi_m^k].
inline BatchReport ml_batch_step(Market& market, const Dataset& data, double eta) {
  if (data.empty()) throw SpecError("batch update needs data");
  std::vector<double> acc(market.size(), 0.0);
  BatchReport report;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const BetBook book(market, data.instance(i));
    if (!book.price_independent()) throw SpecError("batch update is defined for constant betting");
    const auto sol = solve_constant_analytic(book);  // throws Rejected when B = 0
    const auto y = data.label(i).index();
    const double cy = sol.price[y];
    if (!(cy > 0.0)) {
      ++report.skipped;
      continue;
    }
    const double B = sol.total_bet;
    for (const auto& e : book.entries()) {
      const auto phi = book.allocation(e, sol.price);
      acc[e.participant] += (phi[y] / cy - sum_of(phi)) / B;
    }
  }
  const double scale = eta / static_cast<double>(data.size());
  std::vector<std::pair<std::size_t, double>> changes;
  const auto parts = market.participants();
  for (std::size_t m = 0; m < parts.size(); ++m)
    if (acc[m] != 0.0) changes.emplace_back(m, parts[m].budget * (1.0 + scale * acc[m]));
  report.update = market.commit_budgets(changes);
  return report;
}

// ---------------------------------------------------------------------------
// Evaluation helpers shared by training and reporting

struct MarketEvaluation {
  double log_likelihood = 0.0;  // mean ln c_y over priced instances
  double error = 0.0;           // misclassification rate, rejections count as errors
  std::size_t evaluated = 0;
  std::size_t rejected = 0;
  std::size_t fallbacks = 0;
};

inline MarketEvaluation evaluate_market(const Market& market, const Dataset& data,
                                        const SolverConfig& cfg = {},
                                        SolverChoice choice = SolverChoice::automatic) {
  MarketEvaluation ev;
  std::size_t wrong = 0;
  double ll = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const BetBook book(market, data.instance(i));
    std::optional<PriceSolution> sol;
    try {
      sol = solve_price(book, cfg, choice);
    } catch (const Rejected&) {
      ++ev.rejected;
      ++wrong;
      continue;
    }
    ++ev.evaluated;
    ev.fallbacks += sol->fell_back();
    const auto y = data.label(i).index();
    ll += std::log(std::max(sol->price[y], kLogProbFloor));
    wrong += sol->price.argmax() != y;
  }
  ev.log_likelihood = ev.evaluated ? ll / static_cast<double>(ev.evaluated) : 0.0;
  ev.error = data.empty() ? 0.0 : static_cast<double>(wrong) / static_cast<double>(data.size());
  return ev;
}

/// L = (1/N) sum_i ln c_{y_i}(x_i) over non-rejected instances.
inline double log_likelihood(const Market& market, const Dataset& data, const SolverConfig& cfg = {}) {
  const auto ev = evaluate_market(market, data, cfg);
  if (ev.evaluated == 0) throw Rejected("every instance was rejected");
  return ev.log_likelihood;
}

/// Gradient of L with respect to gamma_m = sqrt(beta_m) for a
/// price-independent market:
/// dL/dgamma_j = (2 gamma_j / N) sum_i (1 / B_i) [phi_j^{y_i} / c_{y_i} - sum_k phi_j^k].
inline std::vector<double> log_likelihood_gradient(const Market& market, const Dataset& data) {
  std::vector<double> grad(market.size(), 0.0);
  std::size_t n = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const BetBook book(market, data.instance(i));
    const auto sol = solve_constant_analytic(book);
    const auto y = data.label(i).index();
    const double cy = std::max(sol.price[y], kLogProbFloor);
    ++n;
    for (const auto& e : book.entries()) {
      const auto phi = book.allocation(e, sol.price);
      grad[e.participant] += (phi[y] / cy - sum_of(phi)) / sol.total_bet;
    }
  }
  const auto parts = market.participants();
  for (std::size_t m = 0; m < grad.size(); ++m)
    grad[m] *= 2.0 * std::sqrt(parts[m].budget) / static_cast<double>(n);
  return grad;
}

// ---------------------------------------------------------------------------
// Online training loop

struct EpochStats {
  int epoch = 0;
  double nll = 0.0;  // negative mean log-likelihood on the training data
  double train_error = 0.0;
  std::optional<double> test_error;
  std::size_t rejected = 0;   // skipped during the pass: no participant bet
  std::size_t degenerate = 0; // skipped during the pass: realized class priced at 0
  std::size_t fallbacks = 0;  // Mann solves that needed double bisection
  double max_drift = 0.0;     // largest relative budget drift of any update
};

struct TrainingTrace {
  std::vector<EpochStats> epochs;

  /// CSV columns: epoch,nll,train_err,test_err (test_err empty when absent).
  void write_csv(std::ostream& out) const {
    out << "epoch,nll,train_err,test_err\n";
    for (const auto& e : epochs) {
      out << e.epoch << ',' << format_number(e.nll) << ',' << format_number(e.train_error) << ',';
      if (e.test_error) out << format_number(*e.test_error);
      out << '\n';
    }
  }
};

/// Presents the examples `rule.epochs` times, solving the price and updating
/// budgets after each one. Rejected instances are skipped and counted.
inline TrainingTrace train_online(Market& market, const Dataset& train, const UpdateRule& rule,
                                  const SolverConfig& cfg = {}, std::uint64_t seed = 0,
                                  const Dataset* test = nullptr,
                                  SolverChoice choice = SolverChoice::automatic) {
  if (train.empty()) throw SpecError("training data is empty");
  rule.validate(market.class_count());
  cfg.validate();
  TrainingTrace trace;
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (int epoch = 1; epoch <= rule.epochs; ++epoch) {
    EpochStats st;
    st.epoch = epoch;
    if (rule.kind == UpdateKind::ml_batch) {
      const auto rep = ml_batch_step(market, train, rule.eta);
      st.degenerate = rep.skipped;
      st.max_drift = rep.update.drift;
    } else {
      if (rule.shuffle) {
        Rng rng = make_rng(seed, static_cast<std::uint64_t>(epoch));
        std::shuffle(order.begin(), order.end(), rng);
      }
      for (std::size_t i : order) {
        const BetBook book(market, train.instance(i));
        std::optional<PriceSolution> sol;
        try {
          sol = solve_price(book, cfg, choice);
        } catch (const Rejected&) {
          ++st.rejected;
          continue;
        }
        st.fallbacks += sol->fell_back();
        const Label y = train.label(i);
        if (!(sol->price[y.index()] > 0.0)) {
          ++st.degenerate;
          continue;
        }
        UpdateReport rep;
        switch (rule.kind) {
          case UpdateKind::raw_alg1:
            rep = detail::reward_participants(market, book, y, sol->price, [](const auto&) { return 1.0; });
            break;
          case UpdateKind::ml_incremental:
            rep = ml_incremental_step(market, book, y, sol->price, rule.eta);
            break;
          case UpdateKind::ml_weighted:
            rep = ml_weighted_step(market, book, y, sol->price, rule.eta, rule.class_weights[y.index()]);
            break;
          case UpdateKind::ml_batch:
            break;
        }
        st.max_drift = std::max(st.max_drift, rep.drift);
      }
    }
    const auto ev = evaluate_market(market, train, cfg, choice);
    st.nll = -ev.log_likelihood;
    st.train_error = ev.error;
    if (test != nullptr) st.test_error = evaluate_market(market, *test, cfg, choice).error;
    trace.epochs.push_back(st);
  }
  return trace;
}

// ---------------------------------------------------------------------------
// Implicit online learning baseline

/// Euclidean projection onto the probability simplex (sort-based).
inline std::vector<double> project_to_simplex(std::span<const double> v) {
  if (v.empty()) throw SpecError("cannot project an empty vector");
  std::vector<double> u(v.begin(), v.end());
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumsum = 0.0, theta = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) {
    cumsum += u[j];
    const double t = (cumsum - 1.0) / static_cast<double>(j + 1);
    if (u[j] - t > 0.0) theta = t;
  }
  std::vector<double> w(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) w[i] = std::max(v[i] - theta, 0.0);
  return w;
}

/// One implicit step on the loss -log(H^y . beta) with squared Euclidean
/// divergence: q = H^y.beta, r = |H^y|^2, p = (q + sqrt(q^2 + 4 eta r)) / 2,
/// beta~ = beta + (eta / p) H^y, then projection onto the simplex.
inline std::vector<double> implicit_online_step(std::span<const double> beta,
                                                std::span<const double> hy, double eta_t) {
  if (beta.size() != hy.size()) throw SpecError("implicit step: size mismatch");
  if (eta_t < 0.0) throw SpecError("implicit step: negative learning rate");
  if (eta_t == 0.0) return std::vector<double>(beta.begin(), beta.end());
  double q = 0.0, r = 0.0;
  for (std::size_t m = 0; m < beta.size(); ++m) {
    q += hy[m] * beta[m];
    r += hy[m] * hy[m];
  }
  if (q == 0.0 && r == 0.0) throw NumericalError("implicit step: no participant predicts the true class");
  const double p = 0.5 * (q + std::sqrt(q * q + 4.0 * eta_t * r));
  std::vector<double> next(beta.size());
  for (std::size_t m = 0; m < beta.size(); ++m) next[m] = beta[m] + eta_t / p * hy[m];
  return project_to_simplex(next);
}

/// Weights for the linear aggregation c(x) = sum_m beta_m h_m(x), starting
/// from uniform weights, plus the global step counter t.
struct ImplicitOnlineState {
  std::vector<double> beta;
  std::size_t t = 0;

  explicit ImplicitOnlineState(std::size_t participant_count = 0)
      : beta(participant_count, participant_count ? 1.0 / static_cast<double>(participant_count) : 0.0) {}
};

/// One pass over the data with eta_t = 1 / sqrt(t), t counting every example
/// presented so far. `outputs(x)` returns the M classifier outputs at x.
template <class OutputsFn>
void implicit_online_epoch(ImplicitOnlineState& state, const Dataset& train, OutputsFn&& outputs) {
  const std::size_t M = state.beta.size();
  if (M == 0) throw SpecError("implicit online learning needs participants");
  std::vector<double> hy(M);
  for (std::size_t i = 0; i < train.size(); ++i) {
    const std::vector<ClassifierOutput> h = outputs(train.instance(i));
    if (h.size() != M) throw SpecError("implicit online learning: wrong number of outputs");
    const auto y = train.label(i).index();
    for (std::size_t m = 0; m < M; ++m) hy[m] = h[m][y];
    ++state.t;
    try {
      state.beta = implicit_online_step(state.beta, hy, 1.0 / std::sqrt(static_cast<double>(state.t)));
    } catch (const NumericalError&) {
      // nobody predicts the true class: the loss is flat in beta
    }
  }
}

template <class OutputsFn>
std::vector<double> train_implicit_online(const Dataset& train, OutputsFn&& outputs,
                                          std::size_t participant_count, int epochs = 1) {
  ImplicitOnlineState state(participant_count);
  for (int e = 0; e < epochs; ++e) implicit_online_epoch(state, train, outputs);
  return state.beta;
}

}  // namespace predmarket
