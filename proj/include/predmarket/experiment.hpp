#pragma once

// Experiment orchestration: forest-leaf markets and baselines trained and
// evaluated under a holdout, k-fold or fixed train/test protocol, plus the
// synthetic two-Gaussian benchmark and report emission.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "predmarket/data.hpp"
#include "predmarket/error.hpp"
#include "predmarket/forest.hpp"
#include "predmarket/market.hpp"
#include "predmarket/metrics.hpp"
#include "predmarket/parallel.hpp"
#include "predmarket/serialization.hpp"
#include "predmarket/solver.hpp"
#include "predmarket/training.hpp"

namespace predmarket {

/// rf: equal-budget constant leaf market (the forest itself); cb, lb, ab:
/// trained constant, linear and aggressive leaf markets; implicit: trees
/// aggregated with implicit-online weights.
enum class Method { rf, cb, lb, ab, implicit };

inline const char* to_string(Method m) {
  switch (m) {
    case Method::rf: return "rf";
    case Method::cb: return "cb";
    case Method::lb: return "lb";
    case Method::ab: return "ab";
    case Method::implicit: return "implicit";
  }
  return "unknown";
}

inline Method method_from_string(const std::string& s) {
  for (Method m : {Method::rf, Method::cb, Method::lb, Method::ab, Method::implicit})
    if (s == to_string(m)) return m;
  throw SpecError("unknown method '" + s + "' (expected rf, cb, lb, ab or implicit)");
}

inline UpdateKind update_kind_from_string(const std::string& s) {
  for (UpdateKind k : {UpdateKind::raw_alg1, UpdateKind::ml_incremental, UpdateKind::ml_batch,
                       UpdateKind::ml_weighted})
    if (s == to_string(k)) return k;
  throw SpecError("unknown update rule '" + s + "'");
}

enum class Protocol { holdout, kfold, given };

inline const char* to_string(Protocol p) {
  switch (p) {
    case Protocol::holdout: return "holdout";
    case Protocol::kfold: return "kfold";
    case Protocol::given: return "given";
  }
  return "unknown";
}

inline Protocol protocol_from_string(const std::string& s) {
  for (Protocol p : {Protocol::holdout, Protocol::kfold, Protocol::given})
    if (s == to_string(p)) return p;
  throw SpecError("unknown protocol '" + s + "' (expected holdout, kfold or given)");
}

/// How the leaf markets are built and trained.
struct MarketRecipe {
  std::size_t n_trees = kDefaultTreeCount;
  double beta0 = 1.0;
  double aggressive_eps = 0.01;
  UpdateKind cb_update = UpdateKind::ml_incremental;
  std::optional<double> eta;  // default: 10 / N_train, or 10 for the batch update
  int epochs = 1;
  int max_epochs = 0;  // > 0: pick epochs in [1, max_epochs] by inner cross-validation
  std::size_t epoch_cv_folds = 10;
  bool shuffle = false;
  SolverConfig solver;

  double eta_for(UpdateKind kind, std::size_t n_train) const {
    if (eta) return *eta;
    return kind == UpdateKind::ml_batch ? 10.0 : 10.0 / static_cast<double>(n_train);
  }

  void validate() const {
    if (n_trees < 1) throw SpecError("n_trees must be >= 1");
    if (!(beta0 > 0.0)) throw SpecError("beta0 must be > 0");
    if (!(aggressive_eps > 0.0 && aggressive_eps <= 1.0)) throw SpecError("aggressive eps must be in (0, 1]");
    if (cb_update == UpdateKind::ml_weighted) throw SpecError("cb_update: weighted updates need class weights");
    if (eta && !(*eta > 0.0)) throw SpecError("eta must be > 0");
    if (epochs < 1) throw SpecError("epochs must be >= 1");
    if (max_epochs < 0) throw SpecError("max_epochs must be >= 0");
    if (max_epochs > 0 && epoch_cv_folds < 2) throw SpecError("epoch_cv_folds must be >= 2");
    solver.validate();
  }
};

struct SyntheticSource {
  std::size_t dim = 10;
  double bayes_error = 0.2;
  std::size_t n = 200;
};

struct DataSource {
  std::string train_path;
  std::string test_path;  // used by the given protocol
  CsvOptions csv;
  std::optional<SyntheticSource> synthetic;
};

struct ExperimentSpec {
  DataSource data;
  std::vector<Method> methods{Method::rf, Method::cb, Method::lb, Method::ab};
  MarketRecipe market;
  Protocol protocol = Protocol::holdout;
  double test_fraction = 0.1;
  std::size_t folds = 10;
  std::size_t repeats = 10;
  std::size_t n_eval = 1000;  // draws for the probability error on synthetic data
  std::uint64_t seed = 0;
  std::size_t threads = 0;
  bool timing = false;  // adds wall-clock seconds, which makes reports nondeterministic
  std::string output;

  void validate() const {
    if (methods.empty()) throw SpecError("no methods requested");
    market.validate();
    if (repeats < 1) throw SpecError("repeats must be >= 1");
    if (protocol == Protocol::holdout && !(test_fraction > 0.0 && test_fraction < 1.0))
      throw SpecError("test_fraction must be in (0, 1)");
    if (protocol == Protocol::kfold && folds < 2) throw SpecError("folds must be >= 2");
    if (protocol == Protocol::given && data.synthetic) throw SpecError("the given protocol needs CSV files");
    if (protocol == Protocol::given && data.test_path.empty()) throw SpecError("the given protocol needs a test file");
    if (!data.synthetic && data.train_path.empty()) throw SpecError("no data source");
    if (n_eval < 1) throw SpecError("n_eval must be >= 1");
  }
};

// ---------------------------------------------------------------------------
// Results

struct MethodResult {
  Method method = Method::rf;
  double test_error = 0.0;
  double train_error = 0.0;
  double nll = 0.0;  // on the training data after the last epoch
  std::optional<double> l2;
  std::size_t rejected = 0;   // at prediction time, over train and test
  std::size_t fallbacks = 0;  // Mann solves that fell back, training and evaluation
  int epochs = 0;
};

struct FoldResult {
  std::size_t repeat = 0;
  std::size_t fold = 0;
  std::vector<MethodResult> methods;
};

struct MethodSummary {
  Method method = Method::rf;
  double test_error = 0.0;
  double train_error = 0.0;
  double nll = 0.0;
  std::optional<double> l2;
  std::size_t rejected = 0;
  std::size_t fallbacks = 0;
};

struct Report {
  std::string dataset;
  std::vector<FoldResult> folds;
  std::vector<MethodSummary> summary;  // means over folds; counts are totals
  std::optional<double> wall_clock_seconds;
};

// ---------------------------------------------------------------------------
// Method evaluation on one train/test unit

namespace detail {

inline std::vector<ClassifierOutput> tree_outputs(const Forest& forest, const Instance& x) {
  std::vector<ClassifierOutput> h;
  h.reserve(forest.size());
  for (const auto& t : forest) h.push_back(t.predict(x));
  return h;
}

inline ClassifierOutput linear_aggregate(const Forest& forest, std::span<const double> w, const Instance& x) {
  ClassifierOutput c(forest.front().class_count(), 0.0);
  for (std::size_t m = 0; m < forest.size(); ++m) {
    const auto h = forest[m].predict(x);
    for (std::size_t k = 0; k < c.size(); ++k) c[k] += w[m] * h[k];
  }
  return c;
}

template <class Predictor>
double mean_nll(Predictor&& predict, const Dataset& data) {
  double s = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Prediction p = predict(data.instance(i));
    if (!p) continue;
    s -= std::log(std::max((*p)[data.label(i).index()], kLogProbFloor));
    ++n;
  }
  return n ? s / static_cast<double>(n) : 0.0;
}

inline LeafBetParams leaf_params(Method m, const MarketRecipe& r) {
  LeafBetParams p;
  p.eps = r.aggressive_eps;
  if (m == Method::lb) p.family = BetFamily::linear;
  if (m == Method::ab) p.family = BetFamily::aggressive;
  return p;
}

inline UpdateRule update_rule(Method m, const MarketRecipe& r, std::size_t n_train, int epochs) {
  UpdateRule rule;
  rule.kind = m == Method::cb ? r.cb_update : UpdateKind::ml_incremental;
  rule.eta = r.eta_for(rule.kind, n_train);
  rule.epochs = epochs;
  rule.shuffle = r.shuffle;
  return rule;
}

/// Test error after each epoch 1..max_epochs, summed over inner folds of train.
inline int select_epochs(Method m, const Dataset& train, const MarketRecipe& r, std::uint64_t seed) {
  const std::size_t folds = std::min(r.epoch_cv_folds, train.size());
  std::vector<double> err(static_cast<std::size_t>(r.max_epochs), 0.0);
  const auto splits = kfold_split(train.size(), folds, seed);
  for (std::size_t fi = 0; fi < splits.size(); ++fi) {
    const auto& f = splits[fi];
    const Dataset tr = train.subset(f.train), te = train.subset(f.test);
    const auto forest = std::make_shared<const Forest>(
        train_forest(tr, r.n_trees, derive_seed(seed, 1000 + fi), 1));
    if (m == Method::implicit) {
      ImplicitOnlineState state(forest->size());
      auto out = [&](const Instance& x) { return tree_outputs(*forest, x); };
      for (std::size_t e = 0; e < err.size(); ++e) {
        implicit_online_epoch(state, tr, out);
        err[e] += misclassification_error(
                      [&](const Instance& x) -> Prediction { return linear_aggregate(*forest, state.beta, x); }, te)
                      .error;
      }
      continue;
    }
    Market market = make_leaf_market(forest, leaf_params(m, r), r.beta0);
    const auto trace = train_online(market, tr, update_rule(m, r, tr.size(), r.max_epochs), r.solver, seed, &te);
    for (std::size_t e = 0; e < err.size(); ++e) err[e] += *trace.epochs[e].test_error;
  }
  return static_cast<int>(std::min_element(err.begin(), err.end()) - err.begin()) + 1;
}

}  // namespace detail

/// Trains one forest on `train` and evaluates every requested method on
/// `test`. With a Gaussian spec, also reports the probability error.
inline std::vector<MethodResult> evaluate_methods(const std::vector<Method>& methods, const MarketRecipe& recipe,
                                                  const Dataset& train, const Dataset& test,
                                                  const GaussianPairSpec* gaussian, std::size_t n_eval,
                                                  std::uint64_t seed) {
  const auto forest = std::make_shared<const Forest>(train_forest(train, recipe.n_trees, derive_seed(seed, 0), 1));
  const std::uint64_t eval_seed = derive_seed(seed, 1);
  std::vector<MethodResult> out;
  for (Method m : methods) {
    MethodResult r;
    r.method = m;
    if (m == Method::rf) {
      const auto pred = forest_predictor(*forest);
      const auto te = misclassification_error(pred, test);
      r.test_error = te.error;
      r.train_error = misclassification_error(pred, train).error;
      r.nll = detail::mean_nll(pred, train);
      if (gaussian) r.l2 = prob_estimation_error_l2(pred, *gaussian, n_eval, eval_seed).l2;
      out.push_back(r);
      continue;
    }
    r.epochs = recipe.max_epochs > 0
                   ? detail::select_epochs(m, train, recipe, derive_seed(seed, 2 + static_cast<std::uint64_t>(m)))
                   : recipe.epochs;
    if (m == Method::implicit) {
      const auto w = train_implicit_online(
          train, [&](const Instance& x) { return detail::tree_outputs(*forest, x); }, forest->size(), r.epochs);
      auto pred = [&](const Instance& x) -> Prediction { return detail::linear_aggregate(*forest, w, x); };
      r.test_error = misclassification_error(pred, test).error;
      r.train_error = misclassification_error(pred, train).error;
      r.nll = detail::mean_nll(pred, train);
      if (gaussian) r.l2 = prob_estimation_error_l2(pred, *gaussian, n_eval, eval_seed).l2;
      out.push_back(r);
      continue;
    }
    Market market = make_leaf_market(forest, detail::leaf_params(m, recipe), recipe.beta0);
    const auto trace = train_online(market, train, detail::update_rule(m, recipe, train.size(), r.epochs),
                                    recipe.solver, derive_seed(seed, 7));
    for (const auto& e : trace.epochs) r.fallbacks += e.fallbacks;
    const auto ev = evaluate_market(market, test, recipe.solver);
    r.test_error = ev.error;
    r.rejected = ev.rejected;
    r.fallbacks += ev.fallbacks;
    r.train_error = trace.epochs.back().train_error;
    r.nll = trace.epochs.back().nll;
    if (gaussian) {
      const auto l2 = prob_estimation_error_l2(market_predictor(market, recipe.solver), *gaussian, n_eval, eval_seed);
      r.l2 = l2.l2;
      r.rejected += l2.rejected;
    }
    out.push_back(r);
  }
  return out;
}

inline std::vector<MethodSummary> summarize(const std::vector<FoldResult>& folds) {
  std::vector<MethodSummary> out;
  if (folds.empty()) return out;
  for (std::size_t j = 0; j < folds.front().methods.size(); ++j) {
    MethodSummary s;
    s.method = folds.front().methods[j].method;
    double l2 = 0.0;
    bool has_l2 = true;
    for (const auto& f : folds) {
      const auto& r = f.methods[j];
      s.test_error += r.test_error;
      s.train_error += r.train_error;
      s.nll += r.nll;
      s.rejected += r.rejected;
      s.fallbacks += r.fallbacks;
      if (r.l2) l2 += *r.l2;
      else has_l2 = false;
    }
    const double n = static_cast<double>(folds.size());
    s.test_error /= n;
    s.train_error /= n;
    s.nll /= n;
    if (has_l2) s.l2 = l2 / n;
    out.push_back(s);
  }
  return out;
}

struct LoadedData {
  Dataset train;
  std::optional<Dataset> test;
  std::optional<GaussianPairSpec> gaussian;
  std::string name;
};

inline LoadedData load_experiment_data(const ExperimentSpec& spec) {
  LoadedData d{Dataset(2, 0), std::nullopt, std::nullopt, {}};
  if (spec.data.synthetic) {
    const auto& s = *spec.data.synthetic;
    auto [data, g] = synth_gaussian_pair(s.dim, s.bayes_error, s.n, derive_seed(spec.seed, 99));
    d.train = std::move(data);
    d.gaussian = std::move(g);
    d.name = "synthetic";
    return d;
  }
  auto train = load_csv(spec.data.train_path, spec.data.csv);
  d.name = spec.data.train_path;
  if (spec.protocol == Protocol::given) {
    CsvOptions opt = spec.data.csv;
    opt.label_order = train.label_names;
    auto test = load_csv(spec.data.test_path, opt);
    if (test.label_names.size() > train.label_names.size())
      throw DataError(spec.data.test_path + ": labels not present in the training file");
    if (test.data.feature_count() != train.data.feature_count())
      throw DataError(spec.data.test_path + ": feature count differs from the training file");
    test.data.set_class_count(train.data.class_count());
    d.test = std::move(test.data);
  }
  d.train = std::move(train.data);
  return d;
}

/// Runs every (repeat, fold) unit, in parallel when threads allow, and
/// merges results in unit order.
inline Report run_experiment(const ExperimentSpec& spec) {
  spec.validate();
  const auto start = std::chrono::steady_clock::now();
  const LoadedData data = load_experiment_data(spec);
  if (data.train.class_count() < 2) throw DataError("the data has fewer than two classes");

  struct Unit {
    std::size_t repeat, fold;
    Fold split;
  };
  std::vector<Unit> units;
  for (std::size_t r = 0; r < spec.repeats; ++r) {
    const std::uint64_t split_seed = derive_seed(spec.seed, 10 + r);
    switch (spec.protocol) {
      case Protocol::holdout:
        units.push_back({r, 0, holdout_split(data.train.size(), spec.test_fraction, split_seed)});
        break;
      case Protocol::kfold: {
        const auto folds = kfold_split(data.train.size(), spec.folds, split_seed);
        for (std::size_t f = 0; f < folds.size(); ++f) units.push_back({r, f, folds[f]});
        break;
      }
      case Protocol::given:
        units.push_back({r, 0, {}});
        break;
    }
  }

  Report report;
  report.dataset = data.name;
  report.folds.resize(units.size());
  parallel_for(units.size(), spec.threads, [&](std::size_t u) {
    const auto& unit = units[u];
    const std::uint64_t unit_seed = derive_seed(spec.seed, 100000 + u);
    FoldResult fr;
    fr.repeat = unit.repeat;
    fr.fold = unit.fold;
    if (spec.protocol == Protocol::given) {
      fr.methods = evaluate_methods(spec.methods, spec.market, data.train, *data.test, nullptr, spec.n_eval, unit_seed);
    } else {
      const Dataset tr = data.train.subset(unit.split.train), te = data.train.subset(unit.split.test);
      fr.methods = evaluate_methods(spec.methods, spec.market, tr, te, data.gaussian ? &*data.gaussian : nullptr,
                                    spec.n_eval, unit_seed);
    }
    report.folds[u] = std::move(fr);
  });
  report.summary = summarize(report.folds);
  if (spec.timing)
    report.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

// ---------------------------------------------------------------------------
// Synthetic benchmark

struct SynthBenchSpec {
  std::size_t levels = 10;
  double min_bayes_error = 0.05;
  double max_bayes_error = 0.30;
  std::size_t datasets = 10;
  std::size_t n = 200;
  std::size_t dim = 10;
  std::size_t n_eval = 1000;
  std::vector<Method> methods{Method::rf, Method::cb};
  MarketRecipe market = [] {
    MarketRecipe r;
    r.eta = 0.1;
    r.epochs = 10;
    return r;
  }();
  std::uint64_t seed = 0;
  std::size_t threads = 0;

  double level(std::size_t i) const {
    if (levels == 1) return min_bayes_error;
    return min_bayes_error + (max_bayes_error - min_bayes_error) * static_cast<double>(i) /
                                 static_cast<double>(levels - 1);
  }

  void validate() const {
    if (levels < 1 || datasets < 1) throw SpecError("levels and datasets must be >= 1");
    if (!(min_bayes_error > 0.0 && max_bayes_error <= 0.5 && min_bayes_error <= max_bayes_error))
      throw SpecError("Bayes error range must lie in (0, 0.5]");
    if (n < 2 || dim < 1 || n_eval < 1) throw SpecError("n >= 2, dim >= 1 and n_eval >= 1 are required");
    if (methods.empty()) throw SpecError("no methods requested");
    market.validate();
  }
};

/// One row per (Bayes level, dataset, method).
struct SynthRow {
  std::size_t level = 0;
  double bayes_error = 0.0;
  std::size_t dataset = 0;
  Method method = Method::rf;
  double l2 = 0.0;
  double test_error = 0.0;  // on n_eval fresh labeled draws
};

inline std::vector<SynthRow> run_synth_bench(const SynthBenchSpec& spec) {
  spec.validate();
  const std::size_t units = spec.levels * spec.datasets;
  std::vector<std::vector<SynthRow>> rows(units);
  parallel_for(units, spec.threads, [&](std::size_t u) {
    const std::size_t lvl = u / spec.datasets, ds = u % spec.datasets;
    const double be = spec.level(lvl);
    const std::uint64_t s = derive_seed(spec.seed, u);
    auto [train, g] = synth_gaussian_pair(spec.dim, be, spec.n, derive_seed(s, 0));
    Dataset test(2, spec.dim);
    {
      Rng rng = make_rng(s, 1);
      for (std::size_t i = 0; i < spec.n_eval; ++i) {
        const Label y(i % 2 == 0 ? 1 : 2);
        test.add(sample_gaussian_class(g, y, rng), y);
      }
    }
    const auto res = evaluate_methods(spec.methods, spec.market, train, test, &g, spec.n_eval, derive_seed(s, 2));
    for (const auto& r : res) rows[u].push_back({lvl, be, ds, r.method, *r.l2, r.test_error});
  });
  std::vector<SynthRow> out;
  for (auto& r : rows) out.insert(out.end(), r.begin(), r.end());
  return out;
}

inline void write_synth_csv(std::ostream& out, const std::vector<SynthRow>& rows) {
  out << "level,bayes_error,dataset,method,l2,test_error\n";
  for (const auto& r : rows)
    out << r.level << ',' << format_number(r.bayes_error) << ',' << r.dataset << ',' << to_string(r.method) << ','
        << format_number(r.l2) << ',' << format_number(r.test_error) << '\n';
}

// ---------------------------------------------------------------------------
// Report emission

inline constexpr const char* kReportCsvColumns =
    "repeat,fold,method,test_error,train_error,nll,l2,rejected,fallbacks,epochs";

inline Json report_to_json(const Report& report) {
  auto method_json = [](const auto& r) {
    Json j;
    j["method"] = to_string(r.method);
    j["test_error"] = r.test_error;
    j["train_error"] = r.train_error;
    j["nll"] = r.nll;
    j["l2"] = r.l2 ? Json(*r.l2) : Json(nullptr);
    j["rejected"] = r.rejected;
    j["fallbacks"] = r.fallbacks;
    return j;
  };
  Json folds = Json::array();
  for (const auto& f : report.folds) {
    Json jf;
    jf["repeat"] = f.repeat;
    jf["fold"] = f.fold;
    Json ms = Json::array();
    for (const auto& m : f.methods) {
      Json jm = method_json(m);
      jm["epochs"] = m.epochs;
      ms.push_back(std::move(jm));
    }
    jf["methods"] = std::move(ms);
    folds.push_back(std::move(jf));
  }
  Json summary = Json::array();
  for (const auto& s : report.summary) summary.push_back(method_json(s));
  Json j;
  j["format"] = "predmarket.report";
  j["version"] = kFormatVersion;
  j["dataset"] = report.dataset;
  j["summary"] = std::move(summary);
  j["folds"] = std::move(folds);
  if (report.wall_clock_seconds) j["wall_clock_seconds"] = *report.wall_clock_seconds;
  return j;
}

inline Report report_from_json(const Json& j) {
  return detail::json_guard([&] {
    detail::check_format(j, "predmarket.report");
    auto read_common = [](const Json& jm, auto& r) {
      r.method = method_from_string(jm.at("method").get<std::string>());
      r.test_error = jm.at("test_error").get<double>();
      r.train_error = jm.at("train_error").get<double>();
      r.nll = jm.at("nll").get<double>();
      if (!jm.at("l2").is_null()) r.l2 = jm.at("l2").get<double>();
      r.rejected = jm.at("rejected").get<std::size_t>();
      r.fallbacks = jm.at("fallbacks").get<std::size_t>();
    };
    Report report;
    report.dataset = j.at("dataset").get<std::string>();
    for (const auto& js : j.at("summary")) {
      MethodSummary s;
      read_common(js, s);
      report.summary.push_back(s);
    }
    for (const auto& jf : j.at("folds")) {
      FoldResult f;
      f.repeat = jf.at("repeat").get<std::size_t>();
      f.fold = jf.at("fold").get<std::size_t>();
      for (const auto& jm : jf.at("methods")) {
        MethodResult m;
        read_common(jm, m);
        m.epochs = jm.at("epochs").get<int>();
        f.methods.push_back(m);
      }
      report.folds.push_back(std::move(f));
    }
    if (j.contains("wall_clock_seconds")) report.wall_clock_seconds = j.at("wall_clock_seconds").get<double>();
    return report;
  });
}

/// One row per (fold, method) under kReportCsvColumns; l2 is empty when absent.
inline void write_report_csv(std::ostream& out, const Report& report) {
  out << kReportCsvColumns << '\n';
  for (const auto& f : report.folds)
    for (const auto& m : f.methods)
      out << f.repeat << ',' << f.fold << ',' << to_string(m.method) << ',' << format_number(m.test_error) << ','
          << format_number(m.train_error) << ',' << format_number(m.nll) << ','
          << (m.l2 ? format_number(*m.l2) : std::string()) << ',' << m.rejected << ',' << m.fallbacks << ','
          << m.epochs << '\n';
}

enum class ReportFormat { json, csv };

inline void emit_report(std::ostream& out, const Report& report, ReportFormat format) {
  if (format == ReportFormat::json)
    out << report_to_json(report).dump(2) << '\n';
  else
    write_report_csv(out, report);
  if (!out) throw DataError("failed to write the report");
}

// ---------------------------------------------------------------------------
// ExperimentSpec as JSON (the CLI's --config file)

inline Json spec_to_json(const ExperimentSpec& s) {
  Json j;
  Json data;
  if (s.data.synthetic) {
    data["synthetic"] = {{"dim", s.data.synthetic->dim},
                         {"bayes_error", s.data.synthetic->bayes_error},
                         {"n", s.data.synthetic->n}};
  } else {
    data["train"] = s.data.train_path;
    if (!s.data.test_path.empty()) data["test"] = s.data.test_path;
    data["label_column"] = s.data.csv.label_column;
    data["whitespace"] = s.data.csv.whitespace_delimited;
    data["impute_missing"] = s.data.csv.impute_missing;
  }
  j["data"] = std::move(data);
  Json methods = Json::array();
  for (Method m : s.methods) methods.push_back(to_string(m));
  j["methods"] = std::move(methods);
  const auto& r = s.market;
  j["n_trees"] = r.n_trees;
  j["beta0"] = r.beta0;
  j["aggressive_eps"] = r.aggressive_eps;
  j["update"] = to_string(r.cb_update);
  if (r.eta) j["eta"] = *r.eta;
  j["epochs"] = r.epochs;
  j["max_epochs"] = r.max_epochs;
  j["epoch_cv_folds"] = r.epoch_cv_folds;
  j["shuffle"] = r.shuffle;
  j["tol"] = r.solver.tol;
  j["max_mann_iters"] = r.solver.max_mann_iters;
  j["protocol"] = to_string(s.protocol);
  j["test_fraction"] = s.test_fraction;
  j["folds"] = s.folds;
  j["repeats"] = s.repeats;
  j["n_eval"] = s.n_eval;
  j["seed"] = s.seed;
  j["threads"] = s.threads;
  j["timing"] = s.timing;
  if (!s.output.empty()) j["output"] = s.output;
  return j;
}

/// Reads the keys written by spec_to_json; absent keys keep their defaults.
inline ExperimentSpec spec_from_json(const Json& j, ExperimentSpec s = {}) {
  return detail::json_guard([&] {
    if (!j.is_object()) throw SpecError("config must be a JSON object");
    if (j.contains("data")) {
      const auto& d = j.at("data");
      if (d.contains("synthetic")) {
        SyntheticSource syn;
        const auto& js = d.at("synthetic");
        syn.dim = js.value("dim", syn.dim);
        syn.bayes_error = js.value("bayes_error", syn.bayes_error);
        syn.n = js.value("n", syn.n);
        s.data.synthetic = syn;
      }
      s.data.train_path = d.value("train", s.data.train_path);
      s.data.test_path = d.value("test", s.data.test_path);
      s.data.csv.label_column = d.value("label_column", s.data.csv.label_column);
      s.data.csv.whitespace_delimited = d.value("whitespace", s.data.csv.whitespace_delimited);
      s.data.csv.impute_missing = d.value("impute_missing", s.data.csv.impute_missing);
    }
    if (j.contains("methods")) {
      s.methods.clear();
      for (const auto& m : j.at("methods")) s.methods.push_back(method_from_string(m.get<std::string>()));
    }
    auto& r = s.market;
    r.n_trees = j.value("n_trees", r.n_trees);
    r.beta0 = j.value("beta0", r.beta0);
    r.aggressive_eps = j.value("aggressive_eps", r.aggressive_eps);
    if (j.contains("update")) r.cb_update = update_kind_from_string(j.at("update").get<std::string>());
    if (j.contains("eta")) r.eta = j.at("eta").get<double>();
    r.epochs = j.value("epochs", r.epochs);
    r.max_epochs = j.value("max_epochs", r.max_epochs);
    r.epoch_cv_folds = j.value("epoch_cv_folds", r.epoch_cv_folds);
    r.shuffle = j.value("shuffle", r.shuffle);
    r.solver.tol = j.value("tol", r.solver.tol);
    r.solver.max_mann_iters = j.value("max_mann_iters", r.solver.max_mann_iters);
    if (j.contains("protocol")) s.protocol = protocol_from_string(j.at("protocol").get<std::string>());
    s.test_fraction = j.value("test_fraction", s.test_fraction);
    s.folds = j.value("folds", s.folds);
    s.repeats = j.value("repeats", s.repeats);
    s.n_eval = j.value("n_eval", s.n_eval);
    s.seed = j.value("seed", s.seed);
    s.threads = j.value("threads", s.threads);
    s.timing = j.value("timing", s.timing);
    s.output = j.value("output", s.output);
    return s;
  });
}

}  // namespace predmarket
