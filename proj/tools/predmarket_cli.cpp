// predmarket: train, evaluate and benchmark prediction-market classifiers.

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "predmarket/predmarket.hpp"

using namespace predmarket;

namespace {

constexpr const char* kReportHelp =
    "Report CSV columns (one row per fold and method):\n"
    "  repeat, fold   unit index within the protocol\n"
    "  method         rf | cb | lb | ab | implicit\n"
    "  test_error     misclassification rate on the held-out part (rejections count as errors)\n"
    "  train_error    misclassification rate on the training part\n"
    "  nll            negative mean log-likelihood on the training part\n"
    "  l2             mean squared error of the class-2 probability (synthetic data only)\n"
    "  rejected       instances no participant bet on\n"
    "  fallbacks      Mann solves that fell back to double bisection\n"
    "  epochs         training epochs used (0 for rf)";

constexpr const char* kSynthHelp =
    "CSV columns: level, bayes_error, dataset, method, l2, test_error";

constexpr const char* kTraceHelp = "Trace CSV columns: epoch, nll, train_err, test_err";

/// Flags shared by train, cv and evaluate. Values only override the config
/// when given on the command line.
struct CommonFlags {
  std::string config;
  std::string train_path, test_path;
  int label_column = -1;
  bool whitespace = false, impute = false;
  std::size_t syn_dim = 10, syn_n = 200;
  double syn_bayes = 0.2;
  std::vector<std::string> methods;
  std::size_t n_trees = kDefaultTreeCount;
  double beta0 = 1.0, eps = 0.01, eta = 0.0, tol = 1e-9;
  std::string update;
  int epochs = 1, max_epochs = 0, max_mann_iters = 50;
  bool shuffle = false;
  std::uint64_t seed = 0;
  std::size_t threads = 0;

  std::vector<CLI::Option*> data_opts;
  CLI::Option *o_train = nullptr, *o_test = nullptr, *o_label = nullptr, *o_ws = nullptr, *o_impute = nullptr;
  CLI::Option *o_dim = nullptr, *o_n = nullptr, *o_bayes = nullptr, *o_methods = nullptr, *o_trees = nullptr;
  CLI::Option *o_beta0 = nullptr, *o_eps = nullptr, *o_eta = nullptr, *o_tol = nullptr, *o_update = nullptr;
  CLI::Option *o_epochs = nullptr, *o_max_epochs = nullptr, *o_mann = nullptr, *o_shuffle = nullptr;
  CLI::Option *o_seed = nullptr, *o_threads = nullptr;

  void add_to(CLI::App* app, bool with_methods) {
    app->add_option("--config", config, "JSON config file; flags override its values");
    o_train = app->add_option("--train", train_path, "training CSV (features, label in --label-column)");
    o_test = app->add_option("--test", test_path, "test CSV for the 'given' protocol");
    o_label = app->add_option("--label-column", label_column, "label column, negative counts from the end");
    o_ws = app->add_flag("--whitespace", whitespace, "split rows on blanks instead of commas");
    o_impute = app->add_flag("--impute-missing", impute, "replace missing cells with the column mean");
    o_dim = app->add_option("--synthetic-dim", syn_dim, "use a two-Gaussian dataset of this dimension");
    o_n = app->add_option("--synthetic-n", syn_n, "synthetic sample size");
    o_bayes = app->add_option("--synthetic-bayes-error", syn_bayes, "synthetic Bayes error in (0, 0.5]");
    if (with_methods) o_methods = app->add_option("--methods", methods, "subset of rf cb lb ab implicit");
    o_trees = app->add_option("--trees", n_trees, "number of random trees");
    o_beta0 = app->add_option("--beta0", beta0, "initial budget of every participant");
    o_eps = app->add_option("--eps", eps, "aggressive betting ramp width");
    o_update = app->add_option("--update", update, "cb update: ml_incremental | ml_batch | ml_weighted | raw_alg1");
    o_eta = app->add_option("--eta", eta, "learning rate (default 10/N, or 10 for ml_batch)");
    o_epochs = app->add_option("--epochs", epochs, "training epochs");
    o_max_epochs = app->add_option("--max-epochs", max_epochs, "choose epochs in [1, N] by inner 10-fold CV");
    o_shuffle = app->add_flag("--shuffle", shuffle, "reshuffle the examples every epoch");
    o_tol = app->add_option("--tol", tol, "price residual tolerance");
    o_mann = app->add_option("--max-mann-iters", max_mann_iters, "Mann iteration cap before falling back");
    o_seed = app->add_option("--seed", seed, "random seed");
    o_threads = app->add_option("--threads", threads, "worker threads (0 = hardware concurrency)");
  }

  ExperimentSpec spec() const {
    ExperimentSpec s;
    if (!config.empty()) s = spec_from_json(read_json_file(config));
    auto given = [](const CLI::Option* o) { return o != nullptr && o->count() > 0; };
    if (given(o_dim) || given(o_n) || given(o_bayes)) {
      SyntheticSource syn = s.data.synthetic.value_or(SyntheticSource{});
      if (given(o_dim)) syn.dim = syn_dim;
      if (given(o_n)) syn.n = syn_n;
      if (given(o_bayes)) syn.bayes_error = syn_bayes;
      s.data.synthetic = syn;
    }
    if (given(o_train)) {
      s.data.train_path = train_path;
      s.data.synthetic.reset();
    }
    if (given(o_test)) s.data.test_path = test_path;
    if (given(o_label)) s.data.csv.label_column = label_column;
    if (given(o_ws)) s.data.csv.whitespace_delimited = whitespace;
    if (given(o_impute)) s.data.csv.impute_missing = impute;
    if (given(o_methods)) {
      s.methods.clear();
      for (const auto& m : methods) s.methods.push_back(method_from_string(m));
    }
    auto& r = s.market;
    if (given(o_trees)) r.n_trees = n_trees;
    if (given(o_beta0)) r.beta0 = beta0;
    if (given(o_eps)) r.aggressive_eps = eps;
    if (given(o_update)) r.cb_update = update_kind_from_string(update);
    if (given(o_eta)) r.eta = eta;
    if (given(o_epochs)) r.epochs = epochs;
    if (given(o_max_epochs)) r.max_epochs = max_epochs;
    if (given(o_shuffle)) r.shuffle = shuffle;
    if (given(o_tol)) r.solver.tol = tol;
    if (given(o_mann)) r.solver.max_mann_iters = max_mann_iters;
    if (given(o_seed)) s.seed = seed;
    if (given(o_threads)) s.threads = threads;
    return s;
  }
};

Dataset load_or_synthesize(const ExperimentSpec& s, std::optional<GaussianPairSpec>* gaussian = nullptr) {
  const auto d = load_experiment_data(s);
  if (gaussian) *gaussian = d.gaussian;
  return d.train;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << text;
  if (!out) throw DataError("write failed: " + path);
}

// ---------------------------------------------------------------------------

int run_train(const CommonFlags& f, const std::string& method_name, const std::string& market_out,
              const std::string& forest_out, const std::string& trace_out) {
  const ExperimentSpec s = f.spec();
  s.validate();
  const Method m = method_from_string(method_name);
  if (m == Method::rf || m == Method::implicit) throw SpecError("train supports the cb, lb and ab markets");
  const Dataset train = load_or_synthesize(s);
  const auto& r = s.market;
  auto forest = std::make_shared<const Forest>(train_forest(train, r.n_trees, derive_seed(s.seed, 0), s.threads));
  Market market = make_leaf_market(forest, detail::leaf_params(m, r), r.beta0);
  const auto trace =
      train_online(market, train, detail::update_rule(m, r, train.size(), r.epochs), r.solver, derive_seed(s.seed, 7));
  const auto& last = trace.epochs.back();
  std::printf("method=%s trees=%zu participants=%zu epochs=%d nll=%.6f train_error=%.4f rejected=%zu fallbacks=%zu\n",
              to_string(m), forest->size(), market.size(), r.epochs, last.nll, last.train_error, last.rejected,
              last.fallbacks);
  if (!market_out.empty()) write_json_file(market_out, market_to_json(market));
  if (!forest_out.empty()) write_json_file(forest_out, forest_to_json(*forest));
  if (!trace_out.empty()) {
    std::ostringstream out;
    trace.write_csv(out);
    write_text(trace_out, out.str());
  }
  return kExitOk;
}

int run_evaluate(const CommonFlags& f, const std::string& market_path, const std::string& forest_path,
                 bool per_instance) {
  const ExperimentSpec s = f.spec();
  if (!s.data.synthetic && s.data.train_path.empty()) throw SpecError("evaluate needs --train or --synthetic-dim");
  std::optional<GaussianPairSpec> gaussian;
  const Dataset data = load_or_synthesize(s, &gaussian);
  if (!forest_path.empty()) {
    const Forest forest = forest_from_json(read_json_file(forest_path));
    const auto st = misclassification_error(forest, data);
    std::printf("forest error=%.6f n=%zu\n", st.error, st.count);
  }
  if (market_path.empty()) {
    if (forest_path.empty()) throw SpecError("evaluate needs --market or --forest");
    return kExitOk;
  }
  const Market market = market_from_json(read_json_file(market_path));
  const auto ev = evaluate_market(market, data, s.market.solver);
  std::printf("market error=%.6f nll=%.6f evaluated=%zu rejected=%zu fallbacks=%zu\n", ev.error, -ev.log_likelihood,
              ev.evaluated, ev.rejected, ev.fallbacks);
  if (gaussian) {
    const auto l2 = prob_estimation_error_l2(market_predictor(market, s.market.solver), *gaussian, s.n_eval,
                                             derive_seed(s.seed, 1));
    std::printf("market l2=%.6g\n", l2.l2);
  }
  if (per_instance) {
    std::printf("index,label,method,iterations,residual,fallback,price\n");
    for (std::size_t i = 0; i < data.size(); ++i) {
      try {
        const auto sol = solve_price(market, data.instance(i), s.market.solver);
        std::printf("%zu,%d,%s,%d,%.3g,%d", i, data.label(i).value(), to_string(sol.method), sol.iterations,
                    sol.residual, sol.fell_back() ? 1 : 0);
        for (std::size_t k = 0; k < sol.price.size(); ++k) std::printf("%c%.6f", k ? ';' : ',', sol.price[k]);
        std::printf("\n");
      } catch (const Rejected&) {
        std::printf("%zu,%d,rejected,0,,0,\n", i, data.label(i).value());
      }
    }
  }
  return kExitOk;
}

int run_cv(const CommonFlags& f, const std::string& protocol, std::size_t folds, std::size_t repeats,
           double test_fraction, const std::string& format, const std::string& output, bool timing,
           const CLI::Option* o_protocol, const CLI::Option* o_folds, const CLI::Option* o_repeats,
           const CLI::Option* o_frac, const CLI::Option* o_timing) {
  ExperimentSpec s = f.spec();
  if (o_protocol->count()) s.protocol = protocol_from_string(protocol);
  if (o_folds->count()) s.folds = folds;
  if (o_repeats->count()) s.repeats = repeats;
  if (o_frac->count()) s.test_fraction = test_fraction;
  if (o_timing->count()) s.timing = timing;
  if (!output.empty()) s.output = output;
  ReportFormat fmt;
  if (format == "json")
    fmt = ReportFormat::json;
  else if (format == "csv")
    fmt = ReportFormat::csv;
  else
    throw SpecError("--format must be json or csv");
  const Report report = run_experiment(s);
  if (s.output.empty()) {
    emit_report(std::cout, report, fmt);
  } else {
    std::ofstream out(s.output);
    if (!out) throw DataError("cannot write " + s.output);
    emit_report(out, report, fmt);
    for (const auto& m : report.summary)
      std::printf("%-8s test_error=%.4f train_error=%.4f nll=%.4f%s rejected=%zu fallbacks=%zu\n", to_string(m.method),
                  m.test_error, m.train_error, m.nll,
                  m.l2 ? (" l2=" + format_number(*m.l2)).c_str() : "", m.rejected, m.fallbacks);
  }
  return kExitOk;
}

int run_triangle(std::uint64_t seed, std::size_t n, int epochs, double eta, const std::string& trace_out) {
  const auto r = run_triangle_demo(seed, n, epochs, eta);
  std::printf("triangle accuracy=%.4f rejected=%zu participants=%zu\n", r.accuracy, r.rejected, r.market.size());
  for (std::size_t m = 0; m < r.market.size(); ++m)
    std::printf("  participant %zu budget=%.6f %s\n", m, r.market[m].budget, to_descriptor(r.market[m].bettor).c_str());
  if (!trace_out.empty()) {
    std::ostringstream out;
    r.trace.write_csv(out);
    write_text(trace_out, out.str());
  }
  return kExitOk;
}

int run_solver_check(std::size_t markets, std::size_t participants, const std::vector<std::size_t>& classes,
                     const std::vector<std::string>& families, std::uint64_t seed, const SolverConfig& cfg,
                     bool verbose) {
  cfg.validate();
  std::size_t solved = 0, fallbacks = 0, disagreements = 0;
  double worst = 0.0;
  Rng rng = make_rng(seed);
  if (verbose) std::printf("family,K,method,iterations,residual,fallback,max_disagreement\n");
  for (const auto& fam_name : families) {
    BetFamily fam;
    if (fam_name == "constant")
      fam = BetFamily::constant;
    else if (fam_name == "linear")
      fam = BetFamily::linear;
    else if (fam_name == "aggressive")
      fam = BetFamily::aggressive;
    else
      throw SpecError("unknown family '" + fam_name + "' (expected constant, linear or aggressive)");
    for (std::size_t K : classes) {
      if (K < 2) throw SpecError("class counts must be >= 2");
      for (std::size_t t = 0; t < markets; ++t) {
        std::uniform_real_distribution<double> u(0.0, 1.0), ub(0.05, 1.0);
        std::exponential_distribution<double> e(1.0);
        Market market(K);
        for (std::size_t m = 0; m < participants; ++m) {
          ClassifierOutput h(K);
          double s = 0.0;
          for (auto& v : h) s += (v = e(rng));
          for (auto& v : h) v /= s;
          const double beta = ub(rng);
          if (fam == BetFamily::constant)
            market.add(BettingFunction::constant(h, 0.1 + 0.9 * u(rng)), beta);
          else if (fam == BetFamily::linear)
            market.add(BettingFunction::linear(h), beta);
          else
            market.add(BettingFunction::aggressive(h, 0.01), beta);
        }
        const BetBook book(market, Instance{0.0});
        const auto mann = solve_mann(book, cfg);
        std::vector<PriceSolution> others{solve_double_bisection(book, cfg)};
        if (K == 2) others.push_back(solve_two_class_bisection(book, cfg));
        if (fam == BetFamily::constant) others.push_back(solve_constant_analytic(book));
        double d = 0.0;
        for (const auto& o : others)
          for (std::size_t k = 0; k < K; ++k) d = std::max(d, std::abs(o.price[k] - mann.price[k]));
        ++solved;
        fallbacks += mann.fell_back();
        disagreements += d > 1e-6;
        worst = std::max(worst, d);
        if (verbose)
          std::printf("%s,%zu,%s,%d,%.3g,%d,%.3g\n", fam_name.c_str(), K, to_string(mann.method), mann.iterations,
                      mann.residual, mann.fell_back() ? 1 : 0, d);
      }
    }
  }
  std::printf("solved=%zu fallbacks=%zu (%.2f%%) disagreements>1e-6=%zu max_disagreement=%.3g\n", solved, fallbacks,
              100.0 * static_cast<double>(fallbacks) / static_cast<double>(solved), disagreements, worst);
  return disagreements ? kExitNumericalFailure : kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Prediction-market classifiers over random-forest leaves"};
  app.require_subcommand(1);
  app.footer(
      "Exit codes: 0 success, 2 invalid parameters or config, 3 data error, 4 numerical failure.\n"
      "Run '<command> --help' for the flags of each command.");

  CommonFlags train_f, eval_f, cv_f;

  auto* train = app.add_subcommand("train", "train a leaf market on a CSV or synthetic dataset");
  train_f.add_to(train, false);
  std::string method = "cb", market_out, forest_out, trace_out;
  train->add_option("--method", method, "market to train: cb (constant), lb (linear), ab (aggressive)");
  train->add_option("--market-out", market_out, "write the trained market as JSON");
  train->add_option("--forest-out", forest_out, "write the forest as JSON");
  train->add_option("--trace-out", trace_out, "write the per-epoch trace as CSV");
  train->footer(kTraceHelp);

  auto* evaluate = app.add_subcommand("evaluate", "score a saved market or forest on a dataset");
  eval_f.add_to(evaluate, false);
  std::string market_in, forest_in;
  bool per_instance = false;
  evaluate->add_option("--market", market_in, "market JSON written by train");
  evaluate->add_option("--forest", forest_in, "forest JSON written by train");
  evaluate->add_flag("--per-instance", per_instance, "print the solver diagnostics of every instance");

  auto* cv = app.add_subcommand("cv", "run the rf/cb/lb/ab/implicit comparison under a protocol");
  cv_f.add_to(cv, true);
  std::string protocol = "holdout", format = "json", output;
  std::size_t folds = 10, repeats = 10;
  double test_fraction = 0.1;
  bool timing = false;
  auto* o_protocol = cv->add_option("--protocol", protocol, "holdout | kfold | given");
  auto* o_folds = cv->add_option("--folds", folds, "folds for the kfold protocol");
  auto* o_repeats = cv->add_option("--repeats", repeats, "random permutations / holdout repetitions");
  auto* o_frac = cv->add_option("--test-fraction", test_fraction, "holdout test fraction");
  auto* o_timing = cv->add_flag("--timing", timing, "include wall-clock seconds (breaks byte-identical reports)");
  cv->add_option("--format", format, "report format: json | csv");
  cv->add_option("--output", output, "report path (stdout when absent)");
  cv->footer(kReportHelp);

  auto* synth = app.add_subcommand("synth-bench", "probability-estimation benchmark on two-Gaussian data");
  SynthBenchSpec sb;
  std::vector<std::string> sb_methods{"rf", "cb"};
  std::string sb_output;
  double sb_eta = 0.1;
  synth->add_option("--levels", sb.levels, "number of Bayes-error levels");
  synth->add_option("--min-bayes-error", sb.min_bayes_error, "lowest Bayes error");
  synth->add_option("--max-bayes-error", sb.max_bayes_error, "highest Bayes error");
  synth->add_option("--datasets", sb.datasets, "datasets per level");
  synth->add_option("--n", sb.n, "training size per dataset");
  synth->add_option("--dim", sb.dim, "dimension");
  synth->add_option("--n-eval", sb.n_eval, "draws for the probability error and the test error");
  synth->add_option("--methods", sb_methods, "subset of rf cb lb ab implicit");
  synth->add_option("--trees", sb.market.n_trees, "number of random trees");
  synth->add_option("--eta", sb_eta, "learning rate");
  synth->add_option("--epochs", sb.market.epochs, "training epochs");
  synth->add_option("--seed", sb.seed, "random seed");
  synth->add_option("--threads", sb.threads, "worker threads (0 = hardware concurrency)");
  synth->add_option("--output", sb_output, "CSV path (stdout when absent)");
  synth->footer(kSynthHelp);

  auto* tri = app.add_subcommand("triangle-demo", "six half-plane participants learning a triangle");
  std::uint64_t tri_seed = 0;
  std::size_t tri_n = 1000;
  int tri_epochs = 1;
  double tri_eta = 0.01;
  std::string tri_trace;
  tri->add_option("--seed", tri_seed, "random seed");
  tri->add_option("--n", tri_n, "points per class for training and for testing");
  tri->add_option("--epochs", tri_epochs, "training epochs");
  tri->add_option("--eta", tri_eta, "learning rate");
  tri->add_option("--trace-out", tri_trace, "write the per-epoch trace as CSV");

  auto* check = app.add_subcommand("solver-check", "cross-check the price solvers on random markets");
  std::size_t ck_markets = 100, ck_participants = 10;
  std::vector<std::size_t> ck_classes{2, 3, 5};
  std::vector<std::string> ck_families{"constant", "linear", "aggressive"};
  std::uint64_t ck_seed = 0;
  SolverConfig ck_cfg;
  bool ck_verbose = false;
  check->add_option("--markets", ck_markets, "markets per family and class count");
  check->add_option("--participants", ck_participants, "participants per market");
  check->add_option("--classes", ck_classes, "class counts");
  check->add_option("--families", ck_families, "constant linear aggressive");
  check->add_option("--seed", ck_seed, "random seed");
  check->add_option("--tol", ck_cfg.tol, "price residual tolerance");
  check->add_option("--max-mann-iters", ck_cfg.max_mann_iters, "Mann iteration cap");
  check->add_flag("--verbose", ck_verbose, "one diagnostic row per market");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitSpecError;
  }

  try {
    if (*train) return run_train(train_f, method, market_out, forest_out, trace_out);
    if (*evaluate) return run_evaluate(eval_f, market_in, forest_in, per_instance);
    if (*cv)
      return run_cv(cv_f, protocol, folds, repeats, test_fraction, format, output, timing, o_protocol, o_folds,
                    o_repeats, o_frac, o_timing);
    if (*synth) {
      sb.methods.clear();
      for (const auto& m : sb_methods) sb.methods.push_back(method_from_string(m));
      sb.market.eta = sb_eta;
      const auto rows = run_synth_bench(sb);
      if (sb_output.empty()) {
        write_synth_csv(std::cout, rows);
      } else {
        std::ofstream out(sb_output);
        if (!out) throw DataError("cannot write " + sb_output);
        write_synth_csv(out, rows);
      }
      return kExitOk;
    }
    if (*tri) return run_triangle(tri_seed, tri_n, tri_epochs, tri_eta, tri_trace);
    if (*check) return run_solver_check(ck_markets, ck_participants, ck_classes, ck_families, ck_seed, ck_cfg, ck_verbose);
  } catch (const SpecError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitSpecError;
  } catch (const DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kExitDataError;
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return kExitNumericalFailure;
  }
  return kExitOk;
}
