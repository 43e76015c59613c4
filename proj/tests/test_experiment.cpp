#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "fixtures.hpp"

using namespace predmarket;

namespace {

ExperimentSpec small_synthetic_spec() {
  ExperimentSpec s;
  s.data.synthetic = SyntheticSource{3, 0.2, 60};
  s.methods = {Method::rf, Method::cb, Method::lb, Method::ab, Method::implicit};
  s.market.n_trees = 5;
  s.repeats = 2;
  s.protocol = Protocol::kfold;
  s.folds = 3;
  s.n_eval = 200;
  s.seed = 4;
  s.threads = 2;
  return s;
}

}  // namespace

TEST(Metrics, MisclassificationCounting) {
  Dataset d(2, 1);
  for (int i = 0; i < 10; ++i) d.add(Instance{double(i)}, Label(i % 2 + 1));
  auto truth = [&](const Instance& x) -> Prediction {
    return int(x[0]) % 2 == 0 ? ClassifierOutput{1.0, 0.0} : ClassifierOutput{0.0, 1.0};
  };
  EXPECT_EQ(misclassification_error(truth, d).error, 0.0);
  auto constant = [](const Instance&) -> Prediction { return ClassifierOutput{0.5, 0.5}; };
  EXPECT_EQ(misclassification_error(constant, d).error, 0.5);  // ties go to class 1
  auto three_wrong = [&](const Instance& x) -> Prediction {
    auto p = *truth(x);
    if (x[0] < 3) std::swap(p[0], p[1]);
    return p;
  };
  EXPECT_DOUBLE_EQ(misclassification_error(three_wrong, d).error, 0.3);
  auto rejects = [&](const Instance& x) -> Prediction {
    if (x[0] == 4) return std::nullopt;
    return truth(x);
  };
  const auto st = misclassification_error(rejects, d);
  EXPECT_DOUBLE_EQ(st.error, 0.1);
  EXPECT_EQ(st.rejected, 1u);
}

TEST(Metrics, ProbabilityErrorExamples) {
  const auto [d, spec] = synth_gaussian_pair(2, 0.2, 2, 3);
  auto exact = [&](const Instance& x) -> Prediction {
    const double p = bayes_posterior(spec, x);
    return ClassifierOutput{1.0 - p, p};
  };
  EXPECT_EQ(prob_estimation_error_l2(exact, spec).l2, 0.0);
  auto offset = [&](const Instance& x) -> Prediction {
    const double p = bayes_posterior(spec, x) + 0.1;
    return ClassifierOutput{1.0 - p, p};
  };
  EXPECT_NEAR(prob_estimation_error_l2(offset, spec, 1000, 9).l2, 0.01, 1e-12);
  const auto [d0, flat] = synth_gaussian_pair(2, 0.5, 2, 3);
  auto half = [](const Instance&) -> Prediction { return ClassifierOutput{0.5, 0.5}; };
  EXPECT_EQ(prob_estimation_error_l2(half, flat).l2, 0.0);
}

TEST(Experiment, RfColumnIsForestPrediction) {
  const auto [train, g] = synth_gaussian_pair(3, 0.2, 80, 1);
  const auto [test, g2] = synth_gaussian_pair(3, 0.2, 40, 2);
  MarketRecipe recipe;
  recipe.n_trees = 7;
  const auto res = evaluate_methods({Method::rf, Method::cb}, recipe, train, test, &g, 300, 5);
  const Forest forest = train_forest(train, 7, derive_seed(5, 0));
  EXPECT_EQ(res[0].test_error, misclassification_error(forest, test).error);
  // Untrained cb market would equal rf; one epoch of training moves it but
  // never rejects.
  EXPECT_EQ(res[1].rejected, 0u);
  EXPECT_TRUE(res[1].l2.has_value());
}

TEST(Experiment, FinalNllMatchesRecomputedLikelihood) {
  const auto [train, g] = synth_gaussian_pair(3, 0.2, 60, 1);
  MarketRecipe recipe;
  recipe.n_trees = 5;
  recipe.epochs = 3;
  const auto res = evaluate_methods({Method::cb}, recipe, train, train, nullptr, 10, 6);
  auto forest = std::make_shared<const Forest>(train_forest(train, 5, derive_seed(6, 0), 1));
  Market m = make_leaf_market(forest);
  train_online(m, train, detail::update_rule(Method::cb, recipe, train.size(), 3), {}, derive_seed(6, 7));
  EXPECT_NEAR(res[0].nll, -log_likelihood(m, train), 1e-12);
}

TEST(Experiment, DeterministicReports) {
  const auto spec = small_synthetic_spec();
  const auto a = run_experiment(spec);
  auto single = spec;
  single.threads = 1;
  const auto b = run_experiment(single);
  std::ostringstream ja, jb, ca, cb;
  emit_report(ja, a, ReportFormat::json);
  emit_report(jb, b, ReportFormat::json);
  emit_report(ca, a, ReportFormat::csv);
  emit_report(cb, b, ReportFormat::csv);
  EXPECT_EQ(ja.str(), jb.str());
  EXPECT_EQ(ca.str(), cb.str());
}

TEST(Experiment, ReportShapeAndRoundTrip) {
  const auto spec = small_synthetic_spec();
  const auto report = run_experiment(spec);
  ASSERT_EQ(report.folds.size(), 6u);
  ASSERT_EQ(report.summary.size(), 5u);
  // Summary is the mean of the per-fold values.
  for (std::size_t j = 0; j < report.summary.size(); ++j) {
    double s = 0.0;
    for (const auto& f : report.folds) s += f.methods[j].test_error;
    EXPECT_NEAR(report.summary[j].test_error, s / 6.0, 1e-15);
    EXPECT_EQ(report.summary[j].rejected, 0u);
  }
  std::ostringstream csv;
  write_report_csv(csv, report);
  std::istringstream in(csv.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, kReportCsvColumns);
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 6 * 5);

  const auto j = report_to_json(report);
  const auto back = report_from_json(Json::parse(j.dump()));
  EXPECT_EQ(report_to_json(back).dump(), j.dump());
  EXPECT_FALSE(j.contains("wall_clock_seconds"));
}

TEST(Experiment, HoldoutAndGivenProtocols) {
  auto spec = small_synthetic_spec();
  spec.protocol = Protocol::holdout;
  spec.methods = {Method::rf, Method::cb};
  EXPECT_EQ(run_experiment(spec).folds.size(), 2u);

  const auto [train, g] = synth_gaussian_pair(2, 0.2, 40, 1);
  const auto [test, g2] = synth_gaussian_pair(2, 0.2, 20, 2);
  const std::string dir = ::testing::TempDir();
  for (const auto& [path, data] : {std::pair{dir + "/pm_train.csv", &train}, std::pair{dir + "/pm_test.csv", &test}}) {
    std::ofstream out(path);
    write_csv(out, *data);
  }
  ExperimentSpec given;
  given.data.train_path = dir + "/pm_train.csv";
  given.data.test_path = dir + "/pm_test.csv";
  given.protocol = Protocol::given;
  given.repeats = 1;
  given.methods = {Method::rf, Method::cb};
  given.market.n_trees = 3;
  const auto r = run_experiment(given);
  ASSERT_EQ(r.folds.size(), 1u);
  EXPECT_FALSE(r.folds[0].methods[0].l2.has_value());
}

TEST(Experiment, SpecValidation) {
  ExperimentSpec s;
  EXPECT_THROW(s.validate(), SpecError);  // no data source
  s.data.synthetic = SyntheticSource{};
  s.validate();
  s.market.epochs = 0;
  EXPECT_THROW(s.validate(), SpecError);
  s.market.epochs = 1;
  s.methods.clear();
  EXPECT_THROW(s.validate(), SpecError);
  EXPECT_THROW(method_from_string("svm"), SpecError);
}

TEST(Experiment, SpecJsonRoundTripAndOverrides) {
  auto s = small_synthetic_spec();
  s.market.eta = 0.25;
  s.market.max_epochs = 4;
  const auto j = spec_to_json(s);
  const auto back = spec_from_json(j);
  EXPECT_EQ(spec_to_json(back).dump(), j.dump());
  const auto partial = spec_from_json(Json::parse(R"({"epochs":7,"methods":["rf"]})"));
  EXPECT_EQ(partial.market.epochs, 7);
  EXPECT_EQ(partial.methods, std::vector<Method>{Method::rf});
  EXPECT_EQ(partial.repeats, ExperimentSpec{}.repeats);
  EXPECT_THROW(spec_from_json(Json::parse(R"({"epochs":"x"})")), SpecError);
}

TEST(Experiment, EpochSelectionStaysInRange) {
  const auto [train, g] = synth_gaussian_pair(3, 0.2, 60, 3);
  MarketRecipe r;
  r.n_trees = 4;
  r.max_epochs = 3;
  r.epoch_cv_folds = 3;
  const auto res = evaluate_methods({Method::cb}, r, train, train, nullptr, 10, 1);
  EXPECT_GE(res[0].epochs, 1);
  EXPECT_LE(res[0].epochs, 3);
}

TEST(SynthBench, OneRowPerLevelDatasetMethod) {
  SynthBenchSpec s;
  s.levels = 2;
  s.datasets = 2;
  s.n = 40;
  s.dim = 3;
  s.n_eval = 100;
  s.market.n_trees = 4;
  s.market.epochs = 2;
  const auto rows = run_synth_bench(s);
  ASSERT_EQ(rows.size(), 2u * 2u * 2u);
  EXPECT_EQ(rows[0].bayes_error, 0.05);
  EXPECT_EQ(rows.back().bayes_error, 0.30);
  std::ostringstream out;
  write_synth_csv(out, rows);
  const std::string text = out.str();
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 9);
}

TEST(Demos, TriangleIsPerfect) {
  const auto r = run_triangle_demo(0);
  EXPECT_EQ(r.accuracy, 1.0);
  EXPECT_EQ(r.rejected, 0u);
  EXPECT_EQ(r.market.size(), 6u);
  EXPECT_NEAR(r.market.budget_sum(), 6.0, 1e-9);
}

TEST(Demos, KernelBoundary) {
  const auto r = run_kernel_demo(0, 300);
  EXPECT_GE(r.train_accuracy, 0.9);
  EXPECT_NEAR(r.market.budget_sum(), 300.0, 1e-6);
}
