#pragma once

// Datasets, CSV ingestion, the two-Gaussian synthetic benchmark and
// split utilities.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "predmarket/betting.hpp"
#include "predmarket/error.hpp"
#include "predmarket/random.hpp"
#include "predmarket/types.hpp"

namespace predmarket {

class Dataset {
 public:
  Dataset() = default;
  Dataset(std::size_t class_count, std::size_t feature_count)
      : class_count_(class_count), feature_count_(feature_count) {}

  void add(Instance x, Label y) {
    if (feature_count_ == 0 && x_.empty()) feature_count_ = x.size();
    if (x.empty() || x.size() != feature_count_)
      throw DataError("instance has " + std::to_string(x.size()) + " features, expected " +
                      std::to_string(feature_count_));
    if (!all_finite(x)) throw DataError("instance has non-finite features");
    if (class_count_ != 0 && y.index() >= class_count_)
      throw DataError("label " + std::to_string(y.value()) + " exceeds class count");
    x_.push_back(std::move(x));
    y_.push_back(y);
  }

  std::size_t size() const noexcept { return x_.size(); }
  bool empty() const noexcept { return x_.empty(); }
  std::size_t class_count() const noexcept { return class_count_; }
  std::size_t feature_count() const noexcept { return feature_count_; }
  void set_class_count(std::size_t k) {
    for (Label y : y_)
      if (y.index() >= k) throw DataError("class count smaller than a present label");
    class_count_ = k;
  }

  const Instance& instance(std::size_t i) const { return x_[i]; }
  Label label(std::size_t i) const { return y_[i]; }
  std::span<const Instance> instances() const noexcept { return x_; }
  std::span<const Label> labels() const noexcept { return y_; }

  Dataset subset(std::span<const std::size_t> indices) const {
    Dataset d(class_count_, feature_count_);
    d.x_.reserve(indices.size());
    d.y_.reserve(indices.size());
    for (std::size_t i : indices) {
      d.x_.push_back(x_.at(i));
      d.y_.push_back(y_.at(i));
    }
    return d;
  }

  std::vector<std::size_t> class_counts() const {
    std::vector<std::size_t> n(class_count_, 0);
    for (Label y : y_) ++n[y.index()];
    return n;
  }

 private:
  std::size_t class_count_ = 0;
  std::size_t feature_count_ = 0;
  std::vector<Instance> x_;
  std::vector<Label> y_;
};

// ---------------------------------------------------------------------------
// CSV

enum class HeaderMode { detect, present, absent };

struct CsvOptions {
  int label_column = -1;  // negative counts from the end; -1 is the last column
  HeaderMode header = HeaderMode::detect;
  char delimiter = ',';
  bool whitespace_delimited = false;  // split on runs of blanks (UCI .trn/.tst style)
  bool impute_missing = false;        // fill missing cells with the column mean
  std::vector<std::string> label_order;  // pre-seeded label names; new ones are appended
};

struct CsvData {
  Dataset data;
  std::vector<std::string> label_names;  // label_names[k] is the name of class k + 1
};

namespace detail {

inline std::string trim(std::string_view s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return std::string(s.substr(a, b - a));
}

inline std::vector<std::string> split_row(const std::string& line, const CsvOptions& opt) {
  std::vector<std::string> cells;
  if (opt.whitespace_delimited) {
    std::istringstream in(line);
    std::string cell;
    while (in >> cell) cells.push_back(cell);
    return cells;
  }
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(opt.delimiter, start);
    cells.push_back(trim(std::string_view(line).substr(start, pos - start)));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return cells;
}

inline bool is_missing(const std::string& cell) {
  return cell.empty() || cell == "?" || cell == "NA" || cell == "NaN" || cell == "nan";
}

inline bool parse_double(const std::string& cell, double& out) {
  if (cell.empty()) return false;
  char* end = nullptr;
  out = std::strtod(cell.c_str(), &end);
  return end == cell.c_str() + cell.size() && std::isfinite(out);
}

}  // namespace detail

/// Reads a labeled dataset. Labels are mapped to 1..K by first appearance
/// (after any names pre-seeded in the options).
inline CsvData read_csv(std::istream& in, const CsvOptions& opt = {}) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::trim(line).empty()) continue;
    rows.push_back(detail::split_row(line, opt));
    line_numbers.push_back(line_no);
  }
  if (rows.empty()) throw DataError("empty CSV input");

  const std::size_t width = rows.front().size();
  if (width < 2) throw MalformedRow(line_numbers.front(), "need at least one feature and a label");
  const long lc = opt.label_column < 0 ? static_cast<long>(width) + opt.label_column
                                       : opt.label_column;
  if (lc < 0 || lc >= static_cast<long>(width)) throw SpecError("label column out of range");
  const auto label_col = static_cast<std::size_t>(lc);

  std::size_t first = 0;
  if (opt.header == HeaderMode::present) {
    first = 1;
  } else if (opt.header == HeaderMode::detect) {
    double v;
    for (std::size_t j = 0; j < width; ++j) {
      if (j == label_col) continue;
      const auto& cell = rows.front()[j];
      if (!detail::is_missing(cell) && !detail::parse_double(cell, v)) {
        first = 1;
        break;
      }
    }
  }
  if (first >= rows.size()) throw DataError("CSV input has a header but no data rows");

  CsvData out;
  out.label_names = opt.label_order;
  std::map<std::string, std::size_t> label_ids;
  for (std::size_t k = 0; k < out.label_names.size(); ++k) label_ids.emplace(out.label_names[k], k);

  const std::size_t F = width - 1;
  std::vector<Instance> xs;
  std::vector<std::vector<bool>> missing;
  std::vector<Label> ys;
  for (std::size_t r = first; r < rows.size(); ++r) {
    const auto& row = rows[r];
    const std::size_t ln = line_numbers[r];
    if (row.size() != width)
      throw MalformedRow(ln, "expected " + std::to_string(width) + " fields, found " +
                                 std::to_string(row.size()));
    Instance x;
    x.reserve(F);
    std::vector<bool> miss(F, false);
    for (std::size_t j = 0; j < width; ++j) {
      if (j == label_col) continue;
      const auto& cell = row[j];
      if (detail::is_missing(cell)) {
        if (!opt.impute_missing) throw MissingValue(ln, j + 1);
        miss[x.size()] = true;
        x.push_back(0.0);
        continue;
      }
      double v;
      if (!detail::parse_double(cell, v)) throw NonNumericFeature(ln, j + 1, cell);
      x.push_back(v);
    }
    const auto& name = row[label_col];
    if (detail::is_missing(name)) throw MissingValue(ln, label_col + 1);
    auto [it, inserted] = label_ids.emplace(name, out.label_names.size());
    if (inserted) out.label_names.push_back(name);
    xs.push_back(std::move(x));
    missing.push_back(std::move(miss));
    ys.push_back(Label::from_index(it->second));
  }

  if (opt.impute_missing) {
    for (std::size_t j = 0; j < F; ++j) {
      double s = 0.0;
      std::size_t n = 0;
      for (std::size_t i = 0; i < xs.size(); ++i)
        if (!missing[i][j]) {
          s += xs[i][j];
          ++n;
        }
      const double mean = n ? s / static_cast<double>(n) : 0.0;
      for (std::size_t i = 0; i < xs.size(); ++i)
        if (missing[i][j]) xs[i][j] = mean;
    }
  }

  out.data = Dataset(std::max<std::size_t>(out.label_names.size(), 2), F);
  for (std::size_t i = 0; i < xs.size(); ++i) out.data.add(std::move(xs[i]), ys[i]);
  return out;
}

inline CsvData load_csv(const std::string& path, const CsvOptions& opt = {}) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return read_csv(in, opt);
}

/// Writes features then the class label (1..K) in the last column.
inline void write_csv(std::ostream& out, const Dataset& data) {
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (double v : data.instance(i)) out << format_number(v) << ',';
    out << data.label(i).value() << '\n';
  }
}

// ---------------------------------------------------------------------------
// Two-Gaussian benchmark: N(0, I) for class 1 and N(mu1, I) for class 2,
// equal priors.

struct GaussianPairSpec {
  std::size_t dim = 1;
  std::vector<double> mu1;  // mu0 is the origin
  double sigma = 1.0;

  double distance() const {
    double s = 0.0;
    for (double v : mu1) s += v * v;
    return std::sqrt(s);
  }
};

/// Bayes error of two unit-variance spherical Gaussians at distance d with
/// equal priors: Phi(-d / 2).
inline double bayes_error_for_distance(double d) { return 0.5 * std::erfc(d / (2.0 * std::sqrt(2.0))); }

/// Mean distance whose Bayes error equals the target, by bisection.
inline double find_mean_distance(double target_bayes_error) {
  if (!(target_bayes_error > 0.0 && target_bayes_error <= 0.5))
    throw SpecError("target Bayes error must be in (0, 0.5]");
  if (target_bayes_error == 0.5) return 0.0;
  double lo = 0.0, hi = 1.0;
  while (bayes_error_for_distance(hi) > target_bayes_error) hi *= 2.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (bayes_error_for_distance(mid) > target_bayes_error ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

/// p*(Y = class 2 | x) by Bayes' rule with equal priors.
inline double bayes_posterior(const GaussianPairSpec& spec, const Instance& x) {
  if (x.size() != spec.mu1.size()) throw SpecError("posterior: dimension mismatch");
  double dot = 0.0, m2 = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    dot += spec.mu1[i] * x[i];
    m2 += spec.mu1[i] * spec.mu1[i];
  }
  const double s2 = spec.sigma * spec.sigma;
  const double log_ratio = (dot - 0.5 * m2) / s2;  // log p(x|2) - log p(x|1)
  return 1.0 / (1.0 + std::exp(-log_ratio));
}

inline Instance sample_gaussian_class(const GaussianPairSpec& spec, Label y, Rng& rng) {
  std::normal_distribution<double> normal(0.0, spec.sigma);
  Instance x(spec.dim);
  for (std::size_t i = 0; i < spec.dim; ++i) {
    x[i] = normal(rng);
    if (y.value() == 2) x[i] += spec.mu1[i];
  }
  return x;
}

/// Draws n labeled points, alternating classes so class 1 gets ceil(n/2).
inline std::pair<Dataset, GaussianPairSpec> synth_gaussian_pair(std::size_t dim, double bayes_error,
                                                                std::size_t n, std::uint64_t seed) {
  if (dim < 1) throw SpecError("dimension must be >= 1");
  if (n < 2) throw SpecError("need at least two samples");
  const double d = find_mean_distance(bayes_error);
  Rng rng = make_rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> dir(dim);
  double norm = 0.0;
  do {
    norm = 0.0;
    for (double& v : dir) {
      v = normal(rng);
      norm += v * v;
    }
  } while (norm == 0.0);
  norm = std::sqrt(norm);
  GaussianPairSpec spec;
  spec.dim = dim;
  spec.mu1.resize(dim);
  for (std::size_t i = 0; i < dim; ++i) spec.mu1[i] = d * dir[i] / norm;

  Dataset data(2, dim);
  for (std::size_t i = 0; i < n; ++i) {
    const Label y(i % 2 == 0 ? 1 : 2);
    data.add(sample_gaussian_class(spec, y, rng), y);
  }
  return {std::move(data), std::move(spec)};
}

/// Error of the Bayes-optimal rule estimated on fresh draws.
inline double monte_carlo_bayes_error(const GaussianPairSpec& spec, std::size_t n, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const Label y(i % 2 == 0 ? 1 : 2);
    const double p = bayes_posterior(spec, sample_gaussian_class(spec, y, rng));
    const int pred = p > 0.5 ? 2 : 1;
    wrong += pred != y.value();
  }
  return static_cast<double>(wrong) / static_cast<double>(n);
}

// ---------------------------------------------------------------------------
// Splits

struct Fold {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

inline std::vector<std::size_t> permutation(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), std::size_t{0});
  Rng rng = make_rng(seed);
  std::shuffle(p.begin(), p.end(), rng);
  return p;
}

/// Seeded permutation cut into k contiguous folds.
inline std::vector<Fold> kfold_split(std::size_t n, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw SpecError("k-fold needs k >= 2");
  if (k > n) throw SpecError("k-fold needs k <= number of instances");
  const auto p = permutation(n, seed);
  std::vector<Fold> folds(k);
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t a = n * f / k, b = n * (f + 1) / k;
    for (std::size_t i = 0; i < n; ++i) (i >= a && i < b ? folds[f].test : folds[f].train).push_back(p[i]);
  }
  return folds;
}

/// Random train/test split with the given test fraction.
inline Fold holdout_split(std::size_t n, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw SpecError("test fraction must be in (0, 1)");
  const auto p = permutation(n, seed);
  const auto n_test = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(test_fraction * n)));
  if (n_test >= n) throw SpecError("holdout split leaves no training data");
  Fold f;
  f.test.assign(p.begin(), p.begin() + static_cast<std::ptrdiff_t>(n_test));
  f.train.assign(p.begin() + static_cast<std::ptrdiff_t>(n_test), p.end());
  return f;
}

}  // namespace predmarket
