// Random forest versus the constant, linear and aggressive leaf markets on a
// synthetic two-Gaussian problem.

#include <cstdio>

#include "predmarket/predmarket.hpp"

using namespace predmarket;

int main() {
  const auto [train, spec] = synth_gaussian_pair(10, 0.2, 400, 1);
  Dataset test(2, 10);
  Rng rng = make_rng(2);
  for (int i = 0; i < 2000; ++i) {
    const Label y(1 + i % 2);
    test.add(sample_gaussian_class(spec, y, rng), y);
  }
  MarketRecipe recipe;
  recipe.epochs = 5;
  recipe.eta = 0.1;
  const auto results =
      evaluate_methods({Method::rf, Method::cb, Method::lb, Method::ab}, recipe, train, test, &spec, 1000, 3);
  std::printf("method  test_error  train_error  l2\n");
  for (const auto& m : results)
    std::printf("%-6s  %.4f      %.4f       %.5f\n", to_string(m.method), m.test_error, m.train_error, m.l2.value_or(0.0));
  return 0;
}
