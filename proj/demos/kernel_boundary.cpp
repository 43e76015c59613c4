// One RBF kernel participant per training point on a sinusoidal boundary.

#include <cstdio>
#include <cstdlib>

#include "predmarket/predmarket.hpp"

int main(int argc, char** argv) {
  const std::size_t n = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 1000;
  const double sigma = argc > 2 ? std::strtod(argv[2], nullptr) : 0.2;
  const auto r = predmarket::run_kernel_demo(0, n, sigma);
  std::printf("participants %zu, sigma %.3g, training accuracy %.4f\n", r.market.size(), sigma, r.train_accuracy);
  return 0;
}
