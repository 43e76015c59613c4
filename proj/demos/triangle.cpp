// Six half-plane participants learn a triangle-shaped class region.

#include <cstdio>
#include <cstdlib>

#include "predmarket/predmarket.hpp"

int main(int argc, char** argv) {
  const std::uint64_t seed = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 0;
  const auto r = predmarket::run_triangle_demo(seed);
  std::printf("test accuracy %.4f, rejected %zu\n", r.accuracy, r.rejected);
  for (std::size_t m = 0; m < r.market.size(); ++m)
    std::printf("participant %zu  budget %.4f\n", m, r.market[m].budget);
  for (const auto& e : r.trace.epochs) std::printf("epoch %d  nll %.5f  train error %.4f\n", e.epoch, e.nll, e.train_error);
  return 0;
}
