#pragma once

#include <cstdint>
#include <random>

namespace gpcon {

/// Derives an independent stream seed from a base seed (splitmix64 step).
std::uint64_t mix_seed(std::uint64_t base, std::uint64_t stream);

/// Seeded generator wrapper. The same seed always reproduces the same
/// draw sequence, which every sampler and experiment relies on.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  /// Uniform on [0, 1).
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  double normal() { return normal_(gen_); }

  /// Uniform integer in [0, n).
  int uniform_int(int n) {
    return static_cast<int>(gen_() % static_cast<std::uint64_t>(n));
  }

  std::uint64_t raw() { return gen_(); }

 private:
  std::mt19937_64 gen_;
  std::normal_distribution<double> normal_;
};

}  // namespace gpcon
