#pragma once

#include <cstdint>
#include <random>

namespace chiralctl::detail {

// Single RNG type used everywhere so seeded runs are reproducible across
// platforms (mt19937_64 has a fully specified sequence).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(eng_);
  }
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(eng_); }
  int index(int n) { return std::uniform_int_distribution<int>(0, n - 1)(eng_); }
  std::uint64_t raw() { return eng_(); }

 private:
  std::mt19937_64 eng_;
};

}  // namespace chiralctl::detail
