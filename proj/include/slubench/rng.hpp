#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "slubench/text.hpp"

namespace slubench {

// Deterministic random stream. Every consumer that must be reproducible
// independently of evaluation order derives its own stream from
// (seed, key) instead of sharing a generator.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  Rng(std::uint64_t seed, std::string_view key) : engine_(stream_seed(seed, key)) {}

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). n must be positive.
  std::size_t index(std::size_t n) {
    return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
  }

  double normal(double mean = 0.0, double sd = 1.0) {
    std::normal_distribution<double> dist(mean, sd);
    return dist(engine_);
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

// Fisher-Yates with Rng::index, so orderings do not depend on the
// library's std::shuffle.
template <typename Vec>
void shuffle_in_place(Vec& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::size_t j = rng.index(i);
    using std::swap;
    swap(v[i - 1], v[j]);
  }
}

}  // namespace slubench
