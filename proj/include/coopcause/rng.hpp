#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>

namespace coopcause {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Independent random streams of one run. Each purpose, and each vehicle or
/// entry point within a purpose, gets its own seed.
enum class StreamPurpose : std::uint64_t {
  Arrivals = 1,
  Equipment = 2,
  Classifier = 3,
  Spurious = 4,
  Routing = 5,
  SpecialEvent = 6,
  Training = 7,
};

constexpr std::uint64_t derive_seed(std::uint64_t seed, StreamPurpose purpose, std::uint64_t index = 0) {
  return splitmix64(splitmix64(splitmix64(seed) ^ static_cast<std::uint64_t>(purpose)) + index);
}

/// mt19937_64 with hand-written transforms instead of <random> distributions.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}
  RandomStream(std::uint64_t seed, StreamPurpose purpose, std::uint64_t index = 0)
      : engine_(derive_seed(seed, purpose, index)) {}

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  bool bernoulli(double p) { return uniform() < p; }
  double exponential(double rate) { return -std::log1p(-uniform()) / rate; }

  std::size_t index(std::size_t n) {
    const auto i = static_cast<std::size_t>(uniform() * static_cast<double>(n));
    return i < n ? i : n - 1;
  }

  /// Draws an index with probability proportional to its weight.
  std::size_t categorical(std::span<const double> weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    double u = uniform() * total;
    std::size_t last = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      if (weights[i] <= 0.0) continue;
      last = i;
      if (u < weights[i]) return i;
      u -= weights[i];
    }
    return last;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace coopcause
