#pragma once

#include <cstdint>
#include <random>

namespace stochdepth {

// Seedable, platform-independent random stream.
//
// The engine is std::mt19937_64, whose output sequence is fully specified
// by the standard, so identical seeds reproduce identical streams on every
// platform. Doubles are derived from the top 53 bits of one engine draw;
// every sampling helper below consumes a fixed, documented number of draws.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed), seed_(seed) {}

  // Raw engine output, one draw.
  std::uint64_t next_u64() {
    ++draws_;
    return engine_();
  }

  // Uniform in [0, 1), one draw.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in [lo, hi), one draw.
  double uniform_range(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Bernoulli(p), one draw. Always false for p = 0, always true for p = 1.
  bool bernoulli(double p) { return uniform() < p; }

  // Uniform integer in [0, n), one draw (multiply-shift reduction).
  std::uint64_t below(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<__uint128_t>(next_u64()) * n) >> 64);
  }

  // Standard normal via Box-Muller, two draws.
  double normal() {
    double u1 = 1.0 - uniform();  // (0, 1], keeps the log finite
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t draws() const { return draws_; }

 private:
  std::mt19937_64 engine_;
  std::uint64_t seed_ = 0;
  std::uint64_t draws_ = 0;
};

// Component streams are derived from the experiment seed by fixed offsets
// (see README) so each stage is independently reproducible.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t offset) {
  return base + offset;
}

namespace seed_offset {
inline constexpr std::uint64_t kInit = 1;     // parameter initialization
inline constexpr std::uint64_t kMask = 2;     // gate mask sampling
inline constexpr std::uint64_t kShuffle = 3;  // per-epoch batch shuffling
inline constexpr std::uint64_t kData = 4;     // synthetic data generation
inline constexpr std::uint64_t kSplit = 5;    // validation hold-out split
inline constexpr std::uint64_t kAugment = 6;  // image augmentation
}  // namespace seed_offset

}  // namespace stochdepth
