#pragma once

#include <cmath>
#include <cstdint>

namespace advkit {

/// Portable 64-bit generator used everywhere randomness is needed
/// (xoshiro256++ seeded through splitmix64).  The sequence depends only on
/// the seed, never on the platform or standard library, so results are
/// reproducible bit-for-bit across builds.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t x = seed;
    for (auto& word : state_) word = splitmix64(x);
  }

  /// Independent stream for task `index` under a common base seed.
  /// Replicate r of a study uses substream(base_seed, r), draw i of a
  /// sampler uses substream(seed, i); merging by index keeps parallel
  /// runs deterministic.
  static Rng substream(std::uint64_t base_seed, std::uint64_t index) {
    std::uint64_t x = base_seed;
    std::uint64_t a = splitmix64(x);
    x = index + 0x9e3779b97f4a7c15ULL;
    std::uint64_t b = splitmix64(x);
    return Rng(a ^ (b + 0x2545f4914f6cdd1dULL));
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Uniform double in [lo, hi).
  double next_uniform(double lo, double hi) {
    return lo + (hi - lo) * next_double();
  }

  /// Standard normal via the Marsaglia polar method (exact sampler).
  double next_normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * next_double() - 1.0;
      v = 2.0 * next_double() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    has_spare_ = true;
    return u * m;
  }

 private:
  static std::uint64_t splitmix64(std::uint64_t& x) {
    x += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t state_[4]{};
  double spare_{0};
  bool has_spare_{false};
};

}  // namespace advkit
