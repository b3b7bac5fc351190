#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace wvt {

// Seeded generator with platform-independent derived draws. std::mt19937_64 output
// is fully specified by the standard; the distributions here are written out so
// results do not depend on the standard library vendor.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 bits of precision.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Unbiased integer in [0, n). n must be > 0.
  std::uint64_t uniform_index(std::uint64_t n);

  // Standard normal via Box-Muller (no cached second value, so state stays simple).
  double normal();

  bool bernoulli(double p) { return uniform01() < p; }

  // Textual engine state; round-trips exactly through restore().
  std::string state() const;
  void restore(const std::string& state);

 private:
  std::mt19937_64 engine_;
};

// SplitMix64 finalizer, used to derive independent stream seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

}  // namespace wvt
