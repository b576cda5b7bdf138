#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace fragq {

// Portable deterministic generator.
//
// The engine is std::mt19937_64, whose output sequence is fixed by the C++
// standard. The distributions below are implemented here rather than taken
// from <random>, because the standard distributions are allowed to differ
// between library implementations. Together this makes every draw (and
// therefore every sampling plan and synthetic corpus) reproducible across
// compilers and platforms from the seed alone.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform integer in the closed range [lo, hi]. Unbiased (rejection).
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

  // Uniform real in [0, 1) with 53 bits of resolution.
  double uniform();

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller (no cached second variate).
  double normal();

 private:
  std::mt19937_64 engine_;
};

// SplitMix64 finalizer over the pair; used to derive independent child seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes);

}  // namespace fragq
