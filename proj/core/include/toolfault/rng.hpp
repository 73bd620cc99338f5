#pragma once

#include <cstdint>
#include <random>

namespace toolfault {

// splitmix64 finalizer.
std::uint64_t splitmix64(std::uint64_t x) noexcept;

// Seed splitting: derive a child seed from (parent, index). Stable across
// platforms and insertion order:
//   mix_seed(p, i) = splitmix64(p ^ splitmix64(i + 0x9e3779b97f4a7c15))
std::uint64_t mix_seed(std::uint64_t parent, std::uint64_t index) noexcept;

// Human-readable description of mix_seed, recorded in manifests.
inline constexpr const char* kSeedMixDescription =
    "splitmix64(parent ^ splitmix64(index + 0x9e3779b97f4a7c15))";

// Deterministic random stream. Only the engine comes from <random>; the
// bounded draws are implemented here because std distributions are not
// specified bit-for-bit across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, bound). bound must be > 0.
  std::uint64_t below(std::uint64_t bound);

  // Uniform in [lo, hi] inclusive.
  std::int64_t between(std::int64_t lo, std::int64_t hi);

  // Uniform double in [0, 1) with 53 bits of precision.
  double unit();

  bool bernoulli(double p) { return unit() < p; }

 private:
  std::mt19937_64 engine_;
};

// Single draw in [0, 1) keyed by (seed, salt) without carrying stream state.
double keyed_unit(std::uint64_t seed, std::uint64_t salt) noexcept;

}  // namespace toolfault
