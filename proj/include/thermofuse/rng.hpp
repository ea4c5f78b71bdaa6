#pragma once

#include <cstdint>
#include <string_view>

namespace thermofuse {

/// Counter-based 64-bit generator (SplitMix64). Output k of a stream seeded
/// with s is mix(s + (k+1) * 0x9E3779B97F4A7C15), where mix is the SplitMix64
/// finalizer. All distributions below are built from this integer stream with
/// fixed algorithms, so datasets reproduce bit-for-bit across compilers.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed) noexcept : state_(seed) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return ~result_type{0}; }

  result_type operator()() noexcept { return next(); }
  std::uint64_t next() noexcept;

  /// [0, 1) with 53 random bits.
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
  /// Unbiased integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n) noexcept;
  bool bernoulli(double p) noexcept { return uniform() < p; }
  /// Box-Muller; no cached second variate.
  double normal(double mean = 0.0, double sigma = 1.0) noexcept;
  std::uint64_t poisson(double mean) noexcept;
  double gamma(double shape) noexcept;
  double beta(double alpha, double beta) noexcept;

 private:
  std::uint64_t state_;
};

std::uint64_t splitmix64_mix(std::uint64_t z) noexcept;

/// FNV-1a 64 over raw bytes.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis = 0xcbf29ce484222325ULL) noexcept;

/// Seed for (top-level seed, stage name, item index).
std::uint64_t derive_seed(std::uint64_t seed, std::string_view stage, std::uint64_t index) noexcept;

}  // namespace thermofuse
