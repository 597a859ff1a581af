#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace earthpress {

/// SplitMix64 finalizer; used to decorrelate derived seeds.
std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Seed for an independent stream `stream` under `master`.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) noexcept;

/// Seed for a named stream (FNV-1a of the label, then mixed with `master`).
std::uint64_t derive_seed(std::uint64_t master, std::string_view label) noexcept;

/// Seeded 64-bit Mersenne Twister with platform-independent variate
/// transforms, so that identical seeds give identical draws everywhere.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1) with 53 random bits.
  double uniform01();
  double uniform(double lower, double upper);
  /// Standard normal via Box-Muller; one engine pair per call.
  double normal();
  /// Uniform integer in [0, bound); unbiased.
  std::uint64_t index(std::uint64_t bound);

 private:
  std::mt19937_64 engine_;
};

}  // namespace earthpress
