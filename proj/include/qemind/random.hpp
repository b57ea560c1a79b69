#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>

namespace qemind {

/// SplitMix64 output finalizer (Steele, Lea, Flood 2014).
constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// 64-bit FNV-1a over the raw bytes.
constexpr std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

/// Purpose tags keep independent random streams apart when derived from one base seed.
enum class SeedPurpose : std::uint64_t {
  Sample = 1,
  McDropout = 2,
  DropoutDraw = 3,
  Noise = 4,
  MlmFill = 5,
  Upsample = 6,
};

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index, SeedPurpose purpose);

/// SplitMix64 stream. Chosen over the <random> engines because its output and
/// the derived uniform/index draws are fully specified, so every run is
/// reproducible across standard libraries.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    state_ += 0x9E3779B97F4A7C15ULL;
    return mix64(state_);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return uniform() < p; }

  /// Unbiased integer in [0, n). n must be positive.
  std::size_t index(std::size_t n);

 private:
  std::uint64_t state_;
};

}  // namespace qemind
