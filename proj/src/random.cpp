#include "qemind/random.hpp"

namespace qemind {

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index, SeedPurpose purpose) {
  std::uint64_t h = mix64(base ^ (static_cast<std::uint64_t>(purpose) * 0xD6E8FEB86659FD93ULL));
  return mix64(h + 0x9E3779B97F4A7C15ULL * (index + 1));
}

std::size_t SplitMix64::index(std::size_t n) {
  const auto bound = static_cast<std::uint64_t>(n);
  // Reject the low residue band so that x % bound is uniform.
  const std::uint64_t threshold = (0 - bound) % bound;
  for (;;) {
    const std::uint64_t x = next();
    if (x >= threshold) return static_cast<std::size_t>(x % bound);
  }
}

}  // namespace qemind
