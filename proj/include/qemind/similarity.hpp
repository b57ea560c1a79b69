#pragma once

#include "qemind/core.hpp"

namespace qemind {

/// Classic Meteor parameters: recall-weighted harmonic mean and cubic fragmentation penalty.
inline constexpr double kMeteorRecallWeight = 9.0;  // Fmean = 10PR / (R + 9P)
inline constexpr double kMeteorPenaltyGamma = 0.5;
inline constexpr int kMeteorPenaltyBeta = 3;  // cubic; evaluated as an exact integer power

struct MeteorStats {
  std::size_t matches = 0;
  std::size_t chunks = 0;
};

/// Exact-match unigram alignment: each hypothesis token, in order, takes the
/// leftmost unmatched identical reference token.
MeteorStats align_exact(const TokenSeq& reference, const TokenSeq& hypothesis);

/// Exact-match Meteor score in [0, 1]. Not symmetric: the reference comes first.
double sim(const TokenSeq& reference, const TokenSeq& hypothesis);

}  // namespace qemind
