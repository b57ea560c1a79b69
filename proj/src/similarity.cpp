#include "qemind/similarity.hpp"

#include <cmath>
#include <vector>

namespace qemind {

MeteorStats align_exact(const TokenSeq& ref, const TokenSeq& hyp) {
  MeteorStats st;
  std::vector<bool> used(ref.size(), false);
  constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  std::size_t prev_ref = kNone;  // reference position of the previous hypothesis token, if matched
  for (const auto& tok : hyp) {
    std::size_t hit = kNone;
    for (std::size_t j = 0; j < ref.size(); ++j) {
      if (!used[j] && ref[j] == tok) {
        hit = j;
        break;
      }
    }
    if (hit == kNone) {
      prev_ref = kNone;
      continue;
    }
    used[hit] = true;
    ++st.matches;
    if (prev_ref == kNone || hit != prev_ref + 1) ++st.chunks;
    prev_ref = hit;
  }
  return st;
}

double sim(const TokenSeq& ref, const TokenSeq& hyp) {
  if (ref.empty() && hyp.empty()) return 1.0;
  if (ref.empty() || hyp.empty()) return 0.0;
  const auto st = align_exact(ref, hyp);
  if (st.matches == 0) return 0.0;
  const double m = static_cast<double>(st.matches);
  const double precision = m / static_cast<double>(hyp.size());
  const double recall = m / static_cast<double>(ref.size());
  const double fmean = 10.0 * precision * recall / (recall + kMeteorRecallWeight * precision);
  static_assert(kMeteorPenaltyBeta == 3);
  // Integer cubes are exact, so (chunks/m)^3 is a single correctly rounded division.
  const double c = static_cast<double>(st.chunks);
  const double penalty = kMeteorPenaltyGamma * ((c * c * c) / (m * m * m));
  return fmean * (1.0 - penalty);
}

}  // namespace qemind
