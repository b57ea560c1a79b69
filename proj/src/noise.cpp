#include <cmath>
#include <map>

#include "qemind/glassbox.hpp"
#include "qemind/io.hpp"
#include "qemind/random.hpp"

namespace qemind {

UnigramMlm::UnigramMlm(std::vector<std::string> vocab, std::vector<double> probs)
    : vocab_(std::move(vocab)), probs_(std::move(probs)) {
  if (vocab_.empty()) throw Error("unigram MLM: empty unigram table");
  if (vocab_.size() != probs_.size()) throw Error("unigram MLM: vocab and probs differ in length");
  double sum = 0.0;
  for (double p : probs_) {
    if (!(p > 0.0 && p <= 1.0)) throw Error("unigram MLM: probability outside (0, 1]");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw Error("unigram MLM: probabilities do not sum to 1");
}

UnigramMlm UnigramMlm::build(std::span<const TokenSeq> corpus) {
  std::map<std::string, double> counts;
  for (const auto& sentence : corpus) {
    for (const auto& tok : sentence) {
      if (tok != kMaskToken) counts[tok] += 1.0;
    }
  }
  std::vector<std::string> vocab;
  std::vector<double> probs;
  double total = 0.0;
  for (const auto& [tok, c] : counts) total += c;
  const double denom = total + static_cast<double>(counts.size());
  for (const auto& [tok, c] : counts) {
    vocab.push_back(tok);
    probs.push_back((c + 1.0) / denom);
  }
  return UnigramMlm(std::move(vocab), std::move(probs));
}

TokenSeq UnigramMlm::fill(const TokenSeq& masked, std::uint64_t seed) const {
  SplitMix64 rng(seed);
  TokenSeq out = masked;
  for (auto& tok : out) {
    if (tok != kMaskToken) continue;
    const double u = rng.uniform();
    double cum = 0.0;
    std::size_t pick = vocab_.size() - 1;
    for (std::size_t k = 0; k < probs_.size(); ++k) {
      cum += probs_[k];
      if (u < cum) {
        pick = k;
        break;
      }
    }
    tok = vocab_[pick];
  }
  return out;
}

TokenSeq unigram_mlm_fill(const UnigramMlm& mlm, const TokenSeq& masked, std::uint64_t seed) {
  return mlm.fill(masked, seed);
}

nlohmann::json UnigramMlm::to_json() const { return {{"vocab", vocab_}, {"probs", probs_}}; }

UnigramMlm UnigramMlm::from_json(const nlohmann::json& j) {
  try {
    return UnigramMlm(j.at("vocab").get<std::vector<std::string>>(), j.at("probs").get<std::vector<double>>());
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("invalid MLM JSON: ") + e.what());
  }
}

void UnigramMlm::save(const std::filesystem::path& path) const { io::write_file_atomic(path, to_json().dump()); }

UnigramMlm UnigramMlm::load(const std::filesystem::path& path) {
  try {
    return from_json(nlohmann::json::parse(io::read_file(path)));
  } catch (const nlohmann::json::exception& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

void NoiseConfig::validate() const {
  if (rounds < 1) throw Error("noise rounds must be >= 1");
  if (!(p_insert >= 0.0 && p_insert <= 1.0)) throw Error("p_insert must be in [0, 1]");
  if (!(p_delete >= 0.0 && p_delete <= 1.0)) throw Error("p_delete must be in [0, 1]");
}

TokenSeq generate_noised_input(const TokenSeq& x, const NoiseConfig& cfg, const UnigramMlm& mlm, std::uint64_t seed) {
  cfg.validate();
  if (x.empty()) throw Error("generate_noised_input: empty input");
  SplitMix64 rng(seed);
  TokenSeq cur = x;
  TokenSeq next;
  for (int r = 0; r < cfg.rounds; ++r) {
    next.clear();
    for (auto& tok : cur) {
      if (!rng.bernoulli(cfg.p_delete)) next.push_back(std::move(tok));
    }
    cur.swap(next);

    // k tokens leave k + 1 insertion gaps.
    next.clear();
    for (std::size_t gap = 0; gap <= cur.size(); ++gap) {
      if (rng.bernoulli(cfg.p_insert)) next.emplace_back(kMaskToken);
      if (gap < cur.size()) next.push_back(std::move(cur[gap]));
    }
    cur.swap(next);
  }
  if (cur.empty()) cur.emplace_back(kMaskToken);
  return mlm.fill(cur, derive_seed(seed, 0, SeedPurpose::MlmFill));
}

}  // namespace qemind
