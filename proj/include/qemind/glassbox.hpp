#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "qemind/core.hpp"

namespace qemind {

/// Per-step natural-log decoding probabilities, one per target token. Every value is in [ln floor, 0].
using StepLogProbs = std::vector<double>;

inline constexpr double kProbFloor = 1e-9;

struct DecodeSample {
  TokenSeq tokens;
  StepLogProbs step_logprobs;

  bool operator==(const DecodeSample&) const = default;
};

/// Dropout request for a single forward pass. A rate of 0 is the deterministic path.
struct DropoutSpec {
  double rate = 0.0;
  std::uint64_t seed = 0;

  static DropoutSpec off() { return {}; }
  bool active() const { return rate > 0.0; }
};

/// A translation model that exposes its per-step probabilities.
class GlassBoxModel {
 public:
  virtual ~GlassBoxModel() = default;

  /// log P(y_t | y_<t, x) for every position of `mt`.
  virtual StepLogProbs force_decode(const TokenSeq& src, const TokenSeq& mt, const DropoutSpec& dropout) const = 0;

  virtual DecodeSample greedy_translate(const TokenSeq& src, const DropoutSpec& dropout) const = 0;
};

/// Assigns probability p to every target step and emits `token` once per source token.
class ConstantModel final : public GlassBoxModel {
 public:
  explicit ConstantModel(double p, std::string token = "x");

  StepLogProbs force_decode(const TokenSeq& src, const TokenSeq& mt, const DropoutSpec& dropout) const override;
  DecodeSample greedy_translate(const TokenSeq& src, const DropoutSpec& dropout) const override;

 private:
  double logp_;
  std::string token_;
};

using ParallelCorpus = std::vector<std::pair<TokenSeq, TokenSeq>>;

/// Positional lexical translation model with a target bigram LM.
///
/// At step t the next-token distribution is
///   p(v) ∝ T[x_t][v]^λ · B[prev][v]^(1-λ)
/// where x_t is the source token at the clamped position min(t, |src|-1) and
/// prev is the previous target token (a begin-of-sentence row at t = 0).
/// Unknown tokens on either side map to `<unk>`.
///
/// Vocabularies are sorted and both contain `<unk>`. The translation table is
/// |src_vocab| x |tgt_vocab|; the bigram table has one extra trailing row for
/// begin-of-sentence. Both are stored dense and row-major.
class ToyLexicalModel final : public GlassBoxModel {
 public:
  ToyLexicalModel(std::vector<std::string> src_vocab, std::vector<std::string> tgt_vocab,
                  std::vector<double> trans_table, std::vector<double> bigram_table, double lambda, double alpha,
                  double floor = kProbFloor);

  StepLogProbs force_decode(const TokenSeq& src, const TokenSeq& mt, const DropoutSpec& dropout) const override;
  DecodeSample greedy_translate(const TokenSeq& src, const DropoutSpec& dropout) const override;

  /// Masks each translation-table entry to the probability floor with
  /// probability `rate` (row-major Bernoulli draws), renormalizing touched rows.
  ToyLexicalModel perturbed(double rate, std::uint64_t seed) const;

  const std::vector<std::string>& src_vocab() const { return src_vocab_; }
  const std::vector<std::string>& tgt_vocab() const { return tgt_vocab_; }
  const std::vector<double>& trans_table() const { return trans_; }
  const std::vector<double>& bigram_table() const { return bigram_; }
  double lambda() const { return lambda_; }
  double alpha() const { return alpha_; }
  double floor() const { return floor_; }

  double trans(std::size_t s, std::size_t t) const { return trans_[s * tgt_vocab_.size() + t]; }
  double bigram(std::size_t prev, std::size_t t) const { return bigram_[prev * tgt_vocab_.size() + t]; }
  std::size_t bos_row() const { return tgt_vocab_.size(); }

  std::size_t src_index(const std::string& token) const;
  std::size_t tgt_index(const std::string& token) const;

  nlohmann::json to_json() const;
  static ToyLexicalModel from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  static ToyLexicalModel load(const std::filesystem::path& path);

 private:
  // Unnormalized scores for every target token at one decoding step.
  void step_scores(std::size_t src_row, std::size_t prev_row, std::vector<double>& scores) const;

  std::vector<std::string> src_vocab_;
  std::vector<std::string> tgt_vocab_;
  std::vector<double> trans_;
  std::vector<double> bigram_;
  double lambda_;
  double alpha_;
  double floor_;
  std::size_t src_unk_;
  std::size_t tgt_unk_;
};

/// Position-aligned co-occurrence counts with add-α smoothing.
ToyLexicalModel train_toy_model(const ParallelCorpus& corpus, double alpha, double lambda);

ToyLexicalModel toy_dropout_perturb(const ToyLexicalModel& model, double rate, std::uint64_t seed);

/// Sample i runs greedy decoding with dropout seed derive_seed(base_seed, i, DropoutDraw).
/// rate = 0 takes the deterministic path for every sample.
std::vector<DecodeSample> mc_dropout_samples(const GlassBoxModel& model, const TokenSeq& src, std::size_t n,
                                             double rate, std::uint64_t base_seed);

/// Unigram stand-in for a masked LM: fills `<mask>` tokens by sampling from
/// add-one smoothed corpus frequencies.
class UnigramMlm {
 public:
  UnigramMlm(std::vector<std::string> vocab, std::vector<double> probs);

  static UnigramMlm build(std::span<const TokenSeq> corpus);

  TokenSeq fill(const TokenSeq& masked, std::uint64_t seed) const;

  const std::vector<std::string>& vocab() const { return vocab_; }
  const std::vector<double>& probs() const { return probs_; }

  nlohmann::json to_json() const;
  static UnigramMlm from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  static UnigramMlm load(const std::filesystem::path& path);

 private:
  std::vector<std::string> vocab_;
  std::vector<double> probs_;
};

TokenSeq unigram_mlm_fill(const UnigramMlm& mlm, const TokenSeq& masked, std::uint64_t seed);

struct NoiseConfig {
  int rounds = 2;
  double p_insert = 0.15;
  double p_delete = 0.15;

  void validate() const;
};

/// Post-editing noise: R rounds of random deletion then random `<mask>`
/// insertion (one trial per gap), then masks are filled by the MLM.
TokenSeq generate_noised_input(const TokenSeq& x, const NoiseConfig& cfg, const UnigramMlm& mlm, std::uint64_t seed);

/// Reads a parallel corpus, one `src<TAB>tgt` pair per line.
ParallelCorpus load_parallel_corpus(const std::filesystem::path& path);

/// Every whitespace token on every line of a text file.
std::vector<TokenSeq> load_monolingual_corpus(const std::filesystem::path& path);

}  // namespace qemind
