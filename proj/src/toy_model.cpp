#include <algorithm>
#include <cmath>
#include <set>

#include "qemind/glassbox.hpp"
#include "qemind/io.hpp"
#include "qemind/random.hpp"

namespace qemind {

namespace {

void check_vocab(const std::vector<std::string>& vocab, const char* name) {
  if (vocab.empty()) throw Error(std::string(name) + " is empty");
  if (!std::is_sorted(vocab.begin(), vocab.end()) ||
      std::adjacent_find(vocab.begin(), vocab.end()) != vocab.end()) {
    throw Error(std::string(name) + " must be sorted and unique");
  }
  if (!std::binary_search(vocab.begin(), vocab.end(), std::string(kUnkToken))) {
    throw Error(std::string(name) + " lacks " + std::string(kUnkToken));
  }
}

void check_stochastic(const std::vector<double>& table, std::size_t rows, std::size_t cols, const char* name) {
  if (table.size() != rows * cols) throw Error(std::string(name) + " has wrong size");
  for (std::size_t r = 0; r < rows; ++r) {
    double sum = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      const double p = table[r * cols + c];
      if (!(p > 0.0 && p <= 1.0)) throw Error(std::string(name) + " has an entry outside (0, 1]");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw Error(std::string(name) + " row " + std::to_string(r) + " does not sum to 1");
  }
}

std::size_t index_of(const std::vector<std::string>& vocab, const std::string& token, std::size_t unk) {
  const auto it = std::lower_bound(vocab.begin(), vocab.end(), token);
  return it != vocab.end() && *it == token ? static_cast<std::size_t>(it - vocab.begin()) : unk;
}

// (count + α) / (row total + α·V), row by row.
std::vector<double> smoothed_rows(const std::vector<double>& counts, std::size_t rows, std::size_t cols, double alpha) {
  std::vector<double> table(rows * cols);
  for (std::size_t r = 0; r < rows; ++r) {
    double total = 0.0;
    for (std::size_t c = 0; c < cols; ++c) total += counts[r * cols + c];
    const double denom = total + alpha * static_cast<double>(cols);
    for (std::size_t c = 0; c < cols; ++c) table[r * cols + c] = (counts[r * cols + c] + alpha) / denom;
  }
  return table;
}

}  // namespace

ToyLexicalModel::ToyLexicalModel(std::vector<std::string> src_vocab, std::vector<std::string> tgt_vocab,
                                 std::vector<double> trans_table, std::vector<double> bigram_table, double lambda,
                                 double alpha, double floor)
    : src_vocab_(std::move(src_vocab)),
      tgt_vocab_(std::move(tgt_vocab)),
      trans_(std::move(trans_table)),
      bigram_(std::move(bigram_table)),
      lambda_(lambda),
      alpha_(alpha),
      floor_(floor) {
  check_vocab(src_vocab_, "src_vocab");
  check_vocab(tgt_vocab_, "tgt_vocab");
  if (!(lambda_ >= 0.0 && lambda_ <= 1.0)) throw Error("lambda must be in [0, 1]");
  if (!(alpha_ > 0.0)) throw Error("alpha must be positive");
  if (!(floor_ > 0.0 && floor_ < 1.0)) throw Error("floor must be in (0, 1)");
  check_stochastic(trans_, src_vocab_.size(), tgt_vocab_.size(), "trans_table");
  check_stochastic(bigram_, tgt_vocab_.size() + 1, tgt_vocab_.size(), "bigram_table");
  src_unk_ = index_of(src_vocab_, std::string(kUnkToken), 0);
  tgt_unk_ = index_of(tgt_vocab_, std::string(kUnkToken), 0);
}

std::size_t ToyLexicalModel::src_index(const std::string& token) const { return index_of(src_vocab_, token, src_unk_); }

std::size_t ToyLexicalModel::tgt_index(const std::string& token) const { return index_of(tgt_vocab_, token, tgt_unk_); }

void ToyLexicalModel::step_scores(std::size_t src_row, std::size_t prev_row, std::vector<double>& scores) const {
  const std::size_t v = tgt_vocab_.size();
  scores.resize(v);
  for (std::size_t t = 0; t < v; ++t) {
    scores[t] = std::pow(trans(src_row, t), lambda_) * std::pow(bigram(prev_row, t), 1.0 - lambda_);
  }
}

StepLogProbs ToyLexicalModel::force_decode(const TokenSeq& src, const TokenSeq& mt, const DropoutSpec& dropout) const {
  if (src.empty() || mt.empty()) throw Error("force_decode: source and translation must be non-empty");
  if (dropout.active()) return perturbed(dropout.rate, dropout.seed).force_decode(src, mt, DropoutSpec::off());

  StepLogProbs out;
  out.reserve(mt.size());
  std::vector<double> scores;
  std::size_t prev = bos_row();
  for (std::size_t t = 0; t < mt.size(); ++t) {
    step_scores(src_index(src[std::min(t, src.size() - 1)]), prev, scores);
    double z = 0.0;
    for (double s : scores) z += s;
    const std::size_t y = tgt_index(mt[t]);
    out.push_back(std::log(std::max(scores[y] / z, floor_)));
    prev = y;
  }
  return out;
}

DecodeSample ToyLexicalModel::greedy_translate(const TokenSeq& src, const DropoutSpec& dropout) const {
  if (src.empty()) throw Error("greedy_translate: empty source");
  if (dropout.active()) return perturbed(dropout.rate, dropout.seed).greedy_translate(src, DropoutSpec::off());

  DecodeSample out;
  std::vector<double> scores;
  std::size_t prev = bos_row();
  for (std::size_t t = 0; t < src.size(); ++t) {
    step_scores(src_index(src[t]), prev, scores);
    double z = 0.0;
    std::size_t best = 0;
    for (std::size_t v = 0; v < scores.size(); ++v) {
      z += scores[v];
      // Vocabulary is sorted, so keeping the first maximum breaks ties lexicographically.
      if (scores[v] > scores[best]) best = v;
    }
    out.tokens.push_back(tgt_vocab_[best]);
    out.step_logprobs.push_back(std::log(std::max(scores[best] / z, floor_)));
    prev = best;
  }
  return out;
}

ToyLexicalModel ToyLexicalModel::perturbed(double rate, std::uint64_t seed) const {
  if (!(rate >= 0.0 && rate < 1.0)) throw Error("dropout rate must be in [0, 1)");
  ToyLexicalModel copy = *this;
  SplitMix64 rng(seed);
  const std::size_t cols = tgt_vocab_.size();
  for (std::size_t r = 0; r < src_vocab_.size(); ++r) {
    double* row = copy.trans_.data() + r * cols;
    bool touched = false;
    for (std::size_t c = 0; c < cols; ++c) {
      if (rng.bernoulli(rate)) {
        row[c] = floor_;
        touched = true;
      }
    }
    if (!touched) continue;
    double sum = 0.0;
    for (std::size_t c = 0; c < cols; ++c) sum += row[c];
    for (std::size_t c = 0; c < cols; ++c) row[c] /= sum;
  }
  return copy;
}

ToyLexicalModel toy_dropout_perturb(const ToyLexicalModel& model, double rate, std::uint64_t seed) {
  return model.perturbed(rate, seed);
}

ToyLexicalModel train_toy_model(const ParallelCorpus& corpus, double alpha, double lambda) {
  if (corpus.empty()) throw Error("train_toy_model: empty corpus");
  if (!(alpha > 0.0)) throw Error("train_toy_model: alpha must be positive");

  std::set<std::string> src_set{std::string(kUnkToken)};
  std::set<std::string> tgt_set{std::string(kUnkToken)};
  for (const auto& [src, tgt] : corpus) {
    src_set.insert(src.begin(), src.end());
    tgt_set.insert(tgt.begin(), tgt.end());
  }
  std::vector<std::string> src_vocab(src_set.begin(), src_set.end());
  std::vector<std::string> tgt_vocab(tgt_set.begin(), tgt_set.end());
  const std::size_t ns = src_vocab.size();
  const std::size_t nt = tgt_vocab.size();
  auto idx = [](const std::vector<std::string>& vocab, const std::string& tok) {
    return static_cast<std::size_t>(std::lower_bound(vocab.begin(), vocab.end(), tok) - vocab.begin());
  };

  std::vector<double> trans_counts(ns * nt, 0.0);
  std::vector<double> bigram_counts((nt + 1) * nt, 0.0);
  for (const auto& [src, tgt] : corpus) {
    for (std::size_t i = 0; i < std::min(src.size(), tgt.size()); ++i) {
      trans_counts[idx(src_vocab, src[i]) * nt + idx(tgt_vocab, tgt[i])] += 1.0;
    }
    std::size_t prev = nt;
    for (const auto& tok : tgt) {
      const std::size_t cur = idx(tgt_vocab, tok);
      bigram_counts[prev * nt + cur] += 1.0;
      prev = cur;
    }
  }
  return ToyLexicalModel(std::move(src_vocab), std::move(tgt_vocab), smoothed_rows(trans_counts, ns, nt, alpha),
                         smoothed_rows(bigram_counts, nt + 1, nt, alpha), lambda, alpha);
}

nlohmann::json ToyLexicalModel::to_json() const {
  return {
      {"src_vocab", src_vocab_}, {"tgt_vocab", tgt_vocab_}, {"trans_table", trans_}, {"bigram_table", bigram_},
      {"lambda", lambda_},       {"alpha", alpha_},         {"floor", floor_},
  };
}

ToyLexicalModel ToyLexicalModel::from_json(const nlohmann::json& j) {
  try {
    return ToyLexicalModel(j.at("src_vocab").get<std::vector<std::string>>(),
                           j.at("tgt_vocab").get<std::vector<std::string>>(),
                           j.at("trans_table").get<std::vector<double>>(),
                           j.at("bigram_table").get<std::vector<double>>(), j.at("lambda").get<double>(),
                           j.at("alpha").get<double>(), j.at("floor").get<double>());
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("invalid toy model JSON: ") + e.what());
  }
}

void ToyLexicalModel::save(const std::filesystem::path& path) const { io::write_file_atomic(path, to_json().dump()); }

ToyLexicalModel ToyLexicalModel::load(const std::filesystem::path& path) {
  try {
    return from_json(nlohmann::json::parse(io::read_file(path)));
  } catch (const nlohmann::json::exception& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

}  // namespace qemind
