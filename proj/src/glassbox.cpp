#include <cmath>
#include <sstream>
#include <string>

#include "qemind/glassbox.hpp"
#include "qemind/io.hpp"
#include "qemind/random.hpp"

namespace qemind {

ConstantModel::ConstantModel(double p, std::string token) : token_(std::move(token)) {
  if (!(p > 0.0 && p <= 1.0)) throw Error("ConstantModel probability must be in (0, 1]");
  logp_ = std::log(std::max(p, kProbFloor));
}

StepLogProbs ConstantModel::force_decode(const TokenSeq& src, const TokenSeq& mt, const DropoutSpec&) const {
  if (src.empty() || mt.empty()) throw Error("force_decode: source and translation must be non-empty");
  return StepLogProbs(mt.size(), logp_);
}

DecodeSample ConstantModel::greedy_translate(const TokenSeq& src, const DropoutSpec&) const {
  if (src.empty()) throw Error("greedy_translate: empty source");
  return {TokenSeq(src.size(), token_), StepLogProbs(src.size(), logp_)};
}

std::vector<DecodeSample> mc_dropout_samples(const GlassBoxModel& model, const TokenSeq& src, std::size_t n,
                                             double rate, std::uint64_t base_seed) {
  if (n < 1) throw Error("mc_dropout_samples: need at least one sample");
  if (!(rate >= 0.0 && rate < 1.0)) throw Error("mc_dropout_samples: dropout rate must be in [0, 1)");
  std::vector<DecodeSample> samples;
  samples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const DropoutSpec spec{rate, derive_seed(base_seed, i, SeedPurpose::DropoutDraw)};
    samples.push_back(model.greedy_translate(src, spec));
  }
  return samples;
}

ParallelCorpus load_parallel_corpus(const std::filesystem::path& path) {
  std::istringstream in(io::read_file(path));
  ParallelCorpus corpus;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = io::split(line, '\t');
    if (fields.size() != 2) {
      throw Error(path.string() + ": line " + std::to_string(line_no) + ": expected 'src<TAB>tgt'");
    }
    corpus.emplace_back(tokenize(fields[0]), tokenize(fields[1]));
  }
  return corpus;
}

std::vector<TokenSeq> load_monolingual_corpus(const std::filesystem::path& path) {
  std::istringstream in(io::read_file(path));
  std::vector<TokenSeq> corpus;
  std::string line;
  while (std::getline(in, line)) {
    auto tokens = tokenize(line);
    if (!tokens.empty()) corpus.push_back(std::move(tokens));
  }
  return corpus;
}

}  // namespace qemind
