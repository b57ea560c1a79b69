#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "qemind/core.hpp"
#include "qemind/features.hpp"

namespace qemind {

using Embedding = std::vector<double>;

inline constexpr std::size_t kDefaultEmbeddingDim = 256;
inline constexpr double kDecisionThreshold = 0.5;

/// Hashed bag of tokens over `src ++ ["<sep>"] ++ mt`, L2-normalized.
Embedding toy_encode(const TokenSeq& src, const TokenSeq& mt, std::size_t dim);

/// Sentence-pair encoder feeding the head.
class Encoder {
 public:
  virtual ~Encoder() = default;
  virtual Embedding encode(const QESample& sample) const = 0;
  virtual std::size_t dim() const = 0;
  virtual std::string type() const = 0;
};

class ToyEncoder final : public Encoder {
 public:
  explicit ToyEncoder(std::size_t dim = kDefaultEmbeddingDim);
  Embedding encode(const QESample& sample) const override;
  std::size_t dim() const override { return dim_; }
  std::string type() const override { return "toy"; }

 private:
  std::size_t dim_;
};

/// Precomputed embeddings looked up by sample id (e.g. from a real encoder).
class TableEncoder final : public Encoder {
 public:
  explicit TableEncoder(std::unordered_map<std::string, Embedding> table);
  static TableEncoder load_tsv(const std::filesystem::path& path);

  Embedding encode(const QESample& sample) const override;
  std::size_t dim() const override { return dim_; }
  std::string type() const override { return "external"; }

 private:
  std::unordered_map<std::string, Embedding> table_;
  std::size_t dim_ = 0;
};

struct HeadHyper {
  double learning_rate = 0.1;
  int epochs = 500;
  double l2_reg = 1e-4;

  nlohmann::json to_json() const;
  static HeadHyper from_json(const nlohmann::json& j);
};

struct EncoderConfig {
  std::string type = "toy";
  std::size_t dim = kDefaultEmbeddingDim;
};

struct LinearParams {
  std::vector<double> weights;
  double bias = 0.0;
};

/// Full-batch gradient descent from zero on a linear model.
///   DA:  (1/2n) Σ (w·v + b - y)² + (λ/2)|w|²
///   CED: (1/n)  Σ BCE(σ(w·v + b), y) + (λ/2)|w|²
/// `loss_history`, when given, receives the loss before each epoch's update.
LinearParams train_linear(std::span<const std::vector<double>> inputs, std::span<const double> targets, Task task,
                          const HeadHyper& hyper, std::vector<double>* loss_history = nullptr);

struct HeadModel {
  Task task = Task::DA;
  std::vector<double> weights;  // embedding dim + 21 feature weights
  double bias = 0.0;
  EncoderConfig encoder;
  NormalizationStats norm_stats;
  HeadHyper hyper;

  /// w·v + b for a fully assembled input vector.
  double linear_output(std::span<const double> input) const;

  nlohmann::json to_json() const;
  static HeadModel from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  static HeadModel load(const std::filesystem::path& path);
};

/// [embedding ; normalized features]
std::vector<double> head_input(const Embedding& embedding, const UncertaintyFeatureVector& features,
                               const NormalizationStats& stats);

using FeatureIndexById = std::unordered_map<std::string, UncertaintyFeatureVector>;

FeatureIndexById index_features(std::span<const FeatureRow> rows);

HeadModel train_head(const Dataset& train, const FeatureIndexById& features, const HeadHyper& hyper,
                     const Encoder& encoder, std::vector<double>* loss_history = nullptr);

/// DA score, or P(ERR) for CED.
double predict(const HeadModel& model, const QESample& sample, const UncertaintyFeatureVector& features,
               const Encoder& encoder);

/// Uses the toy encoder recorded in the model.
double predict(const HeadModel& model, const QESample& sample, const UncertaintyFeatureVector& features);

double sigmoid(double z);

inline CedLabel decide(double p_err) { return p_err >= kDecisionThreshold ? CedLabel::ERR : CedLabel::NOT; }

}  // namespace qemind
