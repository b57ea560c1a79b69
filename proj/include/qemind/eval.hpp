#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "qemind/core.hpp"

namespace qemind {

/// Sample Pearson correlation. Throws on length mismatch, n < 2, or a constant series.
double pearson(std::span<const double> preds, std::span<const double> golds);

struct Confusion {
  std::size_t tp = 0, tn = 0, fp = 0, fn = 0;
};

/// ERR is the positive class.
Confusion confusion(std::span<const CedLabel> preds, std::span<const CedLabel> golds);

/// Matthews correlation; 0 when any marginal is empty.
double mcc(const Confusion& c);
double mcc(std::span<const CedLabel> preds, std::span<const CedLabel> golds);

/// sample id -> DA score or P(ERR)
using ScoreMap = std::unordered_map<std::string, double>;

ScoreMap load_predictions(const std::filesystem::path& path);
void save_predictions(std::span<const std::pair<std::string, double>> rows, const std::filesystem::path& path);

struct EvalReport {
  std::string metric;
  double value = 0.0;
  std::size_t count = 0;
  std::map<std::string, double> by_pair;
  std::map<std::string, std::size_t> count_by_pair;

  nlohmann::json to_json() const;
  std::string to_text(bool by_pair) const;
};

/// Pearson for DA, MCC at threshold 0.5 for CED; overall plus per language pair.
EvalReport evaluate(const ScoreMap& preds, const Dataset& gold);

/// Overall metric only.
double dev_metric(const ScoreMap& preds, const Dataset& gold);

}  // namespace qemind
