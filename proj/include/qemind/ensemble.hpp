#pragma once

#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qemind/core.hpp"
#include "qemind/eval.hpp"

namespace qemind {

struct PredictionSet {
  std::string model_id;
  ScoreMap scores;
};

/// Per-id arithmetic mean. All members must cover the same ids.
PredictionSet average_predictions(std::span<const PredictionSet> members, std::string model_id = "ensemble");

struct EnsembleSelection {
  Task task = Task::DA;
  std::size_t max_steps = 1;
  std::vector<std::string> members;
  std::vector<double> trajectory;  // dev metric after each accepted member

  nlohmann::json to_json() const;
};

/// Greedy forward selection. Candidates are ranked by their own dev metric
/// (ties by model id); starting from the best one, the next-ranked candidate
/// is added while the averaged ensemble strictly improves and fewer than
/// `max_steps` members have been accepted.
EnsembleSelection greedy_select(std::span<const PredictionSet> candidates, const Dataset& dev, std::size_t max_steps);

}  // namespace qemind
