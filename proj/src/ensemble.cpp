#include "qemind/ensemble.hpp"

#include <algorithm>
#include <numeric>

namespace qemind {

PredictionSet average_predictions(std::span<const PredictionSet> members, std::string model_id) {
  if (members.empty()) throw Error("average_predictions: no members");
  const auto& first = members.front();
  for (const auto& m : members.subspan(1)) {
    std::vector<std::string> diff;
    for (const auto& [id, _] : first.scores) {
      if (!m.scores.contains(id)) diff.push_back("-" + id);
    }
    for (const auto& [id, _] : m.scores) {
      if (!first.scores.contains(id)) diff.push_back("+" + id);
    }
    if (!diff.empty()) {
      std::sort(diff.begin(), diff.end());
      std::string msg = "id sets of " + first.model_id + " and " + m.model_id + " differ:";
      for (std::size_t i = 0; i < std::min<std::size_t>(diff.size(), 20); ++i) msg += " " + diff[i];
      throw Error(msg);
    }
  }

  PredictionSet out{std::move(model_id), {}};
  const double k = static_cast<double>(members.size());
  for (const auto& [id, _] : first.scores) {
    double sum = 0.0;
    for (const auto& m : members) sum += m.scores.at(id);
    out.scores.emplace(id, sum / k);
  }
  return out;
}

nlohmann::json EnsembleSelection::to_json() const {
  return {{"task", to_string(task)}, {"max_steps", max_steps}, {"members", members}, {"trajectory", trajectory}};
}

namespace {

double scored(const PredictionSet& p, const Dataset& dev) {
  try {
    return dev_metric(p.scores, dev);
  } catch (const Error& e) {
    throw Error("model " + p.model_id + ": " + e.what());
  }
}

}  // namespace

EnsembleSelection greedy_select(std::span<const PredictionSet> candidates, const Dataset& dev, std::size_t max_steps) {
  if (candidates.empty()) throw Error("greedy_select: no candidates");
  if (max_steps < 1) throw Error("greedy_select: max_steps must be >= 1");

  std::vector<double> single(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) single[i] = scored(candidates[i], dev);

  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (single[a] != single[b]) return single[a] > single[b];
    return candidates[a].model_id < candidates[b].model_id;
  });

  EnsembleSelection sel;
  sel.task = dev.task;
  sel.max_steps = max_steps;
  std::vector<PredictionSet> accepted{candidates[order.front()]};
  sel.members.push_back(candidates[order.front()].model_id);
  sel.trajectory.push_back(single[order.front()]);

  for (std::size_t r = 1; r < order.size() && accepted.size() < max_steps; ++r) {
    accepted.push_back(candidates[order[r]]);
    const double value = scored(average_predictions(accepted), dev);
    if (!(value > sel.trajectory.back())) break;
    sel.members.push_back(candidates[order[r]].model_id);
    sel.trajectory.push_back(value);
  }
  return sel;
}

}  // namespace qemind
