#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "qemind/ensemble.hpp"
#include "qemind/random.hpp"

using namespace qemind;

namespace {

Dataset dev_set(std::size_t n, std::uint64_t seed) {
  SplitMix64 rng(seed);
  Dataset ds{Task::DA, {}};
  for (std::size_t i = 0; i < n; ++i) {
    ds.samples.push_back({"d" + std::to_string(i), i % 2 ? "en-de" : "en-zh", {"s"}, {"t"}, rng.uniform() * 2 - 1});
  }
  return ds;
}

PredictionSet noisy(const std::string& id, const Dataset& dev, double noise, std::uint64_t seed) {
  SplitMix64 rng(seed);
  PredictionSet p{id, {}};
  for (const auto& s : dev.samples) p.scores[s.id] = std::get<double>(s.label) + noise * (rng.uniform() * 2 - 1);
  return p;
}

}  // namespace

TEST_CASE("average_predictions") {
  PredictionSet a{"a", {{"x", 0.2}, {"y", 1.0}}};
  PredictionSet b{"b", {{"x", 0.6}, {"y", 0.0}}};
  const PredictionSet one[] = {a};
  CHECK(average_predictions(one).scores == a.scores);
  const PredictionSet two[] = {a, b};
  CHECK(average_predictions(two).scores.at("x") == doctest::Approx(0.4));
  const PredictionSet same[] = {a, a, a};
  const auto avg = average_predictions(same);
  for (const auto& [id, v] : a.scores) CHECK(avg.scores.at(id) == doctest::Approx(v).epsilon(1e-15));

  PredictionSet c{"c", {{"x", 0.6}, {"z", 0.0}}};
  const PredictionSet bad[] = {a, c};
  CHECK_THROWS_WITH_AS(average_predictions(bad), doctest::Contains("+z"), Error);
  CHECK_THROWS_AS(average_predictions(std::span<const PredictionSet>{}), Error);
}

TEST_CASE("greedy_select on a constructed fixture matches exhaustive prefix evaluation") {
  const auto dev = dev_set(60, 1);
  // Two comparably good models with independent errors, and a much worse third.
  const std::vector<PredictionSet> cands = {noisy("m_bad", dev, 3.0, 30), noisy("m_good1", dev, 0.6, 10),
                                            noisy("m_good2", dev, 0.6, 20)};

  std::vector<double> single;
  for (const auto& c : cands) single.push_back(dev_metric(c.scores, dev));
  std::vector<std::size_t> order = {0, 1, 2};
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return single[a] > single[b]; });
  std::vector<double> prefix;
  for (std::size_t k = 1; k <= 3; ++k) {
    std::vector<PredictionSet> members;
    for (std::size_t i = 0; i < k; ++i) members.push_back(cands[order[i]]);
    prefix.push_back(dev_metric(average_predictions(members).scores, dev));
  }
  // The fixture is built so that the top two help and the third hurts.
  REQUIRE(cands[order[2]].model_id == "m_bad");
  REQUIRE(prefix[1] > prefix[0]);
  REQUIRE(prefix[2] <= prefix[1]);

  const auto sel = greedy_select(cands, dev, 5);
  CHECK(sel.members == std::vector<std::string>{cands[order[0]].model_id, cands[order[1]].model_id});
  CHECK(sel.trajectory == std::vector<double>{prefix[0], prefix[1]});
  CHECK(sel.trajectory.back() >= *std::max_element(single.begin(), single.end()));

  const auto capped = greedy_select(cands, dev, 1);
  CHECK(capped.members == std::vector<std::string>{cands[order[0]].model_id});
  CHECK(capped.trajectory.size() == 1);

  const auto j = sel.to_json();
  CHECK(j["members"].size() == 2);
  CHECK(j["trajectory"].size() == 2);
}

TEST_CASE("greedy_select invariants (property)") {
  SplitMix64 rng(77);
  for (int trial = 0; trial < 100; ++trial) {
    const auto dev = dev_set(30, rng.next());
    std::vector<PredictionSet> cands;
    const std::size_t k = 1 + rng.index(6);
    for (std::size_t i = 0; i < k; ++i) cands.push_back(noisy("m" + std::to_string(i), dev, 0.2 + 2 * rng.uniform(), rng.next()));
    const std::size_t max_steps = 1 + rng.index(5);
    const auto sel = greedy_select(cands, dev, max_steps);
    double best = -2;
    for (const auto& c : cands) best = std::max(best, dev_metric(c.scores, dev));
    CHECK(sel.trajectory.front() == best);
    CHECK(sel.trajectory.back() >= best);
    CHECK(sel.members.size() <= max_steps);
    CHECK(sel.members.size() == sel.trajectory.size());
    for (std::size_t i = 1; i < sel.trajectory.size(); ++i) CHECK(sel.trajectory[i] > sel.trajectory[i - 1]);
    const auto again = greedy_select(cands, dev, max_steps);
    CHECK(again.members == sel.members);
  }
}

TEST_CASE("ties are broken by model id and a single candidate is returned as-is") {
  const auto dev = dev_set(10, 4);
  const auto p = noisy("zeta", dev, 0.3, 9);
  auto q = p;
  q.model_id = "alpha";
  const PredictionSet cands[] = {p, q};
  const auto sel = greedy_select(cands, dev, 3);
  CHECK(sel.members == std::vector<std::string>{"alpha"});

  const PredictionSet one[] = {p};
  const auto s1 = greedy_select(one, dev, 3);
  CHECK(s1.members == std::vector<std::string>{"zeta"});
  CHECK(s1.trajectory.size() == 1);
}

TEST_CASE("degenerate candidates name the model") {
  const auto dev = dev_set(10, 4);
  PredictionSet flat{"flat", {}};
  for (const auto& s : dev.samples) flat.scores[s.id] = 0.5;
  const PredictionSet cands[] = {flat};
  CHECK_THROWS_WITH_AS(greedy_select(cands, dev, 2), doctest::Contains("flat"), Error);
  CHECK_THROWS_AS(greedy_select(cands, dev, 0), Error);
}
