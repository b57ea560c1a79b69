#include "qemind/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <vector>

#include "qemind/head.hpp"
#include "qemind/io.hpp"

namespace qemind {

double pearson(std::span<const double> preds, std::span<const double> golds) {
  if (preds.size() != golds.size()) throw Error("pearson: length mismatch");
  if (preds.size() < 2) throw Error("pearson: need at least 2 points");
  const double n = static_cast<double>(preds.size());
  double mp = 0.0, mg = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    mp += preds[i];
    mg += golds[i];
  }
  mp /= n;
  mg /= n;
  double spg = 0.0, spp = 0.0, sgg = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const double dp = preds[i] - mp;
    const double dg = golds[i] - mg;
    spg += dp * dg;
    spp += dp * dp;
    sgg += dg * dg;
  }
  if (spp == 0.0 || sgg == 0.0) throw Error("undefined correlation: constant series");
  return std::clamp(spg / std::sqrt(spp * sgg), -1.0, 1.0);
}

Confusion confusion(std::span<const CedLabel> preds, std::span<const CedLabel> golds) {
  if (preds.size() != golds.size()) throw Error("mcc: length mismatch");
  Confusion c;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const bool p = preds[i] == CedLabel::ERR;
    const bool g = golds[i] == CedLabel::ERR;
    if (p && g) ++c.tp;
    else if (!p && !g) ++c.tn;
    else if (p) ++c.fp;
    else ++c.fn;
  }
  return c;
}

double mcc(const Confusion& c) {
  const double tp = static_cast<double>(c.tp), tn = static_cast<double>(c.tn);
  const double fp = static_cast<double>(c.fp), fn = static_cast<double>(c.fn);
  const double denom = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
  if (denom == 0.0) return 0.0;
  return (tp * tn - fp * fn) / std::sqrt(denom);
}

double mcc(std::span<const CedLabel> preds, std::span<const CedLabel> golds) {
  if (preds.empty()) throw Error("mcc: empty input");
  return mcc(confusion(preds, golds));
}

ScoreMap load_predictions(const std::filesystem::path& path) {
  std::istringstream in(io::read_file(path));
  ScoreMap scores;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = io::split(line, '\t');
    if (line_no == 1 && fields.size() == 2 && fields[0] == "id" && fields[1] == "score") continue;
    double v = 0.0;
    if (fields.size() != 2 || !io::parse_double(fields[1], v) || !std::isfinite(v)) {
      throw Error(path.string() + ": line " + std::to_string(line_no) + ": expected 'id<TAB>score'");
    }
    if (!scores.emplace(std::string(fields[0]), v).second) {
      throw Error(path.string() + ": line " + std::to_string(line_no) + ": duplicate id");
    }
  }
  return scores;
}

void save_predictions(std::span<const std::pair<std::string, double>> rows, const std::filesystem::path& path) {
  std::string out = "id\tscore\n";
  for (const auto& [id, score] : rows) out += id + "\t" + io::format_g17(score) + "\n";
  io::write_file_atomic(path, out);
}

namespace {

struct Series {
  std::vector<double> preds, golds;
  std::vector<CedLabel> pred_labels, gold_labels;
};

double series_metric(Task task, const Series& s) {
  return task == Task::DA ? pearson(s.preds, s.golds) : mcc(s.pred_labels, s.gold_labels);
}

void collect(const ScoreMap& preds, const Dataset& gold, Series& all, std::map<std::string, Series>* by_pair) {
  std::vector<std::string> missing;
  for (const auto& s : gold.samples) {
    const auto it = preds.find(s.id);
    if (it == preds.end()) {
      missing.push_back(s.id);
      continue;
    }
    auto add = [&](Series& dst) {
      if (gold.task == Task::DA) {
        dst.preds.push_back(it->second);
        dst.golds.push_back(std::get<double>(s.label));
      } else {
        dst.pred_labels.push_back(decide(it->second));
        dst.gold_labels.push_back(std::get<CedLabel>(s.label));
      }
    };
    add(all);
    if (by_pair) add((*by_pair)[s.lang_pair]);
  }
  if (!missing.empty()) {
    std::string msg = "predictions missing for " + std::to_string(missing.size()) + " ids:";
    for (std::size_t i = 0; i < std::min<std::size_t>(missing.size(), 20); ++i) msg += " " + missing[i];
    throw Error(msg);
  }
}

}  // namespace

EvalReport evaluate(const ScoreMap& preds, const Dataset& gold) {
  Series all;
  std::map<std::string, Series> pairs;
  collect(preds, gold, all, &pairs);
  EvalReport r;
  r.metric = gold.task == Task::DA ? "pearson" : "mcc";
  r.count = gold.samples.size();
  r.value = series_metric(gold.task, all);
  for (const auto& [lp, series] : pairs) {
    r.by_pair[lp] = series_metric(gold.task, series);
    r.count_by_pair[lp] = gold.task == Task::DA ? series.preds.size() : series.pred_labels.size();
  }
  return r;
}

double dev_metric(const ScoreMap& preds, const Dataset& gold) {
  Series all;
  collect(preds, gold, all, nullptr);
  return series_metric(gold.task, all);
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json pairs = nlohmann::json::object();
  for (const auto& [lp, v] : by_pair) pairs[lp] = {{"value", v}, {"count", count_by_pair.at(lp)}};
  return {{"metric", metric}, {"value", value}, {"count", count}, {"by_pair", pairs}};
}

std::string EvalReport::to_text(bool with_pairs) const {
  char buf[128];
  std::string out;
  std::snprintf(buf, sizeof buf, "%s %.6f  n=%zu\n", metric.c_str(), value, count);
  out += buf;
  if (with_pairs) {
    for (const auto& [lp, v] : by_pair) {
      std::snprintf(buf, sizeof buf, "  %-6s %9.6f  n=%zu\n", lp.c_str(), v, count_by_pair.at(lp));
      out += buf;
    }
  }
  return out;
}

}  // namespace qemind
