#include "qemind/head.hpp"

#include <cmath>
#include <sstream>

#include "qemind/io.hpp"
#include "qemind/random.hpp"

namespace qemind {

Embedding toy_encode(const TokenSeq& src, const TokenSeq& mt, std::size_t dim) {
  if (dim < 8) throw Error("toy_encode: dimension must be >= 8");
  Embedding e(dim, 0.0);
  auto add = [&](std::string_view tok) {
    const std::uint64_t h = fnv1a64(tok);
    e[h % dim] += (h >> 63) ? -1.0 : 1.0;
  };
  for (const auto& t : src) add(t);
  add("<sep>");
  for (const auto& t : mt) add(t);
  double norm = 0.0;
  for (double x : e) norm += x * x;
  if (norm > 0.0) {
    norm = std::sqrt(norm);
    for (double& x : e) x /= norm;
  }
  return e;
}

ToyEncoder::ToyEncoder(std::size_t dim) : dim_(dim) {
  if (dim_ < 8) throw Error("toy encoder dimension must be >= 8");
}

Embedding ToyEncoder::encode(const QESample& s) const { return toy_encode(s.src, s.mt, dim_); }

TableEncoder::TableEncoder(std::unordered_map<std::string, Embedding> table) : table_(std::move(table)) {
  if (table_.empty()) throw Error("embedding table is empty");
  dim_ = table_.begin()->second.size();
  for (const auto& [id, e] : table_) {
    if (e.size() != dim_) throw Error("embedding for " + id + " has inconsistent dimension");
  }
}

TableEncoder TableEncoder::load_tsv(const std::filesystem::path& path) {
  std::istringstream in(io::read_file(path));
  std::unordered_map<std::string, Embedding> table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = io::split(line, '\t');
    if (line_no == 1 && fields[0] == "id") continue;
    if (fields.size() < 2) throw Error(path.string() + ": line " + std::to_string(line_no) + ": no values");
    Embedding e(fields.size() - 1);
    for (std::size_t k = 1; k < fields.size(); ++k) {
      if (!io::parse_double(fields[k], e[k - 1])) {
        throw Error(path.string() + ": line " + std::to_string(line_no) + ": bad float");
      }
    }
    if (!table.emplace(std::string(fields[0]), std::move(e)).second) {
      throw Error(path.string() + ": line " + std::to_string(line_no) + ": duplicate id");
    }
  }
  return TableEncoder(std::move(table));
}

Embedding TableEncoder::encode(const QESample& s) const {
  const auto it = table_.find(s.id);
  if (it == table_.end()) throw Error("no external embedding for sample " + s.id);
  return it->second;
}

nlohmann::json HeadHyper::to_json() const {
  return {{"learning_rate", learning_rate}, {"epochs", epochs}, {"l2_reg", l2_reg}};
}

HeadHyper HeadHyper::from_json(const nlohmann::json& j) {
  HeadHyper h;
  h.learning_rate = j.value("learning_rate", h.learning_rate);
  h.epochs = j.value("epochs", h.epochs);
  h.l2_reg = j.value("l2_reg", h.l2_reg);
  if (!(h.learning_rate > 0.0)) throw Error("learning_rate must be positive");
  if (h.epochs < 0) throw Error("epochs must be non-negative");
  if (!(h.l2_reg >= 0.0)) throw Error("l2_reg must be non-negative");
  return h;
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

namespace {

double dot(std::span<const double> w, std::span<const double> v) {
  double acc = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k) acc += w[k] * v[k];
  return acc;
}

// Binary cross-entropy from the logit, stable for large |z|.
double bce_from_logit(double z, double y) { return std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z))); }

}  // namespace

LinearParams train_linear(std::span<const std::vector<double>> inputs, std::span<const double> targets, Task task,
                          const HeadHyper& hyper, std::vector<double>* loss_history) {
  if (inputs.empty()) throw Error("train_linear: no training rows");
  if (inputs.size() != targets.size()) throw Error("train_linear: inputs and targets differ in length");
  const std::size_t dim = inputs.front().size();
  for (const auto& v : inputs) {
    if (v.size() != dim) throw Error("train_linear: ragged input matrix");
  }
  const double n = static_cast<double>(inputs.size());

  LinearParams p{std::vector<double>(dim, 0.0), 0.0};
  std::vector<double> grad(dim);
  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    std::fill(grad.begin(), grad.end(), 0.0);
    double grad_b = 0.0;
    double loss = 0.0;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      const double z = dot(p.weights, inputs[i]) + p.bias;
      double residual = 0.0;
      if (task == Task::DA) {
        residual = z - targets[i];
        loss += 0.5 * residual * residual;
      } else {
        residual = sigmoid(z) - targets[i];
        loss += bce_from_logit(z, targets[i]);
      }
      for (std::size_t k = 0; k < dim; ++k) grad[k] += residual * inputs[i][k];
      grad_b += residual;
    }
    loss = loss / n + 0.5 * hyper.l2_reg * dot(p.weights, p.weights);
    if (!std::isfinite(loss)) throw Error("training diverged: non-finite loss at epoch " + std::to_string(epoch));
    if (loss_history) loss_history->push_back(loss);
    for (std::size_t k = 0; k < dim; ++k) {
      p.weights[k] -= hyper.learning_rate * (grad[k] / n + hyper.l2_reg * p.weights[k]);
    }
    p.bias -= hyper.learning_rate * grad_b / n;
  }
  return p;
}

double HeadModel::linear_output(std::span<const double> input) const {
  if (input.size() != weights.size()) {
    throw Error("input dimension " + std::to_string(input.size()) + " does not match model dimension " +
                std::to_string(weights.size()));
  }
  return dot(weights, input) + bias;
}

nlohmann::json HeadModel::to_json() const {
  return {
      {"task", to_string(task)},
      {"weights", weights},
      {"bias", bias},
      {"encoder", {{"type", encoder.type}, {"dim", encoder.dim}}},
      {"norm_stats", norm_stats.to_json()},
      {"hyper", hyper.to_json()},
  };
}

HeadModel HeadModel::from_json(const nlohmann::json& j) {
  HeadModel m;
  try {
    m.task = parse_task(j.at("task").get<std::string>());
    m.weights = j.at("weights").get<std::vector<double>>();
    m.bias = j.at("bias").get<double>();
    m.encoder.type = j.at("encoder").at("type").get<std::string>();
    m.encoder.dim = j.at("encoder").at("dim").get<std::size_t>();
    m.norm_stats = NormalizationStats::from_json(j.at("norm_stats"));
    m.hyper = HeadHyper::from_json(j.at("hyper"));
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("invalid head model JSON: ") + e.what());
  }
  if (m.weights.size() != m.encoder.dim + kNumFeatures) throw Error("head model weight length mismatch");
  for (double w : m.weights) {
    if (!std::isfinite(w)) throw Error("head model has non-finite weights");
  }
  return m;
}

void HeadModel::save(const std::filesystem::path& path) const { io::write_file_atomic(path, to_json().dump(1)); }

HeadModel HeadModel::load(const std::filesystem::path& path) {
  try {
    return from_json(nlohmann::json::parse(io::read_file(path)));
  } catch (const nlohmann::json::exception& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

std::vector<double> head_input(const Embedding& embedding, const UncertaintyFeatureVector& features,
                               const NormalizationStats& stats) {
  std::vector<double> v(embedding);
  const auto norm = apply_normalizer(features, stats);
  v.insert(v.end(), norm.begin(), norm.end());
  return v;
}

FeatureIndexById index_features(std::span<const FeatureRow> rows) {
  FeatureIndexById index;
  for (const auto& r : rows) {
    if (!index.emplace(r.id, r.features).second) throw Error("duplicate feature row for id " + r.id);
  }
  return index;
}

HeadModel train_head(const Dataset& train, const FeatureIndexById& features, const HeadHyper& hyper,
                     const Encoder& encoder, std::vector<double>* loss_history) {
  if (train.samples.empty()) throw Error("train_head: empty training set");

  std::vector<UncertaintyFeatureVector> rows;
  std::vector<std::string> missing;
  for (const auto& s : train.samples) {
    const auto it = features.find(s.id);
    if (it == features.end()) {
      missing.push_back(s.id);
    } else {
      rows.push_back(it->second);
    }
  }
  if (!missing.empty()) {
    std::string msg = "features missing for " + std::to_string(missing.size()) + " training ids:";
    for (std::size_t i = 0; i < std::min<std::size_t>(missing.size(), 10); ++i) msg += " " + missing[i];
    throw Error(msg);
  }

  std::vector<double> targets;
  bool has_err = false, has_not = false;
  for (const auto& s : train.samples) {
    if (train.task == Task::DA) {
      targets.push_back(std::get<double>(s.label));
    } else {
      const bool err = std::get<CedLabel>(s.label) == CedLabel::ERR;
      (err ? has_err : has_not) = true;
      targets.push_back(err ? 1.0 : 0.0);
    }
  }
  if (train.task == Task::CED && !(has_err && has_not)) throw Error("train_head: CED training needs both classes");

  HeadModel model;
  model.task = train.task;
  model.encoder = {encoder.type(), encoder.dim()};
  model.hyper = hyper;
  model.norm_stats = rows.size() >= 2 ? fit_normalizer(rows) : NormalizationStats{rows.front().values, {}};

  std::vector<std::vector<double>> inputs;
  inputs.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto e = encoder.encode(train.samples[i]);
    if (e.size() != encoder.dim()) throw Error("encoder returned wrong dimension for " + train.samples[i].id);
    inputs.push_back(head_input(e, rows[i], model.norm_stats));
  }
  auto params = train_linear(inputs, targets, train.task, hyper, loss_history);
  model.weights = std::move(params.weights);
  model.bias = params.bias;
  return model;
}

double predict(const HeadModel& model, const QESample& sample, const UncertaintyFeatureVector& features,
               const Encoder& encoder) {
  if (encoder.dim() != model.encoder.dim) throw Error("encoder dimension does not match the model");
  const auto v = head_input(encoder.encode(sample), features, model.norm_stats);
  const double z = model.linear_output(v);
  return model.task == Task::DA ? z : sigmoid(z);
}

double predict(const HeadModel& model, const QESample& sample, const UncertaintyFeatureVector& features) {
  if (model.encoder.type != "toy") throw Error("model uses an external encoder; supply its embeddings");
  return predict(model, sample, features, ToyEncoder(model.encoder.dim));
}

}  // namespace qemind
