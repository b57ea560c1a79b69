#include "qemind/features.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "qemind/io.hpp"
#include "qemind/random.hpp"
#include "qemind/similarity.hpp"

namespace qemind {

namespace {

void require_non_empty(std::span<const double> p, const char* what) {
  if (p.empty()) throw Error(std::string(what) + ": empty sequence");
}

void put_stats(NineStats& out, std::size_t offset, const SeriesStats& st) {
  out[offset] = st.mean;
  out[offset + 1] = st.stddev;
  out[offset + 2] = st.combo;
}

}  // namespace

double UncertaintyFeatureVector::get(std::string_view name) const {
  const auto it = std::find(kFeatureNames.begin(), kFeatureNames.end(), name);
  if (it == kFeatureNames.end()) throw Error("unknown feature '" + std::string(name) + "'");
  return values[static_cast<std::size_t>(it - kFeatureNames.begin())];
}

double expectation(std::span<const double> p) {
  require_non_empty(p, "expectation");
  // Summing deviations from p[0] returns a constant sequence's value exactly.
  const double shift = p[0];
  double sum = 0.0;
  for (double v : p) sum += v - shift;
  return shift + sum / static_cast<double>(p.size());
}

double std_dev(std::span<const double> p) {
  require_non_empty(p, "std_dev");
  // E[X²] - E[X]² on values shifted by p[0]; the identity is shift-invariant and
  // the shift makes constant sequences come out as exactly zero.
  const double shift = p[0];
  double s1 = 0.0;
  double s2 = 0.0;
  for (double v : p) {
    const double d = v - shift;
    s1 += d;
    s2 += d * d;
  }
  const double n = static_cast<double>(p.size());
  const double m1 = s1 / n;
  return std::sqrt(std::max(0.0, s2 / n - m1 * m1));
}

double combo(std::span<const double> p) {
  const double sigma = std_dev(p);
  return sigma < kStdGuard ? 0.0 : expectation(p) / sigma;
}

SeriesStats sample_stats(std::span<const double> values) {
  if (values.size() < 2) throw Error("sample_stats: need at least 2 values");
  SeriesStats st;
  st.mean = expectation(values);
  st.stddev = std_dev(values);
  st.combo = st.stddev < kStdGuard ? 0.0 : st.mean / st.stddev;
  return st;
}

void FeatureConfig::validate() const {
  if (n_mc < 2) throw Error("n_mc must be >= 2");
  if (n_noise < 2) throw Error("n_noise must be >= 2");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw Error("dropout_rate must be in [0, 1)");
  noise.validate();
}

nlohmann::json FeatureConfig::to_json() const {
  return {
      {"n_mc", n_mc},
      {"dropout_rate", dropout_rate},
      {"n_noise", n_noise},
      {"noise_rounds", noise.rounds},
      {"p_insert", noise.p_insert},
      {"p_delete", noise.p_delete},
      {"base_seed", base_seed},
  };
}

FeatureConfig FeatureConfig::from_json(const nlohmann::json& j) {
  FeatureConfig cfg;
  try {
    cfg.n_mc = j.value("n_mc", cfg.n_mc);
    cfg.dropout_rate = j.value("dropout_rate", cfg.dropout_rate);
    cfg.n_noise = j.value("n_noise", cfg.n_noise);
    cfg.noise.rounds = j.value("noise_rounds", cfg.noise.rounds);
    cfg.noise.p_insert = j.value("p_insert", cfg.noise.p_insert);
    cfg.noise.p_delete = j.value("p_delete", cfg.noise.p_delete);
    cfg.base_seed = j.value("base_seed", cfg.base_seed);
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("invalid feature config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

FeatureConfig FeatureConfig::load(const std::filesystem::path& path) {
  try {
    return from_json(nlohmann::json::parse(io::read_file(path)));
  } catch (const nlohmann::json::exception& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

NineStats sampled_decode_features(const TokenSeq& mt, std::span<const DecodeSample> samples) {
  const std::size_t n = samples.size();
  std::vector<double> sims(n), inner(n), pstep(n), row(n);
  for (std::size_t i = 0; i < n; ++i) {
    sims[i] = sim(mt, samples[i].tokens);
    // j = i is part of the average.
    for (std::size_t j = 0; j < n; ++j) row[j] = sim(samples[i].tokens, samples[j].tokens);
    inner[i] = expectation(row);
    pstep[i] = expectation(samples[i].step_logprobs);
  }
  NineStats out{};
  put_stats(out, 0, sample_stats(sims));
  put_stats(out, 3, sample_stats(inner));
  put_stats(out, 6, sample_stats(pstep));
  return out;
}

NineStats mc_features(const GlassBoxModel& model, const TokenSeq& src, const TokenSeq& mt, const FeatureConfig& cfg) {
  cfg.validate();
  const auto samples = mc_dropout_samples(model, src, cfg.n_mc, cfg.dropout_rate,
                                          derive_seed(cfg.base_seed, 0, SeedPurpose::McDropout));
  return sampled_decode_features(mt, samples);
}

NineStats noise_features(const GlassBoxModel& model, const UnigramMlm& mlm, const TokenSeq& src, const TokenSeq& mt,
                         const FeatureConfig& cfg) {
  cfg.validate();
  std::vector<DecodeSample> samples;
  samples.reserve(cfg.n_noise);
  for (std::size_t i = 0; i < cfg.n_noise; ++i) {
    const TokenSeq noised = generate_noised_input(src, cfg.noise, mlm, derive_seed(cfg.base_seed, i, SeedPurpose::Noise));
    DecodeSample out = model.greedy_translate(noised, DropoutSpec::off());
    // P_step of the noised decode, conditioned on the noised source.
    out.step_logprobs = model.force_decode(noised, out.tokens, DropoutSpec::off());
    samples.push_back(std::move(out));
  }
  return sampled_decode_features(mt, samples);
}

std::uint64_t sample_seed(std::uint64_t base_seed, std::string_view id) {
  return derive_seed(base_seed, fnv1a64(id), SeedPurpose::Sample);
}

UncertaintyFeatureVector extract_features(const QESample& sample, const GlassBoxModel& model, const UnigramMlm& mlm,
                                          const FeatureConfig& cfg) {
  if (sample.src.empty()) throw Error("sample " + sample.id + ": empty source");
  if (sample.mt.empty()) throw Error("sample " + sample.id + ": empty translation");

  FeatureConfig local = cfg;
  local.base_seed = sample_seed(cfg.base_seed, sample.id);

  UncertaintyFeatureVector v;
  const auto dp = model.force_decode(sample.src, sample.mt, DropoutSpec::off());
  v[0] = expectation(dp);
  v[1] = std_dev(dp);
  v[2] = combo(dp);
  const auto mc = mc_features(model, sample.src, sample.mt, local);
  std::copy(mc.begin(), mc.end(), v.values.begin() + kMcBegin);
  const auto noise = noise_features(model, mlm, sample.src, sample.mt, local);
  std::copy(noise.begin(), noise.end(), v.values.begin() + kNoiseBegin);
  return v;
}

std::vector<FeatureRow> extract_dataset(const Dataset& dataset, const GlassBoxModel& model, const UnigramMlm& mlm,
                                        const FeatureConfig& cfg, std::size_t workers) {
  cfg.validate();
  const std::size_t n = dataset.samples.size();
  std::vector<FeatureRow> rows(n);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;

  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        const auto& s = dataset.samples[i];
        rows[i] = {s.id, extract_features(s, model, mlm, cfg)};
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
        next = n;
      }
    }
  };

  workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(n, 1));
  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  if (failure) std::rethrow_exception(failure);
  return rows;
}

void write_feature_tsv(std::span<const FeatureRow> rows, std::ostream& out) {
  out << "id";
  for (auto name : kFeatureNames) out << '\t' << name;
  out << '\n';
  for (const auto& row : rows) {
    out << row.id;
    for (double v : row.features.values) out << '\t' << io::format_g17(v);
    out << '\n';
  }
}

std::vector<FeatureRow> read_feature_tsv(const std::filesystem::path& path) {
  std::istringstream in(io::read_file(path));
  std::string line;
  if (!std::getline(in, line)) throw Error(path.string() + ": empty feature file");
  const auto header = io::split(line, '\t');
  if (header.size() != kNumFeatures + 1 || header[0] != "id" ||
      !std::equal(kFeatureNames.begin(), kFeatureNames.end(), header.begin() + 1)) {
    throw Error(path.string() + ": unexpected feature header");
  }
  std::vector<FeatureRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = io::split(line, '\t');
    if (fields.size() != kNumFeatures + 1) {
      throw Error(path.string() + ": line " + std::to_string(line_no) + ": expected " +
                  std::to_string(kNumFeatures + 1) + " fields");
    }
    FeatureRow row;
    row.id = std::string(fields[0]);
    for (std::size_t k = 0; k < kNumFeatures; ++k) {
      if (!io::parse_double(fields[k + 1], row.features[k]) || !std::isfinite(row.features[k])) {
        throw Error(path.string() + ": line " + std::to_string(line_no) + ": bad value for " +
                    std::string(kFeatureNames[k]));
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

NormalizationStats fit_normalizer(std::span<const UncertaintyFeatureVector> rows) {
  if (rows.size() < 2) throw Error("fit_normalizer: need at least 2 rows");
  const double n = static_cast<double>(rows.size());
  NormalizationStats st;
  for (std::size_t k = 0; k < kNumFeatures; ++k) {
    double sum = 0.0;
    for (const auto& r : rows) sum += r[k];
    const double mean = sum / n;
    double sq = 0.0;
    for (const auto& r : rows) sq += (r[k] - mean) * (r[k] - mean);
    st.mean[k] = mean;
    st.stddev[k] = std::sqrt(sq / n);
  }
  return st;
}

FeatureArray apply_normalizer(const UncertaintyFeatureVector& v, const NormalizationStats& st) {
  FeatureArray out{};
  for (std::size_t k = 0; k < kNumFeatures; ++k) {
    out[k] = st.stddev[k] < kStdGuard ? 0.0 : (v[k] - st.mean[k]) / st.stddev[k];
  }
  return out;
}

nlohmann::json NormalizationStats::to_json() const { return {{"mean", mean}, {"std", stddev}}; }

NormalizationStats NormalizationStats::from_json(const nlohmann::json& j) {
  NormalizationStats st;
  const auto means = j.at("mean").get<std::vector<double>>();
  const auto stds = j.at("std").get<std::vector<double>>();
  if (means.size() != kNumFeatures || stds.size() != kNumFeatures) {
    throw Error("norm_stats must have exactly " + std::to_string(kNumFeatures) + " entries");
  }
  std::copy(means.begin(), means.end(), st.mean.begin());
  std::copy(stds.begin(), stds.end(), st.stddev.begin());
  for (double s : st.stddev) {
    if (!(s >= 0.0)) throw Error("norm_stats std must be non-negative");
  }
  return st;
}

}  // namespace qemind
