#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "qemind/core.hpp"
#include "qemind/glassbox.hpp"

namespace qemind {

inline constexpr std::size_t kNumFeatures = 21;

/// Canonical feature order; also the column order of the feature TSV.
inline constexpr std::array<std::string_view, kNumFeatures> kFeatureNames = {
    "dp_mean",
    "dp_std",
    "dp_combo",
    "mc_sim_mean",
    "mc_sim_std",
    "mc_sim_combo",
    "mc_sim_inner_mean",
    "mc_sim_inner_std",
    "mc_sim_inner_combo",
    "mc_pstep_mean",
    "mc_pstep_std",
    "mc_pstep_combo",
    "noise_sim_mean",
    "noise_sim_std",
    "noise_sim_combo",
    "noise_sim_inner_mean",
    "noise_sim_inner_std",
    "noise_sim_inner_combo",
    "noise_pstep_mean",
    "noise_pstep_std",
    "noise_pstep_combo",
};

inline constexpr std::size_t kMcBegin = 3;
inline constexpr std::size_t kNoiseBegin = 12;

using FeatureArray = std::array<double, kNumFeatures>;

struct UncertaintyFeatureVector {
  FeatureArray values{};

  double operator[](std::size_t i) const { return values[i]; }
  double& operator[](std::size_t i) { return values[i]; }
  double get(std::string_view name) const;

  bool operator==(const UncertaintyFeatureVector&) const = default;
};

/// mean, population std, and mean/std (0 when std < 1e-9).
struct SeriesStats {
  double mean = 0.0;
  double stddev = 0.0;
  double combo = 0.0;
};

inline constexpr double kStdGuard = 1e-9;

double expectation(std::span<const double> p);
double std_dev(std::span<const double> p);
double combo(std::span<const double> p);
SeriesStats sample_stats(std::span<const double> values);

struct FeatureConfig {
  std::size_t n_mc = 8;
  double dropout_rate = 0.3;
  std::size_t n_noise = 8;
  NoiseConfig noise;
  std::uint64_t base_seed = 0;

  void validate() const;
  nlohmann::json to_json() const;
  static FeatureConfig from_json(const nlohmann::json& j);
  static FeatureConfig load(const std::filesystem::path& path);
};

/// Nine values in order: sim, sim_inner, pstep, each as (mean, std, combo).
using NineStats = std::array<double, 9>;

/// Statistics of the three per-sample series over a set of sampled decodes.
NineStats sampled_decode_features(const TokenSeq& mt, std::span<const DecodeSample> samples);

/// MC-dropout features; the dropout samples derive from cfg.base_seed.
NineStats mc_features(const GlassBoxModel& model, const TokenSeq& src, const TokenSeq& mt, const FeatureConfig& cfg);

/// Noised-input features. Noise sample i uses seed derive_seed(cfg.base_seed, i, Noise).
NineStats noise_features(const GlassBoxModel& model, const UnigramMlm& mlm, const TokenSeq& src, const TokenSeq& mt,
                         const FeatureConfig& cfg);

/// Seed used for every random draw belonging to one sample, from (base_seed, id).
std::uint64_t sample_seed(std::uint64_t base_seed, std::string_view id);

UncertaintyFeatureVector extract_features(const QESample& sample, const GlassBoxModel& model, const UnigramMlm& mlm,
                                          const FeatureConfig& cfg);

struct FeatureRow {
  std::string id;
  UncertaintyFeatureVector features;
};

/// Extracts all samples on `workers` threads; output order follows the dataset.
std::vector<FeatureRow> extract_dataset(const Dataset& dataset, const GlassBoxModel& model, const UnigramMlm& mlm,
                                        const FeatureConfig& cfg, std::size_t workers = 1);

void write_feature_tsv(std::span<const FeatureRow> rows, std::ostream& out);
std::vector<FeatureRow> read_feature_tsv(const std::filesystem::path& path);

struct NormalizationStats {
  FeatureArray mean{};
  FeatureArray stddev{};

  nlohmann::json to_json() const;
  static NormalizationStats from_json(const nlohmann::json& j);
};

NormalizationStats fit_normalizer(std::span<const UncertaintyFeatureVector> rows);
FeatureArray apply_normalizer(const UncertaintyFeatureVector& v, const NormalizationStats& stats);

}  // namespace qemind
