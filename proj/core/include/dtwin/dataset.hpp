#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "dtwin/lumped_model.hpp"

namespace dtwin {

/// Recipe for one stochastic dataset. Defaults reproduce the reference case:
/// six classes at 20% damage, 300 samples each, 1e4 N at dof 6 around
/// 3800 Hz, +-5% bounds, 1e-6 m amplitude noise, all six sensors.
struct GenerationConfig {
  std::vector<DamageScenario> scenarios = default_scenarios(0.20);
  std::size_t samples_per_scenario = 300;
  HarmonicLoad excitation{6, 1.0e4};
  double excitation_frequency_hz = 3800.0;
  UncertaintyConfig uncertainty{};
  bool damage_fluctuation = true;
  bool frequency_fluctuation = true;
  /// Half-width of the damage and frequency fluctuation bands, relative.
  double fluctuation_fraction = 0.05;
  double noise_sigma = 1.0e-6;
  std::vector<std::size_t> sensor_dofs{1, 2, 3, 4, 5, 6};
  LumpedParameters model{};
  std::uint64_t master_seed = 1;

  static std::vector<DamageScenario> default_scenarios(double severity);

  void validate() const;
  [[nodiscard]] std::vector<std::string> labels() const;
};

void to_json(nlohmann::json& j, const GenerationConfig& config);
/// Missing keys keep their defaults; unknown keys are rejected.
void from_json(const nlohmann::json& j, GenerationConfig& config);

/// Stable hex digest of the canonical JSON form of a config.
std::string config_digest(const GenerationConfig& config);

/// Rows are samples, columns are sensor displacement magnitudes (m).
struct Dataset {
  Eigen::MatrixXd features;
  std::vector<std::string> labels;
  std::vector<std::string> feature_names;
  std::optional<GenerationConfig> config;

  [[nodiscard]] std::size_t rows() const { return labels.size(); }
  [[nodiscard]] std::size_t feature_count() const {
    return static_cast<std::size_t>(features.cols());
  }
  /// Distinct labels in order of first appearance.
  [[nodiscard]] std::vector<std::string> distinct_labels() const;
  [[nodiscard]] Dataset subset(const std::vector<std::size_t>& rows) const;
};

struct NormalizationStats {
  Eigen::VectorXd mean;
  Eigen::VectorXd stddev;
};

std::vector<std::string> sensor_feature_names(const std::vector<std::size_t>& dofs);

/// Samples are independent and keyed by (scenario, sample index), so the
/// result is the same for any thread count. threads = 0 picks the hardware
/// concurrency.
Dataset generate(const GenerationConfig& config, std::size_t threads = 0);

NormalizationStats fit_normalization(const Eigen::MatrixXd& features);
NormalizationStats fit_normalization(const Dataset& train);
Eigen::MatrixXd apply_normalization(const NormalizationStats& stats, const Eigen::MatrixXd& x);
Dataset apply_normalization(const NormalizationStats& stats, const Dataset& data);
Eigen::MatrixXd invert_normalization(const NormalizationStats& stats, const Eigen::MatrixXd& z);

struct SplitResult {
  Dataset train;
  Dataset validation;
};

/// Stratified: each label contributes floor(fraction * n_label) rows to
/// train (at least one row to each side).
SplitResult split(const Dataset& data, double train_fraction, std::uint64_t seed);

/// CSV with a sensor_<dof>,...,label header plus a <path>.meta.json sidecar.
void save(const Dataset& data, const std::filesystem::path& path);
Dataset load(const std::filesystem::path& path);

std::filesystem::path sidecar_path(const std::filesystem::path& csv_path);

}  // namespace dtwin
