#pragma once

// Scripted accuracy studies over the stochastic damage model: the reference
// case, named variations, one-parameter sweeps, excitation-frequency
// generalisation and training-set size.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dtwin/classify.hpp"
#include "dtwin/dataset.hpp"

namespace dtwin {

struct RunRecord {
  std::string parameter;
  std::string value;
  std::string classifier = "qda";
  /// How accuracy was measured: "cv5", "holdout" or "transfer".
  std::string protocol = "cv5";
  bool reference = false;
  std::uint64_t seed = 0;
  std::string config_digest;
  nlohmann::json config;  // full generation config of the training data
  std::optional<nlohmann::json> test_config;
  double accuracy = 0.0;
  std::optional<ConfusionMatrix> confusion;
};

struct SummaryRow {
  std::string parameter;
  std::string value;
  std::string classifier;
  bool reference = false;
  std::size_t runs = 0;
  double accuracy_mean = 0.0;
  /// std / mean over runs; absent for a single run.
  std::optional<double> accuracy_cov;
};

struct ExperimentReport {
  std::string id;
  std::uint64_t master_seed = 0;
  std::vector<RunRecord> records;
  std::vector<SummaryRow> summary;
  nlohmann::json metadata = nlohmann::json::object();

  /// Summary row for (parameter, value, classifier); throws if missing.
  [[nodiscard]] const SummaryRow& row(const std::string& parameter, const std::string& value,
                                      const std::string& classifier = "qda") const;
};

/// Groups records by (parameter, value, classifier) in first-seen order.
std::vector<SummaryRow> summarize(const std::vector<RunRecord>& records);

/// Concatenates the records of several runs of the same experiment (e.g.
/// different master seeds) and recomputes the summary.
ExperimentReport merge_reports(const std::vector<ExperimentReport>& reports);

inline constexpr std::size_t kCvFolds = 5;

GenerationConfig reference_config(std::uint64_t seed);
/// Seed for validation data that shares no substream with training data.
std::uint64_t validation_seed(std::uint64_t seed);

/// One record of QDA 5-fold CV on a generated dataset.
RunRecord cv_record(const GenerationConfig& config, std::string parameter, std::string value,
                    ClassifierKind kind = ClassifierKind::qda);

/// CV for all four classifiers, plus a QDA trained on 200 rows per class and
/// evaluated on 100 fresh rows per class (parameter "holdout").
ExperimentReport run_reference(std::uint64_t seed);

/// Reference case plus damage 10%, sensors {2..6}, noise 2 sigma, bounds
/// +-10%, 7000 Hz excitation and force at dof 1.
ExperimentReport sweep_variations(std::uint64_t seed);

std::vector<double> default_damage_levels();
std::vector<double> default_uncertainty_bounds();
std::vector<double> default_sweep_frequencies();
std::vector<std::vector<std::size_t>> default_sensor_subsets();

ExperimentReport sweep_damage(const std::vector<double>& levels, std::uint64_t seed);
ExperimentReport sweep_uncertainty(const std::vector<double>& bounds, std::uint64_t seed);
ExperimentReport sweep_frequency(const std::vector<double>& frequencies_hz, std::uint64_t seed);
ExperimentReport sweep_sensors(const std::vector<std::vector<std::size_t>>& subsets,
                               std::uint64_t seed);

/// Parameters:
///  "matched"       value f: CV on data generated at f
///  "transfer"      value "ftrain->ftest": QDA trained on the full dataset at
///                  ftrain, evaluated on a fresh dataset at ftest
///  "fixed_transfer" value "ftrain->ftest": training data without frequency
///                  fluctuation, same fluctuating test data
///  "fixed_fixed"   value "ftrain->ftest": neither side fluctuates
ExperimentReport generalization_study(const std::vector<double>& train_freqs,
                                      const std::vector<double>& test_freqs,
                                      std::uint64_t seed);

/// For each total point count: repetitions independent datasets, 2/3 train,
/// 1/3 validation, QDA validation accuracy.
ExperimentReport sample_size_study(const std::vector<std::size_t>& total_points,
                                   std::size_t repetitions, std::uint64_t seed);

nlohmann::json report_to_json(const ExperimentReport& report);
/// Flat summary: experiment,parameter,value,classifier,reference,runs,accuracy_mean,accuracy_cov
std::string report_to_csv(const ExperimentReport& report);
/// Writes <id>_seed<seed>.json and .csv into dir; returns the json path.
std::filesystem::path write_report(const ExperimentReport& report,
                                   const std::filesystem::path& dir);

}  // namespace dtwin
