#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "dtwin/dataset.hpp"

namespace dtwin {

enum class ClassifierKind { qda, lda, knn, tree };

std::string_view to_string(ClassifierKind kind);
ClassifierKind parse_classifier_kind(std::string_view name);

/// Per-class Gaussian densities with their own covariances.
struct QdaModel {
  std::vector<std::string> classes;
  Eigen::VectorXd priors;
  std::vector<Eigen::VectorXd> means;
  std::vector<Eigen::MatrixXd> covariances;
  NormalizationStats normalization;
};

/// Gaussian densities sharing one pooled covariance.
struct LdaModel {
  std::vector<std::string> classes;
  Eigen::VectorXd priors;
  std::vector<Eigen::VectorXd> means;
  Eigen::MatrixXd covariance;
  NormalizationStats normalization;
};

/// One nearest neighbour, Euclidean distance in normalised space.
struct KnnModel {
  std::vector<std::string> classes;
  Eigen::MatrixXd points;
  std::vector<std::size_t> point_classes;
  NormalizationStats normalization;
};

struct TreeNode {
  // Leaf when feature is empty.
  std::optional<std::size_t> feature;
  double threshold = 0.0;  // go left when x[feature] <= threshold
  std::size_t left = 0;
  std::size_t right = 0;
  std::vector<std::size_t> class_counts;
};

/// Binary classification tree grown best-first on Gini impurity.
struct TreeModel {
  std::vector<std::string> classes;
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  std::size_t split_count = 0;
  NormalizationStats normalization;
};

inline constexpr std::size_t kMaxTreeSplits = 100;
inline constexpr double kCovarianceRidge = 1.0e-8;
inline constexpr double kMaxCovarianceCondition = 1.0e12;

using Classifier = std::variant<QdaModel, LdaModel, KnnModel, TreeModel>;

struct Prediction {
  std::size_t class_index = 0;
  std::string label;
  Eigen::VectorXd posterior;
};

/// Each fit takes raw (unnormalised) training data, standardises it with
/// statistics of that same data and stores them in the model.
QdaModel fit_qda(const Dataset& train);
LdaModel fit_lda(const Dataset& train);
KnnModel fit_knn(const Dataset& train);
TreeModel fit_tree(const Dataset& train, std::size_t max_splits = kMaxTreeSplits);
Classifier fit(ClassifierKind kind, const Dataset& train);

ClassifierKind kind_of(const Classifier& model);
const std::vector<std::string>& classes_of(const Classifier& model);
const NormalizationStats& normalization_of(const Classifier& model);

/// x holds raw sensor magnitudes; the model applies its own normalisation.
Prediction predict(const QdaModel& model, const Eigen::VectorXd& x);
Prediction predict(const LdaModel& model, const Eigen::VectorXd& x);
Prediction predict(const KnnModel& model, const Eigen::VectorXd& x);
Prediction predict(const TreeModel& model, const Eigen::VectorXd& x);
Prediction predict(const Classifier& model, const Eigen::VectorXd& x);

/// Gaussian log-density via Cholesky. Throws on a non-SPD covariance.
double gaussian_log_density(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                            const Eigen::MatrixXd& covariance);

/// Numerically stable normalisation of log-weights to probabilities.
Eigen::VectorXd softmax(const Eigen::VectorXd& log_weights);

struct ConfusionMatrix {
  std::vector<std::string> classes;
  Eigen::MatrixXi counts;  // rows true, columns predicted

  [[nodiscard]] long total() const { return counts.sum(); }
};

struct Evaluation {
  ConfusionMatrix confusion;
  double accuracy = 0.0;
  std::vector<double> recall;  // per class, NaN if the class has no rows
  /// Share of healthy rows flagged as damaged; absent without a healthy class.
  std::optional<double> false_positive_rate;
  /// Per class: share of its rows predicted healthy (0 for healthy itself).
  std::vector<double> false_negative_rate;
};

Evaluation evaluate(const Classifier& model, const Dataset& validation);

struct CrossValidation {
  double mean_accuracy = 0.0;
  std::vector<double> fold_accuracy;
};

/// Stratified k-fold; every fold refits normalisation on its training part.
CrossValidation cross_validate(const Dataset& data, std::size_t folds, ClassifierKind kind,
                               std::uint64_t seed);

/// Stratified fold assignment (0..folds-1) per row.
std::vector<std::size_t> stratified_folds(const std::vector<std::string>& labels,
                                          std::size_t folds, std::uint64_t seed);

nlohmann::json model_to_json(const Classifier& model);
Classifier model_from_json(const nlohmann::json& j);
void save_model(const Classifier& model, const std::filesystem::path& path,
                const std::string& training_digest = "");
Classifier load_model(const std::filesystem::path& path);

/// Header row and column of labels.
std::string confusion_to_csv(const ConfusionMatrix& confusion);

}  // namespace dtwin
