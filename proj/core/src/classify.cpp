#include "dtwin/classify.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <limits>
#include <numeric>
#include <queue>
#include <random>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <spdlog/spdlog.h>

#include "dtwin/error.hpp"
#include "dtwin/io.hpp"
#include "dtwin/random.hpp"

namespace dtwin {
namespace {

using nlohmann::json;

struct ClassIndex {
  std::vector<std::string> classes;
  std::vector<std::size_t> row_class;
  std::vector<std::size_t> counts;
};

ClassIndex index_classes(const Dataset& data) {
  ClassIndex idx;
  idx.classes = data.distinct_labels();
  std::map<std::string, std::size_t> lookup;
  for (std::size_t k = 0; k < idx.classes.size(); ++k) lookup[idx.classes[k]] = k;
  idx.counts.assign(idx.classes.size(), 0);
  for (const auto& l : data.labels) {
    const auto k = lookup.at(l);
    idx.row_class.push_back(k);
    ++idx.counts[k];
  }
  return idx;
}

void require_training_rows(const Dataset& train) {
  if (train.rows() == 0) throw InvalidInput("training data is empty");
  if (train.features.rows() != static_cast<Eigen::Index>(train.rows())) {
    throw InvalidInput("feature rows do not match labels");
  }
}

Eigen::VectorXd normalized_input(const NormalizationStats& stats, const Eigen::VectorXd& x) {
  if (x.size() != stats.mean.size()) {
    throw InvalidInput("feature count mismatch: model expects " + std::to_string(stats.mean.size()) +
                       ", got " + std::to_string(x.size()));
  }
  if (!x.allFinite()) throw InvalidInput("non-finite input");
  return (x - stats.mean).cwiseQuotient(stats.stddev);
}

std::size_t argmax_first(const Eigen::VectorXd& v) {
  std::size_t best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (v(i) > v(static_cast<Eigen::Index>(best))) best = static_cast<std::size_t>(i);
  }
  return best;
}

Prediction make_prediction(const std::vector<std::string>& classes, Eigen::VectorXd posterior) {
  Prediction p;
  p.class_index = argmax_first(posterior);
  p.label = classes[p.class_index];
  p.posterior = std::move(posterior);
  return p;
}

/// Adds a trace-scaled ridge when the covariance is not safely SPD.
Eigen::MatrixXd regularize(Eigen::MatrixXd cov, const std::string& who) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (lo <= 0.0 || hi / lo > kMaxCovarianceCondition) {
    const double ridge = kCovarianceRidge * cov.trace() / static_cast<double>(cov.rows());
    spdlog::info("{}: covariance regularized (min eigenvalue {:.3e}, max {:.3e}, ridge {:.3e})",
                 who, lo, hi, ridge);
    cov.diagonal().array() += ridge;
  }
  if (Eigen::LLT<Eigen::MatrixXd>(cov).info() != Eigen::Success) {
    throw NumericalError(who + ": covariance is not positive definite after regularization");
  }
  return cov;
}

struct GaussianFit {
  ClassIndex idx;
  NormalizationStats normalization;
  Eigen::VectorXd priors;
  std::vector<Eigen::VectorXd> means;
  std::vector<Eigen::MatrixXd> scatter;  // sum of centred outer products
};

GaussianFit fit_gaussians(const Dataset& train, std::size_t min_per_class) {
  require_training_rows(train);
  GaussianFit g;
  g.idx = index_classes(train);
  for (std::size_t k = 0; k < g.idx.classes.size(); ++k) {
    if (g.idx.counts[k] < min_per_class) {
      throw InvalidInput("insufficient samples for class " + g.idx.classes[k] + " (" +
                         std::to_string(g.idx.counts[k]) + " < " +
                         std::to_string(min_per_class) + ")");
    }
  }
  g.normalization = fit_normalization(train.features);
  const Eigen::MatrixXd z = apply_normalization(g.normalization, train.features);
  const auto l = z.cols();
  const auto n_classes = g.idx.classes.size();
  g.priors.resize(static_cast<Eigen::Index>(n_classes));
  g.means.assign(n_classes, Eigen::VectorXd::Zero(l));
  g.scatter.assign(n_classes, Eigen::MatrixXd::Zero(l, l));
  for (std::size_t i = 0; i < train.rows(); ++i) {
    g.means[g.idx.row_class[i]] += z.row(static_cast<Eigen::Index>(i)).transpose();
  }
  for (std::size_t k = 0; k < n_classes; ++k) {
    g.means[k] /= static_cast<double>(g.idx.counts[k]);
    g.priors(static_cast<Eigen::Index>(k)) =
        static_cast<double>(g.idx.counts[k]) / static_cast<double>(train.rows());
  }
  for (std::size_t i = 0; i < train.rows(); ++i) {
    const auto k = g.idx.row_class[i];
    const Eigen::VectorXd d = z.row(static_cast<Eigen::Index>(i)).transpose() - g.means[k];
    g.scatter[k] += d * d.transpose();
  }
  return g;
}

// ---- decision tree ---------------------------------------------------------

double gini(const std::vector<std::size_t>& counts, std::size_t n) {
  if (n == 0) return 0.0;
  double s = 0.0;
  for (auto c : counts) {
    const double p = static_cast<double>(c) / static_cast<double>(n);
    s += p * p;
  }
  return 1.0 - s;
}

struct SplitCandidate {
  double decrease = 0.0;
  std::size_t feature = 0;
  double threshold = 0.0;
};

std::optional<SplitCandidate> best_split(const Eigen::MatrixXd& z,
                                         const std::vector<std::size_t>& row_class,
                                         const std::vector<std::size_t>& rows,
                                         std::size_t n_classes) {
  std::vector<std::size_t> total(n_classes, 0);
  for (auto r : rows) ++total[row_class[r]];
  const double parent = static_cast<double>(rows.size()) * gini(total, rows.size());
  if (parent <= 0.0) return std::nullopt;

  std::optional<SplitCandidate> best;
  std::vector<std::size_t> order(rows);
  for (Eigen::Index f = 0; f < z.cols(); ++f) {
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return z(static_cast<Eigen::Index>(a), f) < z(static_cast<Eigen::Index>(b), f);
    });
    std::vector<std::size_t> left(n_classes, 0);
    for (std::size_t i = 0; i + 1 < order.size(); ++i) {
      ++left[row_class[order[i]]];
      const double v = z(static_cast<Eigen::Index>(order[i]), f);
      const double next = z(static_cast<Eigen::Index>(order[i + 1]), f);
      if (!(next > v)) continue;
      std::vector<std::size_t> right(n_classes);
      for (std::size_t k = 0; k < n_classes; ++k) right[k] = total[k] - left[k];
      const std::size_t nl = i + 1;
      const std::size_t nr = order.size() - nl;
      const double child = static_cast<double>(nl) * gini(left, nl) +
                           static_cast<double>(nr) * gini(right, nr);
      const double decrease = parent - child;
      if (!best || decrease > best->decrease + 1.0e-12) {
        best = SplitCandidate{decrease, static_cast<std::size_t>(f), 0.5 * (v + next)};
      }
    }
  }
  if (best && best->decrease <= 1.0e-12) return std::nullopt;
  return best;
}

// ---- json helpers ------------------------------------------------------------

json vector_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd vector_from(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) rows.push_back(vector_json(m.row(r).transpose()));
  return rows;
}

Eigen::MatrixXd matrix_from(const json& j, Eigen::Index expected_cols) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), expected_cols);
  for (std::size_t r = 0; r < j.size(); ++r) {
    const auto row = vector_from(j.at(r));
    if (row.size() != expected_cols) throw InvalidInput("model matrix row has wrong length");
    m.row(static_cast<Eigen::Index>(r)) = row.transpose();
  }
  return m;
}

json normalization_json(const NormalizationStats& s) {
  return {{"mean", vector_json(s.mean)}, {"stddev", vector_json(s.stddev)}};
}

NormalizationStats normalization_from(const json& j) {
  NormalizationStats s{vector_from(j.at("mean")), vector_from(j.at("stddev"))};
  if (s.mean.size() != s.stddev.size() || s.mean.size() == 0 || (s.stddev.array() <= 0).any()) {
    throw InvalidInput("model normalization is malformed");
  }
  return s;
}

}  // namespace

std::string_view to_string(ClassifierKind kind) {
  switch (kind) {
    case ClassifierKind::qda: return "qda";
    case ClassifierKind::lda: return "lda";
    case ClassifierKind::knn: return "knn";
    case ClassifierKind::tree: return "tree";
  }
  return "?";
}

ClassifierKind parse_classifier_kind(std::string_view name) {
  for (auto k : {ClassifierKind::qda, ClassifierKind::lda, ClassifierKind::knn, ClassifierKind::tree}) {
    if (name == to_string(k)) return k;
  }
  throw InvalidInput("unknown classifier '" + std::string(name) + "'");
}

double gaussian_log_density(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                            const Eigen::MatrixXd& covariance) {
  Eigen::LLT<Eigen::MatrixXd> chol(covariance);
  if (chol.info() != Eigen::Success) throw NumericalError("covariance is not positive definite");
  const Eigen::VectorXd w = chol.matrixL().solve(x - mean);
  const double log_det = 2.0 * chol.matrixLLT().diagonal().array().log().sum();
  const double l = static_cast<double>(x.size());
  return -0.5 * (l * std::log(2.0 * std::numbers::pi) + log_det + w.squaredNorm());
}

Eigen::VectorXd softmax(const Eigen::VectorXd& log_weights) {
  const double top = log_weights.maxCoeff();
  Eigen::VectorXd p = (log_weights.array() - top).exp();
  return p / p.sum();
}

QdaModel fit_qda(const Dataset& train) {
  const auto l = static_cast<std::size_t>(train.features.cols());
  GaussianFit g = fit_gaussians(train, l + 1);
  QdaModel m{g.idx.classes, g.priors, g.means, {}, g.normalization};
  for (std::size_t k = 0; k < g.scatter.size(); ++k) {
    m.covariances.push_back(
        regularize(g.scatter[k] / static_cast<double>(g.idx.counts[k] - 1), "qda class " + m.classes[k]));
  }
  return m;
}

LdaModel fit_lda(const Dataset& train) {
  GaussianFit g = fit_gaussians(train, 2);
  const auto n_classes = g.idx.classes.size();
  if (train.rows() <= n_classes + static_cast<std::size_t>(train.features.cols())) {
    throw InvalidInput("insufficient samples for pooled covariance");
  }
  Eigen::MatrixXd pooled = Eigen::MatrixXd::Zero(train.features.cols(), train.features.cols());
  for (const auto& s : g.scatter) pooled += s;
  pooled /= static_cast<double>(train.rows() - n_classes);
  return LdaModel{g.idx.classes, g.priors, g.means, regularize(pooled, "lda pooled"),
                  g.normalization};
}

KnnModel fit_knn(const Dataset& train) {
  require_training_rows(train);
  const ClassIndex idx = index_classes(train);
  KnnModel m;
  m.classes = idx.classes;
  m.normalization = fit_normalization(train.features);
  m.points = apply_normalization(m.normalization, train.features);
  m.point_classes = idx.row_class;
  return m;
}

TreeModel fit_tree(const Dataset& train, std::size_t max_splits) {
  require_training_rows(train);
  const ClassIndex idx = index_classes(train);
  const auto n_classes = idx.classes.size();
  TreeModel m;
  m.classes = idx.classes;
  m.normalization = fit_normalization(train.features);
  const Eigen::MatrixXd z = apply_normalization(m.normalization, train.features);

  std::vector<std::vector<std::size_t>> node_rows;
  auto make_leaf = [&](std::vector<std::size_t> rows) {
    TreeNode node;
    node.class_counts.assign(n_classes, 0);
    for (auto r : rows) ++node.class_counts[idx.row_class[r]];
    m.nodes.push_back(std::move(node));
    node_rows.push_back(std::move(rows));
    return m.nodes.size() - 1;
  };

  struct Pending {
    double decrease;
    std::size_t node;
    SplitCandidate split;
  };
  auto worse = [](const Pending& a, const Pending& b) {
    if (a.decrease != b.decrease) return a.decrease < b.decrease;
    return a.node > b.node;
  };
  std::priority_queue<Pending, std::vector<Pending>, decltype(worse)> frontier(worse);
  auto consider = [&](std::size_t node) {
    if (auto s = best_split(z, idx.row_class, node_rows[node], n_classes)) {
      frontier.push(Pending{s->decrease, node, *s});
    }
  };

  std::vector<std::size_t> all(train.rows());
  std::iota(all.begin(), all.end(), 0);
  consider(make_leaf(std::move(all)));

  while (m.split_count < max_splits && !frontier.empty()) {
    const Pending p = frontier.top();
    frontier.pop();
    std::vector<std::size_t> left;
    std::vector<std::size_t> right;
    for (auto r : node_rows[p.node]) {
      (z(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(p.split.feature)) <= p.split.threshold
           ? left
           : right)
          .push_back(r);
    }
    const auto l = make_leaf(std::move(left));
    const auto r = make_leaf(std::move(right));
    auto& parent = m.nodes[p.node];
    parent.feature = p.split.feature;
    parent.threshold = p.split.threshold;
    parent.left = l;
    parent.right = r;
    ++m.split_count;
    consider(l);
    consider(r);
  }
  return m;
}

Classifier fit(ClassifierKind kind, const Dataset& train) {
  switch (kind) {
    case ClassifierKind::qda: return fit_qda(train);
    case ClassifierKind::lda: return fit_lda(train);
    case ClassifierKind::knn: return fit_knn(train);
    case ClassifierKind::tree: return fit_tree(train);
  }
  throw InvalidInput("unknown classifier kind");
}

ClassifierKind kind_of(const Classifier& model) {
  return static_cast<ClassifierKind>(model.index());
}

const std::vector<std::string>& classes_of(const Classifier& model) {
  return std::visit([](const auto& m) -> const std::vector<std::string>& { return m.classes; }, model);
}

const NormalizationStats& normalization_of(const Classifier& model) {
  return std::visit([](const auto& m) -> const NormalizationStats& { return m.normalization; },
                    model);
}

Prediction predict(const QdaModel& model, const Eigen::VectorXd& x) {
  const Eigen::VectorXd z = normalized_input(model.normalization, x);
  Eigen::VectorXd log_w(static_cast<Eigen::Index>(model.classes.size()));
  for (std::size_t k = 0; k < model.classes.size(); ++k) {
    const auto ki = static_cast<Eigen::Index>(k);
    log_w(ki) = std::log(model.priors(ki)) +
                gaussian_log_density(z, model.means[k], model.covariances[k]);
  }
  return make_prediction(model.classes, softmax(log_w));
}

Prediction predict(const LdaModel& model, const Eigen::VectorXd& x) {
  const Eigen::VectorXd z = normalized_input(model.normalization, x);
  Eigen::LLT<Eigen::MatrixXd> chol(model.covariance);
  if (chol.info() != Eigen::Success) throw NumericalError("lda covariance is not positive definite");
  // delta_k = z' S^-1 mu_k - mu_k' S^-1 mu_k / 2 + log pi_k
  Eigen::VectorXd score(static_cast<Eigen::Index>(model.classes.size()));
  for (std::size_t k = 0; k < model.classes.size(); ++k) {
    const auto ki = static_cast<Eigen::Index>(k);
    const Eigen::VectorXd s_mu = chol.solve(model.means[k]);
    score(ki) = z.dot(s_mu) - 0.5 * model.means[k].dot(s_mu) + std::log(model.priors(ki));
  }
  return make_prediction(model.classes, softmax(score));
}

Prediction predict(const KnnModel& model, const Eigen::VectorXd& x) {
  const Eigen::VectorXd z = normalized_input(model.normalization, x);
  if (model.points.rows() == 0) throw InvalidInput("knn model has no stored points");
  Eigen::Index best = 0;
  (model.points.rowwise() - z.transpose()).rowwise().squaredNorm().minCoeff(&best);
  Eigen::VectorXd posterior = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(model.classes.size()));
  posterior(static_cast<Eigen::Index>(model.point_classes[static_cast<std::size_t>(best)])) = 1.0;
  return make_prediction(model.classes, std::move(posterior));
}

Prediction predict(const TreeModel& model, const Eigen::VectorXd& x) {
  const Eigen::VectorXd z = normalized_input(model.normalization, x);
  std::size_t node = 0;
  while (model.nodes.at(node).feature) {
    const auto& n = model.nodes[node];
    node = z(static_cast<Eigen::Index>(*n.feature)) <= n.threshold ? n.left : n.right;
  }
  const auto& counts = model.nodes[node].class_counts;
  Eigen::VectorXd posterior(static_cast<Eigen::Index>(counts.size()));
  double total = 0.0;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    posterior(static_cast<Eigen::Index>(k)) = static_cast<double>(counts[k]);
    total += static_cast<double>(counts[k]);
  }
  return make_prediction(model.classes, posterior / total);
}

Prediction predict(const Classifier& model, const Eigen::VectorXd& x) {
  return std::visit([&](const auto& m) { return predict(m, x); }, model);
}

Evaluation evaluate(const Classifier& model, const Dataset& validation) {
  if (validation.rows() == 0) throw InvalidInput("validation data is empty");
  const auto& classes = classes_of(model);
  std::map<std::string, std::size_t> lookup;
  for (std::size_t k = 0; k < classes.size(); ++k) lookup[classes[k]] = k;

  const auto n = static_cast<Eigen::Index>(classes.size());
  Evaluation ev;
  ev.confusion.classes = classes;
  ev.confusion.counts = Eigen::MatrixXi::Zero(n, n);
  for (std::size_t i = 0; i < validation.rows(); ++i) {
    auto it = lookup.find(validation.labels[i]);
    if (it == lookup.end()) throw InvalidInput("label absent from model: " + validation.labels[i]);
    const auto p = predict(model, validation.features.row(static_cast<Eigen::Index>(i)).transpose());
    ++ev.confusion.counts(static_cast<Eigen::Index>(it->second),
                          static_cast<Eigen::Index>(p.class_index));
  }
  ev.accuracy = static_cast<double>(ev.confusion.counts.trace()) /
                static_cast<double>(validation.rows());

  const auto healthy = lookup.find("healthy");
  for (Eigen::Index k = 0; k < n; ++k) {
    const double row_total = ev.confusion.counts.row(k).sum();
    ev.recall.push_back(row_total > 0 ? ev.confusion.counts(k, k) / row_total
                                      : std::numeric_limits<double>::quiet_NaN());
    if (healthy == lookup.end() || row_total == 0) {
      ev.false_negative_rate.push_back(std::numeric_limits<double>::quiet_NaN());
    } else if (static_cast<std::size_t>(k) == healthy->second) {
      ev.false_negative_rate.push_back(0.0);
    } else {
      ev.false_negative_rate.push_back(
          ev.confusion.counts(k, static_cast<Eigen::Index>(healthy->second)) / row_total);
    }
  }
  if (healthy != lookup.end() && !std::isnan(ev.recall[healthy->second])) {
    ev.false_positive_rate = 1.0 - ev.recall[healthy->second];
  }
  return ev;
}

std::vector<std::size_t> stratified_folds(const std::vector<std::string>& labels,
                                          std::size_t folds, std::uint64_t seed) {
  if (folds < 2) throw InvalidInput("cross-validation needs at least 2 folds");
  std::vector<std::string> classes;
  for (const auto& l : labels) {
    if (std::find(classes.begin(), classes.end(), l) == classes.end()) classes.push_back(l);
  }
  std::vector<std::size_t> assignment(labels.size(), 0);
  for (std::size_t k = 0; k < classes.size(); ++k) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == classes[k]) rows.push_back(i);
    }
    if (rows.size() < folds) {
      throw InvalidInput("class " + classes[k] + " has fewer samples than the fold count");
    }
    std::mt19937_64 rng(derive_seed(seed, k));
    std::shuffle(rows.begin(), rows.end(), rng);
    for (std::size_t j = 0; j < rows.size(); ++j) assignment[rows[j]] = j % folds;
  }
  return assignment;
}

CrossValidation cross_validate(const Dataset& data, std::size_t folds, ClassifierKind kind,
                               std::uint64_t seed) {
  const auto assignment = stratified_folds(data.labels, folds, seed);
  CrossValidation cv;
  for (std::size_t f = 0; f < folds; ++f) {
    std::vector<std::size_t> train_rows;
    std::vector<std::size_t> test_rows;
    for (std::size_t i = 0; i < data.rows(); ++i) {
      (assignment[i] == f ? test_rows : train_rows).push_back(i);
    }
    const Classifier model = fit(kind, data.subset(train_rows));
    cv.fold_accuracy.push_back(evaluate(model, data.subset(test_rows)).accuracy);
  }
  cv.mean_accuracy = std::accumulate(cv.fold_accuracy.begin(), cv.fold_accuracy.end(), 0.0) /
                     static_cast<double>(folds);
  return cv;
}

nlohmann::json model_to_json(const Classifier& model) {
  json j{{"format", "dtwin-model"},
         {"version", 1},
         {"kind", std::string(to_string(kind_of(model)))},
         {"classes", classes_of(model)},
         {"normalization", normalization_json(normalization_of(model))}};
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, QdaModel> || std::is_same_v<T, LdaModel>) {
          j["priors"] = vector_json(m.priors);
          json means = json::array();
          for (const auto& mu : m.means) means.push_back(vector_json(mu));
          j["means"] = means;
        }
        if constexpr (std::is_same_v<T, QdaModel>) {
          json covs = json::array();
          for (const auto& c : m.covariances) covs.push_back(matrix_json(c));
          j["covariances"] = covs;
        } else if constexpr (std::is_same_v<T, LdaModel>) {
          j["covariance"] = matrix_json(m.covariance);
        } else if constexpr (std::is_same_v<T, KnnModel>) {
          j["points"] = matrix_json(m.points);
          j["point_classes"] = m.point_classes;
        } else if constexpr (std::is_same_v<T, TreeModel>) {
          json nodes = json::array();
          for (const auto& n : m.nodes) {
            json nj{{"class_counts", n.class_counts}};
            if (n.feature) {
              nj["feature"] = *n.feature;
              nj["threshold"] = n.threshold;
              nj["left"] = n.left;
              nj["right"] = n.right;
            }
            nodes.push_back(nj);
          }
          j["nodes"] = nodes;
          j["split_count"] = m.split_count;
        }
      },
      model);
  return j;
}

Classifier model_from_json(const nlohmann::json& j) {
  try {
    if (j.value("format", "") != "dtwin-model") throw InvalidInput("not a dtwin model file");
    const auto kind = parse_classifier_kind(j.at("kind").get<std::string>());
    const auto classes = j.at("classes").get<std::vector<std::string>>();
    const auto norm = normalization_from(j.at("normalization"));
    const auto l = norm.mean.size();
    const auto check_classes = [&](std::size_t n) {
      if (n != classes.size()) throw InvalidInput("model class count mismatch");
    };
    switch (kind) {
      case ClassifierKind::qda:
      case ClassifierKind::lda: {
        Eigen::VectorXd priors = vector_from(j.at("priors"));
        check_classes(static_cast<std::size_t>(priors.size()));
        std::vector<Eigen::VectorXd> means;
        for (const auto& mj : j.at("means")) {
          means.push_back(vector_from(mj));
          if (means.back().size() != l) throw InvalidInput("model mean has wrong length");
        }
        check_classes(means.size());
        if (kind == ClassifierKind::lda) {
          return LdaModel{classes, priors, means, matrix_from(j.at("covariance"), l), norm};
        }
        std::vector<Eigen::MatrixXd> covs;
        for (const auto& cj : j.at("covariances")) covs.push_back(matrix_from(cj, l));
        check_classes(covs.size());
        return QdaModel{classes, priors, means, covs, norm};
      }
      case ClassifierKind::knn: {
        KnnModel m{classes, matrix_from(j.at("points"), l),
                   j.at("point_classes").get<std::vector<std::size_t>>(), norm};
        if (m.point_classes.size() != static_cast<std::size_t>(m.points.rows())) {
          throw InvalidInput("knn point labels do not match points");
        }
        return m;
      }
      case ClassifierKind::tree: {
        TreeModel m;
        m.classes = classes;
        m.normalization = norm;
        m.split_count = j.at("split_count").get<std::size_t>();
        for (const auto& nj : j.at("nodes")) {
          TreeNode n;
          n.class_counts = nj.at("class_counts").get<std::vector<std::size_t>>();
          check_classes(n.class_counts.size());
          if (nj.contains("feature")) {
            n.feature = nj.at("feature").get<std::size_t>();
            n.threshold = nj.at("threshold").get<double>();
            n.left = nj.at("left").get<std::size_t>();
            n.right = nj.at("right").get<std::size_t>();
          }
          m.nodes.push_back(std::move(n));
        }
        for (const auto& n : m.nodes) {
          if (n.feature && (n.left >= m.nodes.size() || n.right >= m.nodes.size() ||
                            *n.feature >= static_cast<std::size_t>(l))) {
            throw InvalidInput("tree node references are out of range");
          }
        }
        if (m.nodes.empty()) throw InvalidInput("tree has no nodes");
        return m;
      }
    }
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("malformed model JSON: ") + e.what());
  }
  throw InvalidInput("unknown model kind");
}

void save_model(const Classifier& model, const std::filesystem::path& path,
                const std::string& training_digest) {
  json j = model_to_json(model);
  j["training_config_digest"] = training_digest;
  write_file_atomic(path, j.dump(2) + "\n");
}

Classifier load_model(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw InvalidInput(path.string() + ": malformed JSON: " + e.what());
  }
  return model_from_json(j);
}

std::string confusion_to_csv(const ConfusionMatrix& confusion) {
  std::string out = "true\\predicted";
  for (const auto& c : confusion.classes) out += "," + c;
  out += "\n";
  for (Eigen::Index r = 0; r < confusion.counts.rows(); ++r) {
    out += confusion.classes[static_cast<std::size_t>(r)];
    for (Eigen::Index c = 0; c < confusion.counts.cols(); ++c) {
      out += "," + std::to_string(confusion.counts(r, c));
    }
    out += "\n";
  }
  return out;
}

}  // namespace dtwin
