#include "dtwin/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include <spdlog/spdlog.h>

#include "dtwin/error.hpp"
#include "dtwin/io.hpp"
#include "dtwin/random.hpp"

namespace dtwin {
namespace {

using nlohmann::json;

constexpr std::uint64_t kCvDomain = 0x63762d666f6c6473ULL;
constexpr std::uint64_t kValidationDomain = 0x76616c6964617465ULL;
constexpr std::uint64_t kSampleSizeDomain = 0x73616d706c657a65ULL;
constexpr double kReferenceSeverity = 0.20;
constexpr double kReferenceBound = 0.05;
constexpr double kReferenceFrequency = 3800.0;
constexpr std::size_t kHoldoutTrain = 200;
constexpr std::size_t kHoldoutValidation = 100;

std::string fmt_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

std::string fmt_dofs(const std::vector<std::size_t>& dofs) {
  std::string out;
  for (auto d : dofs) out += (out.empty() ? "" : "-") + std::to_string(d);
  return out;
}

std::uint64_t cv_seed(std::uint64_t master) { return derive_seed(master, kCvDomain); }

RunRecord base_record(const GenerationConfig& config, std::string parameter, std::string value) {
  RunRecord r;
  r.parameter = std::move(parameter);
  r.value = std::move(value);
  r.seed = config.master_seed;
  r.config_digest = config_digest(config);
  r.config = config;
  return r;
}

RunRecord transfer_record(const Dataset& train, const GenerationConfig& train_config,
                          const Dataset& test, const GenerationConfig& test_config,
                          std::string parameter, std::string value) {
  RunRecord r = base_record(train_config, std::move(parameter), std::move(value));
  r.protocol = "transfer";
  r.test_config = test_config;
  r.accuracy = evaluate(fit_qda(train), test).accuracy;
  return r;
}

ExperimentReport make_report(std::string id, std::uint64_t seed, std::vector<RunRecord> records) {
  ExperimentReport rep;
  rep.id = std::move(id);
  rep.master_seed = seed;
  rep.records = std::move(records);
  rep.summary = summarize(rep.records);
  rep.metadata["seeds"] = json::array({seed});
  rep.metadata["accuracy_protocol"] =
      "cv5: stratified 5-fold cross-validation on the generated dataset; holdout: QDA trained "
      "on the training rows and scored on disjoint validation rows; transfer: QDA trained on "
      "the full training dataset and scored on a dataset generated from a disjoint seed domain";
  return rep;
}

GenerationConfig with_frequency(GenerationConfig c, double f) {
  c.excitation_frequency_hz = f;
  return c;
}

}  // namespace

const SummaryRow& ExperimentReport::row(const std::string& parameter, const std::string& value,
                                        const std::string& classifier) const {
  for (const auto& s : summary) {
    if (s.parameter == parameter && s.value == value && s.classifier == classifier) return s;
  }
  throw InvalidInput("report " + id + " has no row " + parameter + "=" + value);
}

std::vector<SummaryRow> summarize(const std::vector<RunRecord>& records) {
  std::vector<SummaryRow> rows;
  std::vector<std::vector<double>> acc;
  for (const auto& r : records) {
    auto it = std::find_if(rows.begin(), rows.end(), [&](const SummaryRow& s) {
      return s.parameter == r.parameter && s.value == r.value && s.classifier == r.classifier;
    });
    if (it == rows.end()) {
      rows.push_back(SummaryRow{r.parameter, r.value, r.classifier, r.reference, 0, 0.0, {}});
      acc.emplace_back();
      it = rows.end() - 1;
    }
    acc[static_cast<std::size_t>(it - rows.begin())].push_back(r.accuracy);
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& a = acc[i];
    rows[i].runs = a.size();
    const double mean = std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(a.size());
    rows[i].accuracy_mean = mean;
    if (a.size() >= 2) {
      double ss = 0.0;
      for (double v : a) ss += (v - mean) * (v - mean);
      rows[i].accuracy_cov = std::sqrt(ss / static_cast<double>(a.size() - 1)) / mean;
    }
  }
  return rows;
}

ExperimentReport merge_reports(const std::vector<ExperimentReport>& reports) {
  if (reports.empty()) throw InvalidInput("nothing to merge");
  ExperimentReport out;
  out.id = reports.front().id;
  out.master_seed = reports.front().master_seed;
  out.metadata = reports.front().metadata;
  json seeds = json::array();
  for (const auto& r : reports) {
    if (r.id != out.id) throw InvalidInput("cannot merge reports of different experiments");
    out.records.insert(out.records.end(), r.records.begin(), r.records.end());
    seeds.push_back(r.master_seed);
  }
  out.metadata["seeds"] = seeds;
  out.summary = summarize(out.records);
  return out;
}

GenerationConfig reference_config(std::uint64_t seed) {
  GenerationConfig c;
  c.master_seed = seed;
  return c;
}

std::uint64_t validation_seed(std::uint64_t seed) { return derive_seed(seed, kValidationDomain); }

RunRecord cv_record(const GenerationConfig& config, std::string parameter, std::string value,
                    ClassifierKind kind) {
  RunRecord r = base_record(config, std::move(parameter), std::move(value));
  r.classifier = std::string(to_string(kind));
  r.accuracy = cross_validate(generate(config), kCvFolds, kind, cv_seed(config.master_seed))
                   .mean_accuracy;
  return r;
}

ExperimentReport run_reference(std::uint64_t seed) {
  const GenerationConfig config = reference_config(seed);
  const Dataset data = generate(config);
  std::vector<RunRecord> records;
  for (auto kind : {ClassifierKind::qda, ClassifierKind::lda, ClassifierKind::knn,
                    ClassifierKind::tree}) {
    RunRecord r = base_record(config, "classifier", std::string(to_string(kind)));
    r.classifier = std::string(to_string(kind));
    r.reference = kind == ClassifierKind::qda;
    r.accuracy = cross_validate(data, kCvFolds, kind, cv_seed(seed)).mean_accuracy;
    records.push_back(std::move(r));
  }

  GenerationConfig train_config = config;
  train_config.samples_per_scenario = kHoldoutTrain;
  GenerationConfig validation_config = config;
  validation_config.samples_per_scenario = kHoldoutValidation;
  validation_config.master_seed = validation_seed(seed);
  const Classifier model = fit_qda(generate(train_config));
  const Evaluation ev = evaluate(model, generate(validation_config));
  RunRecord holdout = base_record(train_config, "holdout", "200/100");
  holdout.protocol = "holdout";
  holdout.test_config = validation_config;
  holdout.accuracy = ev.accuracy;
  holdout.confusion = ev.confusion;
  records.push_back(std::move(holdout));
  return make_report("reference", seed, std::move(records));
}

ExperimentReport sweep_variations(std::uint64_t seed) {
  const GenerationConfig ref = reference_config(seed);
  std::vector<std::pair<std::string, GenerationConfig>> cases;
  cases.emplace_back("reference", ref);
  {
    auto c = ref;
    c.scenarios = GenerationConfig::default_scenarios(0.10);
    cases.emplace_back("damage_10", c);
  }
  {
    auto c = ref;
    c.sensor_dofs = {2, 3, 4, 5, 6};
    cases.emplace_back("sensors_2-6", c);
  }
  {
    auto c = ref;
    c.noise_sigma = 2.0 * ref.noise_sigma;
    cases.emplace_back("noise_2sigma", c);
  }
  {
    auto c = ref;
    c.uncertainty.bound_fraction = 0.10;
    c.fluctuation_fraction = 0.10;
    cases.emplace_back("bounds_10", c);
  }
  cases.emplace_back("frequency_7000", with_frequency(ref, 7000.0));
  {
    auto c = ref;
    c.excitation.dof_index = 1;
    cases.emplace_back("force_dof1", c);
  }
  std::vector<RunRecord> records;
  for (const auto& [name, config] : cases) {
    records.push_back(cv_record(config, "variation", name));
    records.back().reference = name == "reference";
  }
  return make_report("variations", seed, std::move(records));
}

std::vector<double> default_damage_levels() { return {0.05, 0.10, 0.15, 0.20, 0.25}; }
std::vector<double> default_uncertainty_bounds() { return {0.025, 0.05, 0.10}; }

std::vector<double> default_sweep_frequencies() {
  std::vector<double> out;
  for (double f = 2000.0; f <= 8000.0; f += 500.0) out.push_back(f);
  out.push_back(kReferenceFrequency);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::vector<std::size_t>> default_sensor_subsets() {
  std::vector<std::vector<std::size_t>> out{{1, 2, 3, 4, 5, 6}};
  for (std::size_t drop = 1; drop <= 6; ++drop) {
    std::vector<std::size_t> s;
    for (std::size_t d = 1; d <= 6; ++d) {
      if (d != drop) s.push_back(d);
    }
    out.push_back(s);
  }
  out.push_back({1, 2, 4, 6});
  out.push_back({1, 4, 6});
  return out;
}

namespace {

template <typename T, typename Apply, typename Format, typename IsReference>
ExperimentReport one_parameter_sweep(const std::string& id, const std::string& parameter,
                                     std::vector<T> grid, const T& reference_value,
                                     std::uint64_t seed, Apply apply, Format format,
                                     IsReference is_reference) {
  if (grid.empty()) throw InvalidInput("sweep grid must not be empty");
  if (std::none_of(grid.begin(), grid.end(), is_reference)) grid.push_back(reference_value);
  const GenerationConfig ref = reference_config(seed);
  std::vector<RunRecord> records;
  for (const auto& v : grid) {
    GenerationConfig c = ref;
    apply(c, v);
    records.push_back(cv_record(c, parameter, format(v)));
    records.back().reference = is_reference(v);
  }
  return make_report(id, seed, std::move(records));
}

bool near(double a, double b) { return std::abs(a - b) <= 1.0e-12 * std::max(1.0, std::abs(b)); }

}  // namespace

ExperimentReport sweep_damage(const std::vector<double>& levels, std::uint64_t seed) {
  return one_parameter_sweep<double>(
      "damage", "damage", levels, kReferenceSeverity, seed,
      [](GenerationConfig& c, double d) { c.scenarios = GenerationConfig::default_scenarios(d); },
      fmt_value, [](double d) { return near(d, kReferenceSeverity); });
}

ExperimentReport sweep_uncertainty(const std::vector<double>& bounds, std::uint64_t seed) {
  return one_parameter_sweep<double>(
      "uncertainty", "bounds", bounds, kReferenceBound, seed,
      [](GenerationConfig& c, double b) {
        c.uncertainty.bound_fraction = b;
        c.fluctuation_fraction = b;
      },
      fmt_value, [](double b) { return near(b, kReferenceBound); });
}

ExperimentReport sweep_frequency(const std::vector<double>& frequencies_hz, std::uint64_t seed) {
  return one_parameter_sweep<double>(
      "frequency", "frequency_hz", frequencies_hz, kReferenceFrequency, seed,
      [](GenerationConfig& c, double f) { c.excitation_frequency_hz = f; }, fmt_value,
      [](double f) { return near(f, kReferenceFrequency); });
}

ExperimentReport sweep_sensors(const std::vector<std::vector<std::size_t>>& subsets,
                               std::uint64_t seed) {
  const std::vector<std::size_t> all{1, 2, 3, 4, 5, 6};
  return one_parameter_sweep<std::vector<std::size_t>>(
      "sensors", "sensors", subsets, all, seed,
      [](GenerationConfig& c, const std::vector<std::size_t>& s) { c.sensor_dofs = s; }, fmt_dofs,
      [&](const std::vector<std::size_t>& s) { return s == all; });
}

ExperimentReport generalization_study(const std::vector<double>& train_freqs,
                                      const std::vector<double>& test_freqs,
                                      std::uint64_t seed) {
  if (train_freqs.empty() || test_freqs.empty()) throw InvalidInput("frequency grids must not be empty");
  const GenerationConfig ref = reference_config(seed);
  GenerationConfig test_ref = ref;
  test_ref.master_seed = validation_seed(seed);

  std::vector<RunRecord> records;
  for (double ftrain : train_freqs) {
    const GenerationConfig train_config = with_frequency(ref, ftrain);
    GenerationConfig fixed_config = train_config;
    fixed_config.frequency_fluctuation = false;
    const Dataset train = generate(train_config);
    const Dataset fixed_train = generate(fixed_config);

    RunRecord matched = base_record(train_config, "matched", fmt_value(ftrain));
    matched.accuracy = cross_validate(train, kCvFolds, ClassifierKind::qda, cv_seed(seed)).mean_accuracy;
    matched.reference = near(ftrain, kReferenceFrequency);
    records.push_back(std::move(matched));

    RunRecord fixed_matched = base_record(fixed_config, "fixed_matched", fmt_value(ftrain));
    fixed_matched.accuracy =
        cross_validate(fixed_train, kCvFolds, ClassifierKind::qda, cv_seed(seed)).mean_accuracy;
    records.push_back(std::move(fixed_matched));

    for (double ftest : test_freqs) {
      if (near(ftest, ftrain)) continue;
      const std::string pair = fmt_value(ftrain) + "->" + fmt_value(ftest);
      const GenerationConfig test_config = with_frequency(test_ref, ftest);
      GenerationConfig fixed_test_config = test_config;
      fixed_test_config.frequency_fluctuation = false;
      const Dataset test = generate(test_config);
      const Dataset fixed_test = generate(fixed_test_config);
      records.push_back(transfer_record(train, train_config, test, test_config, "transfer", pair));
      records.push_back(
          transfer_record(fixed_train, fixed_config, test, test_config, "fixed_transfer", pair));
      records.push_back(transfer_record(fixed_train, fixed_config, fixed_test, fixed_test_config,
                                        "fixed_fixed", pair));
    }
  }
  return make_report("generalization", seed, std::move(records));
}

ExperimentReport sample_size_study(const std::vector<std::size_t>& total_points,
                                   std::size_t repetitions, std::uint64_t seed) {
  if (total_points.empty() || repetitions < 1) {
    throw InvalidInput("sample-size study needs a grid and at least one repetition");
  }
  const GenerationConfig ref = reference_config(seed);
  const std::size_t n_classes = ref.scenarios.size();
  std::vector<RunRecord> records;
  for (std::size_t total : total_points) {
    const std::size_t per_class = total / n_classes;
    if (per_class * n_classes != total) {
      spdlog::warn("{} points do not divide into {} balanced classes; using {} per class", total,
                   n_classes, per_class);
    }
    if (per_class < 3) throw InvalidInput("sample-size grid point " + std::to_string(total) + " is too small");
    for (std::size_t rep = 0; rep < repetitions; ++rep) {
      GenerationConfig c = ref;
      c.samples_per_scenario = per_class;
      c.master_seed = derive_seed(seed, kSampleSizeDomain, total, rep);
      const auto parts = split(generate(c), 2.0 / 3.0, derive_seed(c.master_seed, kCvDomain));
      RunRecord r = base_record(c, "total_points", std::to_string(total));
      r.protocol = "holdout";
      r.reference = total == ref.samples_per_scenario * n_classes;
      r.accuracy = evaluate(fit_qda(parts.train), parts.validation).accuracy;
      records.push_back(std::move(r));
    }
  }
  auto rep = make_report("samplesize", seed, std::move(records));
  rep.metadata["repetitions"] = repetitions;
  return rep;
}

nlohmann::json report_to_json(const ExperimentReport& report) {
  json records = json::array();
  for (const auto& r : report.records) {
    json rj{{"parameter", r.parameter}, {"value", r.value},       {"classifier", r.classifier},
            {"protocol", r.protocol},   {"reference", r.reference}, {"seed", r.seed},
            {"config_digest", r.config_digest}, {"config", r.config}, {"accuracy", r.accuracy}};
    if (r.test_config) rj["test_config"] = *r.test_config;
    if (r.confusion) {
      rj["confusion"] = {{"classes", r.confusion->classes}, {"counts", json::array()}};
      for (Eigen::Index i = 0; i < r.confusion->counts.rows(); ++i) {
        std::vector<int> row(r.confusion->counts.cols());
        for (Eigen::Index j = 0; j < r.confusion->counts.cols(); ++j) {
          row[static_cast<std::size_t>(j)] = r.confusion->counts(i, j);
        }
        rj["confusion"]["counts"].push_back(row);
      }
    }
    records.push_back(rj);
  }
  json summary = json::array();
  for (const auto& s : report.summary) {
    summary.push_back({{"parameter", s.parameter},
                       {"value", s.value},
                       {"classifier", s.classifier},
                       {"reference", s.reference},
                       {"runs", s.runs},
                       {"accuracy_mean", s.accuracy_mean},
                       {"accuracy_cov", s.accuracy_cov ? json(*s.accuracy_cov) : json(nullptr)}});
  }
  return {{"experiment", report.id},
          {"master_seed", report.master_seed},
          {"metadata", report.metadata},
          {"records", records},
          {"summary", summary}};
}

std::string report_to_csv(const ExperimentReport& report) {
  std::string out =
      "experiment,parameter,value,classifier,reference,runs,accuracy_mean,accuracy_cov\n";
  for (const auto& s : report.summary) {
    out += report.id + "," + s.parameter + "," + s.value + "," + s.classifier + "," +
           (s.reference ? "1" : "0") + "," + std::to_string(s.runs) + "," +
           format_sci17(s.accuracy_mean) + "," +
           (s.accuracy_cov ? format_sci17(*s.accuracy_cov) : std::string{}) + "\n";
  }
  return out;
}

std::filesystem::path write_report(const ExperimentReport& report,
                                   const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const std::string stem = report.id + "_seed" + std::to_string(report.master_seed);
  const auto json_path = dir / (stem + ".json");
  write_file_atomic(json_path, report_to_json(report).dump(2) + "\n");
  write_file_atomic(dir / (stem + ".csv"), report_to_csv(report));
  return json_path;
}

}  // namespace dtwin
