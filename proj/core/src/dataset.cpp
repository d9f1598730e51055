#include "dtwin/dataset.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include <spdlog/spdlog.h>

#include "dtwin/error.hpp"
#include "dtwin/io.hpp"
#include "dtwin/random.hpp"

namespace dtwin {
namespace {

constexpr std::uint64_t kDatasetDomain = 0x6461746173657400ULL;
constexpr std::size_t kMaxResampleAttempts = 16;
constexpr int kFormatVersion = 1;

using nlohmann::json;

void reject_unknown_keys(const json& j, std::initializer_list<const char*> allowed,
                         const std::string& where) {
  if (!j.is_object()) throw InvalidInput(where + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      throw InvalidInput("unknown key '" + key + "' in " + where);
    }
  }
}

template <typename T>
void read_opt(const json& j, const char* key, T& target) {
  if (auto it = j.find(key); it != j.end()) {
    try {
      target = it->get<T>();
    } catch (const json::exception& e) {
      throw InvalidInput(std::string("config key '") + key + "': " + e.what());
    }
  }
}

struct SampleDraw {
  Eigen::VectorXd magnitudes;  // all dofs, noise added and floored
};

SampleDraw draw_sample(const GenerationConfig& config, const DamageScenario& scenario,
                       std::size_t sample_index) {
  for (std::size_t attempt = 0; attempt < kMaxResampleAttempts; ++attempt) {
    RandomStream stream(derive_seed(config.master_seed, kDatasetDomain, scenario.class_key(),
                                    sample_index, attempt));
    const LumpedParameters params = realize_stochastic(config.model, config.uncertainty, stream);
    const double phi = config.fluctuation_fraction;
    const double u_damage = stream.unit();
    const double u_freq = stream.unit();
    std::array<double, kLumpedDofs> z{};
    for (auto& v : z) v = stream.normal(0.0, 1.0);

    const double severity = scenario.is_healthy() ? 0.0
                            : config.damage_fluctuation
                                ? scenario.severity() * (1.0 - phi + 2.0 * phi * u_damage)
                                : scenario.severity();
    const double freq = config.frequency_fluctuation
                            ? config.excitation_frequency_hz * (1.0 - phi + 2.0 * phi * u_freq)
                            : config.excitation_frequency_hz;
    const SystemMatrices sys =
        build_lumped(params, apply_damage(scenario, params.stiffness, severity));
    try {
      const ComplexVector u = harmonic_response(sys, params.damping, config.excitation, freq);
      SampleDraw out{Eigen::VectorXd(u.size())};
      for (Eigen::Index d = 0; d < u.size(); ++d) {
        out.magnitudes(d) =
            std::max(std::abs(u(d)) + config.noise_sigma * z[static_cast<std::size_t>(d)], 0.0);
      }
      return out;
    } catch (const NumericalError& e) {
      spdlog::warn("sample {} of {} attempt {}: {}; resampling", sample_index, scenario.label(),
                   attempt, e.what());
    }
  }
  throw NumericalError("sample " + std::to_string(sample_index) + " of " + scenario.label() +
                       " stayed singular after resampling");
}

std::vector<std::size_t> parse_sensor_header(const std::vector<std::string>& header) {
  std::vector<std::size_t> dofs;
  for (std::size_t i = 0; i + 1 < header.size(); ++i) {
    const auto& name = header[i];
    constexpr std::string_view prefix = "sensor_";
    if (name.rfind(prefix, 0) != 0) {
      throw InvalidInput("header column " + std::to_string(i + 1) + " '" + name +
                         "' is not sensor_<dof>");
    }
    const double dof = parse_double(std::string_view(name).substr(prefix.size()), "header");
    if (dof < 1 || dof != std::floor(dof)) throw InvalidInput("bad sensor column '" + name + "'");
    dofs.push_back(static_cast<std::size_t>(dof));
  }
  return dofs;
}

}  // namespace

std::vector<DamageScenario> GenerationConfig::default_scenarios(double severity) {
  std::vector<DamageScenario> out{DamageScenario::healthy()};
  for (std::size_t s = 1; s <= kDamageableSprings; ++s) {
    out.push_back(DamageScenario::damaged(s, severity));
  }
  return out;
}

void GenerationConfig::validate() const {
  if (scenarios.empty()) throw InvalidInput("config needs at least one scenario");
  std::set<std::string> seen;
  for (const auto& s : scenarios) {
    if (!seen.insert(s.label()).second) throw InvalidInput("duplicate scenario label " + s.label());
  }
  if (samples_per_scenario < 1) throw InvalidInput("samples_per_scenario must be >= 1");
  excitation.validate(kLumpedDofs);
  if (!(excitation_frequency_hz >= 0.0) || !std::isfinite(excitation_frequency_hz)) {
    throw InvalidInput("excitation frequency must be non-negative");
  }
  uncertainty.validate();
  if (!(fluctuation_fraction >= 0.0) || !(fluctuation_fraction < 1.0)) {
    throw InvalidInput("fluctuation_fraction must be in [0, 1)");
  }
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) {
    throw InvalidInput("noise_sigma must be non-negative");
  }
  if (sensor_dofs.empty()) throw InvalidInput("sensor set must not be empty");
  std::set<std::size_t> dofs;
  for (auto d : sensor_dofs) {
    if (d < 1 || d > kLumpedDofs) throw InvalidInput("sensor dof out of range 1..6");
    if (!dofs.insert(d).second) throw InvalidInput("duplicate sensor dof");
  }
  model.validate();
  for (const auto& s : scenarios) {
    if (!s.is_healthy() && damage_fluctuation && s.severity() * (1.0 + fluctuation_fraction) >= 1.0) {
      throw InvalidInput("total damage not representable");
    }
  }
}

std::vector<std::string> GenerationConfig::labels() const {
  std::vector<std::string> out;
  for (const auto& s : scenarios) out.push_back(s.label());
  return out;
}

void to_json(json& j, const GenerationConfig& c) {
  json scenarios = json::array();
  for (const auto& s : c.scenarios) {
    json sj{{"label", s.label()}};
    if (!s.is_healthy()) {
      sj["spring_index"] = *s.spring_index();
      sj["severity"] = s.severity();
    }
    scenarios.push_back(sj);
  }
  j = json{
      {"scenarios", scenarios},
      {"samples_per_scenario", c.samples_per_scenario},
      {"excitation",
       {{"dof_index", c.excitation.dof_index},
        {"magnitude", c.excitation.magnitude},
        {"frequency_hz", c.excitation_frequency_hz}}},
      {"uncertainty",
       {{"bound_fraction", c.uncertainty.bound_fraction},
        {"area", c.uncertainty.area},
        {"elastic_modulus", c.uncertainty.elastic_modulus},
        {"density", c.uncertainty.density},
        {"length", c.uncertainty.length}}},
      {"damage_fluctuation", c.damage_fluctuation},
      {"frequency_fluctuation", c.frequency_fluctuation},
      {"fluctuation_fraction", c.fluctuation_fraction},
      {"noise_sigma", c.noise_sigma},
      {"sensor_dofs", c.sensor_dofs},
      {"model",
       {{"mass", c.model.mass},
        {"stiffness", c.model.stiffness},
        {"alpha0", c.model.damping.alpha0},
        {"beta0", c.model.damping.beta0}}},
      {"master_seed", c.master_seed},
  };
}

void from_json(const json& j, GenerationConfig& c) {
  reject_unknown_keys(j,
                      {"scenarios", "samples_per_scenario", "excitation", "uncertainty",
                       "damage_fluctuation", "frequency_fluctuation", "fluctuation_fraction",
                       "noise_sigma", "sensor_dofs", "model", "master_seed", "damage_severity"},
                      "generation config");
  GenerationConfig out;
  if (j.contains("damage_severity")) {
    double severity = 0.0;
    read_opt(j, "damage_severity", severity);
    out.scenarios = GenerationConfig::default_scenarios(severity);
  }
  if (auto it = j.find("scenarios"); it != j.end()) {
    if (!it->is_array()) throw InvalidInput("scenarios must be an array");
    out.scenarios.clear();
    for (const auto& sj : *it) {
      reject_unknown_keys(sj, {"label", "spring_index", "severity"}, "scenario");
      std::string label;
      double severity = 0.0;
      read_opt(sj, "label", label);
      read_opt(sj, "severity", severity);
      auto scenario = DamageScenario::from_label(label, severity);
      if (sj.contains("spring_index") &&
          sj.at("spring_index").get<std::size_t>() != scenario.spring_index().value_or(0)) {
        throw InvalidInput("scenario " + label + " has inconsistent spring_index");
      }
      out.scenarios.push_back(scenario);
    }
  }
  read_opt(j, "samples_per_scenario", out.samples_per_scenario);
  if (auto it = j.find("excitation"); it != j.end()) {
    reject_unknown_keys(*it, {"dof_index", "magnitude", "frequency_hz"}, "excitation");
    read_opt(*it, "dof_index", out.excitation.dof_index);
    read_opt(*it, "magnitude", out.excitation.magnitude);
    read_opt(*it, "frequency_hz", out.excitation_frequency_hz);
  }
  if (auto it = j.find("uncertainty"); it != j.end()) {
    reject_unknown_keys(*it, {"bound_fraction", "area", "elastic_modulus", "density", "length"},
                        "uncertainty");
    read_opt(*it, "bound_fraction", out.uncertainty.bound_fraction);
    read_opt(*it, "area", out.uncertainty.area);
    read_opt(*it, "elastic_modulus", out.uncertainty.elastic_modulus);
    read_opt(*it, "density", out.uncertainty.density);
    read_opt(*it, "length", out.uncertainty.length);
  }
  read_opt(j, "damage_fluctuation", out.damage_fluctuation);
  read_opt(j, "frequency_fluctuation", out.frequency_fluctuation);
  read_opt(j, "fluctuation_fraction", out.fluctuation_fraction);
  read_opt(j, "noise_sigma", out.noise_sigma);
  read_opt(j, "sensor_dofs", out.sensor_dofs);
  if (auto it = j.find("model"); it != j.end()) {
    reject_unknown_keys(*it, {"mass", "stiffness", "alpha0", "beta0"}, "model");
    read_opt(*it, "mass", out.model.mass);
    read_opt(*it, "stiffness", out.model.stiffness);
    read_opt(*it, "alpha0", out.model.damping.alpha0);
    read_opt(*it, "beta0", out.model.damping.beta0);
  }
  read_opt(j, "master_seed", out.master_seed);
  out.validate();
  c = std::move(out);
}

std::string config_digest(const GenerationConfig& config) {
  const std::string text = json(config).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::vector<std::string> Dataset::distinct_labels() const {
  std::vector<std::string> out;
  for (const auto& l : labels) {
    if (std::find(out.begin(), out.end(), l) == out.end()) out.push_back(l);
  }
  return out;
}

Dataset Dataset::subset(const std::vector<std::size_t>& rows) const {
  Dataset out;
  out.features.resize(static_cast<Eigen::Index>(rows.size()), features.cols());
  out.labels.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.features.row(static_cast<Eigen::Index>(i)) =
        features.row(static_cast<Eigen::Index>(rows[i]));
    out.labels.push_back(labels.at(rows[i]));
  }
  out.feature_names = feature_names;
  out.config = config;
  return out;
}

std::vector<std::string> sensor_feature_names(const std::vector<std::size_t>& dofs) {
  std::vector<std::string> out;
  for (auto d : dofs) out.push_back("sensor_" + std::to_string(d));
  return out;
}

Dataset generate(const GenerationConfig& config, std::size_t threads) {
  config.validate();
  const std::size_t per = config.samples_per_scenario;
  const std::size_t total = per * config.scenarios.size();
  const auto cols = static_cast<Eigen::Index>(config.sensor_dofs.size());

  Dataset out;
  out.features.resize(static_cast<Eigen::Index>(total), cols);
  out.labels.resize(total);
  out.feature_names = sensor_feature_names(config.sensor_dofs);
  out.config = config;

  auto fill_row = [&](std::size_t row) {
    const auto& scenario = config.scenarios[row / per];
    const SampleDraw draw = draw_sample(config, scenario, row % per);
    for (Eigen::Index c = 0; c < cols; ++c) {
      out.features(static_cast<Eigen::Index>(row), c) =
          draw.magnitudes(static_cast<Eigen::Index>(config.sensor_dofs[static_cast<std::size_t>(c)] - 1));
    }
    out.labels[row] = scenario.label();
  };

  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, total);
  if (threads <= 1) {
    for (std::size_t row = 0; row < total; ++row) fill_row(row);
    return out;
  }

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        try {
          for (std::size_t row = next++; row < total; row = next++) fill_row(row);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          next = total;
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

NormalizationStats fit_normalization(const Eigen::MatrixXd& x) {
  if (x.rows() < 2) throw InvalidInput("normalization needs at least 2 rows");
  NormalizationStats s;
  s.mean = x.colwise().mean().transpose();
  const Eigen::MatrixXd centered = x.rowwise() - s.mean.transpose();
  s.stddev = (centered.colwise().squaredNorm() / static_cast<double>(x.rows() - 1))
                 .cwiseSqrt()
                 .transpose();
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    const double scale = std::max(std::abs(s.mean(c)), std::numeric_limits<double>::min());
    if (!(s.stddev(c) > 1.0e-12 * scale)) {
      throw InvalidInput("degenerate feature: column " + std::to_string(c + 1) +
                         " has zero variance");
    }
  }
  return s;
}

NormalizationStats fit_normalization(const Dataset& train) { return fit_normalization(train.features); }

Eigen::MatrixXd apply_normalization(const NormalizationStats& stats, const Eigen::MatrixXd& x) {
  if (x.cols() != stats.mean.size()) {
    throw InvalidInput("dimension mismatch: data has " + std::to_string(x.cols()) +
                       " features, normalization has " + std::to_string(stats.mean.size()));
  }
  return (x.rowwise() - stats.mean.transpose()).array().rowwise() /
         stats.stddev.transpose().array();
}

Dataset apply_normalization(const NormalizationStats& stats, const Dataset& data) {
  Dataset out = data;
  out.features = apply_normalization(stats, data.features);
  return out;
}

Eigen::MatrixXd invert_normalization(const NormalizationStats& stats, const Eigen::MatrixXd& z) {
  if (z.cols() != stats.mean.size()) throw InvalidInput("dimension mismatch");
  Eigen::MatrixXd out = z.array().rowwise() * stats.stddev.transpose().array();
  return out.rowwise() + stats.mean.transpose();
}

SplitResult split(const Dataset& data, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0) || !(train_fraction < 1.0)) {
    throw InvalidInput("train fraction must be in (0, 1)");
  }
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> validation_rows;
  const auto classes = data.distinct_labels();
  for (std::size_t k = 0; k < classes.size(); ++k) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < data.rows(); ++i) {
      if (data.labels[i] == classes[k]) rows.push_back(i);
    }
    if (rows.size() < 2) throw InvalidInput("class " + classes[k] + " has fewer than 2 samples");
    std::mt19937_64 rng(derive_seed(seed, k));
    std::shuffle(rows.begin(), rows.end(), rng);
    auto n_train = static_cast<std::size_t>(
        std::floor(train_fraction * static_cast<double>(rows.size()) + 1.0e-9));
    n_train = std::clamp<std::size_t>(n_train, 1, rows.size() - 1);
    train_rows.insert(train_rows.end(), rows.begin(), rows.begin() + static_cast<long>(n_train));
    validation_rows.insert(validation_rows.end(), rows.begin() + static_cast<long>(n_train),
                           rows.end());
  }
  std::sort(train_rows.begin(), train_rows.end());
  std::sort(validation_rows.begin(), validation_rows.end());
  return {data.subset(train_rows), data.subset(validation_rows)};
}

std::filesystem::path sidecar_path(const std::filesystem::path& csv_path) {
  auto p = csv_path;
  p += ".meta.json";
  return p;
}

void save(const Dataset& data, const std::filesystem::path& path) {
  if (data.feature_names.size() != data.feature_count()) {
    throw InvalidInput("feature names do not match feature count");
  }
  std::string text;
  for (const auto& name : data.feature_names) text += name + ",";
  text += "label\n";
  for (std::size_t i = 0; i < data.rows(); ++i) {
    for (Eigen::Index c = 0; c < data.features.cols(); ++c) {
      text += format_sci17(data.features(static_cast<Eigen::Index>(i), c));
      text += ',';
    }
    text += data.labels[i];
    text += '\n';
  }
  json meta{{"format", "dtwin-dataset"}, {"version", kFormatVersion}};
  if (data.config) {
    meta["config"] = *data.config;
    meta["master_seed"] = data.config->master_seed;
    meta["config_digest"] = config_digest(*data.config);
  } else {
    meta["config"] = nullptr;
  }
  write_file_atomic(path, text);
  write_file_atomic(sidecar_path(path), meta.dump(2) + "\n");
}

Dataset load(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || split_csv_line(line).size() < 2) {
    throw InvalidInput(path.string() + ": empty or missing header");
  }
  const auto header = split_csv_line(line);
  if (header.back() != "label") throw InvalidInput(path.string() + ": last column must be label");
  const auto dofs = parse_sensor_header(header);

  std::vector<double> values;
  Dataset out;
  std::size_t row = 0;
  while (std::getline(is, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      throw InvalidInput(path.string() + ": row " + std::to_string(row) + " has " +
                         std::to_string(fields.size()) + " columns, expected " +
                         std::to_string(header.size()));
    }
    const std::string context = path.string() + ": row " + std::to_string(row);
    for (std::size_t c = 0; c + 1 < fields.size(); ++c) {
      const double v = parse_double(fields[c], context);
      if (!std::isfinite(v)) throw InvalidInput(context + ": non-finite value");
      values.push_back(v);
    }
    if (fields.back().empty()) throw InvalidInput(context + ": empty label");
    out.labels.push_back(fields.back());
  }
  if (out.labels.empty()) throw InvalidInput(path.string() + ": dataset has no rows");

  const auto cols = static_cast<Eigen::Index>(dofs.size());
  out.features = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                                 Eigen::RowMajor>>(
      values.data(), static_cast<Eigen::Index>(out.labels.size()), cols);
  out.feature_names.assign(header.begin(), header.end() - 1);

  const auto meta_path = sidecar_path(path);
  if (!std::filesystem::exists(meta_path)) {
    spdlog::warn("{}: no sidecar {}, generation config unknown", path.string(), meta_path.string());
    return out;
  }
  json meta;
  try {
    meta = json::parse(read_file(meta_path));
  } catch (const json::exception& e) {
    throw InvalidInput(meta_path.string() + ": malformed JSON: " + e.what());
  }
  if (meta.contains("config") && !meta.at("config").is_null()) {
    GenerationConfig config;
    try {
      config = meta.at("config").get<GenerationConfig>();
    } catch (const json::exception& e) {
      throw InvalidInput(meta_path.string() + ": " + e.what());
    }
    if (config.sensor_dofs != dofs) {
      throw InvalidInput(path.string() + ": header/config mismatch (sensor columns differ)");
    }
    out.config = std::move(config);
  }
  return out;
}

}  // namespace dtwin
