#include "cli.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include "dtwin/classify.hpp"
#include "dtwin/dataset.hpp"
#include "dtwin/error.hpp"
#include "dtwin/experiments.hpp"
#include "dtwin/io.hpp"
#include "dtwin/physical_twin.hpp"

namespace dtwin::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

const std::vector<std::string> kModels{"lumped", "fem"};
const std::vector<std::string> kClassifiers{"qda", "lda", "knn", "tree"};
const std::vector<std::string> kSweeps{"reference", "variations",     "damage",    "uncertainty",
                                       "frequency", "sensors", "generalization", "samplesize"};

fs::path default_output_dir() {
  if (const char* env = std::getenv("DTWIN_OUTPUT_DIR"); env != nullptr && *env != '\0') return env;
  return "results";
}

json read_json_file(const fs::path& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw InvalidInput(path.string() + ": malformed JSON: " + e.what());
  }
}

GenerationConfig read_generation_config(const std::string& path) {
  if (path.empty()) return GenerationConfig{};
  try {
    return read_json_file(path).get<GenerationConfig>();
  } catch (const json::exception& e) {
    throw InvalidInput(path + ": " + e.what());
  }
}

BarProperties read_bar_config(const std::string& path) {
  BarProperties p;
  if (path.empty()) return p;
  const json j = read_json_file(path);
  if (!j.is_object()) throw InvalidInput(path + ": bar config must be a JSON object");
  const std::map<std::string, std::function<void(const json&)>> fields{
      {"density", [&](const json& v) { p.density = v.get<double>(); }},
      {"elastic_modulus", [&](const json& v) { p.elastic_modulus = v.get<double>(); }},
      {"area", [&](const json& v) { p.area = v.get<double>(); }},
      {"length", [&](const json& v) { p.length = v.get<double>(); }},
      {"element_count", [&](const json& v) { p.element_count = v.get<std::size_t>(); }},
      {"alpha0", [&](const json& v) { p.damping.alpha0 = v.get<double>(); }},
      {"beta0", [&](const json& v) { p.damping.beta0 = v.get<double>(); }},
  };
  for (const auto& [key, value] : j.items()) {
    const auto it = fields.find(key);
    if (it == fields.end()) throw InvalidInput(path + ": unknown key '" + key + "' in bar config");
    try {
      it->second(value);
    } catch (const json::exception& e) {
      throw InvalidInput(path + ": key '" + key + "': " + e.what());
    }
  }
  p.validate();
  return p;
}

struct SystemOptions {
  std::string model = "lumped";
  std::string config;
  std::string damage = "healthy";
  double severity = 0.20;
};

struct Structure {
  SystemMatrices system;
  RayleighDamping damping;
};

Structure build_structure(const SystemOptions& o) {
  if (o.model == "fem") {
    if (o.damage != "healthy") throw InvalidInput("--damage applies to the lumped model only");
    const auto bar = read_bar_config(o.config);
    return {assemble_bar(bar), bar.damping};
  }
  const auto config = read_generation_config(o.config);
  const auto scenario = DamageScenario::from_label(o.damage, o.severity);
  return {build_lumped(config.model, apply_damage(scenario, config.model.stiffness)),
          config.model.damping};
}

void add_system_options(CLI::App* cmd, SystemOptions& o) {
  cmd->add_option("--model", o.model, "Structure: lumped (6-dof chain) or fem (40-element bar)")
      ->check(CLI::IsMember(kModels));
  cmd->add_option("--config", o.config,
                  "JSON config: generation config (lumped, uses its model section) or bar "
                  "properties (fem)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--damage", o.damage, "Lumped scenario: healthy or d1..d5");
  cmd->add_option("--severity", o.severity, "Damage severity in (0, 1) for --damage d<i>");
}

/// Emits to path atomically, or to out when path is empty.
void emit(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty()) {
    out << text;
  } else {
    write_file_atomic(path, text);
  }
}

int cmd_modal(const SystemOptions& o, const std::string& out_path, std::ostream& out) {
  const auto s = build_structure(o);
  const auto modes = modal_analysis(s.system, s.damping);
  std::ostringstream csv;
  csv << "mode,frequency_hz,damping_ratio\n";
  for (std::size_t i = 0; i < modes.natural_frequencies_hz.size(); ++i) {
    csv << (i + 1) << ',' << format_sci17(modes.natural_frequencies_hz[i]) << ','
        << format_sci17(modes.damping_ratios[i]) << '\n';
  }
  emit(out_path, csv.str(), out);
  if (!out_path.empty()) {
    out << "wrote " << modes.natural_frequencies_hz.size() << " modes of the " << o.model
        << " model to " << out_path << '\n';
  }
  return kExitOk;
}

struct FrfOptions {
  std::optional<std::size_t> force_dof;
  double force_n = 1.0e4;
  double fmin = 0.0;
  double fmax = 8000.0;
  std::size_t steps = 801;
  double noise_sigma = 0.0;
  std::uint64_t seed = 1;
  std::string out;
};

int cmd_frf(const SystemOptions& so, const FrfOptions& o, std::ostream& out) {
  const auto s = build_structure(so);
  const std::size_t n = s.system.dof_count();
  const HarmonicLoad load{o.force_dof.value_or(n), o.force_n};
  if (!(o.noise_sigma >= 0.0)) throw InvalidInput("--noise-sigma must be non-negative");
  const auto grid = linear_grid(o.fmin, o.fmax, o.steps);
  const auto frf = frf_solve(s.system, s.damping, load, grid);
  const bool noisy = o.noise_sigma > 0.0;
  Eigen::MatrixXd noise;
  if (noisy) noise = add_magnitude_noise(frf, MeasurementNoise{o.noise_sigma, o.seed});

  std::ostringstream csv;
  csv << "frequency_hz";
  for (std::size_t d = 1; d <= n; ++d) {
    csv << ",u" << d << "_real,u" << d << "_imag,u" << d << "_mag";
    if (noisy) csv << ",u" << d << "_noisy";
  }
  csv << '\n';
  for (std::size_t i = 0; i < grid.size(); ++i) {
    csv << format_sci17(grid[i]);
    for (std::size_t d = 0; d < n; ++d) {
      const auto u = frf.response[i](static_cast<Eigen::Index>(d));
      csv << ',' << format_sci17(u.real()) << ',' << format_sci17(u.imag()) << ','
          << format_sci17(std::abs(u));
      if (noisy) csv << ',' << format_sci17(noise(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)));
    }
    csv << '\n';
  }
  emit(o.out, csv.str(), out);
  if (!o.out.empty()) out << "wrote " << grid.size() << " frequency points to " << o.out << '\n';
  return kExitOk;
}

struct GenerateOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> samples;
  std::size_t threads = 0;
  std::string out;
};

int cmd_generate(const GenerateOptions& o, std::ostream& out) {
  auto config = read_generation_config(o.config);
  if (o.seed) config.master_seed = *o.seed;
  if (o.samples) config.samples_per_scenario = *o.samples;
  config.validate();
  const auto data = generate(config, o.threads);
  save(data, o.out);
  out << "wrote " << data.rows() << " rows x " << data.feature_count() << " features to " << o.out
      << " (config " << config_digest(config) << ")\n";
  return kExitOk;
}

int cmd_train(const std::string& data_path, const std::string& kind_name, const std::string& out_path,
              std::ostream& out) {
  const auto data = load(data_path);
  const auto kind = parse_classifier_kind(kind_name);
  const auto model = fit(kind, data);
  save_model(model, out_path, data.config ? config_digest(*data.config) : "");
  out << "trained " << kind_name << " on " << data.rows() << " rows, " << classes_of(model).size()
      << " classes -> " << out_path << '\n';
  return kExitOk;
}

int cmd_crossval(const std::string& data_path, const std::string& kind_name, std::size_t folds,
                 std::uint64_t seed, std::ostream& out) {
  const auto data = load(data_path);
  const auto cv = cross_validate(data, folds, parse_classifier_kind(kind_name), seed);
  out << "fold,accuracy\n";
  for (std::size_t f = 0; f < cv.fold_accuracy.size(); ++f) {
    out << (f + 1) << ',' << format_sci17(cv.fold_accuracy[f]) << '\n';
  }
  out << "mean," << format_sci17(cv.mean_accuracy) << '\n';
  return kExitOk;
}

int cmd_evaluate(const std::string& model_path, const std::string& data_path,
                 const std::string& out_path, std::ostream& out) {
  const auto model = load_model(model_path);
  const auto data = load(data_path);
  const auto e = evaluate(model, data);
  const std::string csv = confusion_to_csv(e.confusion);
  if (out_path.empty()) {
    out << csv;
  } else {
    write_file_atomic(out_path, csv);
  }
  out << "accuracy " << format_sci17(e.accuracy) << " on " << data.rows() << " rows";
  if (e.false_positive_rate) out << ", false positive rate " << format_sci17(*e.false_positive_rate);
  out << '\n';
  return kExitOk;
}

struct SweepOptions {
  std::string name;
  std::uint64_t seed = 1;
  std::size_t repeats = 1;
  std::size_t repetitions = 100;
  std::vector<std::size_t> points{90, 450, 900, 1800};
  std::string out;
};

ExperimentReport run_sweep(const SweepOptions& o, std::uint64_t seed) {
  if (o.name == "reference") return run_reference(seed);
  if (o.name == "variations") return sweep_variations(seed);
  if (o.name == "damage") return sweep_damage(default_damage_levels(), seed);
  if (o.name == "uncertainty") return sweep_uncertainty(default_uncertainty_bounds(), seed);
  if (o.name == "frequency") return sweep_frequency(default_sweep_frequencies(), seed);
  if (o.name == "sensors") return sweep_sensors(default_sensor_subsets(), seed);
  if (o.name == "generalization") {
    const std::vector<double> f{3600.0, 3800.0, 4000.0};
    return generalization_study(f, f, seed);
  }
  return sample_size_study(o.points, o.repetitions, seed);
}

int cmd_sweep(const SweepOptions& o, std::ostream& out) {
  if (o.repeats < 1) throw InvalidInput("--repeats must be >= 1");
  std::vector<ExperimentReport> reports;
  for (std::size_t r = 0; r < o.repeats; ++r) reports.push_back(run_sweep(o, o.seed + r));
  const auto report = o.repeats == 1 ? reports.front() : merge_reports(reports);
  const fs::path dir = o.out.empty() ? default_output_dir() : fs::path(o.out);
  const auto path = write_report(report, dir);
  out << "wrote " << report.records.size() << " records, " << report.summary.size()
      << " summary rows to " << path.string() << '\n';
  return kExitOk;
}

int cmd_diagnose(const std::string& model_path, const std::string& input_path, std::ostream& out) {
  const auto model = load_model(model_path);
  const auto& classes = classes_of(model);
  const auto expected = static_cast<std::size_t>(normalization_of(model).mean.size());

  std::istringstream in(read_file(input_path));
  std::string line;
  std::size_t line_no = 0;
  std::size_t row = 0;
  bool warned = false;
  std::ostringstream csv;
  csv << "row,label,warning";
  for (const auto& c : classes) csv << ",p_" << c;
  csv << '\n';
  while (std::getline(in, line)) {
    ++line_no;
    const auto fields = split_csv_line(line);
    if (fields.empty() || (fields.size() == 1 && fields[0].empty())) continue;
    const std::string context = input_path + ": line " + std::to_string(line_no);
    if (row == 0 && line_no == 1 && fields[0].rfind("sensor_", 0) == 0) continue;
    if (fields.size() != expected) {
      throw InvalidInput(context + " has " + std::to_string(fields.size()) + " values, model expects " +
                         std::to_string(expected));
    }
    Eigen::VectorXd x(static_cast<Eigen::Index>(expected));
    for (std::size_t j = 0; j < expected; ++j) x(static_cast<Eigen::Index>(j)) = parse_double(fields[j], context);
    const auto p = predict(model, x);
    const bool warning = p.label != "healthy";
    warned = warned || warning;
    ++row;
    csv << row << ',' << p.label << ',' << (warning ? 1 : 0);
    for (Eigen::Index k = 0; k < p.posterior.size(); ++k) csv << ',' << format_sci17(p.posterior(k));
    csv << '\n';
  }
  if (row == 0) throw InvalidInput(input_path + ": no signal rows");
  out << csv.str();
  return warned ? kExitWarning : kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Damage-detection digital twin for an axially vibrating structure"};
  app.name("dtwin");
  app.require_subcommand(1, 1);
  app.option_defaults()->always_capture_default();

  SystemOptions modal_sys;
  std::string modal_out;
  auto* modal = app.add_subcommand("modal", "Natural frequencies and damping ratios");
  add_system_options(modal, modal_sys);
  modal->add_option("--out", modal_out, "CSV output path (stdout when empty)");

  SystemOptions frf_sys;
  FrfOptions frf_opt;
  auto* frf = app.add_subcommand("frf", "Harmonic response over a frequency grid");
  add_system_options(frf, frf_sys);
  frf->add_option("--force-dof", frf_opt.force_dof, "Loaded dof, 1-based (default: last dof)");
  frf->add_option("--force-n", frf_opt.force_n, "Force amplitude (N)");
  frf->add_option("--fmin", frf_opt.fmin, "First frequency (Hz)");
  frf->add_option("--fmax", frf_opt.fmax, "Last frequency (Hz)");
  frf->add_option("--steps", frf_opt.steps, "Number of grid points (>= 2)");
  frf->add_option("--noise-sigma", frf_opt.noise_sigma, "Magnitude noise standard deviation (m)");
  frf->add_option("--seed", frf_opt.seed, "Noise seed");
  frf->add_option("--out", frf_opt.out, "CSV output path (stdout when empty)");

  GenerateOptions gen_opt;
  auto* gen = app.add_subcommand("generate", "Generate a labeled dataset");
  gen->add_option("--config", gen_opt.config, "Generation config JSON (defaults when omitted)")
      ->check(CLI::ExistingFile);
  gen->add_option("--seed", gen_opt.seed, "Override master_seed");
  gen->add_option("--samples", gen_opt.samples, "Override samples_per_scenario");
  gen->add_option("--threads", gen_opt.threads, "Worker threads (0 = hardware concurrency)");
  gen->add_option("--out", gen_opt.out, "Dataset CSV path; a .meta.json sidecar is written next to it")
      ->required();

  std::string train_data;
  std::string train_kind = "qda";
  std::string train_out;
  auto* train = app.add_subcommand("train", "Fit a classifier on a dataset");
  train->add_option("--data", train_data, "Dataset CSV")->required()->check(CLI::ExistingFile);
  train->add_option("--classifier", train_kind, "qda, lda, knn or tree")->check(CLI::IsMember(kClassifiers));
  train->add_option("--out", train_out, "Model JSON path")->required();

  std::string cv_data;
  std::string cv_kind = "qda";
  std::size_t cv_folds = kCvFolds;
  std::uint64_t cv_seed = 1;
  auto* cv = app.add_subcommand("crossval", "Stratified k-fold cross-validation");
  cv->add_option("--data", cv_data, "Dataset CSV")->required()->check(CLI::ExistingFile);
  cv->add_option("--classifier", cv_kind, "qda, lda, knn or tree")->check(CLI::IsMember(kClassifiers));
  cv->add_option("--folds", cv_folds, "Number of folds (>= 2)");
  cv->add_option("--seed", cv_seed, "Fold assignment seed");

  std::string eval_model;
  std::string eval_data;
  std::string eval_out;
  auto* eval = app.add_subcommand("evaluate", "Confusion matrix of a model on a dataset");
  eval->add_option("--model", eval_model, "Model JSON")->required()->check(CLI::ExistingFile);
  eval->add_option("--data", eval_data, "Dataset CSV")->required()->check(CLI::ExistingFile);
  eval->add_option("--out", eval_out, "Confusion CSV path (stdout when empty)");

  SweepOptions sweep_opt;
  auto* sweep = app.add_subcommand("sweep", "Run a scripted experiment and write JSON and CSV reports");
  sweep->add_option("--name", sweep_opt.name, "Experiment")->required()->check(CLI::IsMember(kSweeps));
  sweep->add_option("--seed", sweep_opt.seed, "Master seed");
  sweep->add_option("--repeats", sweep_opt.repeats, "Run seeds seed..seed+repeats-1 and merge");
  sweep->add_option("--repetitions", sweep_opt.repetitions, "samplesize: datasets per grid point");
  sweep->add_option("--points", sweep_opt.points, "samplesize: total point grid");
  sweep->add_option("--out", sweep_opt.out, "Report directory (default: $DTWIN_OUTPUT_DIR or ./results)");

  std::string diag_model;
  std::string diag_input;
  auto* diag = app.add_subcommand("diagnose",
                                  "Classify raw sensor rows; exit 4 when any row is flagged as damaged");
  diag->add_option("--model", diag_model, "Model JSON")->required()->check(CLI::ExistingFile);
  diag->add_option("--input", diag_input, "CSV of raw sensor magnitudes, one signal per row")
      ->required()
      ->check(CLI::ExistingFile);

  std::vector<const char*> argv{"dtwin"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*modal) return cmd_modal(modal_sys, modal_out, out);
    if (*frf) return cmd_frf(frf_sys, frf_opt, out);
    if (*gen) return cmd_generate(gen_opt, out);
    if (*train) return cmd_train(train_data, train_kind, train_out, out);
    if (*cv) return cmd_crossval(cv_data, cv_kind, cv_folds, cv_seed, out);
    if (*eval) return cmd_evaluate(eval_model, eval_data, eval_out, out);
    if (*sweep) return cmd_sweep(sweep_opt, out);
    if (*diag) return cmd_diagnose(diag_model, diag_input, out);
  } catch (const InvalidInput& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const json::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitNumerical;
  }
  return kExitConfig;
}

}  // namespace dtwin::cli
