#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "dtwin/dataset.hpp"
#include "dtwin/error.hpp"
#include "dtwin/io.hpp"

using namespace dtwin;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("dtwin_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

const Dataset& reference_data() {
  static const Dataset data = generate(GenerationConfig{});
  return data;
}

}  // namespace

TEST_SUITE("dataset") {
  TEST_CASE("default config is balanced") {
    const auto& d = reference_data();
    CHECK(d.features.rows() == 1800);
    CHECK(d.features.cols() == 6);
    CHECK(d.feature_names == std::vector<std::string>{"sensor_1", "sensor_2", "sensor_3", "sensor_4",
                                                      "sensor_5", "sensor_6"});
    const auto labels = d.distinct_labels();
    CHECK(labels == std::vector<std::string>{"healthy", "d1", "d2", "d3", "d4", "d5"});
    for (const auto& l : labels) CHECK(std::count(d.labels.begin(), d.labels.end(), l) == 300);
    CHECK(d.features.allFinite());
    CHECK(d.features.minCoeff() >= 0.0);
  }

  TEST_CASE("degenerate randomness reproduces the deterministic FRF") {
    GenerationConfig c;
    c.scenarios = {DamageScenario::healthy()};
    c.samples_per_scenario = 5;
    c.noise_sigma = 0.0;
    c.uncertainty.bound_fraction = 0.0;
    c.damage_fluctuation = false;
    c.frequency_fluctuation = false;
    const auto d = generate(c);
    const auto sys = build_lumped(c.model, apply_damage(DamageScenario::healthy(), c.model.stiffness));
    const auto u = harmonic_response(sys, c.model.damping, c.excitation, c.excitation_frequency_hz);
    for (Eigen::Index r = 0; r < d.features.rows(); ++r) {
      for (Eigen::Index j = 0; j < 6; ++j) CHECK(d.features(r, j) == std::abs(u(j)));
    }
  }

  TEST_CASE("spring-1 damage separates from healthy along the discriminant direction") {
    // Parameter uncertainty dominates each sensor on its own; the classes
    // separate jointly. Fisher separation sqrt(dm' S^-1 dm) with pooled S.
    const auto& d = reference_data();
    auto rows_of = [&](const std::string& label) {
      std::vector<Eigen::Index> idx;
      for (std::size_t i = 0; i < d.rows(); ++i) {
        if (d.labels[i] == label) idx.push_back(static_cast<Eigen::Index>(i));
      }
      return Eigen::MatrixXd(d.features(idx, Eigen::all));
    };
    const Eigen::MatrixXd h = rows_of("healthy");
    const Eigen::MatrixXd d1 = rows_of("d1");
    auto centered = [](const Eigen::MatrixXd& x) { return Eigen::MatrixXd(x.rowwise() - x.colwise().mean()); };
    const Eigen::MatrixXd ch = centered(h);
    const Eigen::MatrixXd cd = centered(d1);
    const Eigen::MatrixXd pooled =
        (ch.transpose() * ch + cd.transpose() * cd) / static_cast<double>(h.rows() + d1.rows() - 2);
    const Eigen::VectorXd dm = (d1.colwise().mean() - h.colwise().mean()).transpose();
    const double separation = std::sqrt(dm.dot(pooled.ldlt().solve(dm)));
    CHECK(separation > 2.0);
    // Spring-1 damage raises the mean sensor-1 amplitude at this frequency.
    CHECK(dm(0) > 0.0);
  }

  TEST_CASE("normalization on its own fit set") {
    const auto& d = reference_data();
    const auto stats = fit_normalization(d);
    const Eigen::MatrixXd z = apply_normalization(stats, d.features);
    const double n = static_cast<double>(z.rows());
    for (Eigen::Index c = 0; c < z.cols(); ++c) {
      const double m = z.col(c).mean();
      const double s = std::sqrt((z.col(c).array() - m).square().sum() / (n - 1));
      CHECK(std::abs(m) < 1e-12);
      CHECK(std::abs(s - 1.0) < 1e-12);
    }
    const Eigen::MatrixXd back = invert_normalization(stats, z);
    CHECK(((back - d.features).array().abs() / d.features.array().abs().max(1e-300)).maxCoeff() < 1e-12);

    const Eigen::MatrixXd zero = apply_normalization(stats, Eigen::MatrixXd::Zero(2, 6));
    for (Eigen::Index c = 0; c < 6; ++c) CHECK(zero(0, c) == doctest::Approx(-stats.mean(c) / stats.stddev(c)));
  }

  TEST_CASE("normalization rejects degenerate and mismatched input") {
    Eigen::MatrixXd x = Eigen::MatrixXd::Random(10, 3);
    x.col(1).setConstant(4.0);
    CHECK_THROWS_WITH_AS(fit_normalization(x), doctest::Contains("degenerate feature"), InvalidInput);
    const auto stats = fit_normalization(Eigen::MatrixXd(Eigen::MatrixXd::Random(10, 3)));
    CHECK_THROWS_AS(apply_normalization(stats, Eigen::MatrixXd::Zero(2, 4)), InvalidInput);
  }

  TEST_CASE("z-scores are invariant under uniform rescaling") {
    const auto& d = reference_data();
    const Eigen::MatrixXd z1 = apply_normalization(fit_normalization(d.features), d.features);
    const Eigen::MatrixXd scaled = 1e6 * d.features;
    const Eigen::MatrixXd z2 = apply_normalization(fit_normalization(scaled), scaled);
    CHECK((z1 - z2).cwiseAbs().maxCoeff() < 1e-12);
  }

  TEST_CASE("training statistics transfer to validation rows") {
    const auto parts = split(reference_data(), 2.0 / 3.0, 5);
    const auto stats = fit_normalization(parts.train);
    const Eigen::MatrixXd z = apply_normalization(stats, parts.validation.features);
    const double n = static_cast<double>(z.rows());
    // Mixture data: standard error of a column mean is ~1/sqrt(n) in z units;
    // allow 4 of them plus the train-mean sampling error.
    for (Eigen::Index c = 0; c < z.cols(); ++c) CHECK(std::abs(z.col(c).mean()) < 4.0 * std::sqrt(1.0 / n + 1.0 / 1200.0));
  }

  TEST_CASE("stratified split") {
    const auto parts = split(reference_data(), 2.0 / 3.0, 11);
    CHECK(parts.train.rows() == 1200);
    CHECK(parts.validation.rows() == 600);
    for (const auto& l : reference_data().distinct_labels()) {
      CHECK(std::count(parts.train.labels.begin(), parts.train.labels.end(), l) == 200);
      CHECK(std::count(parts.validation.labels.begin(), parts.validation.labels.end(), l) == 100);
    }
    // Disjoint with union equal to the input: compare multisets of rows.
    std::vector<std::vector<double>> all;
    std::vector<std::vector<double>> joined;
    auto rows_of = [](const Dataset& d, std::vector<std::vector<double>>& out) {
      for (Eigen::Index r = 0; r < d.features.rows(); ++r) {
        std::vector<double> v(static_cast<std::size_t>(d.features.cols()));
        for (Eigen::Index c = 0; c < d.features.cols(); ++c) v[static_cast<std::size_t>(c)] = d.features(r, c);
        out.push_back(std::move(v));
      }
    };
    rows_of(reference_data(), all);
    rows_of(parts.train, joined);
    rows_of(parts.validation, joined);
    std::sort(all.begin(), all.end());
    std::sort(joined.begin(), joined.end());
    CHECK(all == joined);

    const auto again = split(reference_data(), 2.0 / 3.0, 11);
    CHECK(again.train.features == parts.train.features);
    CHECK(again.train.labels == parts.train.labels);
    CHECK_THROWS_AS(split(reference_data(), 0.0, 1), InvalidInput);
    CHECK_THROWS_AS(split(reference_data(), 1.0, 1), InvalidInput);
  }

  TEST_CASE("save and load round trip bit-exactly") {
    const auto dir = temp_dir("roundtrip");
    const auto path = dir / "data.csv";
    save(reference_data(), path);
    CHECK(fs::exists(sidecar_path(path)));
    const auto loaded = load(path);
    CHECK(loaded.features.rows() == 1800);
    CHECK((loaded.features.array() == reference_data().features.array()).all());
    CHECK(loaded.labels == reference_data().labels);
    CHECK(loaded.feature_names == reference_data().feature_names);
    REQUIRE(loaded.config.has_value());
    CHECK(config_digest(*loaded.config) == config_digest(GenerationConfig{}));

    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    CHECK(header == "sensor_1,sensor_2,sensor_3,sensor_4,sensor_5,sensor_6,label");
  }

  TEST_CASE("missing sidecar loads with unknown config") {
    const auto dir = temp_dir("nosidecar");
    const auto path = dir / "data.csv";
    save(reference_data().subset({0, 1, 2}), path);
    fs::remove(sidecar_path(path));
    const auto loaded = load(path);
    CHECK(loaded.rows() == 3);
    CHECK_FALSE(loaded.config.has_value());
  }

  TEST_CASE("malformed files") {
    const auto dir = temp_dir("malformed");
    const auto path = dir / "bad.csv";
    write_file_atomic(path, "sensor_1,sensor_2,label\n1.0,2.0,healthy\n1.0,healthy\n");
    CHECK_THROWS_WITH_AS(load(path), doctest::Contains("row 2"), InvalidInput);
    write_file_atomic(path, "");
    CHECK_THROWS_AS(load(path), InvalidInput);
    write_file_atomic(path, "sensor_1,label\n");
    CHECK_THROWS_AS(load(path), InvalidInput);

    // Sidecar config lists other sensors than the header.
    const auto good = dir / "good.csv";
    save(reference_data().subset({0, 1}), good);
    std::string text = read_file(good);
    text.replace(text.find("sensor_6"), 8, "sensor_7");
    write_file_atomic(good, text);
    CHECK_THROWS_AS(load(good), InvalidInput);
  }

  TEST_CASE("generation is deterministic and independent of scheduling") {
    GenerationConfig c;
    c.samples_per_scenario = 40;
    c.master_seed = 77;
    const auto a = generate(c, 1);
    const auto b = generate(c, 4);
    const auto again = generate(c, 3);
    CHECK((a.features.array() == b.features.array()).all());
    CHECK((a.features.array() == again.features.array()).all());
    CHECK(a.labels == b.labels);
    c.master_seed = 78;
    CHECK((generate(c, 2).features.array() != a.features.array()).any());
  }

  TEST_CASE("config JSON round trip and validation") {
    GenerationConfig c;
    c.sensor_dofs = {2, 4, 6};
    c.noise_sigma = 2e-6;
    c.master_seed = 1234567890123ULL;
    nlohmann::json j = c;
    GenerationConfig back = j.get<GenerationConfig>();
    CHECK(config_digest(back) == config_digest(c));
    CHECK(config_digest(back) != config_digest(GenerationConfig{}));

    nlohmann::json bad = c;
    bad["unexpected"] = 1;
    CHECK_THROWS_AS(bad.get<GenerationConfig>(), InvalidInput);
    c.sensor_dofs = {};
    CHECK_THROWS_AS(c.validate(), InvalidInput);
    c = GenerationConfig{};
    c.sensor_dofs = {7};
    CHECK_THROWS_AS(c.validate(), InvalidInput);
    c = GenerationConfig{};
    c.samples_per_scenario = 0;
    CHECK_THROWS_AS(c.validate(), InvalidInput);
  }

  TEST_CASE("sensor subset selects columns") {
    GenerationConfig c;
    c.samples_per_scenario = 10;
    c.sensor_dofs = {2, 5};
    const auto sub = generate(c);
    c.sensor_dofs = {1, 2, 3, 4, 5, 6};
    const auto full = generate(c);
    CHECK(sub.feature_names == std::vector<std::string>{"sensor_2", "sensor_5"});
    // Sensor noise is drawn for all six dofs, so columns agree exactly.
    CHECK((sub.features.col(0).array() == full.features.col(1).array()).all());
    CHECK((sub.features.col(1).array() == full.features.col(4).array()).all());
  }
}
