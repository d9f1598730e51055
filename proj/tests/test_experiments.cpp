#include <doctest.h>

#include <filesystem>
#include <map>

#include "dtwin/error.hpp"
#include "dtwin/experiments.hpp"
#include "dtwin/io.hpp"

using namespace dtwin;

namespace {

constexpr std::uint64_t kSeeds = 10;

double seed_mean(const std::function<double(std::uint64_t)>& f) {
  double sum = 0.0;
  for (std::uint64_t s = 1; s <= kSeeds; ++s) sum += f(s);
  return sum / kSeeds;
}

}  // namespace

TEST_SUITE("experiments") {
  TEST_CASE("reference report is deterministic") {
    const auto a = run_reference(7);
    const auto b = run_reference(7);
    CHECK(report_to_json(a) == report_to_json(b));
    CHECK(a.row("classifier", "qda", "qda").reference);
    const auto& holdout = a.row("holdout", "200/100", "qda");
    CHECK(holdout.runs == 1);
    for (const auto& r : a.records) {
      if (r.protocol == "holdout") {
        REQUIRE(r.confusion.has_value());
        CHECK(r.confusion->total() == 600);
      }
    }
  }

  TEST_CASE("every sweep carries the reference row of run_reference") {
    const std::uint64_t seed = 3;
    const double reference = run_reference(seed).row("classifier", "qda", "qda").accuracy_mean;
    const std::vector<ExperimentReport> sweeps{
        sweep_variations(seed),
        sweep_damage({0.1, 0.2}, seed),
        sweep_uncertainty({0.025, 0.05}, seed),
        sweep_frequency({3000.0, 3800.0}, seed),
        sweep_sensors({{1, 2, 3, 4, 5, 6}, {1, 2, 4, 6}}, seed),
    };
    for (const auto& s : sweeps) {
      std::size_t flagged = 0;
      for (const auto& row : s.summary) {
        if (row.reference) {
          ++flagged;
          CHECK(row.accuracy_mean == reference);
        }
      }
      CHECK(flagged == 1);
    }
    // Grids that omit the reference point still report it.
    const auto damage = sweep_damage({0.1}, seed);
    CHECK(damage.row("damage", "0.2").reference);
  }

  TEST_CASE("record digests regenerate the record") {
    const auto report = sweep_damage({0.15}, 4);
    for (const auto& rec : report.records) {
      const GenerationConfig c = rec.config.get<GenerationConfig>();
      CHECK(config_digest(c) == rec.config_digest);
      const auto again = cv_record(c, rec.parameter, rec.value);
      CHECK(again.accuracy == rec.accuracy);
    }
  }

  TEST_CASE("damage sweep is nondecreasing over seed means") {
    const auto levels = default_damage_levels();
    std::vector<double> means(levels.size(), 0.0);
    for (std::uint64_t s = 1; s <= kSeeds; ++s) {
      const auto r = sweep_damage(levels, s);
      for (std::size_t i = 0; i < levels.size(); ++i) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%g", levels[i]);
        means[i] += r.row("damage", buf).accuracy_mean / kSeeds;
      }
    }
    for (std::size_t i = 1; i < means.size(); ++i) CHECK(means[i] >= means[i - 1]);
  }

  TEST_CASE("removing noise and parameter uncertainty does not lower accuracy") {
    const double reference = seed_mean([](std::uint64_t s) { return cv_record(reference_config(s), "x", "x").accuracy; });
    const double clean = seed_mean([](std::uint64_t s) {
      auto c = reference_config(s);
      c.noise_sigma = 0.0;
      c.uncertainty.bound_fraction = 0.0;
      return cv_record(c, "x", "x").accuracy;
    });
    CHECK(clean >= reference);
  }

  TEST_CASE("frequency sweep peaks next to the second and third modes") {
    const std::vector<double> grid{3500, 4000, 4500, 6000, 6500, 7000};
    std::map<double, double> mean;
    for (std::uint64_t s = 1; s <= kSeeds; ++s) {
      const auto r = sweep_frequency(grid, s);
      for (double f : grid) mean[f] += r.row("frequency_hz", std::to_string(static_cast<int>(f))).accuracy_mean / kSeeds;
    }
    CHECK(mean[4000] > mean[3500]);
    CHECK(mean[4000] > mean[4500]);
    CHECK(mean[6500] > mean[6000]);
    CHECK(mean[6500] > mean[7000]);
  }

  TEST_CASE("single repetition has no coefficient of variation") {
    const auto r = sample_size_study({90}, 1, 5);
    const auto& row = r.row("total_points", "90");
    CHECK(row.runs == 1);
    CHECK_FALSE(row.accuracy_cov.has_value());
    const auto two = sample_size_study({90}, 2, 5);
    CHECK(two.row("total_points", "90").accuracy_cov.has_value());
  }

  TEST_CASE("matched generalization equals the reference run") {
    const auto g = generalization_study({3800}, {3800}, 2);
    CHECK(g.row("matched", "3800").accuracy_mean == run_reference(2).row("classifier", "qda", "qda").accuracy_mean);
  }

  TEST_CASE("summaries and reports") {
    std::vector<RunRecord> records(3);
    const double acc[] = {0.8, 0.9, 1.0};
    for (int i = 0; i < 3; ++i) {
      records[static_cast<std::size_t>(i)].parameter = "p";
      records[static_cast<std::size_t>(i)].value = "v";
      records[static_cast<std::size_t>(i)].accuracy = acc[i];
    }
    const auto s = summarize(records);
    REQUIRE(s.size() == 1);
    CHECK(s[0].accuracy_mean == doctest::Approx(0.9));
    CHECK(*s[0].accuracy_cov == doctest::Approx(0.1 / 0.9));

    ExperimentReport a{"x", 1, {records[0]}, {}, {}};
    ExperimentReport b{"x", 2, {records[1], records[2]}, {}, {}};
    const auto merged = merge_reports({a, b});
    CHECK(merged.row("p", "v").runs == 3);
    CHECK_THROWS((void)merged.row("p", "missing"));

    const auto dir = std::filesystem::temp_directory_path() / "dtwin_test_reports";
    std::filesystem::remove_all(dir);
    const auto report = sweep_damage({0.2}, 9);
    const auto path = write_report(report, dir);
    CHECK(path.filename() == "damage_seed9.json");
    const std::string csv = read_file(dir / "damage_seed9.csv");
    CHECK(csv.rfind("experiment,parameter,value,classifier,reference,runs,accuracy_mean,accuracy_cov\n", 0) == 0);
    const std::string first = read_file(path);
    write_report(sweep_damage({0.2}, 9), dir);
    CHECK(read_file(path) == first);
  }
}
