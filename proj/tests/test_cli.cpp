#include <doctest.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <sstream>

#include "cli.hpp"
#include "dtwin/dataset.hpp"
#include "dtwin/io.hpp"
#include "dtwin/lumped_model.hpp"

using namespace dtwin;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = cli::run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path work_dir() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() / "dtwin_test_cli";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string path(const std::string& name) { return (work_dir() / name).string(); }

std::vector<std::vector<double>> parse_csv_body(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    std::vector<double> row;
    for (const auto& f : split_csv_line(line)) row.push_back(parse_double(f, "test"));
    rows.push_back(row);
  }
  return rows;
}

/// Trained QDA on the default dataset, shared by the diagnose tests.
const std::string& trained_model() {
  static const std::string model = [] {
    REQUIRE(run({"generate", "--out", path("shared.csv")}).code == 0);
    REQUIRE(run({"train", "--data", path("shared.csv"), "--out", path("shared_model.json")}).code == 0);
    return path("shared_model.json");
  }();
  return model;
}

std::string nominal_signal(const DamageScenario& scenario) {
  const LumpedParameters p;
  const auto sys = build_lumped(p, apply_damage(scenario, p.stiffness));
  const auto u = harmonic_response(sys, p.damping, HarmonicLoad{6, 1e4}, 3800.0);
  std::string line;
  for (Eigen::Index i = 0; i < 6; ++i) line += (i ? "," : "") + format_sci17(std::abs(u(i)));
  return line + "\n";
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("modal reports the leading modes") {
    const auto lumped = run({"modal", "--model", "lumped"});
    REQUIRE(lumped.code == 0);
    const auto rows = parse_csv_body(lumped.out);
    REQUIRE(rows.size() == 6);
    const double expected[] = {1358, 3999, 6398};
    for (int i = 0; i < 3; ++i) CHECK(std::abs(rows[i][1] - expected[i]) / expected[i] < 0.005);

    const auto fem = run({"modal", "--model", "fem", "--out", path("fem_modes.csv")});
    REQUIRE(fem.code == 0);
    const auto fem_rows = parse_csv_body(read_file(path("fem_modes.csv")));
    CHECK(fem_rows.size() == 40);
    const double fem_expected[] = {1293, 3881, 6476};
    for (int i = 0; i < 3; ++i) CHECK(std::abs(fem_rows[i][1] - fem_expected[i]) / fem_expected[i] < 0.005);

    CHECK(run({"modal", "--model", "beam"}).code == 2);
  }

  TEST_CASE("bad configs exit with code 2") {
    write_file_atomic(path("bad.json"), "{\"noise_sigma\": -1}");
    CHECK(run({"modal", "--model", "lumped", "--config", path("bad.json")}).code == 2);
    write_file_atomic(path("typo.json"), "{\"densty\": 1}");
    CHECK(run({"modal", "--model", "fem", "--config", path("typo.json")}).code == 2);
    write_file_atomic(path("broken.json"), "{");
    CHECK(run({"generate", "--config", path("broken.json"), "--out", path("x.csv")}).code == 2);
    CHECK(run({"generate", "--config", path("missing.json"), "--out", path("x.csv")}).code == 2);
    CHECK(run({}).code == 2);
    CHECK(run({"modal", "frf"}).code == 2);
  }

  TEST_CASE("frf output format and peaks") {
    const auto r = run({"frf", "--model", "lumped", "--force-dof", "6", "--force-n", "1e4", "--fmin", "0",
                        "--fmax", "8000", "--steps", "8001"});
    REQUIRE(r.code == 0);
    CHECK(r.out.rfind("frequency_hz,u1_real,u1_imag,u1_mag,u2_real", 0) == 0);
    const auto rows = parse_csv_body(r.out);
    REQUIRE(rows.size() == 8001);
    REQUIRE(rows[0].size() == 1 + 3 * 6);
    std::vector<double> peaks;
    const std::size_t col = 1 + 3 * 5 + 2;
    for (std::size_t i = 1; i + 1 < rows.size(); ++i) {
      if (rows[i][col] > rows[i - 1][col] && rows[i][col] > rows[i + 1][col]) peaks.push_back(rows[i][0]);
    }
    REQUIRE(peaks.size() >= 3);
    // Damped peaks sit below the natural frequency by at most ~0.4%.
    const double expected[] = {1357.6, 3993.9, 6398.0};
    for (int i = 0; i < 3; ++i) CHECK(std::abs(peaks[static_cast<std::size_t>(i)] - expected[i]) < 0.005 * expected[i]);

    CHECK(run({"frf", "--steps", "1"}).code == 2);
    CHECK(run({"frf", "--fmin", "10", "--fmax", "5"}).code == 2);
    CHECK(run({"frf", "--force-dof", "9"}).code == 2);

    const auto fem = run({"frf", "--model", "fem", "--steps", "11", "--noise-sigma", "5e-4", "--seed", "3"});
    REQUIRE(fem.code == 0);
    const auto fem_rows = parse_csv_body(fem.out);
    CHECK(fem_rows[0].size() == 1 + 4 * 40);
    CHECK(fem.out.find("u40_noisy") != std::string::npos);
    CHECK(run({"frf", "--model", "fem", "--steps", "11", "--noise-sigma", "5e-4", "--seed", "3"}).out == fem.out);
  }

  TEST_CASE("default pipeline runs end to end") {
    const auto start = std::chrono::steady_clock::now();
    const auto g = run({"generate", "--out", path("data.csv")});
    REQUIRE(g.code == 0);
    CHECK(fs::exists(path("data.csv.meta.json")));
    REQUIRE(run({"train", "--data", path("data.csv"), "--classifier", "qda", "--out", path("model.json")}).code == 0);
    const auto e = run({"evaluate", "--model", path("model.json"), "--data", path("data.csv")});
    REQUIRE(e.code == 0);
    CHECK(e.out.rfind("true\\predicted,healthy,d1,d2,d3,d4,d5\n", 0) == 0);
    CHECK(e.out.find("accuracy ") != std::string::npos);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    CHECK(seconds < 60.0);

    const auto cv = run({"crossval", "--data", path("data.csv"), "--classifier", "lda", "--folds", "5"});
    REQUIRE(cv.code == 0);
    CHECK(cv.out.find("mean,") != std::string::npos);
  }

  TEST_CASE("inputs are not modified and outputs are deterministic") {
    REQUIRE(run({"generate", "--seed", "5", "--samples", "30", "--out", path("small.csv")}).code == 0);
    const std::string data = read_file(path("small.csv"));
    const std::string meta = read_file(path("small.csv.meta.json"));
    REQUIRE(run({"generate", "--seed", "5", "--samples", "30", "--out", path("small2.csv")}).code == 0);
    CHECK(read_file(path("small2.csv")) == data);

    REQUIRE(run({"train", "--data", path("small.csv"), "--out", path("small_model.json")}).code == 0);
    const std::string model = read_file(path("small_model.json"));
    REQUIRE(run({"evaluate", "--model", path("small_model.json"), "--data", path("small.csv"), "--out",
                 path("confusion.csv")}).code == 0);
    CHECK(read_file(path("small.csv")) == data);
    CHECK(read_file(path("small.csv.meta.json")) == meta);
    CHECK(read_file(path("small_model.json")) == model);
    CHECK(read_file(path("confusion.csv")).rfind("true\\predicted", 0) == 0);
    for (const auto& entry : fs::directory_iterator(work_dir())) {
      CHECK(entry.path().extension() != ".tmp");
    }
  }

  TEST_CASE("training on an empty CSV fails with code 2") {
    write_file_atomic(path("empty.csv"), "");
    const auto r = run({"train", "--data", path("empty.csv"), "--out", path("m.json")});
    CHECK(r.code == 2);
    CHECK_FALSE(r.err.empty());
    CHECK_FALSE(fs::exists(path("m.json")));
    CHECK(run({"train", "--data", path("nope.csv"), "--out", path("m.json")}).code == 2);
  }

  TEST_CASE("sweep output is reproducible") {
    const auto a = run({"sweep", "--name", "reference", "--seed", "7", "--out", path("sweep_a")});
    const auto b = run({"sweep", "--name", "reference", "--seed", "7", "--out", path("sweep_b")});
    REQUIRE(a.code == 0);
    REQUIRE(b.code == 0);
    for (const char* f : {"reference_seed7.json", "reference_seed7.csv"}) {
      CHECK(read_file(work_dir() / "sweep_a" / f) == read_file(work_dir() / "sweep_b" / f));
    }
    CHECK(run({"sweep", "--name", "bogus"}).code == 2);
  }

  TEST_CASE("sweep honours the output directory variable") {
    const fs::path dir = work_dir() / "env_out";
    ::setenv("DTWIN_OUTPUT_DIR", dir.c_str(), 1);
    const auto r = run({"sweep", "--name", "samplesize", "--points", "90", "--repetitions", "2", "--seed", "3"});
    ::unsetenv("DTWIN_OUTPUT_DIR");
    REQUIRE(r.code == 0);
    CHECK(fs::exists(dir / "samplesize_seed3.json"));
    CHECK(fs::exists(dir / "samplesize_seed3.csv"));
  }

  TEST_CASE("diagnose flags damage through the exit code") {
    const auto& model = trained_model();
    write_file_atomic(path("healthy.csv"), nominal_signal(DamageScenario::healthy()));
    const auto h = run({"diagnose", "--model", model, "--input", path("healthy.csv")});
    CHECK(h.code == 0);
    CHECK(h.out.find("1,healthy,0,") != std::string::npos);

    write_file_atomic(path("d1.csv"), "sensor_1,sensor_2,sensor_3,sensor_4,sensor_5,sensor_6\n" +
                                          nominal_signal(DamageScenario::healthy()) +
                                          nominal_signal(DamageScenario::damaged(1, 0.2)));
    const auto d = run({"diagnose", "--model", model, "--input", path("d1.csv")});
    CHECK(d.code == 4);
    const auto pos = d.out.find("2,d1,1,");
    REQUIRE(pos != std::string::npos);
    // Posterior of d1 is the fifth value after "row,label,warning".
    std::istringstream line(d.out.substr(pos));
    std::string first;
    std::getline(line, first);
    const auto fields = split_csv_line(first);
    CHECK(parse_double(fields[4], "p_d1") > 0.9);

    write_file_atomic(path("malformed.csv"), "1.0,2.0,abc,4,5,6\n");
    CHECK(run({"diagnose", "--model", model, "--input", path("malformed.csv")}).code == 2);
    write_file_atomic(path("short.csv"), "1.0,2.0\n");
    CHECK(run({"diagnose", "--model", model, "--input", path("short.csv")}).code == 2);
  }

  TEST_CASE("help documents every flag") {
    const std::map<std::string, std::vector<std::string>> flags{
        {"modal", {"--model", "--config", "--damage", "--severity", "--out"}},
        {"frf", {"--model", "--force-dof", "--force-n", "--fmin", "--fmax", "--steps", "--noise-sigma", "--seed", "--out"}},
        {"generate", {"--config", "--seed", "--samples", "--threads", "--out"}},
        {"train", {"--data", "--classifier", "--out"}},
        {"crossval", {"--data", "--classifier", "--folds", "--seed"}},
        {"evaluate", {"--model", "--data", "--out"}},
        {"sweep", {"--name", "--seed", "--repeats", "--repetitions", "--points", "--out"}},
        {"diagnose", {"--model", "--input"}},
    };
    for (const auto& [cmd, names] : flags) {
      const auto r = run({cmd, "--help"});
      CHECK(r.code == 0);
      for (const auto& n : names) CHECK_MESSAGE(r.out.find(n) != std::string::npos, cmd << " " << n);
    }
    const auto frf = run({"frf", "--help"});
    CHECK(frf.out.find("8000") != std::string::npos);
    CHECK(frf.out.find("801") != std::string::npos);
    CHECK(run({"--help"}).code == 0);
  }
}
