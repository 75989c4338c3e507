#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "nvgyro/commands.hpp"
#include "nvgyro/config.hpp"
#include "nvgyro/config_schema.hpp"

using namespace nvgyro;
namespace fs = std::filesystem;

namespace {

const char* kMinimal = R"(lambda:
  kappa_hz: 500000
  gamma_hz: 330000
  gamma_n_hz: 80
)";

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

fs::path scratch_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("nvgyro_test_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(NVGYRO_CLI) + " " + args + " >/dev/null 2>&1";
  const int st = std::system(cmd.c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

}  // namespace

TEST_SUITE("cli-io") {
  TEST_CASE("minimal config fills defaults") {
    const RunConfig c = parse_config(kMinimal);
    CHECK(c.lambda.kappa_c == doctest::Approx(kTwoPi * 5e5));
    CHECK(c.cooperativity == 20.0);
  }

  TEST_CASE("unknown key names its position") {
    const std::string text = std::string(kMinimal) + "  kappa_typo_hz: 3\n";
    CHECK_THROWS_WITH_AS(parse_config(text, "run.yaml"), doctest::Contains("run.yaml:5:"), ConfigError);
    CHECK_THROWS_WITH_AS(parse_config(text, "run.yaml"), doctest::Contains("kappa_typo_hz"), ConfigError);
  }

  TEST_CASE("missing required key is named") {
    CHECK_THROWS_WITH_AS(parse_config("lambda:\n  gamma_hz: 330000\n  gamma_n_hz: 80\n"),
                         doctest::Contains("kappa_hz"), ConfigError);
  }

  TEST_CASE("out-of-range values are rejected") {
    CHECK_THROWS_AS(parse_config(std::string(kMinimal) + "  gamma_p_hz: -3\n"), ConfigError);
    CHECK_THROWS_AS(parse_config(std::string(kMinimal) + "sweep:\n  fd_step_hz: [1, 2]\n"), ConfigError);
  }

  TEST_CASE("shipped default config round-trips") {
    const std::string file = slurp(fs::path(NVGYRO_SOURCE_DIR) / "configs" / "default.yaml");
    CHECK(file == default_config_yaml());
    const RunConfig a = load_config(std::string(NVGYRO_SOURCE_DIR) + "/configs/default.yaml");
    CHECK(render_config(a, true) == render_config(parse_config(render_config(a, true)), true));
  }

  TEST_CASE("grids") {
    GridSpec lin{-1.0, 1.0, 5, false};
    CHECK(lin.values() == std::vector<double>{-1.0, -0.5, 0.0, 0.5, 1.0});
    GridSpec lg{10.0, 1000.0, 3, true};
    const auto v = lg.values(2.0);
    CHECK(v[0] == doctest::Approx(20.0));
    CHECK(v[1] == doctest::Approx(200.0));
    CHECK(v[2] == doctest::Approx(2000.0));
  }

  TEST_CASE("repeated runs write identical files") {
    RunConfig cfg = parse_config(default_config_yaml());
    cfg.spectrum.probe_offset_hz.points = 201;
    cfg.sweep.power_dbm.points = 8;
    cfg.sweep.omega_2_hz.points = 8;
    cfg.vector.trials = 8;
    for (const std::string cmd : {"levels", "spectrum", "sensitivity-map", "vector"}) {
      cfg.out_dir = scratch_dir("det_a").string();
      const auto a = run_command(cmd, cfg);
      const RunConfig before = cfg;
      cfg.out_dir = scratch_dir("det_b").string();
      const auto b = run_command(cmd, cfg);
      REQUIRE(a.files == b.files);
      for (const auto& f : a.files)
        CHECK_MESSAGE(slurp(fs::path(before.out_dir) / f) == slurp(fs::path(cfg.out_dir) / f), cmd << "/" << f);
    }
  }

  TEST_CASE("spectrum output") {
    RunConfig cfg = parse_config(default_config_yaml());
    cfg.spectrum.probe_offset_hz.points = 201;
    cfg.out_dir = scratch_dir("spectrum").string();
    run_command("spectrum", cfg);
    std::istringstream in(slurp(fs::path(cfg.out_dir) / "spectrum.csv"));
    std::string line;
    std::getline(in, line);
    CHECK(line.find("delta_rad_s") != std::string::npos);
    CHECK(line.find("regime") != std::string::npos);
    std::vector<double> delta, intensity, offset;
    while (std::getline(in, line)) {
      std::vector<std::string> f;
      std::stringstream ss(line);
      for (std::string x; std::getline(ss, x, ',');) f.push_back(x);
      offset.push_back(std::stod(f[0]));
      delta.push_back(std::stod(f[1]));
      intensity.push_back(std::stod(f[5]));
    }
    REQUIRE(delta.size() == 201);
    for (std::size_t i = 1; i < delta.size(); ++i) CHECK(delta[i] < delta[i - 1]);
    // Transparency row: the center point beats its neighbours 50 Hz away.
    const std::size_t mid = 100;
    CHECK(offset[mid] == 0.0);
    CHECK(intensity[mid] > intensity[mid - 5]);
    CHECK(intensity[mid] > intensity[mid + 5]);
  }

  TEST_CASE("manifest records the config hash") {
    RunConfig cfg = parse_config(default_config_yaml());
    cfg.out_dir = scratch_dir("manifest").string();
    run_command("levels", cfg);
    const std::string m = slurp(fs::path(cfg.out_dir) / "manifest.json");
    CHECK(m.find("\"config_hash\"") != std::string::npos);
    CHECK(m.find("\"levels.csv\"") != std::string::npos);
    CHECK_THROWS_AS(run_command("no-such-command", cfg), ConfigError);
  }

  TEST_CASE("command line exit codes") {
    const fs::path d = scratch_dir("cli");
    const fs::path bad = d / "bad.yaml";
    std::ofstream(bad) << "lambda:\n  gamma_hz: 330000\n  gamma_n_hz: 80\n";
    CHECK(run_cli("--config " + bad.string() + " --out " + (d / "o").string() + " levels") == 1);
    CHECK(run_cli("--out " + (d / "o").string() + " levels") == 0);
    CHECK(fs::exists(d / "o" / "levels.csv"));
    CHECK(run_cli("--workers -2 levels") == 1);
    CHECK(run_cli("bogus") == 1);
  }
}
