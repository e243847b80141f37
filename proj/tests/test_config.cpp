#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "ibf/config.hpp"
#include "ibf/runner.hpp"
#include "suite_config.hpp"

using namespace ibf;
using namespace ibf::cli;

namespace {

const char* kMinimal = R"({
  "seed": 11,
  "model": {"wavenumbers": [1.0], "weights": [1.0], "angular_order": 16,
            "solenoidal_fraction": 0.5}
})";

std::string rejected_key(const std::string& text, std::optional<std::uint64_t> seed = {}) {
  try {
    parse_config(text, seed);
  } catch (const ConfigError& e) {
    return e.key();
  }
  return "";
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string first_line(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  return line;
}

}  // namespace

TEST_CASE("minimal config") {
  const auto cfg = parse_config(kMinimal);
  CHECK(cfg.seed == 11);
  CHECK_FALSE(cfg.experiment);
  CHECK(cfg.model.angular_order == 16);
  CHECK(parse_config(kMinimal, 5).seed == 5);
  const auto j = to_json(cfg);
  CHECK(j["seed"] == 11);
  CHECK(j["model"]["angular_order"] == 16);
}

TEST_CASE("rejections name the offending key") {
  const std::string model_ok =
      R"("model": {"wavenumbers": [1.0, 2.0], "weights": [0.5, 0.5], "angular_order": 16, "solenoidal_fraction": 0.5})";
  CHECK(rejected_key(R"({"seed": 1, "model": {"wavenumbers": [1.0, 2.0], "weights": [0.5, 0.6], "angular_order": 16, "solenoidal_fraction": 0.5}})") ==
        "model.weights");
  CHECK(rejected_key(R"({"seed": 1, "model": {"wavenumbers": [1.0], "weights": [1.0], "angular_order": 5, "solenoidal_fraction": 0.5}})") ==
        "model.angular_order");
  CHECK(rejected_key(R"({"seed": 1, "model": {"wavenumbers": [1.0], "weights": [1.0], "angular_order": 16, "solenoidal_fraction": 1.5}})") ==
        "model.solenoidal_fraction");
  CHECK(rejected_key(R"({"seed": 1, "model": {"wavenumbers": [-1.0], "weights": [1.0], "angular_order": 16, "solenoidal_fraction": 0.5}})") ==
        "model.wavenumbers");
  CHECK(rejected_key("{" + model_ok + "}") == "seed");
  CHECK(rejected_key("{" + model_ok + "}", 3).empty());
  CHECK(rejected_key(R"({"seed": 1, "colour": 2, )" + model_ok + "}") == "colour");
  CHECK(rejected_key(R"({"seed": 1, )" + model_ok + R"(, "lyapunov": {"T": 5, "renorm": 3}})") ==
        "lyapunov.renorm");
  CHECK(rejected_key(R"({"seed": 1, "seed": 2, )" + model_ok + "}") == "seed");
  CHECK(rejected_key(R"({"seed": 1, )" + model_ok + R"(, "diffusivity": {"T": "long"}})") ==
        "diffusivity.T");
  CHECK(rejected_key(R"({"seed": 1, )" + model_ok + R"(, "diffusivity": {"T": -1}})") ==
        "diffusivity.T");
  CHECK(rejected_key(R"({"seed": 1, )" + model_ok + R"(, "stable_norm": {"distances": [20, 10]}})") ==
        "stable_norm.distances");
  CHECK(rejected_key(R"({"seed": 1, )") == "config");
  CHECK(rejected_key(R"({"seed": 1, "experiment": "shape", )" + model_ok + R"(, "shape": {}})") ==
        "stable_norm");
  CHECK(rejected_key(R"({"seed": 1, "experiment": "warp", )" + model_ok + "}") == "experiment");
}

TEST_CASE("experiment names round-trip") {
  for (auto e : {Experiment::cov_check, Experiment::diffusivity, Experiment::lyapunov,
                 Experiment::stable_norm, Experiment::shape, Experiment::persistence,
                 Experiment::support, Experiment::scaling, Experiment::suite}) {
    CHECK(experiment_from(name(e)) == e);
  }
  CHECK(name(Experiment::stable_norm) == "stable-norm");
}

TEST_CASE("format_real") {
  CHECK(format_real(0.1) == "0.10000000000000001");
  CHECK(format_real(2.0) == "2");
  CHECK(std::stod(format_real(1.0 / 3)) == 1.0 / 3);
}

TEST_CASE("suite runs are byte-identical and schemas are stable") {
  const auto cfg = parse_config(test_support::kSmallSuite);
  const auto base = std::filesystem::temp_directory_path() / "ibf_config_test";
  std::filesystem::remove_all(base);
  std::ostringstream log;
  RunOptions a{Experiment::suite, base / "a", 1, false};
  RunOptions b{Experiment::suite, base / "b", 2, false};
  const auto ra = run(cfg, a, log);
  const auto rb = run(cfg, b, log);
  REQUIRE(ra.files == rb.files);
  CHECK(ra.files.front() == "manifest.json");
  for (const auto& f : ra.files) {
    if (f == "manifest.json") continue;
    INFO(f);
    CHECK(slurp(base / "a" / f) == slurp(base / "b" / f));
  }
  CHECK(first_line(base / "a" / "support_report.csv") == "T,replica,d_upper,d_lower,d_H,K_hat");
  CHECK(first_line(base / "a" / "lyapunov.csv") == "replica,mu1,mu2,T,dt");
  const auto manifest = nlohmann::json::parse(slurp(base / "a" / "manifest.json"));
  CHECK(manifest["version"] == kArtifactVersion);
  CHECK(manifest["config"]["seed"] == cfg.seed);
  CHECK(manifest["moduli"].contains("mu1"));
  std::filesystem::remove_all(base);
}
