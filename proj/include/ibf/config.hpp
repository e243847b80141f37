#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ibf/estimators.hpp"
#include "ibf/model.hpp"

/// Run configuration: strict JSON in, validated RunConfig out. Every rejection
/// is a ConfigError naming the offending key as a dotted path.
namespace ibf::cli {

enum class Experiment {
  cov_check,
  diffusivity,
  lyapunov,
  stable_norm,
  shape,
  persistence,
  support,
  scaling,
  suite,
};

/// Subcommand spelling, e.g. "stable-norm".
std::string_view name(Experiment e);
std::optional<Experiment> experiment_from(std::string_view name);

struct CovCheckConfig {
  std::size_t models = 1;           // extra random models checked besides the main one
  std::size_t kappa_points = 1000;  // radii on (0, r_max]
  double r_max = 20.0;
  model::IsotropyProbe probe;
  std::vector<double> separations{0.25, 0.5, 1.0, 2.0, 4.0};
  double dt = 0.01;
  std::size_t increment_samples = 20000;
};

struct DiffusivityConfig {
  double T = 10.0;
  double dt = 0.01;
  std::size_t replicas = 2000;
};

struct LyapunovConfig {
  double T = 50.0;
  double dt = 0.01;
  std::size_t replicas = 200;
  int renorm_every = 10;
};

struct StableNormConfig {
  estimators::StableNormSettings settings;
  int directions = 1;  // angles 2 pi j / directions; j = 0 is e1 and sets K_hat
};

struct ShapeConfig {
  estimators::ShapeSettings settings;
  std::vector<double> horizons{20.0, 60.0};
  std::optional<double> K_hat;
};

struct PersistenceConfig {
  estimators::PersistenceSettings settings;
  std::vector<double> horizons{25.0, 100.0};
};

struct SupportConfig {
  estimators::SupportSettings settings;
  std::size_t sample_points = 50;  // on the unit segment
  std::optional<double> K_hat;
};

struct ScalingConfig {
  double r = 0.5;
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::optional<Experiment> experiment;
  std::string output_dir;
  model::SpectralModel model;
  std::optional<CovCheckConfig> cov_check;
  std::optional<DiffusivityConfig> diffusivity;
  std::optional<LyapunovConfig> lyapunov;
  std::optional<StableNormConfig> stable_norm;
  std::optional<ShapeConfig> shape;
  std::optional<PersistenceConfig> persistence;
  std::optional<SupportConfig> support;
  std::optional<ScalingConfig> scaling;
};

/// Parses and validates. A seed_override stands in for a missing "seed".
RunConfig parse_config(std::string_view text,
                       std::optional<std::uint64_t> seed_override = {});

/// Throws ConfigError unless every block `e` needs is present.
void require_blocks(const RunConfig& cfg, Experiment e);

/// Fully resolved configuration, defaults filled in.
nlohmann::ordered_json to_json(const RunConfig& cfg);

}  // namespace ibf::cli
