#include "ibf/config.hpp"

#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <set>
#include <utility>

namespace ibf::cli {

using json = nlohmann::json;

namespace {

constexpr std::array<std::pair<Experiment, std::string_view>, 9> kNames{{
    {Experiment::cov_check, "cov-check"},
    {Experiment::diffusivity, "diffusivity"},
    {Experiment::lyapunov, "lyapunov"},
    {Experiment::stable_norm, "stable-norm"},
    {Experiment::shape, "shape"},
    {Experiment::persistence, "persistence"},
    {Experiment::support, "support"},
    {Experiment::scaling, "scaling"},
    {Experiment::suite, "suite"},
}};

bool positive(double x) { return x > 0.0 && std::isfinite(x); }

// Reads one JSON object, remembering which keys were consumed.
class Block {
 public:
  Block(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_, "must be an object");
  }

  std::string key(std::string_view k) const {
    return path_.empty() ? std::string(k) : path_ + "." + std::string(k);
  }

  bool has(const char* k) const { return j_.contains(k); }

  const json& at(const char* k) {
    seen_.insert(k);
    return j_.at(k);
  }

  double number(const char* k, double fallback,
                const std::function<bool(double)>& ok = positive,
                const char* rule = "must be a positive number") {
    if (!has(k)) return fallback;
    const json& v = at(k);
    if (!v.is_number()) throw ConfigError(key(k), "must be a number");
    const double x = v.get<double>();
    if (!std::isfinite(x) || !ok(x)) throw ConfigError(key(k), rule);
    return x;
  }

  std::optional<double> optional_number(const char* k) {
    if (!has(k)) return std::nullopt;
    return number(k, 0.0);
  }

  std::uint64_t unsigned_integer(const char* k, std::uint64_t fallback,
                                 std::uint64_t min = 0) {
    if (!has(k)) return fallback;
    const json& v = at(k);
    if (!v.is_number_unsigned()) {
      throw ConfigError(key(k), "must be a nonnegative integer");
    }
    const auto x = v.get<std::uint64_t>();
    if (x < min) throw ConfigError(key(k), "must be at least " + std::to_string(min));
    return x;
  }

  int integer(const char* k, int fallback, int min) {
    const auto x = unsigned_integer(k, static_cast<std::uint64_t>(std::max(fallback, 0)),
                                    static_cast<std::uint64_t>(std::max(min, 0)));
    if (x > static_cast<std::uint64_t>(std::numeric_limits<int>::max())) {
      throw ConfigError(key(k), "is too large");
    }
    return static_cast<int>(x);
  }

  bool boolean(const char* k, bool fallback) {
    if (!has(k)) return fallback;
    const json& v = at(k);
    if (!v.is_boolean()) throw ConfigError(key(k), "must be true or false");
    return v.get<bool>();
  }

  std::string string(const char* k, std::string fallback) {
    if (!has(k)) return fallback;
    const json& v = at(k);
    if (!v.is_string()) throw ConfigError(key(k), "must be a string");
    return v.get<std::string>();
  }

  std::vector<double> numbers(const char* k, std::vector<double> fallback,
                              bool increasing = true) {
    if (!has(k)) return fallback;
    const json& v = at(k);
    if (!v.is_array() || v.empty()) throw ConfigError(key(k), "must be a non-empty array");
    std::vector<double> out;
    for (const auto& e : v) {
      if (!e.is_number() || !std::isfinite(e.get<double>())) {
        throw ConfigError(key(k), "entries must be finite numbers");
      }
      out.push_back(e.get<double>());
      if (!(out.back() > 0.0)) throw ConfigError(key(k), "entries must be positive");
      if (increasing && out.size() > 1 && !(out.back() > out[out.size() - 2])) {
        throw ConfigError(key(k), "must be strictly increasing");
      }
    }
    return out;
  }

  std::optional<Block> child(const char* k) {
    if (!has(k)) return std::nullopt;
    return Block(at(k), key(k));
  }

  /// Rejects keys that were never read.
  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.count(k)) throw ConfigError(key(k), "unknown key");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string, std::less<>> seen_;
};

model::SpectralModel read_model(Block b) {
  model::SpectralModel m;
  if (!b.has("wavenumbers")) throw ConfigError(b.key("wavenumbers"), "is required");
  if (!b.has("weights")) throw ConfigError(b.key("weights"), "is required");
  m.wavenumbers = b.numbers("wavenumbers", {});
  m.weights.clear();
  const json& w = b.at("weights");
  if (!w.is_array() || w.empty()) throw ConfigError(b.key("weights"), "must be a non-empty array");
  for (const auto& e : w) {
    if (!e.is_number()) throw ConfigError(b.key("weights"), "entries must be numbers");
    m.weights.push_back(e.get<double>());
  }
  if (b.has("angular_order")) {
    const json& L = b.at("angular_order");
    if (!L.is_number_integer()) throw ConfigError(b.key("angular_order"), "must be an integer");
    const auto v = L.get<long long>();
    if (v < 4 || v % 2 != 0 || v > 1 << 16) {
      throw ConfigError(b.key("angular_order"), "must be an even integer >= 4");
    }
    m.angular_order = static_cast<int>(v);
  }
  m.solenoidal_fraction = b.number(
      "solenoidal_fraction", 1.0, [](double s) { return s >= 0.0 && s <= 1.0; },
      "must lie in [0, 1]");
  b.finish();
  try {
    m.validate(1e-9);
  } catch (const ConfigError& e) {
    throw ConfigError(b.key(e.key()), std::string(e.what()).substr(e.key().size() + 2));
  }
  return m;
}

CovCheckConfig read_cov_check(Block b) {
  CovCheckConfig c;
  c.models = b.unsigned_integer("random_models", c.models);
  c.kappa_points = b.unsigned_integer("kappa_points", c.kappa_points, 1);
  c.r_max = b.number("r_max", c.r_max);
  c.probe.n_rotations = b.integer("isotropy_rotations", c.probe.n_rotations, 1);
  c.probe.n_points = b.integer("isotropy_points", c.probe.n_points, 1);
  c.separations = b.numbers("separations", c.separations, false);
  c.dt = b.number("dt", c.dt);
  c.increment_samples = b.unsigned_integer("increment_samples", c.increment_samples, 2);
  b.finish();
  return c;
}

DiffusivityConfig read_diffusivity(Block b) {
  DiffusivityConfig c;
  c.T = b.number("T", c.T);
  c.dt = b.number("dt", c.dt);
  c.replicas = b.unsigned_integer("replicas", c.replicas, 2);
  if (c.dt > c.T) throw ConfigError(b.key("dt"), "must not exceed T");
  b.finish();
  return c;
}

LyapunovConfig read_lyapunov(Block b) {
  LyapunovConfig c;
  c.T = b.number("T", c.T);
  c.dt = b.number("dt", c.dt);
  c.replicas = b.unsigned_integer("replicas", c.replicas, 2);
  c.renorm_every = b.integer("renorm_every", c.renorm_every, 1);
  if (c.dt > c.T) throw ConfigError(b.key("dt"), "must not exceed T");
  b.finish();
  return c;
}

StableNormConfig read_stable_norm(Block b) {
  StableNormConfig c;
  auto& s = c.settings;
  c.directions = b.integer("directions", c.directions, 1);
  s.distances = b.numbers("distances", s.distances);
  for (double d : s.distances) {
    if (d < 10.0) throw ConfigError(b.key("distances"), "entries must be at least 10");
  }
  s.R = b.number("R", s.R, [](double r) { return r >= 1.0; }, "must be at least 1");
  s.dt = b.number("dt", s.dt);
  s.n_rep = b.unsigned_integer("replicas", s.n_rep, 2);
  s.t_max_factor = b.number("t_max_factor", s.t_max_factor, [](double f) { return f > 1.0; },
                            "must exceed 1");
  s.n_pilot = b.unsigned_integer("pilot_replicas", s.n_pilot, 1);
  s.k_rough = b.optional_number("K_rough");
  s.resolution.h_max = b.number("h_max", s.resolution.h_max);
  s.resolution.merge_radius = b.number(
      "merge_radius", s.resolution.merge_radius, [](double x) { return x >= 0.0; },
      "must be nonnegative");
  s.resolution.focus_window = b.number(
      "focus_window", s.resolution.focus_window, [](double x) { return x >= 0.0; },
      "must be nonnegative");
  s.resolution.max_vertices = b.unsigned_integer("max_vertices", s.resolution.max_vertices, 2);
  b.finish();
  return c;
}

ShapeConfig read_shape(Block b) {
  ShapeConfig c;
  auto& s = c.settings;
  c.horizons = b.numbers("horizons", c.horizons);
  s.eps = b.number("eps", s.eps, [](double e) { return e > 0.0 && e <= 1.0; },
                   "must lie in (0, 1]");
  s.n_directions = b.integer("directions", s.n_directions, 1);
  s.dt = b.number("dt", s.dt);
  s.n_rep = b.unsigned_integer("replicas", s.n_rep, 1);
  s.R = b.number("R", s.R, [](double r) { return r >= 1.0; }, "must be at least 1");
  s.check_every = b.integer("check_every", s.check_every, 1);
  s.h_max = b.number("h_max", s.h_max);
  s.merge_radius = b.number("merge_radius", s.merge_radius, [](double x) { return x >= 0.0; },
                            "must be nonnegative");
  s.max_vertices = b.unsigned_integer("max_vertices", s.max_vertices, 2);
  c.K_hat = b.optional_number("K_hat");
  b.finish();
  return c;
}

PersistenceConfig read_persistence(Block b) {
  PersistenceConfig c;
  auto& s = c.settings;
  c.horizons = b.numbers("horizons", c.horizons);
  s.dt = b.number("dt", s.dt);
  s.n_rep = b.unsigned_integer("replicas", s.n_rep, 1);
  s.check_every = b.integer("check_every", s.check_every, 1);
  s.refine_budget = b.unsigned_integer("refine_budget", s.refine_budget, 0);
  s.h_max = b.number("h_max", s.h_max);
  b.finish();
  return c;
}

SupportConfig read_support(Block b) {
  SupportConfig c;
  auto& s = c.settings;
  s.horizons = b.numbers("horizons", s.horizons);
  s.grid_points = b.integer("grid_points", s.grid_points, 2);
  s.dt = b.number("dt", s.dt);
  s.n_rep = b.unsigned_integer("replicas", s.n_rep, 1);
  s.eps_tol = b.number("eps_tol", s.eps_tol);
  s.polygon_vertices = b.integer("polygon_vertices", s.polygon_vertices, 16);
  s.net.directions = b.integer("net_directions", s.net.directions, 1);
  s.net.levels = b.integer("net_levels", s.net.levels, 1);
  s.net.cap = b.unsigned_integer("net_cap", s.net.cap, 1);
  c.sample_points = b.unsigned_integer("sample_points", c.sample_points, 1);
  c.K_hat = b.optional_number("K_hat");
  b.finish();
  return c;
}

ScalingConfig read_scaling(Block b) {
  ScalingConfig c;
  c.r = b.number("r", c.r, [](double r) { return r > 0.0 && r <= 1.0; }, "must lie in (0, 1]");
  b.finish();
  return c;
}

json parse_strict(std::string_view text) {
  // Duplicate keys are rejected per object.
  std::vector<std::set<std::string>> open;
  std::vector<std::string> path;
  json::parser_callback_t cb = [&](int, json::parse_event_t ev, json& parsed) {
    switch (ev) {
      case json::parse_event_t::object_start:
        open.emplace_back();
        break;
      case json::parse_event_t::object_end:
        open.pop_back();
        break;
      case json::parse_event_t::key: {
        const auto k = parsed.get<std::string>();
        if (!open.back().insert(k).second) throw ConfigError(k, "duplicate key");
        break;
      }
      default:
        break;
    }
    return true;
  };
  try {
    return json::parse(text.begin(), text.end(), cb);
  } catch (const json::parse_error& e) {
    throw ConfigError("config", std::string("invalid JSON: ") + e.what());
  }
}

}  // namespace

std::string_view name(Experiment e) {
  for (const auto& [x, n] : kNames) {
    if (x == e) return n;
  }
  return "unknown";
}

std::optional<Experiment> experiment_from(std::string_view n) {
  for (const auto& [x, s] : kNames) {
    if (s == n) return x;
  }
  return std::nullopt;
}

RunConfig parse_config(std::string_view text, std::optional<std::uint64_t> seed_override) {
  const json root = parse_strict(text);
  Block b(root, "");
  RunConfig cfg;
  if (b.has("seed")) {
    cfg.seed = b.unsigned_integer("seed", 0);
  } else if (!seed_override) {
    throw ConfigError("seed", "is required");
  }
  if (seed_override) cfg.seed = *seed_override;
  if (b.has("experiment")) {
    const auto e = experiment_from(b.string("experiment", ""));
    if (!e) throw ConfigError("experiment", "unknown experiment");
    cfg.experiment = e;
  }
  cfg.output_dir = b.string("output_dir", "");
  if (!b.has("model")) throw ConfigError("model", "is required");
  cfg.model = read_model(*b.child("model"));
  if (auto c = b.child("cov_check")) cfg.cov_check = read_cov_check(*c);
  if (auto c = b.child("diffusivity")) cfg.diffusivity = read_diffusivity(*c);
  if (auto c = b.child("lyapunov")) cfg.lyapunov = read_lyapunov(*c);
  if (auto c = b.child("stable_norm")) cfg.stable_norm = read_stable_norm(*c);
  if (auto c = b.child("shape")) cfg.shape = read_shape(*c);
  if (auto c = b.child("persistence")) cfg.persistence = read_persistence(*c);
  if (auto c = b.child("support")) cfg.support = read_support(*c);
  if (auto c = b.child("scaling")) cfg.scaling = read_scaling(*c);
  b.finish();
  if (cfg.experiment) require_blocks(cfg, *cfg.experiment);
  return cfg;
}

void require_blocks(const RunConfig& cfg, Experiment e) {
  auto need = [](bool present, const char* key) {
    if (!present) throw ConfigError(key, "block is required for this experiment");
  };
  switch (e) {
    case Experiment::cov_check:
      need(cfg.cov_check.has_value(), "cov_check");
      break;
    case Experiment::diffusivity:
      need(cfg.diffusivity.has_value(), "diffusivity");
      break;
    case Experiment::lyapunov:
      need(cfg.lyapunov.has_value(), "lyapunov");
      break;
    case Experiment::stable_norm:
      need(cfg.stable_norm.has_value(), "stable_norm");
      break;
    case Experiment::shape:
      need(cfg.shape.has_value(), "shape");
      if (!cfg.shape->K_hat) need(cfg.stable_norm.has_value(), "stable_norm");
      break;
    case Experiment::persistence:
      need(cfg.persistence.has_value(), "persistence");
      break;
    case Experiment::support:
      need(cfg.support.has_value(), "support");
      if (!cfg.support->K_hat) need(cfg.stable_norm.has_value(), "stable_norm");
      break;
    case Experiment::scaling:
      need(cfg.scaling.has_value(), "scaling");
      need(cfg.stable_norm.has_value(), "stable_norm");
      break;
    case Experiment::suite:
      for (auto part : {Experiment::cov_check, Experiment::diffusivity, Experiment::lyapunov,
                        Experiment::stable_norm, Experiment::shape, Experiment::persistence,
                        Experiment::support}) {
        require_blocks(cfg, part);
      }
      break;
  }
}

nlohmann::ordered_json to_json(const RunConfig& cfg) {
  using oj = nlohmann::ordered_json;
  oj j;
  j["seed"] = cfg.seed;
  if (cfg.experiment) j["experiment"] = std::string(name(*cfg.experiment));
  j["output_dir"] = cfg.output_dir;
  j["model"] = {{"wavenumbers", cfg.model.wavenumbers},
                {"weights", cfg.model.weights},
                {"angular_order", cfg.model.angular_order},
                {"solenoidal_fraction", cfg.model.solenoidal_fraction}};
  if (const auto& c = cfg.cov_check) {
    j["cov_check"] = {{"random_models", c->models},
                      {"kappa_points", c->kappa_points},
                      {"r_max", c->r_max},
                      {"isotropy_rotations", c->probe.n_rotations},
                      {"isotropy_points", c->probe.n_points},
                      {"separations", c->separations},
                      {"dt", c->dt},
                      {"increment_samples", c->increment_samples}};
  }
  if (const auto& c = cfg.diffusivity) {
    j["diffusivity"] = {{"T", c->T}, {"dt", c->dt}, {"replicas", c->replicas}};
  }
  if (const auto& c = cfg.lyapunov) {
    j["lyapunov"] = {{"T", c->T},
                     {"dt", c->dt},
                     {"replicas", c->replicas},
                     {"renorm_every", c->renorm_every}};
  }
  if (const auto& c = cfg.stable_norm) {
    const auto& s = c->settings;
    oj b = {{"directions", c->directions},
            {"distances", s.distances},
            {"R", s.R},
            {"dt", s.dt},
            {"replicas", s.n_rep},
            {"t_max_factor", s.t_max_factor},
            {"pilot_replicas", s.n_pilot},
            {"h_max", s.resolution.h_max},
            {"merge_radius", s.resolution.merge_radius},
            {"focus_window", s.resolution.focus_window},
            {"max_vertices", s.resolution.max_vertices}};
    if (s.k_rough) b["K_rough"] = *s.k_rough;
    j["stable_norm"] = b;
  }
  if (const auto& c = cfg.shape) {
    const auto& s = c->settings;
    oj b = {{"horizons", c->horizons},
            {"eps", s.eps},
            {"directions", s.n_directions},
            {"dt", s.dt},
            {"replicas", s.n_rep},
            {"R", s.R},
            {"check_every", s.check_every},
            {"h_max", s.h_max},
            {"merge_radius", s.merge_radius},
            {"max_vertices", s.max_vertices}};
    if (c->K_hat) b["K_hat"] = *c->K_hat;
    j["shape"] = b;
  }
  if (const auto& c = cfg.persistence) {
    const auto& s = c->settings;
    j["persistence"] = {{"horizons", c->horizons},
                        {"dt", s.dt},
                        {"replicas", s.n_rep},
                        {"check_every", s.check_every},
                        {"refine_budget", s.refine_budget},
                        {"h_max", s.h_max}};
  }
  if (const auto& c = cfg.support) {
    const auto& s = c->settings;
    oj b = {{"horizons", s.horizons},
            {"grid_points", s.grid_points},
            {"dt", s.dt},
            {"replicas", s.n_rep},
            {"eps_tol", s.eps_tol},
            {"polygon_vertices", s.polygon_vertices},
            {"net_directions", s.net.directions},
            {"net_levels", s.net.levels},
            {"net_cap", s.net.cap},
            {"sample_points", c->sample_points}};
    if (c->K_hat) b["K_hat"] = *c->K_hat;
    j["support"] = b;
  }
  if (const auto& c = cfg.scaling) j["scaling"] = {{"r", c->r}};
  return j;
}

}  // namespace ibf::cli
