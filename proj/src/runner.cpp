#include "ibf/runner.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <ostream>
#include <stdexcept>

#include "ibf/estimators.hpp"
#include "ibf/model.hpp"

namespace ibf::cli {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;
using namespace ibf::estimators;

std::string format_real(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

int exit_status(const RunOutcome& outcome, bool strict) {
  return strict && !outcome.reliable ? 4 : 0;
}

namespace {

constexpr double kIsotropyLimit = 0.05;

std::string cell(double x) { return format_real(x); }
std::string cell(int x) { return std::to_string(x); }
std::string cell(std::size_t x) { return std::to_string(x); }
std::string cell(bool x) { return x ? "1" : "0"; }
std::string cell(const char* s) { return s; }

class Csv {
 public:
  Csv(const fs::path& path, std::initializer_list<const char*> header) : out_(path) {
    if (!out_) throw std::runtime_error("cannot write " + path.string());
    row_of(header);
  }

  template <class... Ts>
  void row(const Ts&... xs) {
    bool first = true;
    ((out_ << (first ? "" : ",") << cell(xs), first = false), ...);
    out_ << '\n';
  }

  ~Csv() { out_.flush(); }

 private:
  void row_of(std::initializer_list<const char*> xs) {
    bool first = true;
    for (const char* x : xs) {
      out_ << (first ? "" : ",") << x;
      first = false;
    }
    out_ << '\n';
  }
  std::ofstream out_;
};

ojson estimate_json(const EstimateResult& e) {
  return {{"value", e.value},
          {"std_error", e.std_error},
          {"n_replicas", e.n_replicas},
          {"ci95", {e.ci_low, e.ci_high}}};
}

class Session {
 public:
  Session(const RunConfig& cfg, const RunOptions& opts, std::ostream& log)
      : cfg_(cfg),
        opts_(opts),
        log_(log),
        modes_(model::build_mode_set(cfg.model)),
        summary_(model::moduli(modes_)),
        exec_{opts.threads} {
    defect_ = model::isotropy_defect(modes_, {});
  }

  RunOutcome execute() {
    fs::create_directories(opts_.out_dir);
    write_manifest();
    outcome_.files.emplace_back("manifest.json");
    switch (opts_.experiment) {
      case Experiment::cov_check: timed(Experiment::cov_check, [&] { cov_check(); }); break;
      case Experiment::diffusivity: require_isotropy(); timed(Experiment::diffusivity, [&] { diffusivity(); }); break;
      case Experiment::lyapunov: require_isotropy(); timed(Experiment::lyapunov, [&] { lyapunov(); }); break;
      case Experiment::stable_norm: require_isotropy(); timed(Experiment::stable_norm, [&] { stable_norm(); }); break;
      case Experiment::shape: require_isotropy(); timed(Experiment::shape, [&] { shape(); }); break;
      case Experiment::persistence: require_isotropy(); timed(Experiment::persistence, [&] { persistence(); }); break;
      case Experiment::support: require_isotropy(); timed(Experiment::support, [&] { support(); }); break;
      case Experiment::scaling: require_isotropy(); timed(Experiment::scaling, [&] { scaling(); }); break;
      case Experiment::suite:
        require_isotropy();
        timed(Experiment::cov_check, [&] { cov_check(); });
        timed(Experiment::diffusivity, [&] { diffusivity(); });
        timed(Experiment::lyapunov, [&] { lyapunov(); });
        timed(Experiment::stable_norm, [&] { stable_norm(); });
        timed(Experiment::shape, [&] { shape(); });
        timed(Experiment::persistence, [&] { persistence(); });
        timed(Experiment::support, [&] { support(); });
        if (cfg_.scaling) timed(Experiment::scaling, [&] { scaling(); });
        break;
    }
    write_manifest();
    return outcome_;
  }

 private:
  // Each experiment owns a fixed stream, so results match between a single
  // run and the suite.
  Rng stream(Experiment e, std::uint64_t sub = 0) const {
    return Rng(substream_seed(substream_seed(cfg_.seed, static_cast<std::uint64_t>(e)), sub));
  }

  void require_isotropy() const {
    if (!(defect_ < kIsotropyLimit)) {
      throw ConfigError("model.angular_order",
                        "isotropy defect " + format_real(defect_) + " is not below 0.05");
    }
  }

  template <class Fn>
  void timed(Experiment e, Fn&& fn) {
    log_ << "[" << name(e) << "] running\n" << std::flush;
    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t files_before = outcome_.files.size();
    const bool reliable_before = outcome_.reliable;
    outcome_.reliable = true;
    fn();
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    ojson entry{{"name", std::string(name(e))},
                {"wall_time_s", secs},
                {"reliable", outcome_.reliable},
                {"files", ojson::array()}};
    for (std::size_t i = files_before; i < outcome_.files.size(); ++i) {
      entry["files"].push_back(outcome_.files[i]);
    }
    if (!results_.is_null()) entry["results"] = std::move(results_);
    results_ = nullptr;
    experiments_.push_back(std::move(entry));
    outcome_.reliable = outcome_.reliable && reliable_before;
    log_ << "[" << name(e) << "] done in " << secs << " s\n" << std::flush;
  }

  Csv csv(const char* file, std::initializer_list<const char*> header) {
    outcome_.files.emplace_back(file);
    return Csv(opts_.out_dir / file, header);
  }

  void write_manifest() {
    ojson m;
    m["artifact"] = "ibflab";
    m["version"] = kArtifactVersion;
    m["experiment"] = std::string(name(opts_.experiment));
    m["config"] = to_json(cfg_);
    m["moduli"] = {{"beta_L", summary_.beta_L},
                   {"beta_N", summary_.beta_N},
                   {"mu1", summary_.mu1},
                   {"mu2", summary_.mu2},
                   {"kappa", summary_.kappa},
                   {"isotropy_defect", defect_},
                   {"directional_moduli_spread", summary_.isotropy_defect},
                   {"modes", modes_.size()},
                   {"phase_groups", modes_.groups().size()}};
    m["threads"] = opts_.threads;
    m["experiments"] = experiments_.is_null() ? ojson::array() : experiments_;
    m["reliable"] = outcome_.reliable;
    std::ofstream out(opts_.out_dir / "manifest.json");
    if (!out) throw std::runtime_error("cannot write manifest.json");
    out << m.dump(2) << '\n';
  }

  // ---- experiments -------------------------------------------------------

  void cov_check() {
    const auto& c = *cfg_.cov_check;
    Rng rng = stream(Experiment::cov_check);
    auto summary = csv("cov_check_summary.csv", {"model", "quantity", "value", "tolerance", "pass"});
    bool all_pass = true;
    auto check = [&](std::size_t idx, const char* q, double v, double tol) {
      const bool ok = v <= tol;
      all_pass = all_pass && ok;
      summary.row(idx, q, v, tol, ok);
    };
    std::vector<double> radii;
    for (std::size_t i = 1; i <= c.kappa_points; ++i) {
      radii.push_back(c.r_max * static_cast<double>(i) / static_cast<double>(c.kappa_points));
    }
    for (std::size_t idx = 0; idx <= c.models; ++idx) {
      const auto m = idx == 0 ? modes_ : model::build_mode_set(model::SpectralModel::random(rng));
      double norm_err = (model::covariance_at(m, Vec2::Zero()) - Mat2::Identity()).cwiseAbs().maxCoeff();
      double sym_err = 0.0;
      for (int p = 0; p < 1000; ++p) {
        const double rad = c.r_max * std::sqrt(rng.uniform());
        const double ang = 2.0 * std::numbers::pi * rng.uniform();
        const Vec2 x(rad * std::cos(ang), rad * std::sin(ang));
        const Mat2 b = model::covariance_at(m, x);
        sym_err = std::max(sym_err, (b - model::covariance_at(m, -x)).cwiseAbs().maxCoeff());
        sym_err = std::max(sym_err, std::abs(b(0, 1) - b(1, 0)));
      }
      model::IsotropyProbe lattice = c.probe;
      lattice.lattice_rotations = true;
      lattice.seed = rng();
      model::IsotropyProbe free = c.probe;
      free.seed = rng();
      const auto kappa = model::check_kappa_bound(m, radii);
      const auto mod = model::moduli(m);
      check(idx, "normalization_error", norm_err, 1e-10);
      check(idx, "symmetry_error", sym_err, 1e-10);
      check(idx, "lattice_rotation_error", model::isotropy_defect(m, lattice), 1e-10);
      check(idx, "kappa_bound_violation", kappa.max_violation, 1e-12);
      summary.row(idx, "isotropy_defect", model::isotropy_defect(m, free), kIsotropyLimit,
                  model::isotropy_defect(m, free) < kIsotropyLimit);
      summary.row(idx, "beta_L", mod.beta_L, 0.0, true);
      summary.row(idx, "beta_N", mod.beta_N, 0.0, true);
      summary.row(idx, "mu1", mod.mu1, 0.0, true);
      summary.row(idx, "mu2", mod.mu2, 0.0, true);
    }
    auto inc = csv("increment_covariance.csv",
                   {"separation", "entry", "estimate", "target", "std_error", "z"});
    static constexpr const char* kEntry[2][2] = {{"xx", "xy"}, {"yx", "yy"}};
    double worst_z = 0.0;
    for (double sep : c.separations) {
      const auto ic = increment_covariance(modes_, Vec2(sep, 0.0), Vec2::Zero(), c.dt,
                                           c.increment_samples, rng);
      for (int a = 0; a < 2; ++a) {
        for (int b = 0; b < 2; ++b) {
          const double se = ic.std_error(a, b);
          const double z = se > 0 ? (ic.mean(a, b) - ic.target(a, b)) / se : 0.0;
          worst_z = std::max(worst_z, std::abs(z));
          inc.row(sep, kEntry[a][b], ic.mean(a, b), ic.target(a, b), se, z);
        }
      }
    }
    results_ = {{"all_checks_pass", all_pass}, {"increment_max_abs_z", worst_z}};
    if (!all_pass) outcome_.reliable = false;
  }

  void diffusivity() {
    const auto& c = *cfg_.diffusivity;
    Rng rng = stream(Experiment::diffusivity);
    const auto d = one_point_diffusivity(modes_, c.T, c.dt, c.replicas, rng, exec_);
    auto rows = csv("diffusivity.csv", {"replica", "value", "T", "dt"});
    for (std::size_t i = 0; i < d.samples.size(); ++i) rows.row(i, d.samples[i], d.T, d.dt);
    auto s = csv("diffusivity_summary.csv",
                 {"T", "dt", "replicas", "estimate", "std_error", "ci_low", "ci_high"});
    s.row(d.T, d.dt, d.estimate.n_replicas, d.estimate.value, d.estimate.std_error,
          d.estimate.ci_low, d.estimate.ci_high);
    results_ = {{"diffusivity", estimate_json(d.estimate)}};
  }

  void lyapunov() {
    const auto& c = *cfg_.lyapunov;
    Rng rng = stream(Experiment::lyapunov);
    const auto l = estimate_lyapunov(modes_, c.T, c.dt, c.replicas, c.renorm_every, rng, exec_);
    auto rows = csv("lyapunov.csv", {"replica", "mu1", "mu2", "T", "dt"});
    for (std::size_t i = 0; i < l.replicas.size(); ++i) {
      rows.row(i, l.replicas[i].mu1, l.replicas[i].mu2, l.T, l.dt);
    }
    auto s = csv("lyapunov_summary.csv",
                 {"quantity", "estimate", "std_error", "ci_low", "ci_high", "moduli_value"});
    s.row("mu1", l.mu1.value, l.mu1.std_error, l.mu1.ci_low, l.mu1.ci_high, summary_.mu1);
    s.row("mu2", l.mu2.value, l.mu2.std_error, l.mu2.ci_low, l.mu2.ci_high, summary_.mu2);
    results_ = {{"mu1", estimate_json(l.mu1)}, {"mu2", estimate_json(l.mu2)}};
  }

  // Runs the stable-norm block once per session; later experiments reuse K_hat.
  double stable_norm() {
    if (k_hat_) return *k_hat_;
    const auto& c = *cfg_.stable_norm;
    auto rows = csv("stable_norm.csv", {"direction", "angle", "distance", "replica", "hit", "tau",
                                        "tau_over_distance", "peak_vertices"});
    auto s = csv("stable_norm_summary.csv",
                 {"direction", "angle", "distance", "t_max", "completed", "timeouts",
                  "timeout_fraction", "tau_over_distance", "std_error", "K_hat",
                  "K_hat_std_error", "reliable"});
    std::optional<double> k_rough = c.settings.k_rough;
    ojson per_direction = ojson::array();
    for (int j = 0; j < c.directions; ++j) {
      const double angle = 2.0 * std::numbers::pi * j / c.directions;
      StableNormSettings st = c.settings;
      st.direction = Vec2(std::cos(angle), std::sin(angle));
      st.k_rough = k_rough;
      // Direction 0 runs the pilot unless K_rough is configured; the rest reuse it.
      Rng rng = stream(Experiment::stable_norm, static_cast<std::uint64_t>(j));
      const auto e = estimate_stable_norm(modes_, st, rng, exec_);
      k_rough = e.K_rough;
      for (const auto& d : e.per_distance) {
        for (std::size_t i = 0; i < d.runs.size(); ++i) {
          const auto& r = d.runs[i];
          rows.row(j, angle, d.distance, i, r.hit, r.hit ? r.tau : NAN,
                   r.hit ? r.tau / d.distance : NAN, r.peak_vertices);
        }
        s.row(j, angle, d.distance, d.t_max, d.runs.size() - d.timeouts, d.timeouts,
              d.timeout_fraction, d.tau_over_distance.value, d.tau_over_distance.std_error,
              e.K_hat, e.K_hat_std_error, e.reliable);
      }
      if (!e.reliable) outcome_.reliable = false;
      if (j == 0) {
        k_hat_ = e.K_hat;
        k_hat_se_ = e.K_hat_std_error;
      }
      per_direction.push_back({{"angle", angle}, {"K_hat", e.K_hat},
                               {"K_hat_std_error", e.K_hat_std_error},
                               {"reliable", e.reliable}});
    }
    results_ = {{"K_hat", *k_hat_}, {"K_hat_std_error", k_hat_se_}, {"K_rough", *k_rough},
                {"directions", per_direction}};
    return *k_hat_;
  }

  double k_hat_for(const std::optional<double>& given) {
    if (given) return *given;
    if (k_hat_) return *k_hat_;
    // The stable-norm tables are written as part of this experiment.
    const ojson saved = results_;
    stable_norm();
    ojson sn = results_;
    results_ = saved;
    stable_norm_results_ = std::move(sn);
    return *k_hat_;
  }

  void shape() {
    const auto& c = *cfg_.shape;
    const double K = k_hat_for(c.K_hat);
    auto rows = csv("shape.csv", {"T", "replica", "max_radius", "directions_reached", "outer", "inner"});
    auto s = csv("shape_summary.csv",
                 {"T", "eps", "K_hat", "replicas", "outer_probability", "outer_std_error",
                  "inner_probability", "inner_std_error", "double_probability",
                  "double_std_error"});
    for (std::size_t ti = 0; ti < c.horizons.size(); ++ti) {
      ShapeSettings st = c.settings;
      st.T = c.horizons[ti];
      st.K_hat = K;
      Rng rng = stream(Experiment::shape, ti);
      const auto r = shape_experiment(modes_, st, rng, exec_);
      for (std::size_t i = 0; i < r.replicas.size(); ++i) {
        const auto& x = r.replicas[i];
        rows.row(st.T, i, x.max_radius, x.directions_reached, x.outer, x.inner);
      }
      s.row(st.T, st.eps, K, st.n_rep, r.outer_probability.value, r.outer_probability.std_error,
            r.inner_probability.value, r.inner_probability.std_error,
            r.double_probability.value, r.double_probability.std_error);
    }
    attach_stable_norm();
  }

  void persistence() {
    const auto& c = *cfg_.persistence;
    auto rows = csv("persistence.csv", {"T", "replica", "dropped", "min_diameter", "under_resolved"});
    auto s = csv("persistence_summary.csv", {"T", "replicas", "fraction", "std_error"});
    ojson res = ojson::array();
    for (std::size_t ti = 0; ti < c.horizons.size(); ++ti) {
      PersistenceSettings st = c.settings;
      st.T = c.horizons[ti];
      const auto gamma = flow::CurveImage::segment(Vec2::Zero(), Vec2::UnitX(), st.h_max);
      Rng rng = stream(Experiment::persistence, ti);
      const auto r = diameter_persistence(modes_, gamma, st, rng, exec_);
      for (std::size_t i = 0; i < r.replicas.size(); ++i) {
        const auto& x = r.replicas[i];
        rows.row(st.T, i, x.dropped, x.min_diameter, x.under_resolved);
      }
      s.row(st.T, st.n_rep, r.fraction.value, r.fraction.std_error);
      res.push_back({{"T", st.T}, {"fraction", estimate_json(r.fraction)}});
    }
    results_ = {{"horizons", res}};
  }

  void support() {
    const auto& c = *cfg_.support;
    const double K = k_hat_for(c.K_hat);
    SupportSettings st = c.settings;
    st.K_hat = K;
    const auto X = segment_points(Vec2::Zero(), Vec2::UnitX(), c.sample_points);
    Rng rng = stream(Experiment::support);
    const auto r = support_experiment(modes_, X, st, rng, exec_);
    auto rows = csv("support_report.csv", {"T", "replica", "d_upper", "d_lower", "d_H", "K_hat"});
    for (const auto& x : r.rows) rows.row(x.T, x.replica, x.d_upper, x.d_lower, x.d_H, x.K_hat);
    auto s = csv("support_summary.csv",
                 {"T", "replicas", "K_hat", "d_upper_q1", "d_upper_median", "d_upper_q3",
                  "d_lower_q1", "d_lower_median", "d_lower_q3", "d_H_q1", "d_H_median",
                  "d_H_q3"});
    for (const auto& x : r.per_horizon) {
      s.row(x.T, x.n_rep, K, x.d_upper.q1, x.d_upper.median, x.d_upper.q3, x.d_lower.q1,
            x.d_lower.median, x.d_lower.q3, x.d_H.q1, x.d_H.median, x.d_H.q3);
    }
    attach_stable_norm();
  }

  void scaling() {
    const auto& c = *cfg_.scaling;
    StableNormSettings st = cfg_.stable_norm->settings;
    st.direction = Vec2::UnitX();
    Rng rng = stream(Experiment::scaling);
    const auto r = scaling_check(cfg_.model, c.r, st, rng, exec_);
    const auto scaled = model::moduli(model::build_mode_set(cfg_.model.scaled(c.r)));
    auto s = csv("scaling.csv", {"r", "K_base", "K_base_std_error", "K_scaled",
                                 "K_scaled_std_error", "ratio", "ratio_std_error", "mu1_base",
                                 "mu1_scaled", "mu1_ratio_over_r2"});
    s.row(c.r, r.base.K_hat, r.base.K_hat_std_error, r.scaled.K_hat, r.scaled.K_hat_std_error,
          r.ratio.value, r.ratio.std_error, summary_.mu1, scaled.mu1,
          scaled.mu1 / (c.r * c.r * summary_.mu1));
    if (!r.base.reliable || !r.scaled.reliable) outcome_.reliable = false;
    results_ = {{"ratio", estimate_json(r.ratio)}};
  }

  void attach_stable_norm() {
    if (!stable_norm_results_.is_null()) {
      results_ = {{"stable_norm", std::move(stable_norm_results_)}};
      stable_norm_results_ = nullptr;
    }
  }

  const RunConfig& cfg_;
  const RunOptions& opts_;
  std::ostream& log_;
  model::ModeSet modes_;
  model::CovarianceSummary summary_;
  double defect_ = 0.0;
  Execution exec_;
  RunOutcome outcome_;
  ojson experiments_;
  ojson results_;
  ojson stable_norm_results_;
  std::optional<double> k_hat_;
  double k_hat_se_ = 0.0;
};

}  // namespace

RunOutcome run(const RunConfig& cfg, const RunOptions& opts, std::ostream& log) {
  require_blocks(cfg, opts.experiment);
  Session session(cfg, opts, log);
  return session.execute();
}

}  // namespace ibf::cli
