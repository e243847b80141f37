// Acceptance battery: one PASS/FAIL line per criterion.
//
//   acceptance --fast   criteria 1-6, 9, 10
//   acceptance --slow   criteria 7 and 8 (8 consumes the K estimated by 7)
//   acceptance          everything
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "ibf/config.hpp"
#include "ibf/estimators.hpp"
#include "ibf/geometry.hpp"
#include "ibf/model.hpp"
#include "ibf/runner.hpp"
#include "oracles.hpp"
#include "suite_config.hpp"

using namespace ibf;
using namespace ibf::estimators;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Execution exec() { return {std::max(1u, std::thread::hardware_concurrency())}; }

model::ModeSet default_modes() {
  return model::build_mode_set(model::SpectralModel::default_model());
}

Mat2 rotation(double a) {
  Mat2 R;
  R << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
  return R;
}

Outcome normalization_and_symmetry() {
  Rng rng(101);
  double norm_err = 0, sym_err = 0, rot_err = 0;
  for (int i = 0; i < 20; ++i) {
    const auto spec = model::SpectralModel::random(rng);
    const auto m = model::build_mode_set(spec);
    norm_err = std::max(norm_err, (model::covariance_at(m, Vec2::Zero()) - Mat2::Identity()).cwiseAbs().maxCoeff());
    const Mat2 R = rotation(2 * std::numbers::pi / spec.angular_order);
    for (int p = 0; p < 1000; ++p) {
      const Vec2 x(8 * rng.uniform() - 4, 8 * rng.uniform() - 4);
      const Mat2 b = model::covariance_at(m, x);
      sym_err = std::max(sym_err, (b - model::covariance_at(m, -x)).cwiseAbs().maxCoeff());
      sym_err = std::max(sym_err, (b - b.transpose()).cwiseAbs().maxCoeff());
      rot_err = std::max(rot_err, (model::covariance_at(m, R * x) - R * b * R.transpose()).cwiseAbs().maxCoeff());
    }
  }
  return {norm_err <= 1e-10 && sym_err <= 1e-10 && rot_err <= 1e-10,
          fmt("|b(0)-Id| %.2e, |b(x)-b(-x)|,|b-b^T| %.2e, lattice rotation %.2e (tol 1e-10)",
              norm_err, sym_err, rot_err)};
}

Outcome kappa_bound() {
  Rng rng(102);
  std::vector<double> r;
  for (int i = 1; i <= 1000; ++i) r.push_back(20.0 * i / 1000);
  double worst = -INFINITY;
  for (int i = 0; i < 20; ++i) {
    const auto m = model::build_mode_set(model::SpectralModel::random(rng));
    worst = std::max(worst, model::check_kappa_bound(m, r).max_violation);
  }
  return {worst <= 1e-12, fmt("max violation %.3e over 20 models (tol 1e-12)", worst)};
}

Outcome moduli_correctness() {
  Rng rng(103);
  double fd_err = 0, id_err = 0;
  std::vector<model::SpectralModel> specs{model::SpectralModel::default_model()};
  for (int i = 0; i < 19; ++i) specs.push_back(model::SpectralModel::random(rng));
  for (const auto& spec : specs) {
    const auto m = model::build_mode_set(spec);
    const auto s = model::moduli(m);
    const double h = 1e-3;
    const auto [bl, bn] = model::longitudinal_normal(m, h);
    const double fd_L = 2 * (1 - bl) / (h * h), fd_N = 2 * (1 - bn) / (h * h);
    fd_err = std::max({fd_err, std::abs(fd_L - s.beta_L), std::abs(fd_N - s.beta_N)});
    id_err = std::max({id_err, std::abs(s.mu1 - 0.5 * (s.beta_N - s.beta_L)),
                       std::abs(s.mu2 + s.beta_L)});
  }
  return {fd_err <= 1e-4 && id_err == 0.0,
          fmt("finite-difference error %.2e (tol 1e-4), mu identities off by %.1e", fd_err, id_err)};
}

Outcome one_point_law() {
  const auto m = default_modes();
  Rng rng(104);
  const auto d = one_point_diffusivity(m, 10.0, 0.01, 2000, rng, exec());
  const double z = (d.estimate.value - 1.0) / d.estimate.std_error;
  bool ok = std::abs(z) <= 3;
  std::string detail = fmt("D = %.4f +- %.4f (z %.2f)", d.estimate.value, d.estimate.std_error, z);
  double worst = 0;
  for (double r : {0.25, 0.5, 1.0, 2.0, 4.0}) {
    const auto c = increment_covariance(m, {r, 0}, {0, 0}, 0.01, 20000, rng);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) {
        const double zz = std::abs(c.mean(i, j) - c.target(i, j)) / c.std_error(i, j);
        worst = std::max(worst, zz);
      }
  }
  ok = ok && worst <= 3;
  return {ok, detail + fmt("; increment covariance worst |z| %.2f over 5 separations", worst)};
}

Outcome lyapunov_agreement() {
  const auto m = default_modes();
  const auto s = model::moduli(m);
  Rng rng(105);
  const auto e = estimate_lyapunov(m, 50.0, 0.01, 200, 10, rng, exec());
  double logdet = 0;
  for (const auto& r : e.replicas) logdet = std::max(logdet, std::abs(r.mu1 + r.mu2 - r.log_det_rate));
  const double target = s.mu1;
  const double tol = std::max(3 * e.mu1.std_error, 0.1 * std::abs(target));
  const double half_bn = 0.5 * s.beta_N;
  return {std::abs(e.mu1.value - target) <= tol && logdet <= 1e-9,
          fmt("mu1_hat %.4f +- %.4f vs (beta_N-beta_L)/2 = %.4f (tol %.4f); "
              "literal beta_N/2 = %.4f (within tol: %s); mu2_hat %.4f vs %.4f; log-det gap %.1e",
              e.mu1.value, e.mu1.std_error, target, tol, half_bn,
              std::abs(e.mu1.value - half_bn) <= std::max(3 * e.mu1.std_error, 0.1 * half_bn) ? "yes" : "no",
              e.mu2.value, s.mu2, logdet)};
}

std::vector<double> uniform_grid(int m) {
  std::vector<double> t;
  for (int i = 0; i < m; ++i) t.push_back(double(i) / (m - 1));
  return t;
}

Outcome dist_to_lip_oracles() {
  using namespace geometry;
  Rng rng(106);
  double brute_err = 0;
  for (int i = 0; i < 50; ++i) {
    const int m = 2 + static_cast<int>(rng.below(4));
    DiscretePath g{uniform_grid(m), {}};
    for (int j = 0; j < m; ++j) g.values.emplace_back(0.3 * (2 * rng.uniform() - 1), 0.3 * (2 * rng.uniform() - 1));
    brute_err = std::max(brute_err, std::abs(dist_to_lip(g, 1.0, 1e-5, 128) -
                                             oracle::brute_dist_to_lip(g, 1.0, 1e-3)));
  }
  double line_err = 0;
  bool monotone = true;
  for (int i = 0; i < 50; ++i) {
    const int m = 2 + static_cast<int>(rng.below(4));
    DiscretePath g{uniform_grid(m), {}};
    std::vector<double> x;
    for (int j = 0; j < m; ++j) {
      x.push_back(2 * rng.uniform() - 1);
      g.values.emplace_back(x.back(), 0.0);
    }
    line_err = std::max(line_err, std::abs(dist_to_lip(g, 0.8, 1e-8) - dist_to_lip_1d(g.times, x, 0.8)));

    DiscretePath h{uniform_grid(m), {}};
    for (int j = 0; j < m; ++j) h.values.emplace_back(rng.normal(), rng.normal());
    double prev = INFINITY;
    for (double K : {0.25, 0.5, 1.0, 2.0, 4.0}) {
      BisectionTrace trace;
      const double d = dist_to_lip(h, K, 1e-6, 64, &trace);
      double lo = 0, hi = INFINITY;
      for (const auto& [eps, ok] : trace.queries) {
        if (ok) hi = std::min(hi, eps);
        else lo = std::max(lo, eps);
      }
      monotone = monotone && lo < hi && d <= prev + 1e-6;
      prev = d;
    }
  }
  return {brute_err <= 2e-3 && line_err <= 1e-6 && monotone,
          fmt("grid search gap %.2e (tol 2e-3), 1D gap %.2e (tol 1e-6), monotone in K and eps: %s",
              brute_err, line_err, monotone ? "yes" : "no")};
}

struct StableNormRun {
  double K_hat = 0;
};

Outcome stable_norm_coherence(StableNormRun& out) {
  const auto m = default_modes();
  StableNormSettings s;
  s.distances = {20.0, 40.0};
  s.n_rep = 200;
  Rng rng(107);
  const auto e1 = estimate_stable_norm(m, s, rng, exec());
  out.K_hat = e1.K_hat;
  const auto& a = e1.per_distance[0].tau_over_distance;
  const auto& b = e1.per_distance[1].tau_over_distance;
  const double z_dist = std::abs(z_score(a, b));
  std::fprintf(stderr, "  e1: tau/|v| %.4f +- %.4f at 20, %.4f +- %.4f at 40, K_rough %.4f\n",
               a.value, a.std_error, b.value, b.std_error, e1.K_rough);

  std::vector<EstimateResult> dirs{a};
  bool reliable = e1.reliable;
  for (int j = 1; j < 8; ++j) {
    auto sj = s;
    const double ang = 2 * std::numbers::pi * j / 8;
    sj.direction = Vec2(std::cos(ang), std::sin(ang));
    sj.distances = {20.0};
    sj.k_rough = e1.K_rough;
    const auto ej = estimate_stable_norm(m, sj, rng, exec());
    reliable = reliable && ej.reliable;
    dirs.push_back(ej.per_distance[0].tau_over_distance);
    std::fprintf(stderr, "  direction %d: tau/|v| %.4f +- %.4f\n", j, dirs.back().value, dirs.back().std_error);
  }
  double pooled = 0;
  for (const auto& d : dirs) pooled += d.value / dirs.size();
  double worst_dir = 0;
  for (const auto& d : dirs) worst_dir = std::max(worst_dir, std::abs(d.value - pooled) / d.std_error);
  const double rel = e1.K_hat_std_error / e1.K_hat;
  return {z_dist <= 2 && worst_dir <= 2 && e1.K_hat > 0 && rel < 0.1 && reliable,
          fmt("20 vs 40: |z| %.2f; 8 directions: worst |dev|/SE %.2f from pooled %.4f; "
              "K_hat %.4f +- %.4f (rel %.3f); timeouts within limit: %s",
              z_dist, worst_dir, pooled, e1.K_hat, e1.K_hat_std_error, rel, reliable ? "yes" : "no")};
}

Outcome support_trend(double K_hat) {
  if (!(K_hat > 0)) return {false, "no K_hat available"};
  const auto m = default_modes();
  SupportSettings s;
  s.K_hat = K_hat;
  Rng rng(108);
  const auto X = segment_points({0, 0}, {1, 0}, 50);
  const auto r = support_experiment(m, X, s, rng, exec());
  std::string detail = fmt("K_hat %.4f;", K_hat);
  bool ok = true;
  for (std::size_t i = 0; i < r.per_horizon.size(); ++i) {
    const auto& h = r.per_horizon[i];
    detail += fmt(" T=%g: median d_H %.4f (upper %.4f, lower %.4f);", h.T, h.d_H.median,
                  h.d_upper.median, h.d_lower.median);
    if (i > 0) ok = ok && h.d_H.median < r.per_horizon[i - 1].d_H.median;
  }
  return {ok, detail};
}

Outcome persistence_trend() {
  const auto m = default_modes();
  const auto gamma = flow::CurveImage::segment({0, 0}, {1, 0}, 0.05);
  Rng rng(109);
  std::vector<EstimateResult> fractions;
  std::string detail;
  for (double T : {25.0, 100.0}) {
    PersistenceSettings s;
    s.T = T;
    const auto r = diameter_persistence(m, gamma, s, rng, exec());
    fractions.push_back(r.fraction);
    detail += fmt("T=%g: %.4f +- %.4f; ", T, r.fraction.value, r.fraction.std_error);
  }
  const double z = z_score(fractions[1], fractions[0]);
  return {z <= 2, detail + fmt("z %.2f (limit 2)", z)};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome determinism() {
  const auto cfg = cli::parse_config(test_support::kSmallSuite);
  const auto base = std::filesystem::temp_directory_path() / "ibf_acceptance_determinism";
  std::filesystem::remove_all(base);
  std::ostringstream log;
  const auto a = cli::run(cfg, {cli::Experiment::suite, base / "a", 1, false}, log);
  const auto b = cli::run(cfg, {cli::Experiment::suite, base / "b", exec().threads, false}, log);
  bool same = a.files == b.files;
  std::size_t csvs = 0;
  for (const auto& f : a.files) {
    if (!f.ends_with(".csv")) continue;
    ++csvs;
    same = same && slurp(base / "a" / f) == slurp(base / "b" / f);
  }
  std::filesystem::remove_all(base);
  return {same && csvs > 0, fmt("%zu CSV files compared across two suite runs: %s", csvs,
                                same ? "byte-identical" : "different")};
}

int failures = 0;

void criterion(int id, const char* title, const std::function<Outcome()>& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = fn();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!o.pass) ++failures;
  std::printf("criterion %2d %s: %s [%.1fs] %s\n", id, o.pass ? "PASS" : "FAIL", title, secs,
              o.detail.c_str());
  std::fflush(stdout);
}

}  // namespace

int main(int argc, char** argv) {
  bool fast = true, slow = true;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--fast") slow = false;
    else if (a == "--slow") fast = false;
    else {
      std::fprintf(stderr, "usage: acceptance [--fast | --slow]\n");
      return 2;
    }
  }
  if (fast) {
    criterion(1, "normalization and symmetry", normalization_and_symmetry);
    criterion(2, "kappa bound", kappa_bound);
    criterion(3, "curvature moduli", moduli_correctness);
    criterion(4, "one-point Brownian law", one_point_law);
    criterion(5, "Lyapunov agreement", lyapunov_agreement);
    criterion(6, "dist_to_lip oracles", dist_to_lip_oracles);
  }
  StableNormRun sn;
  if (slow) {
    criterion(7, "stable-norm coherence", [&] { return stable_norm_coherence(sn); });
    criterion(8, "support-theorem trend", [&] { return support_trend(sn.K_hat); });
  }
  if (fast) {
    criterion(9, "diameter persistence trend", persistence_trend);
    criterion(10, "determinism", determinism);
  }
  return failures == 0 ? 0 : 1;
}
