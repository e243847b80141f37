#include "ibf/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include "ibf/parallel.hpp"

namespace ibf::estimators {

namespace {

constexpr double kZ95 = 1.96;

long long step_count(double T, double dt) {
  if (!(T > 0.0) || !(dt > 0.0) || dt > T) {
    throw std::invalid_argument("need 0 < dt <= T");
  }
  return std::llround(T / dt);
}

double median_of(std::vector<double> v) { return quartiles(std::move(v)).median; }

}  // namespace

EstimateResult EstimateResult::from_samples(std::span<const double> samples) {
  const std::size_t n = samples.size();
  if (n < 2) throw NumericalError("standard error needs at least 2 replicas");
  const double mean = std::accumulate(samples.begin(), samples.end(), 0.0) /
                      static_cast<double>(n);
  double ss = 0.0;
  for (double x : samples) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  return from_mean(mean, sd / std::sqrt(static_cast<double>(n)), n);
}

EstimateResult EstimateResult::from_mean(double value, double std_error, std::size_t n) {
  return {value, std_error, n, value - kZ95 * std_error, value + kZ95 * std_error};
}

EstimateResult proportion(std::size_t successes, std::size_t n) {
  if (n == 0) throw std::invalid_argument("proportion of zero trials");
  const double p = static_cast<double>(successes) / static_cast<double>(n);
  return EstimateResult::from_mean(p, std::sqrt(p * (1.0 - p) / static_cast<double>(n)), n);
}

double z_score(const EstimateResult& a, const EstimateResult& b) {
  const double se = std::hypot(a.std_error, b.std_error);
  const double diff = a.value - b.value;
  if (se == 0.0) return diff == 0.0 ? 0.0 : std::copysign(INFINITY, diff);
  return diff / se;
}

std::vector<Vec2> segment_points(const Vec2& a, const Vec2& b, std::size_t n) {
  if (n == 0) return {};
  if (n == 1) return {a};
  std::vector<Vec2> pts;
  pts.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    pts.push_back(a + (b - a) * (static_cast<double>(i) / static_cast<double>(n - 1)));
  }
  return pts;
}

Quartiles quartiles(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("quartiles of an empty sample");
  std::sort(v.begin(), v.end());
  auto at = [&v](double q) {
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
  };
  return {at(0.25), at(0.5), at(0.75)};
}

DiffusivityEstimate one_point_diffusivity(const ModeSet& m, double T, double dt,
                                          std::size_t N, Rng& rng,
                                          const Execution& exec) {
  if (N < 2) throw std::invalid_argument("one_point_diffusivity: N must be at least 2");
  const long long steps = step_count(T, dt);
  const double step_dt = T / static_cast<double>(steps);
  const std::uint64_t master = rng();
  DiffusivityEstimate out;
  out.T = T;
  out.dt = step_dt;
  out.samples = map_replicas(N, exec.threads, [&](std::size_t i) {
    Rng r = Rng::substream(master, i);
    auto ens = flow::Ensemble::at({Vec2::Zero()});
    for (long long s = 0; s < steps; ++s) flow::advance(ens, m, step_dt, r);
    return ens.positions[0].squaredNorm() / (2.0 * T);
  });
  out.estimate = EstimateResult::from_samples(out.samples);
  return out;
}

IncrementCovariance increment_covariance(const ModeSet& m, const Vec2& x,
                                         const Vec2& y, double dt, std::size_t N,
                                         Rng& rng) {
  if (N < 2) throw std::invalid_argument("increment_covariance: N must be at least 2");
  Mat2 sum = Mat2::Zero(), sum_sq = Mat2::Zero();
  for (std::size_t i = 0; i < N; ++i) {
    const auto f = flow::fold(m, flow::NoiseDraw::sample(m.size(), rng), dt);
    const Mat2 p = flow::increment(m, f, x) * flow::increment(m, f, y).transpose();
    sum += p;
    sum_sq += p.cwiseProduct(p);
  }
  const double n = static_cast<double>(N);
  IncrementCovariance out;
  out.n = N;
  out.target = dt * model::covariance_at(m, x - y);
  out.mean = sum / n;
  const Mat2 var = (sum_sq - n * out.mean.cwiseProduct(out.mean)) / (n - 1.0);
  out.std_error = (var.cwiseMax(0.0) / n).cwiseSqrt();
  return out;
}

LyapunovEstimate estimate_lyapunov(const ModeSet& m, double T, double dt, std::size_t N,
                                   int renorm_every, Rng& rng, const Execution& exec) {
  if (N < 2) throw std::invalid_argument("estimate_lyapunov: N must be at least 2");
  if (renorm_every < 1) throw std::invalid_argument("estimate_lyapunov: renorm_every >= 1");
  const long long steps = step_count(T, dt);
  const double step_dt = T / static_cast<double>(steps);
  const std::uint64_t master = rng();

  LyapunovEstimate out;
  out.T = T;
  out.dt = step_dt;
  out.replicas = map_replicas(N, exec.threads, [&](std::size_t i) {
    Rng r = Rng::substream(master, i);
    flow::FoldedNoise f;
    Vec2 x = Vec2::Zero();
    Mat2 J = Mat2::Identity();
    double log_r11 = 0.0, log_r22 = 0.0, log_det = 0.0;
    // Gram-Schmidt QR of J; R's diagonal carries the growth, Q replaces J.
    auto renormalize = [&] {
      const Vec2 c1 = J.col(0);
      const double r11 = c1.norm();
      const Vec2 q1 = c1 / r11;
      const Vec2 c2 = J.col(1) - q1.dot(J.col(1)) * q1;
      const double r22 = c2.norm();
      if (!std::isfinite(r11) || !std::isfinite(r22) || r11 == 0.0 || r22 == 0.0) {
        throw NumericalError("Jacobian overflow before renormalization; use a smaller "
                             "renorm_every");
      }
      log_r11 += std::log(r11);
      log_r22 += std::log(r22);
      J.col(0) = q1;
      J.col(1) = c2 / r22;
    };
    for (long long s = 1; s <= steps; ++s) {
      f = flow::fold(m, flow::NoiseDraw::sample(m.size(), r), step_dt);
      Vec2 du;
      Mat2 G;
      flow::increment_with_gradient(m, f, x, du, G);
      const Mat2 A = Mat2::Identity() + G;
      log_det += std::log(std::abs(A(0, 0) * A(1, 1) - A(0, 1) * A(1, 0)));
      J = A * J;
      x += du;
      if (s % renorm_every == 0 || s == steps) renormalize();
    }
    return LyapunovReplica{log_r11 / T, log_r22 / T, log_det / T};
  });
  std::vector<double> a, b;
  for (const auto& rep : out.replicas) {
    a.push_back(rep.mu1);
    b.push_back(rep.mu2);
  }
  out.mu1 = EstimateResult::from_samples(a);
  out.mu2 = EstimateResult::from_samples(b);
  return out;
}

CurveImage start_segment(const Vec2& direction, double h_max) {
  return CurveImage::segment(Vec2::Zero(), direction.normalized(), h_max);
}

namespace {

std::vector<HitSample> hitting_runs(const ModeSet& m, const StableNormSettings& s,
                                    double distance, double t_max, std::size_t n,
                                    std::uint64_t master, const Execution& exec) {
  const Vec2 dir = s.direction.normalized();
  const Vec2 target = distance * dir;
  flow::CurveOptions opts;
  opts.max_vertices = s.resolution.max_vertices;
  opts.merge_radius = s.resolution.merge_radius;
  if (s.resolution.focus_window > 0.0) {
    opts.focus = flow::CurveOptions::Focus{target, s.resolution.focus_window};
  }
  const CurveImage start = start_segment(dir, s.resolution.h_max);
  return map_replicas(n, exec.threads, [&](std::size_t i) {
    Rng r = Rng::substream(master, i);
    const auto hit = flow::run_until_hit(start, m, target, s.R, s.dt, t_max, r, opts);
    return HitSample{hit.hit, hit.tau, hit.report.peak_vertices};
  });
}

}  // namespace

StableNormEstimate estimate_stable_norm(const ModeSet& m, const StableNormSettings& s,
                                        Rng& rng, const Execution& exec) {
  if (s.distances.empty()) throw std::invalid_argument("estimate_stable_norm: no distances");
  for (std::size_t i = 0; i < s.distances.size(); ++i) {
    if (!(s.distances[i] >= 10.0) || (i > 0 && !(s.distances[i] > s.distances[i - 1]))) {
      throw std::invalid_argument(
          "estimate_stable_norm: distances must increase and be at least 10");
    }
  }
  if (!(s.R >= 1.0)) throw std::invalid_argument("estimate_stable_norm: R must be >= 1");
  if (s.n_rep < 2) throw std::invalid_argument("estimate_stable_norm: n_rep must be >= 2");
  if (!(s.t_max_factor > 1.0)) {
    throw std::invalid_argument("estimate_stable_norm: t_max_factor must exceed 1");
  }
  if (s.direction.norm() == 0.0) throw std::invalid_argument("estimate_stable_norm: zero direction");
  const std::uint64_t master = rng();

  StableNormEstimate out;
  out.direction = s.direction.normalized();
  if (s.k_rough) {
    out.K_rough = *s.k_rough;
  } else {
    // Pilot at the smallest distance with a diffusive-scale cap.
    const double d0 = s.distances.front();
    const auto pilot = hitting_runs(m, s, d0, d0 * d0, std::max<std::size_t>(s.n_pilot, 1),
                                    substream_seed(master, 0), exec);
    std::vector<double> taus;
    for (const auto& p : pilot) {
      if (p.hit) taus.push_back(p.tau);
    }
    if (taus.empty()) throw NumericalError("stable-norm pilot: no run reached the target");
    out.K_rough = d0 / median_of(taus);
  }
  if (!(out.K_rough > 0.0)) throw NumericalError("stable-norm pilot: K_rough is not positive");

  for (std::size_t di = 0; di < s.distances.size(); ++di) {
    DistanceEstimate d;
    d.distance = s.distances[di];
    d.t_max = s.t_max_factor * d.distance / out.K_rough;
    d.runs = hitting_runs(m, s, d.distance, d.t_max, s.n_rep, substream_seed(master, di + 1),
                          exec);
    std::vector<double> ratios;
    for (const auto& run : d.runs) {
      if (run.hit) {
        ratios.push_back(run.tau / d.distance);
      } else {
        ++d.timeouts;
      }
    }
    d.timeout_fraction = static_cast<double>(d.timeouts) / static_cast<double>(s.n_rep);
    if (d.timeout_fraction > 0.2) out.reliable = false;
    if (ratios.size() >= 2) {
      d.tau_over_distance = EstimateResult::from_samples(ratios);
    } else {
      out.reliable = false;
      d.tau_over_distance = EstimateResult::from_mean(
          ratios.empty() ? std::numeric_limits<double>::quiet_NaN() : ratios[0],
          std::numeric_limits<double>::quiet_NaN(), ratios.size());
    }
    out.per_distance.push_back(std::move(d));
  }
  const auto& last = out.per_distance.back().tau_over_distance;
  out.extrapolated_norm = last.value;
  out.K_hat = 1.0 / last.value;
  out.K_hat_std_error = last.std_error / (last.value * last.value);
  if (!(out.extrapolated_norm > 0.0)) out.reliable = false;
  return out;
}

ShapeReport shape_experiment(const ModeSet& m, const ShapeSettings& s, Rng& rng,
                             const Execution& exec) {
  if (!(s.K_hat > 0.0)) throw std::invalid_argument("shape_experiment: K_hat must be positive");
  if (s.n_directions < 1) throw std::invalid_argument("shape_experiment: n_directions >= 1");
  if (s.n_rep < 1) throw std::invalid_argument("shape_experiment: n_rep >= 1");
  if (!(s.eps > 0.0) || s.eps > 1.0) throw std::invalid_argument("shape_experiment: eps in (0, 1]");
  const std::uint64_t master = rng();
  const double outer_radius = (1.0 + s.eps) * s.T * s.K_hat;
  const double inner_radius = (1.0 - s.eps) * s.T * s.K_hat;
  std::vector<Vec2> targets;
  for (int j = 0; j < s.n_directions; ++j) {
    const double a = 2.0 * M_PI * j / s.n_directions;
    targets.emplace_back(inner_radius * std::cos(a), inner_radius * std::sin(a));
  }

  flow::CurveOptions opts;
  opts.max_vertices = s.max_vertices;
  opts.merge_radius = s.merge_radius;

  ShapeReport report;
  report.settings = s;
  report.replicas = map_replicas(s.n_rep, exec.threads, [&](std::size_t i) {
    Rng r = Rng::substream(master, i);
    CurveImage curve = start_segment(Vec2::UnitX(), s.h_max);
    ShapeReplica rep;
    std::vector<std::uint8_t> reached(targets.size(), 0);
    auto sweep = [&](std::span<const Vec2> pts) {
      for (const auto& p : pts) {
        rep.max_radius = std::max(rep.max_radius, p.norm());
        for (std::size_t j = 0; j < targets.size(); ++j) {
          if (!reached[j] && (p - targets[j]).norm() <= s.R) reached[j] = 1;
        }
      }
    };
    sweep(curve.vertices);
    long long step = 0;
    flow::evolve_curve(curve, m, s.dt, s.T, r, opts, [&](double, std::span<const Vec2> pts) {
      if (++step % s.check_every == 0) sweep(pts);
      return true;
    });
    sweep(curve.vertices);
    rep.directions_reached = static_cast<int>(std::count(reached.begin(), reached.end(), 1));
    rep.outer = rep.max_radius <= outer_radius;
    rep.inner = rep.directions_reached == s.n_directions;
    return rep;
  });
  std::size_t outer = 0, inner = 0, both = 0;
  for (const auto& rep : report.replicas) {
    outer += rep.outer;
    inner += rep.inner;
    both += rep.outer && rep.inner;
  }
  report.outer_probability = proportion(outer, s.n_rep);
  report.inner_probability = proportion(inner, s.n_rep);
  report.double_probability = proportion(both, s.n_rep);
  return report;
}

PersistenceReport diameter_persistence(const ModeSet& m, const CurveImage& gamma,
                                       const PersistenceSettings& s, Rng& rng,
                                       const Execution& exec) {
  if (s.n_rep == 0) throw std::invalid_argument("diameter_persistence: n_rep must be positive");
  if (geometry::diameter(gamma.vertices) < 1.0) {
    throw std::invalid_argument("diameter_persistence: gamma must have diameter >= 1");
  }
  if (s.check_every < 1) throw std::invalid_argument("diameter_persistence: check_every >= 1");
  const std::uint64_t master = rng();
  const double t_from = std::sqrt(s.T);

  flow::CurveOptions opts;
  opts.refine_budget = s.refine_budget;
  opts.maintenance_interval = 0;

  PersistenceReport report;
  report.settings = s;
  report.replicas = map_replicas(s.n_rep, exec.threads, [&](std::size_t i) {
    Rng r = Rng::substream(master, i);
    CurveImage curve = gamma;
    curve.h_max = s.h_max;
    PersistenceReplica rep;
    rep.min_diameter = std::numeric_limits<double>::infinity();
    long long step = 0;
    const auto sr = flow::evolve_curve(
        curve, m, s.dt, s.T, r, opts, [&](double t, std::span<const Vec2> pts) {
          if (++step % s.check_every == 0 && t >= t_from - 1e-9) {
            rep.min_diameter = std::min(rep.min_diameter, geometry::diameter(pts));
          }
          return true;
        });
    rep.dropped = rep.min_diameter < 1.0;
    rep.under_resolved = sr.under_resolved;
    return rep;
  });
  std::size_t drops = 0;
  for (const auto& rep : report.replicas) drops += rep.dropped;
  report.fraction = proportion(drops, s.n_rep);
  return report;
}

SupportReport support_experiment(const ModeSet& m, std::span<const Vec2> X_sample,
                                 const SupportSettings& s, Rng& rng,
                                 const Execution& exec) {
  if (X_sample.empty()) throw std::invalid_argument("support_experiment: empty X_sample");
  if (!(s.K_hat > 0.0)) throw std::invalid_argument("support_experiment: K_hat must be positive");
  if (s.grid_points < 2) throw std::invalid_argument("support_experiment: grid_points >= 2");
  if (s.n_rep < 1) throw std::invalid_argument("support_experiment: n_rep >= 1");
  if (s.horizons.empty()) throw std::invalid_argument("support_experiment: no horizons");
  const std::uint64_t master = rng();

  std::vector<double> save_times;
  for (int i = 0; i < s.grid_points; ++i) {
    save_times.push_back(static_cast<double>(i) / (s.grid_points - 1));
  }

  SupportReport report;
  for (std::size_t ti = 0; ti < s.horizons.size(); ++ti) {
    const double T = s.horizons[ti];
    const std::uint64_t horizon_master = substream_seed(master, ti);
    Rng net_rng = Rng::substream(horizon_master, 0);
    const auto net = geometry::build_lip_net(s.K_hat, s.grid_points, s.net.directions,
                                             s.net.levels, s.net.cap, net_rng);
    auto estimates = map_replicas(s.n_rep, exec.threads, [&](std::size_t i) {
      Rng r = Rng::substream(horizon_master, i + 1);
      const auto bundle = flow::simulate_paths(X_sample, m, T, s.dt, save_times, r);
      const auto scaled = bundle.scaled();
      return geometry::hausdorff_estimate(scaled, s.K_hat, net, s.eps_tol, s.polygon_vertices);
    });
    SupportSummary summary;
    summary.T = T;
    summary.n_rep = s.n_rep;
    std::vector<double> up, lo, dh;
    for (std::size_t i = 0; i < estimates.size(); ++i) {
      const auto& e = estimates[i];
      report.rows.push_back({T, i, e.to_lip, e.from_lip, e.d_H, s.K_hat});
      up.push_back(e.to_lip);
      lo.push_back(e.from_lip);
      dh.push_back(e.d_H);
    }
    summary.d_upper = quartiles(up);
    summary.d_lower = quartiles(lo);
    summary.d_H = quartiles(dh);
    report.per_horizon.push_back(summary);
  }
  return report;
}

ScalingReport scaling_check(const model::SpectralModel& spec, double r,
                            const StableNormSettings& s, Rng& rng, const Execution& exec) {
  if (!(r > 0.0) || r > 1.0) throw std::invalid_argument("scaling_check: r must be in (0, 1]");
  const std::uint64_t master = rng();
  ScalingReport out;
  out.r = r;
  {
    Rng base_rng(master);
    out.base = estimate_stable_norm(model::build_mode_set(spec), s, base_rng, exec);
  }
  // Lengths of the scaled field are 1/r times longer; resolve it alike.
  StableNormSettings ss = s;
  ss.resolution.h_max /= r;
  ss.resolution.merge_radius /= r;
  ss.resolution.focus_window /= r;
  if (ss.k_rough) *ss.k_rough *= r;
  {
    Rng scaled_rng(master);
    out.scaled = estimate_stable_norm(model::build_mode_set(spec.scaled(r)), ss, scaled_rng, exec);
  }
  const double ratio = out.scaled.K_hat / (r * out.base.K_hat);
  const double rel = std::hypot(out.scaled.K_hat_std_error / out.scaled.K_hat,
                                out.base.K_hat_std_error / out.base.K_hat);
  out.ratio = EstimateResult::from_mean(ratio, ratio * rel,
                                        std::min(out.base.per_distance.back().runs.size(),
                                                 out.scaled.per_distance.back().runs.size()));
  return out;
}

}  // namespace ibf::estimators
