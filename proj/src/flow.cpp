#include "ibf/flow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <unordered_map>

namespace ibf::flow {

namespace {

// Cody-Waite reduction by pi/2 plus Taylor polynomials on [-pi/4, pi/4];
// accurate to a few ulp for |p| < 1e6 and vectorizable.
#pragma omp declare simd
inline void fast_sincos(double p, double& s, double& c) {
  constexpr double kTwoOverPi = 0.63661977236758134308;
  constexpr double kPio2Hi = 1.5707963267341256e+00;
  constexpr double kPio2Lo = 6.0771005065061922e-11;
  const double q = std::nearbyint(p * kTwoOverPi);
  const double r = (p - q * kPio2Hi) - q * kPio2Lo;
  const double r2 = r * r;
  const double sr =
      r * (1.0 + r2 * (-1.0 / 6 + r2 * (1.0 / 120 + r2 * (-1.0 / 5040 +
          r2 * (1.0 / 362880 + r2 * (-1.0 / 39916800 + r2 * (1.0 / 6227020800)))))));
  const double cr =
      1.0 + r2 * (-0.5 + r2 * (1.0 / 24 + r2 * (-1.0 / 720 + r2 * (1.0 / 40320 +
          r2 * (-1.0 / 3628800 + r2 * (1.0 / 479001600 + r2 * (-1.0 / 87178291200)))))));
  const int quadrant = static_cast<int>(static_cast<long long>(q) & 3);
  s = quadrant == 0 ? sr : quadrant == 1 ? cr : quadrant == 2 ? -sr : -cr;
  c = quadrant == 0 ? cr : quadrant == 1 ? -sr : quadrant == 2 ? -cr : sr;
}

constexpr double kFastPhaseLimit = 1e6;

double max_phase(const ModeSet& m, const Vec2& x) {
  double kmax = 0.0;
  for (const auto& g : m.groups()) kmax = std::max(kmax, g.k.norm());
  return kmax * x.norm();
}

struct Scratch {
  NoiseDraw noise;
  FoldedNoise folded;
};

Scratch& scratch() {
  thread_local Scratch s;
  return s;
}

void sample_into(NoiseDraw& d, std::size_t n, Rng& rng) {
  d.xi.resize(n);
  d.xi_prime.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    d.xi[j] = rng.normal();
    d.xi_prime[j] = rng.normal();
  }
}

void fold_into(FoldedNoise& f, const ModeSet& m, const NoiseDraw& noise, double dt) {
  if (noise.xi.size() != m.size() || noise.xi_prime.size() != m.size()) {
    throw std::invalid_argument("NoiseDraw length differs from the mode count");
  }
  const auto groups = m.groups();
  const auto modes = m.modes();
  const double sqrt_dt = std::sqrt(dt);
  f.cx.assign(groups.size(), 0.0);
  f.cy.assign(groups.size(), 0.0);
  f.sx.assign(groups.size(), 0.0);
  f.sy.assign(groups.size(), 0.0);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    for (const auto& member : groups[g].members) {
      const auto& mode = modes[member.mode];
      const double a = std::sqrt(mode.sigma2) * sqrt_dt;
      const double c = a * noise.xi[member.mode];
      const double s = a * member.k_sign * noise.xi_prime[member.mode];
      f.cx[g] += c * mode.e.x();
      f.cy[g] += c * mode.e.y();
      f.sx[g] += s * mode.e.x();
      f.sy[g] += s * mode.e.y();
    }
  }
}

}  // namespace

NoiseDraw NoiseDraw::sample(std::size_t n_modes, Rng& rng) {
  NoiseDraw d;
  sample_into(d, n_modes, rng);
  return d;
}

NoiseDraw NoiseDraw::zero(std::size_t n_modes) {
  return {std::vector<double>(n_modes, 0.0), std::vector<double>(n_modes, 0.0)};
}

FoldedNoise fold(const ModeSet& m, const NoiseDraw& noise, double dt) {
  FoldedNoise f;
  fold_into(f, m, noise, dt);
  return f;
}

Vec2 increment(const ModeSet& m, const FoldedNoise& f, const Vec2& x) {
  const std::size_t n = f.cx.size();
  const double* __restrict kx = m.group_kx().data();
  const double* __restrict ky = m.group_ky().data();
  const double* __restrict cx = f.cx.data();
  const double* __restrict cy = f.cy.data();
  const double* __restrict sx = f.sx.data();
  const double* __restrict sy = f.sy.data();
  const double px = x.x(), py = x.y();
  double ux = 0.0, uy = 0.0;
  if (max_phase(m, x) < kFastPhaseLimit) {
#pragma omp simd reduction(+ : ux, uy)
    for (std::size_t g = 0; g < n; ++g) {
      double s, c;
      fast_sincos(kx[g] * px + ky[g] * py, s, c);
      ux += c * cx[g] + s * sx[g];
      uy += c * cy[g] + s * sy[g];
    }
  } else {
    for (std::size_t g = 0; g < n; ++g) {
      const double p = kx[g] * px + ky[g] * py;
      const double s = std::sin(p), c = std::cos(p);
      ux += c * cx[g] + s * sx[g];
      uy += c * cy[g] + s * sy[g];
    }
  }
  return {ux, uy};
}

void increment_with_gradient(const ModeSet& m, const FoldedNoise& f, const Vec2& x,
                             Vec2& du, Mat2& dgrad) {
  const std::size_t n = f.cx.size();
  const double* __restrict kx = m.group_kx().data();
  const double* __restrict ky = m.group_ky().data();
  const double* __restrict cx = f.cx.data();
  const double* __restrict cy = f.cy.data();
  const double* __restrict sx = f.sx.data();
  const double* __restrict sy = f.sy.data();
  const double px = x.x(), py = x.y();
  const bool fast = max_phase(m, x) < kFastPhaseLimit;
  double ux = 0.0, uy = 0.0, gxx = 0.0, gxy = 0.0, gyx = 0.0, gyy = 0.0;
#pragma omp simd reduction(+ : ux, uy, gxx, gxy, gyx, gyy)
  for (std::size_t g = 0; g < n; ++g) {
    const double p = kx[g] * px + ky[g] * py;
    double s, c;
    if (fast) {
      fast_sincos(p, s, c);
    } else {
      s = std::sin(p);
      c = std::cos(p);
    }
    ux += c * cx[g] + s * sx[g];
    uy += c * cy[g] + s * sy[g];
    const double wx = -s * cx[g] + c * sx[g];
    const double wy = -s * cy[g] + c * sy[g];
    gxx += wx * kx[g];
    gxy += wx * ky[g];
    gyx += wy * kx[g];
    gyy += wy * ky[g];
  }
  du = Vec2(ux, uy);
  dgrad << gxx, gxy, gyx, gyy;
}

Vec2 velocity_increment(const ModeSet& m, const Vec2& x, const NoiseDraw& noise,
                        double dt) {
  return increment(m, fold(m, noise, dt), x);
}

Mat2 jacobian_increment(const ModeSet& m, const Vec2& x, const NoiseDraw& noise,
                        double dt) {
  Vec2 du;
  Mat2 grad;
  increment_with_gradient(m, fold(m, noise, dt), x, du, grad);
  return grad;
}

Ensemble Ensemble::at(std::vector<Vec2> points, bool with_jacobians) {
  if (points.empty()) throw std::invalid_argument("Ensemble: no positions");
  Ensemble e;
  if (with_jacobians) e.jacobians.emplace(points.size(), Mat2::Identity());
  e.positions = std::move(points);
  return e;
}

void advance(Ensemble& ens, const ModeSet& m, double dt, Rng& rng) {
  if (!(dt > 0.0)) throw std::invalid_argument("advance: dt must be positive");
  auto& s = scratch();
  sample_into(s.noise, m.size(), rng);
  fold_into(s.folded, m, s.noise, dt);
  if (ens.jacobians) {
    auto& jac = *ens.jacobians;
    for (std::size_t i = 0; i < ens.positions.size(); ++i) {
      Vec2 du;
      Mat2 grad;
      increment_with_gradient(m, s.folded, ens.positions[i], du, grad);
      jac[i] = (Mat2::Identity() + grad) * jac[i];
      ens.positions[i] += du;
    }
  } else {
    for (auto& x : ens.positions) x += increment(m, s.folded, x);
  }
  ens.time += dt;
}

std::vector<geometry::DiscretePath> PathBundle::scaled() const {
  std::vector<geometry::DiscretePath> out;
  out.reserve(paths.size());
  for (const auto& p : paths) {
    geometry::DiscretePath d{save_times, {}};
    d.values.reserve(p.size());
    for (const auto& x : p) d.values.push_back(x / horizon);
    out.push_back(std::move(d));
  }
  return out;
}

PathBundle simulate_paths(std::span<const Vec2> initial, const ModeSet& m, double horizon,
                          double dt, std::span<const double> save_times, Rng& rng) {
  if (initial.empty()) throw std::invalid_argument("simulate_paths: no initial points");
  if (!(horizon > 0.0)) throw std::invalid_argument("simulate_paths: horizon must be positive");
  if (!(dt > 0.0) || dt > horizon) {
    throw std::invalid_argument("simulate_paths: need 0 < dt <= T");
  }
  if (save_times.size() < 2 || save_times.front() != 0.0 || save_times.back() != 1.0) {
    throw std::invalid_argument("simulate_paths: save times must run from 0 to 1");
  }
  double min_gap = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < save_times.size(); ++i) {
    const double gap = save_times[i] - save_times[i - 1];
    if (!(gap > 0.0)) throw std::invalid_argument("simulate_paths: save times must increase");
    min_gap = std::min(min_gap, gap);
  }
  if (dt > horizon * min_gap * (1.0 + 1e-12)) {
    throw std::invalid_argument("simulate_paths: dt exceeds the save-time spacing");
  }

  // Integer step count so the horizon is hit exactly.
  const auto n_steps = static_cast<long long>(std::ceil(horizon / dt - 1e-9));
  const double step_dt = horizon / static_cast<double>(n_steps);
  std::vector<long long> save_at;
  for (double t : save_times) save_at.push_back(std::llround(t * static_cast<double>(n_steps)));

  PathBundle bundle;
  bundle.horizon = horizon;
  bundle.save_times.assign(save_times.begin(), save_times.end());
  bundle.paths.assign(initial.size(), {});
  for (auto& p : bundle.paths) p.reserve(save_times.size());

  Ensemble ens = Ensemble::at(std::vector<Vec2>(initial.begin(), initial.end()));
  std::size_t next = 0;
  for (long long step = 0;; ++step) {
    while (next < save_at.size() && save_at[next] == step) {
      for (std::size_t i = 0; i < initial.size(); ++i) {
        bundle.paths[i].push_back(ens.positions[i]);
      }
      ++next;
    }
    if (step == n_steps) break;
    advance(ens, m, step_dt, rng);
  }
  return bundle;
}

CurveImage::CurveImage(std::vector<Vec2> v, double h)
    : vertices(std::move(v)), linked(vertices.size(), 1), h_max(h) {
  if (vertices.size() < 2) throw std::invalid_argument("CurveImage: need at least 2 vertices");
  if (!(h_max > 0.0)) throw std::invalid_argument("CurveImage: h_max must be positive");
  linked[0] = 0;
}

CurveImage CurveImage::segment(const Vec2& a, const Vec2& b, double h) {
  CurveImage c({a, b}, h);
  refine(c);
  return c;
}

double CurveImage::max_gap() const {
  double gap = 0.0;
  for (std::size_t i = 1; i < vertices.size(); ++i) {
    if (linked[i]) gap = std::max(gap, (vertices[i] - vertices[i - 1]).norm());
  }
  return gap;
}

std::size_t refine(CurveImage& curve, std::size_t budget) {
  std::vector<Vec2> out;
  std::vector<std::uint8_t> link;
  out.reserve(curve.vertices.size() * 2);
  link.reserve(curve.vertices.size() * 2);
  std::size_t inserted = 0;
  for (std::size_t i = 0; i < curve.vertices.size(); ++i) {
    if (i > 0 && curve.linked[i]) {
      const Vec2& a = curve.vertices[i - 1];
      const Vec2& b = curve.vertices[i];
      const double gap = (b - a).norm();
      if (gap > curve.h_max) {
        // Repeated midpoint insertion: 2^k equal pieces.
        std::size_t pieces = 2;
        while (gap / static_cast<double>(pieces) > curve.h_max) pieces *= 2;
        const bool over_budget =
            budget > 0 && curve.vertices.size() + inserted + pieces - 1 > budget;
        if (!over_budget) {
          for (std::size_t s = 1; s < pieces; ++s) {
            out.push_back(a + (b - a) * (static_cast<double>(s) / static_cast<double>(pieces)));
            link.push_back(1);
          }
          inserted += pieces - 1;
        }
      }
    }
    out.push_back(curve.vertices[i]);
    link.push_back(curve.linked[i]);
  }
  curve.vertices = std::move(out);
  curve.linked = std::move(link);
  return inserted;
}

void coarsen(CurveImage& curve, const CurveOptions& opts, StepReport& report) {
  const bool merging = opts.merge_radius > 0.0;
  if (!merging && !opts.focus) return;
  const auto& v = curve.vertices;

  double keep_within = std::numeric_limits<double>::infinity();
  if (opts.focus) {
    double closest = std::numeric_limits<double>::infinity();
    for (const auto& p : v) closest = std::min(closest, (p - opts.focus->point).norm());
    keep_within = closest + opts.focus->window;
  }

  // Kept vertices bucketed on a grid of cell size merge_radius.
  constexpr std::size_t kChainWindow = 4;
  const double cell = merging ? opts.merge_radius : 1.0;
  auto key_of = [cell](long long gx, long long gy) {
    return (static_cast<std::uint64_t>(gx) << 32) ^ static_cast<std::uint32_t>(gy);
  };
  std::unordered_map<std::uint64_t, std::uint32_t> head;
  std::vector<std::uint32_t> next_in_cell;
  constexpr std::uint32_t kNone = std::numeric_limits<std::uint32_t>::max();

  std::vector<Vec2> kept;
  std::vector<std::uint8_t> link;
  kept.reserve(v.size());
  link.reserve(v.size());
  bool prev_kept = false;
  std::size_t chain_start = 0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Vec2& p = v[i];
    if (opts.focus && (p - opts.focus->point).norm() > keep_within) {
      ++report.pruned;
      prev_kept = false;
      continue;
    }
    const bool continues_chain = curve.linked[i] && prev_kept;
    if (merging) {
      const auto gx = static_cast<long long>(std::floor(p.x() / cell));
      const auto gy = static_cast<long long>(std::floor(p.y() / cell));
      // Vertices just behind on the current chain are not other strands.
      const std::size_t own_from =
          continues_chain ? std::max(chain_start, kept.size() >= kChainWindow
                                                      ? kept.size() - kChainWindow
                                                      : std::size_t{0})
                          : kept.size();
      bool near_other = false;
      for (long long ax = -1; ax <= 1 && !near_other; ++ax) {
        for (long long ay = -1; ay <= 1 && !near_other; ++ay) {
          auto it = head.find(key_of(gx + ax, gy + ay));
          if (it == head.end()) continue;
          for (auto q = it->second; q != kNone; q = next_in_cell[q]) {
            if (q >= own_from) continue;
            if ((kept[q] - p).norm() < opts.merge_radius) {
              near_other = true;
              break;
            }
          }
        }
      }
      if (near_other) {
        ++report.merged;
        prev_kept = false;
        continue;
      }
      const auto idx = static_cast<std::uint32_t>(kept.size());
      auto [it, inserted] = head.try_emplace(key_of(gx, gy), idx);
      next_in_cell.push_back(inserted ? kNone : it->second);
      if (!inserted) it->second = idx;
    }
    if (!continues_chain) chain_start = kept.size();
    kept.push_back(p);
    link.push_back(continues_chain ? 1 : 0);
    prev_kept = true;
  }
  curve.vertices = std::move(kept);
  curve.linked = std::move(link);
}

StepReport evolve_curve(CurveImage& curve, const ModeSet& m, double dt, double t_end,
                        Rng& rng, const CurveOptions& opts, const CurveObserver& observe) {
  if (!(dt > 0.0)) throw std::invalid_argument("evolve_curve: dt must be positive");
  if (curve.vertices.size() < 2 || curve.linked.size() != curve.vertices.size()) {
    throw std::invalid_argument("evolve_curve: malformed curve");
  }
  StepReport report;
  report.peak_vertices = curve.size();
  const auto n_steps = t_end > 0.0 ? static_cast<long long>(std::llround(t_end / dt)) : 0LL;
  auto& s = scratch();
  for (long long step = 1; step <= n_steps; ++step) {
    report.insertions += refine(curve, opts.refine_budget);
    if (curve.size() > opts.max_vertices) {
      throw ResolutionError("curve image exceeds " + std::to_string(opts.max_vertices) +
                            " vertices");
    }
    report.peak_vertices = std::max(report.peak_vertices, curve.size());
    sample_into(s.noise, m.size(), rng);
    fold_into(s.folded, m, s.noise, dt);
    for (auto& x : curve.vertices) x += increment(m, s.folded, x);
    ++report.steps;
    if (opts.maintenance_interval > 0 && step % opts.maintenance_interval == 0) {
      coarsen(curve, opts, report);
    }
    if (observe && !observe(static_cast<double>(step) * dt, curve.vertices)) break;
  }
  report.max_final_gap = curve.max_gap();
  report.under_resolved = report.max_final_gap > curve.h_max;
  return report;
}

HitResult run_until_hit(CurveImage curve, const ModeSet& m, const Vec2& v, double R,
                        double dt, double t_max, Rng& rng, const CurveOptions& opts) {
  if (!(R >= 1.0)) throw std::invalid_argument("run_until_hit: R must be >= 1");
  if (!(t_max > 0.0)) throw std::invalid_argument("run_until_hit: t_max must be positive");
  HitResult result;
  auto check = [&](double t, std::span<const Vec2> pts) {
    double closest = std::numeric_limits<double>::infinity();
    for (const auto& p : pts) closest = std::min(closest, (p - v).norm());
    if (closest > R) return false;
    const double diam = geometry::diameter(pts);
    if (diam < 1.0) return false;
    result.hit = true;
    result.tau = t;
    result.diam_at_hit = diam;
    return true;
  };
  if (check(0.0, curve.vertices)) return result;
  result.report = evolve_curve(curve, m, dt, t_max, rng, opts,
                               [&](double t, std::span<const Vec2> pts) { return !check(t, pts); });
  return result;
}

}  // namespace ibf::flow
