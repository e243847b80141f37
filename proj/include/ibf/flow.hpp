#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "ibf/geometry.hpp"
#include "ibf/model.hpp"
#include "ibf/rng.hpp"
#include "ibf/types.hpp"

/// Euler-Maruyama integration of the stochastic flow generated by a ModeSet.
///
/// Every point of an ensemble is driven by the same Gaussian draw per step;
/// that shared draw is what turns independent diffusions into a flow. For a
/// single point the step is exact in law (Gaussian with covariance dt Id);
/// multi-point and Jacobian statistics carry O(dt) weak error.
namespace ibf::flow {

using model::ModeSet;

/// One standard-normal pair per mode.
struct NoiseDraw {
  std::vector<double> xi;
  std::vector<double> xi_prime;

  /// Draws xi_j, xi'_j interleaved in mode order.
  static NoiseDraw sample(std::size_t n_modes, Rng& rng);
  static NoiseDraw zero(std::size_t n_modes);
};

/// A NoiseDraw folded onto the phase groups of a ModeSet and scaled by
/// sqrt(dt): the increment at x is sum_g cos<k_g,x> c_g + sin<k_g,x> s_g.
struct FoldedNoise {
  std::vector<double> cx, cy, sx, sy;
};

FoldedNoise fold(const ModeSet& m, const NoiseDraw& noise, double dt);

/// sqrt(dt) sum_j sqrt(sigma2_j) e_j (cos<k_j,x> xi_j + sin<k_j,x> xi'_j).
Vec2 velocity_increment(const ModeSet& m, const Vec2& x, const NoiseDraw& noise,
                        double dt);

/// Exact x-gradient of velocity_increment.
Mat2 jacobian_increment(const ModeSet& m, const Vec2& x, const NoiseDraw& noise,
                        double dt);

/// Folded-noise evaluation used by the integrators.
Vec2 increment(const ModeSet& m, const FoldedNoise& f, const Vec2& x);
void increment_with_gradient(const ModeSet& m, const FoldedNoise& f,
                             const Vec2& x, Vec2& du, Mat2& dgrad);

struct Ensemble {
  double time = 0.0;
  std::vector<Vec2> positions;
  std::optional<std::vector<Mat2>> jacobians;

  static Ensemble at(std::vector<Vec2> points, bool with_jacobians = false);
};

/// Advances every position (and Jacobian, when tracked) with one shared
/// NoiseDraw.
void advance(Ensemble& ens, const ModeSet& m, double dt, Rng& rng);

inline Ensemble step(Ensemble ens, const ModeSet& m, double dt, Rng& rng) {
  advance(ens, m, dt, rng);
  return ens;
}

/// Discretized trajectories started from a finite point sample.
struct PathBundle {
  double horizon = 0.0;
  std::vector<double> save_times;          // scaled times in [0, 1]
  std::vector<std::vector<Vec2>> paths;    // raw positions, one per save time

  /// Trajectories t -> phi_{tT}(x) / T on the save grid.
  std::vector<geometry::DiscretePath> scaled() const;
};

/// Integrates to horizon T recording positions at save_times[i] * T.
/// Save times must start at 0, end at 1 and increase; dt must satisfy
/// 0 < dt <= T.
PathBundle simulate_paths(std::span<const Vec2> initial, const ModeSet& m,
                          double horizon, double dt,
                          std::span<const double> save_times, Rng& rng);

/// Polyline approximation of the image of a curve. linked[i] says whether an
/// edge joins vertex i-1 to vertex i; strand merging and pruning can split the
/// polyline into several chains.
struct CurveImage {
  std::vector<Vec2> vertices;
  std::vector<std::uint8_t> linked;
  double h_max = 0.02;

  CurveImage() = default;
  CurveImage(std::vector<Vec2> vertices, double h_max);

  /// Straight segment from a to b, pre-refined to spacing <= h_max.
  static CurveImage segment(const Vec2& a, const Vec2& b, double h_max);

  std::size_t size() const noexcept { return vertices.size(); }
  double max_gap() const;
};

/// Optional coarse-graining of the tracked image.
///
/// merge_radius > 0 drops a vertex lying within that distance of an already
/// kept vertex of a different strand. focus restricts tracking to the part of
/// the image within (closest distance to focus->point) + focus->window of the
/// point. Both run every maintenance_interval steps and only remove tracked
/// vertices, so diameters and hit tests stay conservative.
struct CurveOptions {
  struct Focus {
    Vec2 point;
    double window = 0.0;
  };
  std::size_t max_vertices = 200'000;
  double merge_radius = 0.0;
  std::optional<Focus> focus;
  int maintenance_interval = 10;
  /// Stop inserting vertices beyond this count; further gaps are reported as
  /// under-resolved. 0 disables the budget.
  std::size_t refine_budget = 0;
};

struct StepReport {
  std::size_t steps = 0;
  std::size_t insertions = 0;
  std::size_t merged = 0;
  std::size_t pruned = 0;
  std::size_t peak_vertices = 0;
  double max_final_gap = 0.0;
  bool under_resolved = false;
};

/// Inserts midpoints until every linked edge is at most h_max long (subject to
/// the refinement budget). Returns the number of inserted vertices.
std::size_t refine(CurveImage& curve, std::size_t budget = 0);

/// Strand merging and focus pruning as described for CurveOptions.
void coarsen(CurveImage& curve, const CurveOptions& opts, StepReport& report);

/// Called after every step with the current time and tracked vertices;
/// returning false ends the run early.
using CurveObserver = std::function<bool(double, std::span<const Vec2>)>;

/// Advances the curve image to t_end (refine, then step, repeatedly).
/// Throws ResolutionError when the vertex count exceeds opts.max_vertices.
StepReport evolve_curve(CurveImage& curve, const ModeSet& m, double dt,
                        double t_end, Rng& rng, const CurveOptions& opts = {},
                        const CurveObserver& observe = {});

struct HitResult {
  bool hit = false;
  double tau = 0.0;
  double diam_at_hit = 0.0;
  StepReport report;
};

/// First step time at which the tracked image meets the closed ball B_R(v)
/// while its tracked diameter is at least 1. hit = false after t_max.
HitResult run_until_hit(CurveImage curve, const ModeSet& m, const Vec2& v,
                        double R, double dt, double t_max, Rng& rng,
                        const CurveOptions& opts = {});

}  // namespace ibf::flow
