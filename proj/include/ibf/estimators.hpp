#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "ibf/flow.hpp"
#include "ibf/geometry.hpp"
#include "ibf/model.hpp"
#include "ibf/rng.hpp"
#include "ibf/types.hpp"

/// Monte Carlo experiments on the flow.
///
/// Every estimator draws one 64-bit master from the caller's generator and
/// gives replica i the substream (master, i), so results do not depend on the
/// number of worker threads. Aggregation always runs in replica order.
namespace ibf::estimators {

using flow::CurveImage;
using model::ModeSet;

struct EstimateResult {
  double value = 0.0;
  double std_error = 0.0;
  std::size_t n_replicas = 0;
  double ci_low = 0.0;
  double ci_high = 0.0;

  /// Sample mean and std / sqrt(n). Throws NumericalError for n < 2.
  static EstimateResult from_samples(std::span<const double> samples);
  static EstimateResult from_mean(double value, double std_error, std::size_t n);
};

/// Bernoulli proportion with its binomial standard error.
EstimateResult proportion(std::size_t successes, std::size_t n);

/// (a - b) / sqrt(se_a^2 + se_b^2); 0 when both errors vanish and a == b.
double z_score(const EstimateResult& a, const EstimateResult& b);

struct Execution {
  unsigned threads = 1;
};

/// Equally spaced points of the segment from a to b (inclusive).
std::vector<Vec2> segment_points(const Vec2& a, const Vec2& b, std::size_t n);

// ---- one-point motion ----------------------------------------------------

struct DiffusivityEstimate {
  EstimateResult estimate;     // E|phi_T(0)|^2 / (2T)
  std::vector<double> samples; // |phi_T(0)|^2 / (2T) per replica
  double T = 0.0;
  double dt = 0.0;
};

/// Throws std::invalid_argument for N < 2.
DiffusivityEstimate one_point_diffusivity(const ModeSet& m, double T, double dt,
                                          std::size_t N, Rng& rng,
                                          const Execution& exec = {});

struct IncrementCovariance {
  Mat2 target;  // dt b(x - y)
  Mat2 mean;    // sample mean of du(x) du(y)^T
  Mat2 std_error;
  std::size_t n = 0;
};

/// Cross-covariance of single-step increments at two points under shared
/// noise.
IncrementCovariance increment_covariance(const ModeSet& m, const Vec2& x,
                                         const Vec2& y, double dt, std::size_t N,
                                         Rng& rng);

// ---- Lyapunov exponents --------------------------------------------------

struct LyapunovReplica {
  double mu1 = 0.0;
  double mu2 = 0.0;
  double log_det_rate = 0.0;  // sum of log|det(I + G)| over steps, / T
};

struct LyapunovEstimate {
  EstimateResult mu1;
  EstimateResult mu2;
  std::vector<LyapunovReplica> replicas;
  double T = 0.0;
  double dt = 0.0;
};

/// Jacobian along one trajectory per replica, re-orthonormalized by QR every
/// renorm_every steps. Throws NumericalError if the Jacobian overflows before
/// a renormalization.
LyapunovEstimate estimate_lyapunov(const ModeSet& m, double T, double dt,
                                   std::size_t N, int renorm_every, Rng& rng,
                                   const Execution& exec = {});

// ---- stable norm ---------------------------------------------------------

/// Curve resolution used by hitting-time runs.
struct HitResolution {
  double h_max = 0.1;
  double merge_radius = 0.05;
  double focus_window = 4.0;
  std::size_t max_vertices = 200'000;
};

struct StableNormSettings {
  Vec2 direction = Vec2::UnitX();
  std::vector<double> distances{20.0, 40.0};
  double R = 1.0;
  double dt = 0.01;
  std::size_t n_rep = 200;
  double t_max_factor = 4.0;
  /// Pilot runs at the smallest distance that set K_rough; skipped when
  /// k_rough is given.
  std::size_t n_pilot = 8;
  std::optional<double> k_rough;
  HitResolution resolution;
};

struct HitSample {
  bool hit = false;
  double tau = 0.0;
  std::size_t peak_vertices = 0;
};

struct DistanceEstimate {
  double distance = 0.0;
  double t_max = 0.0;
  EstimateResult tau_over_distance;  // over completed runs
  std::size_t timeouts = 0;
  double timeout_fraction = 0.0;
  std::vector<HitSample> runs;
};

struct StableNormEstimate {
  Vec2 direction = Vec2::UnitX();
  std::vector<DistanceEstimate> per_distance;
  double extrapolated_norm = 0.0;  // tau/|v| at the largest distance
  double K_hat = 0.0;              // 1 / extrapolated_norm
  double K_hat_std_error = 0.0;
  double K_rough = 0.0;
  bool reliable = true;            // every timeout fraction <= 20%
};

/// The starting set: the unit segment from the origin along `direction`.
CurveImage start_segment(const Vec2& direction, double h_max);

/// Hitting times of B_R(|v| direction) by the image of the start segment.
/// Throws std::invalid_argument if distances are not increasing and >= 10,
/// or R < 1.
StableNormEstimate estimate_stable_norm(const ModeSet& m,
                                        const StableNormSettings& s, Rng& rng,
                                        const Execution& exec = {});

// ---- shape theorem -------------------------------------------------------

struct ShapeSettings {
  double T = 20.0;
  double eps = 0.25;
  int n_directions = 16;
  double dt = 0.01;
  std::size_t n_rep = 50;
  double K_hat = 0.0;
  double R = 1.0;
  int check_every = 10;  // steps between swept-set checks
  double h_max = 0.25;
  double merge_radius = 0.25;
  std::size_t max_vertices = 400'000;
};

struct ShapeReplica {
  double max_radius = 0.0;        // sup |x| over the swept set
  int directions_reached = 0;     // inner targets within R of the swept set
  bool outer = false;
  bool inner = false;
};

struct ShapeReport {
  ShapeSettings settings;
  EstimateResult outer_probability;
  EstimateResult inner_probability;
  EstimateResult double_probability;
  std::vector<ShapeReplica> replicas;
};

/// Empirical probability of (1-eps) T K B within R of the swept set and the
/// swept set inside (1+eps) T K B.
ShapeReport shape_experiment(const ModeSet& m, const ShapeSettings& s, Rng& rng,
                             const Execution& exec = {});

// ---- diameter persistence ------------------------------------------------

struct PersistenceSettings {
  double T = 25.0;
  double dt = 0.02;
  std::size_t n_rep = 200;
  int check_every = 5;
  /// Tracked material points per replica; refinement stops at this count.
  std::size_t refine_budget = 128;
  double h_max = 0.05;
};

struct PersistenceReplica {
  bool dropped = false;
  double min_diameter = 0.0;  // over checks in [sqrt T, T]
  bool under_resolved = false;
};

struct PersistenceReport {
  PersistenceSettings settings;
  EstimateResult fraction;
  std::vector<PersistenceReplica> replicas;
};

/// Fraction of replicas whose tracked diameter falls below 1 at a check in
/// [sqrt T, T]. Throws std::invalid_argument if diam(gamma) < 1 or n_rep = 0.
PersistenceReport diameter_persistence(const ModeSet& m, const CurveImage& gamma,
                                       const PersistenceSettings& s, Rng& rng,
                                       const Execution& exec = {});

// ---- support theorem -----------------------------------------------------

struct NetSettings {
  int directions = 16;
  int levels = 4;
  std::size_t cap = 20'000;
};

struct SupportSettings {
  std::vector<double> horizons{10.0, 30.0, 100.0};
  int grid_points = 5;  // m_t, including t = 0
  double dt = 0.01;
  std::size_t n_rep = 20;
  double K_hat = 0.0;
  double eps_tol = 1e-4;
  int polygon_vertices = 64;
  NetSettings net;
};

struct SupportRow {
  double T = 0.0;
  std::size_t replica = 0;
  double d_upper = 0.0;  // sup over bundle of d(g, Lip(K))
  double d_lower = 0.0;  // sup over net of d(f, bundle)
  double d_H = 0.0;
  double K_hat = 0.0;
};

struct Quartiles {
  double q1 = 0.0, median = 0.0, q3 = 0.0;
};

/// Linear-interpolation quartiles. Throws std::invalid_argument when empty.
Quartiles quartiles(std::vector<double> values);

struct SupportSummary {
  double T = 0.0;
  std::size_t n_rep = 0;
  Quartiles d_upper, d_lower, d_H;
};

struct SupportReport {
  std::vector<SupportRow> rows;
  std::vector<SupportSummary> per_horizon;
};

/// For each horizon and replica: scaled trajectories of X_sample on a uniform
/// grid, against a Lip(K_hat) net. The net is drawn once per horizon.
SupportReport support_experiment(const ModeSet& m, std::span<const Vec2> X_sample,
                                 const SupportSettings& s, Rng& rng,
                                 const Execution& exec = {});

// ---- scaling -------------------------------------------------------------

struct ScalingReport {
  double r = 1.0;
  StableNormEstimate base;
  StableNormEstimate scaled;
  EstimateResult ratio;  // K_scaled / (r K_base), delta-method error
};

/// Compares K of the model with b(r x) against r K of the base model. Both
/// runs use the same substreams.
ScalingReport scaling_check(const model::SpectralModel& spec, double r,
                            const StableNormSettings& s, Rng& rng,
                            const Execution& exec = {});

}  // namespace ibf::estimators
