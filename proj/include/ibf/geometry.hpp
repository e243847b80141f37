#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ibf/rng.hpp"
#include "ibf/types.hpp"

/// Metric computations on discretized paths in the plane: diameters, sup-norm
/// distances, distance to the Lipschitz ball Lip(K) via convex reachability,
/// finite nets of Lip(K) and one-sided Hausdorff distances between path sets.
namespace ibf::geometry {

/// Values on a time grid 0 = t_0 < ... < t_m = 1.
struct DiscretePath {
  std::vector<double> times;
  std::vector<Vec2> values;

  /// Throws std::invalid_argument on a malformed grid or non-finite values.
  void validate() const;
  std::size_t size() const noexcept { return times.size(); }
};

/// Max pairwise Euclidean distance. Uses the convex hull above 500 points;
/// the result is bit-identical to the quadratic scan.
double diameter(std::span<const Vec2> points);

/// max_i |g_i - f_i|. Throws std::invalid_argument if the grids differ.
double sup_distance(const DiscretePath& g, const DiscretePath& f);

/// Convex polygon with counterclockwise vertices. One or two vertices encode
/// a point or a segment; no vertices is the empty region.
class ConvexRegion {
 public:
  ConvexRegion() = default;
  static ConvexRegion point(const Vec2& p);
  /// Regular polygon inscribed in the circle of radius r around c, first
  /// vertex at angle 0.
  static ConvexRegion disc(const Vec2& c, double r, int n_vertices);
  /// Convex hull of arbitrary points.
  static ConvexRegion hull(std::span<const Vec2> points);

  bool empty() const noexcept { return vertices_.empty(); }
  std::span<const Vec2> vertices() const noexcept { return vertices_; }

  /// Minkowski sum with another convex region.
  ConvexRegion minkowski_sum(const ConvexRegion& other) const;
  /// Intersection with a convex polygon (at least three vertices).
  ConvexRegion intersect(const ConvexRegion& clip) const;

  bool contains(const Vec2& p, double tol = 1e-12) const;
  /// Cross-product convexity test on the stored vertex order.
  bool is_convex(double tol = 1e-12) const;

 private:
  explicit ConvexRegion(std::vector<Vec2> v) : vertices_(std::move(v)) {}
  std::vector<Vec2> vertices_;
};

/// Records every feasibility query of a bisection.
struct BisectionTrace {
  std::vector<std::pair<double, bool>> queries;
};

/// Is there f on g's grid with f_0 = 0, |f_i - g_i| <= eps and
/// |f_i - f_{i-1}| <= K (t_i - t_{i-1})? Discs are inscribed n_vertices-gons.
bool lip_feasible(const DiscretePath& g, double K, double eps, int n_vertices);

/// Smallest eps (to within eps_tol, from above) for which lip_feasible holds.
/// The inscribed polygons make the result an upper bound on the exact grid
/// distance, exceeding it by at most K dt (1 - cos(pi/V)) per step plus
/// eps_tol.
double dist_to_lip(const DiscretePath& g, double K, double eps_tol = 1e-4,
                   int n_vertices = 64, BisectionTrace* trace = nullptr);

/// Exact grid distance of a scalar path to Lip(K):
/// max{0, max_i(|g_i| - K t_i), max_{i<j}(|g_i - g_j| - K (t_j - t_i)) / 2}.
double dist_to_lip_1d(std::span<const double> times,
                      std::span<const double> values, double K);

/// The per-interval increments used by build_lip_net: zero plus
/// K dt (l / levels) (cos 2 pi d / D, sin 2 pi d / D).
std::vector<Vec2> increment_alphabet(double K, double dt, int directions,
                                     int levels);

/// Finite subset of Lip(K) on a uniform grid of m points.
struct LipNet {
  double K = 0.0;
  std::vector<double> times;
  std::vector<Vec2> values;  // path-major, times.size() values per path
  struct Resolution {
    double mesh = 0.0;
    int directions = 0;
    int levels = 0;
    std::size_t samples = 0;
    bool enumerated = false;
  } resolution;

  std::size_t size() const noexcept {
    return times.empty() ? 0 : values.size() / times.size();
  }
  std::span<const Vec2> values_of(std::size_t i) const {
    return std::span<const Vec2>(values).subspan(i * times.size(), times.size());
  }
  DiscretePath path(std::size_t i) const;
};

/// Full enumeration when (D levels + 1)^(m-1) <= cap, otherwise cap paths
/// drawn uniformly from the same increment alphabet.
LipNet build_lip_net(double K, int m, int directions, int levels,
                     std::size_t cap, Rng& rng);

/// max over a in A of min over b in B of sup_distance(a, b).
double directed_distance(std::span<const DiscretePath> A,
                         std::span<const DiscretePath> B);

struct HausdorffEstimate {
  double to_lip = 0.0;    // sup over bundle paths of d(g, Lip(K))
  double from_lip = 0.0;  // sup over net paths of d(f, bundle)
  double d_H = 0.0;
};

/// One-sided components of d_H(bundle, Lip(K)). The first is an upper-bound
/// estimate over the sampled starting points; the second is biased low since
/// the net is a subset of Lip(K).
HausdorffEstimate hausdorff_estimate(std::span<const DiscretePath> bundle,
                                     double K, const LipNet& net,
                                     double eps_tol = 1e-4, int n_vertices = 64);

}  // namespace ibf::geometry
