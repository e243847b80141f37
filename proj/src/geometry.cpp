#include "ibf/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace ibf::geometry {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double cross(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

double cross(const Vec2& o, const Vec2& a, const Vec2& b) {
  return cross(a - o, b - o);
}

// Andrew's monotone chain; strictly convex output, counterclockwise.
std::vector<Vec2> hull_of(std::vector<Vec2> pts) {
  std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return pts;
  std::vector<Vec2> h(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && cross(h[k - 2], h[k - 1], p) <= 0.0) --k;
    h[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && cross(h[k - 2], h[k - 1], pts[i]) <= 0.0) --k;
    h[k++] = pts[i];
  }
  h.resize(k - 1);
  return h;
}

double brute_diameter(std::span<const Vec2> pts) {
  double best = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t j = i + 1; j < pts.size(); ++j) {
      best = std::max(best, (pts[i] - pts[j]).norm());
    }
  }
  return best;
}

// Rotate so the lowest (then leftmost) vertex comes first.
void canonical_start(std::vector<Vec2>& v) {
  auto it = std::min_element(v.begin(), v.end(), [](const Vec2& a, const Vec2& b) {
    return a.y() < b.y() || (a.y() == b.y() && a.x() < b.x());
  });
  std::rotate(v.begin(), it, v.end());
}

// Drops repeated and collinear vertices of a closed counterclockwise loop.
std::vector<Vec2> simplify(std::vector<Vec2> v, double tol) {
  if (v.size() < 3) {
    if (v.size() == 2 && (v[0] - v[1]).norm() <= tol) v.pop_back();
    return v;
  }
  bool changed = true;
  while (changed && v.size() >= 3) {
    changed = false;
    for (std::size_t i = 0; i < v.size() && v.size() >= 3; ++i) {
      const Vec2& prev = v[(i + v.size() - 1) % v.size()];
      const Vec2& next = v[(i + 1) % v.size()];
      const double scale = std::max((next - prev).norm(), tol);
      if ((v[i] - prev).norm() <= tol ||
          std::abs(cross(prev, v[i], next)) <= tol * scale) {
        v.erase(v.begin() + static_cast<std::ptrdiff_t>(i));
        changed = true;
        --i;
      }
    }
  }
  if (v.size() == 2 && (v[0] - v[1]).norm() <= tol) v.pop_back();
  return v;
}

}  // namespace

void DiscretePath::validate() const {
  if (times.size() != values.size() || times.size() < 2) {
    throw std::invalid_argument("DiscretePath: need matching times/values, >= 2 points");
  }
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (!(times[i] > times[i - 1])) {
      throw std::invalid_argument("DiscretePath: times must increase strictly");
    }
  }
  for (const auto& v : values) {
    if (!v.allFinite()) throw std::invalid_argument("DiscretePath: non-finite value");
  }
}

double diameter(std::span<const Vec2> points) {
  if (points.empty()) throw std::invalid_argument("diameter: empty point set");
  if (points.size() <= 500) return brute_diameter(points);
  const auto h = hull_of(std::vector<Vec2>(points.begin(), points.end()));
  return brute_diameter(h);
}

double sup_distance(const DiscretePath& g, const DiscretePath& f) {
  if (g.times != f.times || g.values.size() != f.values.size()) {
    throw std::invalid_argument("sup_distance: time grids differ");
  }
  double d = 0.0;
  for (std::size_t i = 0; i < g.values.size(); ++i) {
    d = std::max(d, (g.values[i] - f.values[i]).norm());
  }
  return d;
}

ConvexRegion ConvexRegion::point(const Vec2& p) { return ConvexRegion({p}); }

ConvexRegion ConvexRegion::disc(const Vec2& c, double r, int n_vertices) {
  std::vector<Vec2> v;
  v.reserve(n_vertices);
  for (int j = 0; j < n_vertices; ++j) {
    const double a = kTwoPi * j / n_vertices;
    v.emplace_back(c.x() + r * std::cos(a), c.y() + r * std::sin(a));
  }
  return ConvexRegion(std::move(v));
}

ConvexRegion ConvexRegion::hull(std::span<const Vec2> points) {
  return ConvexRegion(hull_of(std::vector<Vec2>(points.begin(), points.end())));
}

ConvexRegion ConvexRegion::minkowski_sum(const ConvexRegion& other) const {
  if (empty() || other.empty()) return {};
  if (vertices_.size() == 1) {
    std::vector<Vec2> v(other.vertices_.begin(), other.vertices_.end());
    for (auto& p : v) p += vertices_[0];
    return ConvexRegion(std::move(v));
  }
  if (other.vertices_.size() == 1) return other.minkowski_sum(*this);

  // Merge the edge sequences of both polygons by polar angle.
  std::vector<Vec2> a = vertices_, b = other.vertices_;
  canonical_start(a);
  canonical_start(b);
  const std::size_t na = a.size(), nb = b.size();
  std::vector<Vec2> out;
  out.reserve(na + nb);
  std::size_t i = 0, j = 0;
  while (i < na || j < nb) {
    out.push_back(a[i % na] + b[j % nb]);
    const Vec2 ea = a[(i + 1) % na] - a[i % na];
    const Vec2 eb = b[(j + 1) % nb] - b[j % nb];
    const double c = cross(ea, eb);
    if (j >= nb || (i < na && c > 0.0)) {
      ++i;
    } else if (i >= na || c < 0.0) {
      ++j;
    } else {
      ++i;
      ++j;
    }
  }
  double scale = 0.0;
  for (const auto& p : out) scale = std::max(scale, p.cwiseAbs().maxCoeff());
  return ConvexRegion(simplify(std::move(out), 1e-14 * std::max(scale, 1.0)));
}

ConvexRegion ConvexRegion::intersect(const ConvexRegion& clip) const {
  if (empty() || clip.empty()) return {};
  if (clip.vertices_.size() < 3) {
    throw std::invalid_argument("ConvexRegion::intersect: clip must be a polygon");
  }
  double scale = 1.0;
  for (const auto& p : clip.vertices_) scale = std::max(scale, p.cwiseAbs().maxCoeff());
  const double tol = 1e-12 * scale;

  std::vector<Vec2> subject = vertices_;
  const std::size_t nc = clip.vertices_.size();
  for (std::size_t e = 0; e < nc && !subject.empty(); ++e) {
    const Vec2& p0 = clip.vertices_[e];
    const Vec2& p1 = clip.vertices_[(e + 1) % nc];
    const Vec2 dir = p1 - p0;
    const double len = dir.norm();
    auto side = [&](const Vec2& q) { return cross(dir, q - p0) / len; };

    std::vector<Vec2> next;
    next.reserve(subject.size() + 2);
    const std::size_t ns = subject.size();
    if (ns == 1) {
      if (side(subject[0]) >= -tol) next.push_back(subject[0]);
    } else {
      for (std::size_t i = 0; i < ns; ++i) {
        const Vec2& cur = subject[i];
        const Vec2& nxt = subject[(i + 1) % ns];
        const double sc = side(cur), sn = side(nxt);
        const bool in_c = sc >= -tol, in_n = sn >= -tol;
        if (in_c) next.push_back(cur);
        if (in_c != in_n && (ns > 2 || i == 0)) {
          const double t = sc / (sc - sn);
          next.push_back(cur + t * (nxt - cur));
        }
      }
    }
    subject = simplify(std::move(next), tol);
  }
  return ConvexRegion(std::move(subject));
}

bool ConvexRegion::contains(const Vec2& p, double tol) const {
  if (empty()) return false;
  const std::size_t n = vertices_.size();
  if (n == 1) return (p - vertices_[0]).norm() <= tol;
  if (n == 2) {
    const Vec2 d = vertices_[1] - vertices_[0];
    const double t = std::clamp((p - vertices_[0]).dot(d) / d.squaredNorm(), 0.0, 1.0);
    return (vertices_[0] + t * d - p).norm() <= tol;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& a = vertices_[i];
    const Vec2& b = vertices_[(i + 1) % n];
    if (cross(b - a, p - a) / (b - a).norm() < -tol) return false;
  }
  return true;
}

bool ConvexRegion::is_convex(double tol) const {
  const std::size_t n = vertices_.size();
  if (n < 3) return true;
  for (std::size_t i = 0; i < n; ++i) {
    if (cross(vertices_[i], vertices_[(i + 1) % n], vertices_[(i + 2) % n]) < -tol) {
      return false;
    }
  }
  return true;
}

bool lip_feasible(const DiscretePath& g, double K, double eps, int n_vertices) {
  if (g.values.empty() || g.values[0].norm() > eps) return false;
  ConvexRegion reach = ConvexRegion::point(Vec2::Zero());
  for (std::size_t i = 1; i < g.values.size(); ++i) {
    const double step = K * (g.times[i] - g.times[i - 1]);
    reach = reach.minkowski_sum(ConvexRegion::disc(Vec2::Zero(), step, n_vertices))
                .intersect(ConvexRegion::disc(g.values[i], eps, n_vertices));
    if (reach.empty()) return false;
  }
  return true;
}

double dist_to_lip(const DiscretePath& g, double K, double eps_tol, int n_vertices,
                   BisectionTrace* trace) {
  if (!(K > 0.0)) throw std::invalid_argument("dist_to_lip: K must be positive");
  if (n_vertices < 16) throw std::invalid_argument("dist_to_lip: need >= 16 polygon vertices");
  if (!(eps_tol > 0.0)) throw std::invalid_argument("dist_to_lip: eps_tol must be positive");
  g.validate();

  auto query = [&](double eps) {
    const bool ok = lip_feasible(g, K, eps, n_vertices);
    if (trace) trace->queries.emplace_back(eps, ok);
    return ok;
  };

  // f = 0 is admissible once every inscribed eps-polygon around g_i covers 0.
  double max_norm = 0.0;
  for (const auto& v : g.values) max_norm = std::max(max_norm, v.norm());
  double hi = max_norm / std::cos(std::numbers::pi / n_vertices) * (1.0 + 1e-12) + 1e-15;
  double lo = 0.0;
  while (!query(hi)) {  // only reachable through rounding
    lo = hi;
    hi = 2.0 * hi + eps_tol;
  }
  while (hi - lo > eps_tol) {
    const double mid = 0.5 * (lo + hi);
    if (query(mid)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

double dist_to_lip_1d(std::span<const double> times, std::span<const double> values,
                      double K) {
  if (times.size() != values.size()) {
    throw std::invalid_argument("dist_to_lip_1d: times/values length mismatch");
  }
  double eps = 0.0;
  // The anchor f(0) = 0 acts as an extra sample at (t_0, 0).
  for (std::size_t i = 0; i < values.size(); ++i) {
    eps = std::max(eps, std::abs(values[i]) - K * (times[i] - times[0]));
    for (std::size_t j = i + 1; j < values.size(); ++j) {
      eps = std::max(eps, 0.5 * (std::abs(values[i] - values[j]) - K * (times[j] - times[i])));
    }
  }
  return eps;
}

std::vector<Vec2> increment_alphabet(double K, double dt, int directions, int levels) {
  std::vector<Vec2> alphabet{Vec2::Zero()};
  for (int d = 0; d < directions; ++d) {
    const double a = kTwoPi * d / directions;
    const Vec2 u(std::cos(a), std::sin(a));
    for (int l = 1; l <= levels; ++l) alphabet.push_back(K * dt * (double(l) / levels) * u);
  }
  return alphabet;
}

DiscretePath LipNet::path(std::size_t i) const {
  const auto v = values_of(i);
  return {times, std::vector<Vec2>(v.begin(), v.end())};
}

LipNet build_lip_net(double K, int m, int directions, int levels, std::size_t cap,
                     Rng& rng) {
  if (m < 2 || directions < 4 || levels < 1) {
    throw std::invalid_argument("build_lip_net: need m >= 2, D >= 4, levels >= 1");
  }
  LipNet net;
  net.K = K;
  for (int i = 0; i < m; ++i) net.times.push_back(double(i) / (m - 1));
  const double dt = 1.0 / (m - 1);
  const auto alphabet = increment_alphabet(K, dt, directions, levels);
  const std::size_t a = alphabet.size();
  const int steps = m - 1;

  // Decide enumeration without overflowing.
  double combos = 1.0;
  for (int s = 0; s < steps; ++s) combos *= static_cast<double>(a);
  const bool enumerate = combos <= static_cast<double>(cap);
  const std::size_t count = enumerate ? static_cast<std::size_t>(combos) : cap;

  net.values.reserve(count * m);
  std::vector<std::size_t> digits(steps, 0);
  for (std::size_t p = 0; p < count; ++p) {
    if (enumerate) {
      std::size_t code = p;
      for (int s = steps - 1; s >= 0; --s) {
        digits[s] = code % a;
        code /= a;
      }
    } else {
      for (int s = 0; s < steps; ++s) digits[s] = rng.below(a);
    }
    Vec2 f = Vec2::Zero();
    net.values.push_back(f);
    for (int s = 0; s < steps; ++s) {
      f += alphabet[digits[s]];
      net.values.push_back(f);
    }
  }
  net.resolution = {dt, directions, levels, count, enumerate};
  return net;
}

double directed_distance(std::span<const DiscretePath> A, std::span<const DiscretePath> B) {
  double worst = 0.0;
  for (const auto& a : A) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& b : B) best = std::min(best, sup_distance(a, b));
    worst = std::max(worst, best);
  }
  return worst;
}

HausdorffEstimate hausdorff_estimate(std::span<const DiscretePath> bundle, double K,
                                     const LipNet& net, double eps_tol, int n_vertices) {
  if (bundle.empty()) throw std::invalid_argument("hausdorff_estimate: empty bundle");
  const std::size_t m = net.times.size();
  for (const auto& g : bundle) {
    if (g.times != net.times) {
      throw std::invalid_argument("hausdorff_estimate: bundle and net grids differ");
    }
  }
  HausdorffEstimate out;
  for (const auto& g : bundle) {
    out.to_lip = std::max(out.to_lip, dist_to_lip(g, K, eps_tol, n_vertices));
  }
  for (std::size_t p = 0; p < net.size(); ++p) {
    const auto f = net.values_of(p);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& g : bundle) {
      double d = 0.0;
      for (std::size_t i = 0; i < m && d < best; ++i) {
        d = std::max(d, (f[i] - g.values[i]).norm());
      }
      best = std::min(best, d);
      if (best <= out.from_lip) break;  // cannot raise the running max
    }
    out.from_lip = std::max(out.from_lip, best);
  }
  out.d_H = std::max(out.to_lip, out.from_lip);
  return out;
}

}  // namespace ibf::geometry
