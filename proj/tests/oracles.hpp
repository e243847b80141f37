#pragma once

// Independent reference computations used by the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "ibf/geometry.hpp"

namespace oracle {

using ibf::Vec2;
using ibf::geometry::DiscretePath;

// Squared Euclidean distance transform along one line (Felzenszwalb and
// Huttenlocher lower envelope of parabolas).
inline void edt_1d(const double* f, double* d, int n, std::vector<int>& v,
                   std::vector<double>& z) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  int k = -1;
  for (int q = 0; q < n; ++q) {
    if (f[q] == inf) continue;
    if (k < 0) {
      v[0] = q;
      z[0] = -inf;
      z[1] = inf;
      k = 0;
      continue;
    }
    double s;
    while (true) {
      const int p = v[k];
      s = ((f[q] + double(q) * q) - (f[p] + double(p) * p)) / (2.0 * (q - p));
      if (s <= z[k] && k > 0) {
        --k;
      } else {
        break;
      }
    }
    if (s <= z[k]) {  // k == 0 and dominated
      v[0] = q;
      z[0] = -inf;
      z[1] = inf;
      continue;
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = inf;
  }
  if (k < 0) {
    std::fill(d, d + n, inf);
    return;
  }
  int j = 0;
  for (int q = 0; q < n; ++q) {
    while (z[j + 1] < q) ++j;
    const double dq = q - v[j];
    d[q] = dq * dq + f[v[j]];
  }
}

// Squared distance (in lattice units) from every cell to the nearest set cell.
inline std::vector<double> edt_2d(const std::vector<unsigned char>& set, int n) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> g(std::size_t(n) * n), col(n), out(n);
  std::vector<int> v(n + 1);
  std::vector<double> z(n + 2);
  for (int x = 0; x < n; ++x) {
    for (int y = 0; y < n; ++y) col[y] = set[std::size_t(x) * n + y] ? 0.0 : inf;
    edt_1d(col.data(), out.data(), n, v, z);
    for (int y = 0; y < n; ++y) g[std::size_t(x) * n + y] = out[y];
  }
  std::vector<double> res(std::size_t(n) * n);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) col[x] = g[std::size_t(x) * n + y];
    edt_1d(col.data(), out.data(), n, v, z);
    for (int x = 0; x < n; ++x) res[std::size_t(x) * n + y] = out[x];
  }
  return res;
}

// Grid-search distance to Lip(K): f is restricted to lattice points of the
// given pitch, constraints are enforced exactly, and eps is bisected to
// eps_tol.
inline double brute_dist_to_lip(const DiscretePath& g, double K, double pitch,
                                double eps_tol = 1e-5) {
  double max_norm = 0.0;
  for (const auto& p : g.values) max_norm = std::max(max_norm, p.norm());
  const double half = 2.0 * max_norm + 2 * pitch;
  const int h = static_cast<int>(std::ceil(half / pitch));
  const int n = 2 * h + 1;
  auto coord = [&](int i) { return (i - h) * pitch; };

  auto feasible = [&](double eps) {
    if (g.values[0].norm() > eps) return false;
    std::vector<unsigned char> reach(std::size_t(n) * n, 0);
    reach[std::size_t(h) * n + h] = 1;  // f_0 = 0
    for (std::size_t i = 1; i < g.values.size(); ++i) {
      const auto d2 = edt_2d(reach, n);
      const double step = K * (g.times[i] - g.times[i - 1]) / pitch;
      const double step2 = step * step * (1 + 1e-12);
      bool any = false;
      for (int x = 0; x < n; ++x) {
        for (int y = 0; y < n; ++y) {
          const std::size_t c = std::size_t(x) * n + y;
          const Vec2 p(coord(x), coord(y));
          const bool ok = d2[c] <= step2 && (p - g.values[i]).norm() <= eps;
          reach[c] = ok;
          any = any || ok;
        }
      }
      if (!any) return false;
    }
    return true;
  };
  double lo = 0.0, hi = max_norm + pitch;
  while (!feasible(hi)) hi *= 2;
  if (feasible(0.0)) return 0.0;
  while (hi - lo > eps_tol) {
    const double mid = 0.5 * (lo + hi);
    (feasible(mid) ? hi : lo) = mid;
  }
  return hi;
}

// Both one-sided components by plain double loops.
inline std::pair<double, double> exhaustive_components(const std::vector<DiscretePath>& bundle,
                                                       const std::vector<DiscretePath>& net,
                                                       double K, double eps_tol, int V) {
  double up = 0.0;
  for (const auto& g : bundle) up = std::max(up, ibf::geometry::dist_to_lip(g, K, eps_tol, V));
  double down = 0.0;
  for (const auto& f : net) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& g : bundle) {
      double d = 0.0;
      for (std::size_t i = 0; i < f.values.size(); ++i) d = std::max(d, (f.values[i] - g.values[i]).norm());
      best = std::min(best, d);
    }
    down = std::max(down, best);
  }
  return {up, down};
}

// Min over every path of the enumerated increment net of the sup distance to
// `target`, by depth-first search with pruning; the net is never stored.
inline double net_coverage_dfs(const std::vector<Vec2>& target,
                               const std::vector<Vec2>& alphabet) {
  double best = std::numeric_limits<double>::infinity();
  const std::size_t m = target.size();
  auto dfs = [&](auto&& self, std::size_t i, const Vec2& f, double worst) -> void {
    if (worst >= best) return;
    if (i == m) {
      best = worst;
      return;
    }
    for (const auto& a : alphabet) {
      const Vec2 next = f + a;
      self(self, i + 1, next, std::max(worst, (next - target[i]).norm()));
    }
  };
  dfs(dfs, 1, Vec2::Zero(), target[0].norm());
  return best;
}

}  // namespace oracle
