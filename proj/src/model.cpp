#include "ibf/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "ibf/rng.hpp"

namespace ibf::model {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

Mat2 rotation(double angle) {
  Mat2 o;
  o << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
  return o;
}

// Largest absolute eigenvalue of a symmetric 2x2 matrix.
double symmetric_spectral_norm(const Mat2& a) {
  const double mean = 0.5 * (a(0, 0) + a(1, 1));
  const double half_diff = 0.5 * (a(0, 0) - a(1, 1));
  const double offdiag = 0.5 * (a(0, 1) + a(1, 0));
  const double radius = std::hypot(half_diff, offdiag);
  return std::abs(mean) + radius;
}

bool same_vector(const Vec2& a, const Vec2& b, double scale) {
  return (a - b).norm() <= 1e-12 * std::max(1.0, scale);
}

}  // namespace

void SpectralModel::validate(double weight_tol) const {
  if (wavenumbers.empty()) throw ConfigError("wavenumbers", "empty spectrum");
  if (weights.size() != wavenumbers.size()) {
    throw ConfigError("weights", "length differs from wavenumbers");
  }
  for (std::size_t i = 0; i < wavenumbers.size(); ++i) {
    if (!(wavenumbers[i] > 0.0) || !std::isfinite(wavenumbers[i])) {
      throw ConfigError("wavenumbers", "entries must be positive and finite");
    }
    if (i > 0 && !(wavenumbers[i] > wavenumbers[i - 1])) {
      throw ConfigError("wavenumbers", "must be strictly increasing");
    }
  }
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw ConfigError("weights", "entries must be nonnegative");
    }
    total += w;
  }
  if (std::abs(total - 1.0) > weight_tol) {
    throw ConfigError("weights", "must sum to 1");
  }
  if (angular_order < 4 || angular_order % 2 != 0) {
    throw ConfigError("angular_order", "must be an even integer >= 4");
  }
  if (!(solenoidal_fraction >= 0.0 && solenoidal_fraction <= 1.0)) {
    throw ConfigError("solenoidal_fraction", "must lie in [0, 1]");
  }
}

SpectralModel SpectralModel::default_model() {
  SpectralModel spec;
  constexpr int n = 8;
  constexpr double k_lo = 0.3, k_hi = 3.0;
  for (int i = 0; i < n; ++i) {
    spec.wavenumbers.push_back(k_lo * std::pow(k_hi / k_lo, i / double(n - 1)));
  }
  spec.weights.assign(n, 1.0 / n);
  spec.angular_order = 32;
  spec.solenoidal_fraction = 1.0;
  return spec;
}

SpectralModel SpectralModel::random(Rng& rng) {
  SpectralModel spec;
  const int n = 1 + static_cast<int>(rng.below(6));
  std::vector<double> k;
  for (int i = 0; i < n; ++i) k.push_back(0.2 + 3.8 * rng.uniform());
  std::sort(k.begin(), k.end());
  for (double x : k) {
    if (spec.wavenumbers.empty() || x > spec.wavenumbers.back() + 1e-6) {
      spec.wavenumbers.push_back(x);
    }
  }
  double total = 0.0;
  for (std::size_t i = 0; i < spec.wavenumbers.size(); ++i) {
    spec.weights.push_back(-std::log(1.0 - rng.uniform()));
    total += spec.weights.back();
  }
  for (double& w : spec.weights) w /= total;
  spec.angular_order = 4 + 2 * static_cast<int>(rng.below(31));
  spec.solenoidal_fraction = rng.uniform();
  return spec;
}

SpectralModel SpectralModel::scaled(double r) const {
  SpectralModel out = *this;
  for (double& k : out.wavenumbers) k *= r;
  return out;
}

ModeSet::ModeSet(std::vector<Mode> modes, int angular_order)
    : modes_(std::move(modes)), angular_order_(angular_order) {
  for (std::size_t j = 0; j < modes_.size(); ++j) {
    const Vec2& k = modes_[j].k;
    const double scale = k.norm();
    bool placed = false;
    for (auto& g : groups_) {
      if (same_vector(g.k, k, scale)) {
        g.members.push_back({j, 1.0});
      } else if (same_vector(g.k, -k, scale)) {
        g.members.push_back({j, -1.0});
      } else {
        continue;
      }
      placed = true;
      break;
    }
    if (!placed) groups_.push_back({k, {{j, 1.0}}});
  }
  for (const auto& g : groups_) {
    group_kx_.push_back(g.k.x());
    group_ky_.push_back(g.k.y());
  }
}

double ModeSet::rms_wavenumber() const noexcept {
  double s = 0.0;
  for (const auto& mode : modes_) s += mode.sigma2 * mode.k.squaredNorm();
  return std::sqrt(0.5 * s);
}

ModeSet build_mode_set(const SpectralModel& spec) {
  spec.validate();
  const int L = spec.angular_order;
  const double s = spec.solenoidal_fraction;
  std::vector<Mode> modes;
  modes.reserve(spec.wavenumbers.size() * L * 2);
  // Over a full L-fold grid (L >= 3) the sum of e e^T is (L/2) Id for either
  // polarization class, hence sigma2 = 2 w share / L.
  for (std::size_t m = 0; m < spec.wavenumbers.size(); ++m) {
    const double kappa = spec.wavenumbers[m];
    const double w = spec.weights[m];
    for (int l = 0; l < L; ++l) {
      const double theta = kTwoPi * l / L;
      const Vec2 dir(std::cos(theta), std::sin(theta));
      const Vec2 perp(-dir.y(), dir.x());
      if (w * (1.0 - s) > 0.0) {
        modes.push_back({kappa * dir, dir, 2.0 * w * (1.0 - s) / L});
      }
      if (w * s > 0.0) {
        modes.push_back({kappa * dir, perp, 2.0 * w * s / L});
      }
    }
  }
  if (modes.empty()) throw ConfigError("weights", "no mode carries energy");
  return ModeSet(std::move(modes), L);
}

Mat2 covariance_at(const ModeSet& m, const Vec2& x) {
  Mat2 b = Mat2::Zero();
  for (const auto& mode : m.modes()) {
    b += mode.sigma2 * std::cos(mode.k.dot(x)) * (mode.e * mode.e.transpose());
  }
  return b;
}

std::pair<double, double> longitudinal_normal(const ModeSet& m, double r) {
  const Mat2 b = covariance_at(m, Vec2(r, 0.0));
  return {b(0, 0), b(1, 1)};
}

namespace {

// Curvature moduli along unit direction u: second derivatives of the
// longitudinal/transverse covariance along u, negated.
std::pair<double, double> directional_moduli(const ModeSet& m, const Vec2& u) {
  const Vec2 u_perp(-u.y(), u.x());
  double bl = 0.0, bn = 0.0;
  for (const auto& mode : m.modes()) {
    const double ku = mode.k.dot(u);
    const double el = mode.e.dot(u);
    const double en = mode.e.dot(u_perp);
    bl += mode.sigma2 * el * el * ku * ku;
    bn += mode.sigma2 * en * en * ku * ku;
  }
  return {bl, bn};
}

}  // namespace

CovarianceSummary moduli(const ModeSet& m) {
  CovarianceSummary out;
  std::tie(out.beta_L, out.beta_N) = directional_moduli(m, Vec2::UnitX());
  out.kappa = std::max(out.beta_L, out.beta_N);
  std::tie(out.mu1, out.mu2) = lyapunov_exponents(out.beta_L, out.beta_N);
  constexpr int kProbeDirections = 16;
  for (int i = 1; i < kProbeDirections; ++i) {
    const double phi = kTwoPi * i / kProbeDirections;
    const auto [bl, bn] = directional_moduli(m, Vec2(std::cos(phi), std::sin(phi)));
    out.isotropy_defect = std::max(
        {out.isotropy_defect, std::abs(bl - out.beta_L), std::abs(bn - out.beta_N)});
  }
  return out;
}

KappaBoundReport check_kappa_bound(const ModeSet& m,
                                   std::span<const double> r_grid) {
  const double kappa = moduli(m).kappa;
  KappaBoundReport report{-std::numeric_limits<double>::infinity(), 0.0};
  for (double r : r_grid) {
    const auto [bl, bn] = longitudinal_normal(m, r);
    const double lhs = 2.0 * std::max(1.0 - bl, 1.0 - bn);
    const double violation = lhs - kappa * r * r;
    if (violation > report.max_violation) {
      report.max_violation = violation;
      report.worst_r = r;
    }
  }
  return report;
}

double isotropy_defect(const ModeSet& m, const IsotropyProbe& probe) {
  Rng rng(probe.seed);
  const double radius =
      probe.radius > 0.0 ? probe.radius : 2.0 * kTwoPi / m.rms_wavenumber();
  std::vector<Vec2> points;
  points.reserve(probe.n_points);
  for (int i = 0; i < probe.n_points; ++i) {
    const double r = radius * std::sqrt(rng.uniform());
    const double phi = kTwoPi * rng.uniform();
    points.emplace_back(r * std::cos(phi), r * std::sin(phi));
  }
  double defect = 0.0;
  for (int i = 0; i < probe.n_rotations; ++i) {
    const double angle =
        probe.lattice_rotations
            ? kTwoPi * static_cast<double>(rng.below(m.angular_order())) /
                  m.angular_order()
            : kTwoPi * rng.uniform();
    const Mat2 o = rotation(angle);
    for (const auto& x : points) {
      const Mat2 diff = o.transpose() * covariance_at(m, o * x) * o - covariance_at(m, x);
      defect = std::max(defect, symmetric_spectral_norm(diff));
    }
  }
  return defect;
}

}  // namespace ibf::model
