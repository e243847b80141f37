#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "ibf/rng.hpp"
#include "ibf/types.hpp"

/// Finite-mode isotropic covariance models.
///
/// A model is a cosine mode-sum b(x) = sum_j sigma2_j e_j e_j^T cos<k_j, x>
/// whose wavevectors sit on an L-fold angular grid. Each radial shell is split
/// into potential modes (e parallel to k) and solenoidal modes (e
/// perpendicular to k); the split sets the balance of longitudinal and
/// transverse curvature and hence the sign of the top Lyapunov exponent.
namespace ibf::model {

struct SpectralModel {
  std::vector<double> wavenumbers;  // strictly increasing, > 0
  std::vector<double> weights;      // energy fractions, sum to 1
  int angular_order = 32;           // even, >= 4
  double solenoidal_fraction = 1.0;

  /// Throws ConfigError naming the offending field.
  void validate(double weight_tol = 1e-12) const;

  /// Eight log-spaced wavenumbers over [0.3, 3], equal weights, L = 32,
  /// purely solenoidal.
  static SpectralModel default_model();

  /// Random admissible model: 1-6 shells in [0.2, 4], Dirichlet weights,
  /// L in {4, ..., 64}, solenoidal fraction uniform on [0, 1].
  static SpectralModel random(Rng& rng);

  /// Model with every wavenumber multiplied by r, so that b_r(x) = b(r x).
  SpectralModel scaled(double r) const;
};

struct Mode {
  Vec2 k;  // wavevector
  Vec2 e;  // unit polarization
  double sigma2 = 0.0;
};

/// Modes sharing a phase <k, x> up to sign. Evaluation of the field only
/// needs one sin/cos per group.
struct PhaseGroup {
  Vec2 k;
  struct Member {
    std::size_t mode;
    double k_sign;  // k_mode = k_sign * k
  };
  std::vector<Member> members;
};

class ModeSet {
 public:
  ModeSet(std::vector<Mode> modes, int angular_order);

  std::span<const Mode> modes() const noexcept { return modes_; }
  std::size_t size() const noexcept { return modes_.size(); }
  int angular_order() const noexcept { return angular_order_; }
  std::span<const PhaseGroup> groups() const noexcept { return groups_; }

  /// Wavevector components and sqrt(sigma2) in structure-of-arrays form,
  /// indexed like groups().
  std::span<const double> group_kx() const noexcept { return group_kx_; }
  std::span<const double> group_ky() const noexcept { return group_ky_; }

  /// Root-mean-square wavenumber sqrt(sum sigma2 |k|^2 / 2).
  double rms_wavenumber() const noexcept;

 private:
  std::vector<Mode> modes_;
  int angular_order_;
  std::vector<PhaseGroup> groups_;
  std::vector<double> group_kx_, group_ky_;
};

struct CovarianceSummary {
  double beta_L = 0.0;
  double beta_N = 0.0;
  double kappa = 0.0;  // max(beta_L, beta_N)
  double mu1 = 0.0;
  double mu2 = 0.0;
  double isotropy_defect = 0.0;  // spread of directional curvature moduli
};

/// Builds the mode grid for `spec`, normalized so that b(0) = Id exactly in
/// exact arithmetic. Zero-energy modes are omitted.
ModeSet build_mode_set(const SpectralModel& spec);

Mat2 covariance_at(const ModeSet& m, const Vec2& x);

/// (B_L(r), B_N(r)): diagonal entries of b(r e1).
std::pair<double, double> longitudinal_normal(const ModeSet& m, double r);

/// Curvature moduli along e1 and the planar Lyapunov exponents
/// mu1 = (beta_N - beta_L)/2, mu2 = -beta_L.
CovarianceSummary moduli(const ModeSet& m);

/// Lyapunov exponents of a planar isotropic flow from its curvature moduli.
constexpr std::pair<double, double> lyapunov_exponents(double beta_L,
                                                       double beta_N) {
  constexpr int d = 2;
  return {0.5 * ((d - 1) * beta_N - 1 * beta_L),
          0.5 * ((d - 2) * beta_N - 2 * beta_L)};
}

struct KappaBoundReport {
  double max_violation = 0.0;  // max of 2 max{1-B_L, 1-B_N} - kappa r^2
  double worst_r = 0.0;
};

/// Checks 2 max{1 - B_L(r), 1 - B_N(r)} <= kappa r^2 on every grid radius.
KappaBoundReport check_kappa_bound(const ModeSet& m,
                                   std::span<const double> r_grid);

struct IsotropyProbe {
  int n_rotations = 16;
  int n_points = 64;
  std::uint64_t seed = 0;
  /// Probe points are uniform in the disc of this radius; <= 0 selects
  /// 4 pi / rms_wavenumber.
  double radius = 0.0;
  /// Restrict rotation angles to multiples of 2 pi / L.
  bool lattice_rotations = false;
};

/// sup over sampled rotations O and points x of ||O^T b(O x) O - b(x)||_2.
double isotropy_defect(const ModeSet& m, const IsotropyProbe& probe);

}  // namespace ibf::model
