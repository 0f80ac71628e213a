#pragma once

#include <complex>
#include <map>
#include <optional>
#include <stdexcept>

#include "probe/forward.hpp"

namespace probe {

/// The 2x2 mode system of a concentric scene is singular.
class ModeResonance : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Boundary data is not resolved by the admissible number of Fourier modes.
class TailTooLarge : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Obstacle condition at r = rho. Empty optional: no obstacle (disk only).
struct ModeObstacle {
  BoundaryKind kind = BoundaryKind::SoundSoft;
  Complex lambda{0.0, 0.0};
};

/// Extended range for mode coefficients: at high orders J and Y at small arguments leave double range.
using LongComplex = std::complex<long double>;

/// u_m(r) e^{i m theta} with u_m = a J_|m|(k r) + b Y_|m|(k r).
struct ModeSolution {
  int m = 0;
  LongComplex a{0.0L, 0.0L};
  LongComplex b{0.0L, 0.0L};

  Complex radial(double k, double r) const;
  Complex radial_derivative(double k, double r) const;
};

/// Concentric scene: Omega = disk of radius R, D = disk of radius rho, both centred at the origin.
struct ConcentricScene {
  double R = 1.0;
  double rho = 0.4;
  double k = 1.0;
  std::optional<ModeObstacle> obstacle;
};

/// Solves u_m(R) = f_m together with the obstacle condition at rho,
/// written with the outward normal of D (d/dnu = d/dr):
/// sound-soft u_m(rho) = g_m, impedance u_m'(rho) + lambda u_m(rho) = g_m.
ModeSolution annulus_mode_solve(const ConcentricScene& scene, int m, Complex f_m, Complex g_m = 0.0);

/// Fourier coefficients of equispaced samples, keyed by signed mode. Throws TailTooLarge when the
/// modes above max_mode carry more than tail_tol of the data.
std::map<int, Complex> fourier_modes(const CVector& samples, int max_mode = 64, double tail_tol = 1e-10);

/// Outer Neumann data for Dirichlet samples at angles 2 pi j / N, assembled mode by mode.
CVector oracle_neumann(const ConcentricScene& scene, const CVector& f, int max_mode = 64);

/// Field of the Dirichlet problem at polar point (r, theta) for the given mode data.
Complex oracle_field(const ConcentricScene& scene, const std::map<int, Complex>& modes, double r, double theta);

/// Mode coefficients of G(., x) about the origin valid for |z| < |x| (Graf addition):
/// G(z, x) = sum_m (i/4) J_|m|(k|z|) H_|m|(k|x|) e^{i m (theta - theta_x)}.
/// Truncated where the terms at |z| = r_max fall below tol relative to the leading term.
std::map<int, LongComplex> green_modes(double k, const Point& x, double r_max, double tol = 1e-14);

/// Mode expansion of the reflected solution w_x on the concentric scene (rho < |x| < R).
class ReflectedOracle {
 public:
  ReflectedOracle(const ConcentricScene& scene, const Point& x);
  Complex value(double r, double theta) const;
  /// Radial derivative.
  Complex dr(double r, double theta) const;
  const std::map<int, ModeSolution>& modes() const { return modes_; }

 private:
  ConcentricScene scene_;
  std::map<int, ModeSolution> modes_;
};

/// Oracle indicator function on the concentric scene, from the mode expansions of w_x and G on r = rho.
double oracle_indicator(const ConcentricScene& scene, const Point& x);

}  // namespace probe
