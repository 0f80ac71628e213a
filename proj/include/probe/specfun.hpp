#pragma once

#include <complex>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace probe {

using Complex = std::complex<double>;
using Point = Eigen::Vector2d;
using CVec2 = Eigen::Vector2cd;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kEulerGamma = 0.57721566490153286061;

enum class BesselKind { J, Y };

/// Bessel function of the first (J) or second (Y) kind of integer order m >= 0.
/// Y requires x > 0; J accepts x >= 0. Throws std::domain_error otherwise.
double bessel(BesselKind kind, int m, double x);

inline double bessel_j(int m, double x) { return bessel(BesselKind::J, m, x); }
inline double bessel_y(int m, double x) { return bessel(BesselKind::Y, m, x); }

/// J_0(x) .. J_{out.size()-1}(x) in one pass (Miller backward recurrence when
/// the top order exceeds x, forward recurrence otherwise).
void bessel_j_sequence(double x, std::span<double> out);

/// Y_0(x) .. Y_{out.size()-1}(x) by forward recurrence. x > 0.
void bessel_y_sequence(double x, std::span<double> out);

/// H^(1)_0(x) and H^(1)_1(x), x > 0.
struct Hankel01 {
  Complex h0;
  Complex h1;
  double j0;
  double j1;
};
Hankel01 hankel01(double x);

/// Derivative of Z_m from the neighbouring orders: Z_m' = (Z_{m-1} - Z_{m+1}) / 2.
double bessel_j_prime(int m, double x);
double bessel_y_prime(int m, double x);

struct GreenValue {
  Complex value;
  CVec2 gradient_z;
};

/// Outgoing fundamental solution of the 2D Helmholtz operator,
/// G(z, x) = (i/4) H^(1)_0(k |z - x|), with its gradient in z.
/// Requires k > 0 and z != x.
GreenValue green2d(double k, const Point& z, const Point& x);

/// 3D fundamental solution e^{ik|z-x|} / (4 pi |z-x|). Requires z != x.
Complex green3d(double k, const Eigen::Vector3d& z, const Eigen::Vector3d& x);

}  // namespace probe
