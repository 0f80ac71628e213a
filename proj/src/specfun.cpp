#include "probe/specfun.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include <boost/math/special_functions/bessel.hpp>

namespace probe {

namespace {

// Full double accuracy without the long-double promotion Boost uses by default.
using FastPolicy = boost::math::policies::policy<
    boost::math::policies::promote_double<false>,
    boost::math::policies::overflow_error<boost::math::policies::ignore_error>>;

double j_scalar(int m, double x) { return boost::math::cyl_bessel_j(m, x, FastPolicy()); }
double y_scalar(int m, double x) { return boost::math::cyl_neumann(m, x, FastPolicy()); }

}  // namespace

double bessel(BesselKind kind, int m, double x) {
  if (m < 0) throw std::domain_error("bessel: negative order " + std::to_string(m));
  if (kind == BesselKind::J) {
    if (x < 0.0) throw std::domain_error("bessel J: negative argument");
    return j_scalar(m, x);
  }
  if (!(x > 0.0)) throw std::domain_error("bessel Y: argument must be positive");
  return y_scalar(m, x);
}

void bessel_j_sequence(double x, std::span<double> out) {
  const int nmax = static_cast<int>(out.size()) - 1;
  if (nmax < 0) return;
  if (x < 0.0) throw std::domain_error("bessel_j_sequence: negative argument");
  if (x == 0.0) {
    out[0] = 1.0;
    for (int m = 1; m <= nmax; ++m) out[m] = 0.0;
    return;
  }
  if (static_cast<double>(nmax) < x) {
    // Forward recurrence is stable below the turning point.
    out[0] = j_scalar(0, x);
    if (nmax >= 1) out[1] = j_scalar(1, x);
    for (int m = 1; m < nmax; ++m) out[m + 1] = (2.0 * m / x) * out[m] - out[m - 1];
    return;
  }
  // Miller: start well above max(nmax, x), normalise with J0 + 2 sum J_2k = 1.
  const int base = std::max(nmax, static_cast<int>(x) + 1);
  int start = base + 16 + static_cast<int>(std::sqrt(40.0 * base));
  if (start % 2) ++start;
  double jp = 0.0;
  double jc = 1e-300;
  double sum = 0.0;
  for (int m = start; m > 0; --m) {
    const double jm = (2.0 * m / x) * jc - jp;
    jp = jc;
    jc = jm;  // now J_{m-1} (unnormalised)
    if (std::abs(jc) > 1e250) {
      jc *= 1e-250;
      jp *= 1e-250;
      sum *= 1e-250;
      for (int i = m; i <= nmax; ++i) out[i] *= 1e-250;
    }
    const int order = m - 1;
    if (order <= nmax) out[order] = jc;
    if (order > 0 && order % 2 == 0) sum += 2.0 * jc;
  }
  sum += jc;
  for (int m = 0; m <= nmax; ++m) out[m] /= sum;
}

void bessel_y_sequence(double x, std::span<double> out) {
  const int nmax = static_cast<int>(out.size()) - 1;
  if (nmax < 0) return;
  if (!(x > 0.0)) throw std::domain_error("bessel_y_sequence: argument must be positive");
  out[0] = y_scalar(0, x);
  if (nmax >= 1) out[1] = y_scalar(1, x);
  for (int m = 1; m < nmax; ++m) out[m + 1] = (2.0 * m / x) * out[m] - out[m - 1];
}

Hankel01 hankel01(double x) {
  const double j0 = j_scalar(0, x);
  const double j1 = j_scalar(1, x);
  const double y0 = y_scalar(0, x);
  const double y1 = y_scalar(1, x);
  return {Complex(j0, y0), Complex(j1, y1), j0, j1};
}

double bessel_j_prime(int m, double x) {
  if (m == 0) return -bessel_j(1, x);
  return 0.5 * (bessel_j(m - 1, x) - bessel_j(m + 1, x));
}

double bessel_y_prime(int m, double x) {
  if (m == 0) return -bessel_y(1, x);
  return 0.5 * (bessel_y(m - 1, x) - bessel_y(m + 1, x));
}

GreenValue green2d(double k, const Point& z, const Point& x) {
  if (!(k > 0.0)) throw std::domain_error("green2d: wavenumber must be positive");
  const Point d = z - x;
  const double r = d.norm();
  if (r == 0.0) throw std::domain_error("green2d: z coincides with the source point");
  const Hankel01 h = hankel01(k * r);
  const Complex i(0.0, 1.0);
  GreenValue g;
  g.value = 0.25 * i * h.h0;
  // d/dr H0 = -k H1
  const Complex dr = -0.25 * i * k * h.h1;
  g.gradient_z = CVec2(dr * d.x() / r, dr * d.y() / r);
  return g;
}

Complex green3d(double k, const Eigen::Vector3d& z, const Eigen::Vector3d& x) {
  const double r = (z - x).norm();
  if (r == 0.0) throw std::domain_error("green3d: z coincides with the source point");
  return std::exp(Complex(0.0, k * r)) / (4.0 * kPi * r);
}

}  // namespace probe
