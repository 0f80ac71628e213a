#include "probe/oracle.hpp"

#include <cmath>
#include <sstream>

#include <boost/math/special_functions/bessel.hpp>
#include <boost/math/special_functions/bessel_prime.hpp>

namespace probe {

namespace {

using LD = long double;
const LongComplex kI(0.0L, 1.0L);

LD jm(int m, double x) { return boost::math::cyl_bessel_j(std::abs(m), static_cast<LD>(x)); }
LD ym(int m, double x) { return boost::math::cyl_neumann(std::abs(m), static_cast<LD>(x)); }
LD jpm(int m, double x) { return boost::math::cyl_bessel_j_prime(std::abs(m), static_cast<LD>(x)); }
LD ypm(int m, double x) { return boost::math::cyl_neumann_prime(std::abs(m), static_cast<LD>(x)); }

Complex to_double(const LongComplex& z) { return {static_cast<double>(z.real()), static_cast<double>(z.imag())}; }
LongComplex to_long(const Complex& z) { return {z.real(), z.imag()}; }

}  // namespace

Complex ModeSolution::radial(double k, double r) const {
  LongComplex u = a * jm(m, k * r);
  if (b != LongComplex(0.0L, 0.0L)) u += b * ym(m, k * r);
  return to_double(u);
}

Complex ModeSolution::radial_derivative(double k, double r) const {
  const LD kk = k;
  LongComplex u = a * (kk * jpm(m, k * r));
  if (b != LongComplex(0.0L, 0.0L)) u += b * (kk * ypm(m, k * r));
  return to_double(u);
}

ModeSolution annulus_mode_solve(const ConcentricScene& scene, int m, Complex f_m, Complex g_m) {
  const double k = scene.k;
  const LongComplex f = to_long(f_m), g = to_long(g_m);
  ModeSolution s;
  s.m = m;
  if (!scene.obstacle) {
    const LD jr = jm(m, k * scene.R);
    // J_m has no zeros below m, so only low orders can resonate.
    if (std::abs(m) < k * scene.R && std::abs(jr) < 1e-13L) throw ModeResonance("mode " + std::to_string(m) + ": J_m(kR) vanishes");
    s.a = f / jr;
    return s;
  }
  if (!(scene.rho > 0.0 && scene.rho < scene.R)) throw std::invalid_argument("annulus_mode_solve: need 0 < rho < R");
  const double kr = k * scene.rho, kR = k * scene.R;
  LongComplex a11, a12;
  if (scene.obstacle->kind == BoundaryKind::SoundSoft) {
    a11 = jm(m, kr);
    a12 = ym(m, kr);
  } else {
    const LongComplex lam = to_long(scene.obstacle->lambda);
    a11 = static_cast<LD>(k) * jpm(m, kr) + lam * jm(m, kr);
    a12 = static_cast<LD>(k) * ypm(m, kr) + lam * ym(m, kr);
  }
  const LD a21 = jm(m, kR), a22 = ym(m, kR);
  const LongComplex det = a11 * a22 - a12 * a21;
  const LD scale = std::abs(a11 * a22) + std::abs(a12 * a21);
  if (std::abs(det) <= 1e-13L * scale) throw ModeResonance("mode " + std::to_string(m) + ": singular annulus system");
  s.a = (g * a22 - a12 * f) / det;
  s.b = (a11 * f - a21 * g) / det;
  return s;
}

std::map<int, Complex> fourier_modes(const CVector& samples, int max_mode, double tail_tol) {
  const int n = static_cast<int>(samples.size());
  std::map<int, Complex> modes;
  double total = 0.0, tail = 0.0;
  for (int q = -n / 2 + 1; q <= n / 2; ++q) {
    Complex s = 0.0;
    for (int j = 0; j < n; ++j) s += samples[j] * std::exp(Complex(0.0, -2.0 * kPi * q * j / n));
    s /= static_cast<double>(n);
    total += std::norm(s);
    if (std::abs(q) > max_mode) {
      tail += std::norm(s);
      continue;
    }
    modes[q] = s;
  }
  if (tail > tail_tol * tail_tol * std::max(total, 1e-300)) {
    std::ostringstream os;
    os << "boundary data has relative spectral tail " << std::sqrt(tail / total) << " beyond mode " << max_mode;
    throw TailTooLarge(os.str());
  }
  return modes;
}

CVector oracle_neumann(const ConcentricScene& scene, const CVector& f, int max_mode) {
  const auto modes = fourier_modes(f, max_mode);
  const int n = static_cast<int>(f.size());
  CVector out = CVector::Zero(n);
  double peak = 0.0;
  for (const auto& [m, fm] : modes) peak = std::max(peak, std::abs(fm));
  for (const auto& [m, fm] : modes) {
    if (std::abs(fm) <= 1e-15 * peak) continue;
    const ModeSolution s = annulus_mode_solve(scene, m, fm);
    const Complex coef = s.radial_derivative(scene.k, scene.R);
    for (int j = 0; j < n; ++j) out[j] += coef * std::exp(Complex(0.0, 2.0 * kPi * m * j / n));
  }
  return out;
}

Complex oracle_field(const ConcentricScene& scene, const std::map<int, Complex>& modes, double r, double theta) {
  Complex u = 0.0;
  for (const auto& [m, fm] : modes) {
    if (std::abs(fm) == 0.0) continue;
    u += annulus_mode_solve(scene, m, fm).radial(scene.k, r) * std::exp(Complex(0.0, m * theta));
  }
  return u;
}

std::map<int, LongComplex> green_modes(double k, const Point& x, double r_max, double tol) {
  const double rx = x.norm();
  if (!(r_max < rx)) throw std::invalid_argument("green_modes: expansion radius must be below |x|");
  const LD tx = std::atan2(x.y(), x.x());
  std::map<int, LongComplex> modes;
  LD lead = 0.0L;
  for (int m = 0; m < 2000; ++m) {
    const LongComplex c = 0.25L * kI * LongComplex(jm(m, k * rx), ym(m, k * rx));
    const LD size = std::abs(c) * std::abs(jm(m, k * r_max));
    if (m == 0) lead = size;
    modes[m] = c * std::exp(LongComplex(0.0L, -m * tx));
    if (m > 0) modes[-m] = c * std::exp(LongComplex(0.0L, m * tx));
    if (m > k * r_max + 4 && size < tol * lead) break;
  }
  return modes;
}

ReflectedOracle::ReflectedOracle(const ConcentricScene& scene, const Point& x) : scene_(scene) {
  if (!scene.obstacle) return;
  const double k = scene.k;
  const auto gm = green_modes(k, x, scene.rho, 1e-16);
  for (const auto& [m, c] : gm) {
    const LD jr = jm(m, k * scene.rho);
    LongComplex g;
    if (scene.obstacle->kind == BoundaryKind::SoundSoft) {
      g = -c * jr;
    } else {
      // -(dG/dnu + lambda G) with d/dnu = d/dr.
      const LongComplex dg = c * (static_cast<LD>(k) * jpm(m, k * scene.rho));
      g = -dg - to_long(scene.obstacle->lambda) * c * jr;
    }
    modes_[m] = annulus_mode_solve(scene, m, 0.0, to_double(g));
  }
}

Complex ReflectedOracle::value(double r, double theta) const {
  Complex w = 0.0;
  for (const auto& [m, s] : modes_) w += s.radial(scene_.k, r) * std::exp(Complex(0.0, m * theta));
  return w;
}

Complex ReflectedOracle::dr(double r, double theta) const {
  Complex w = 0.0;
  for (const auto& [m, s] : modes_) w += s.radial_derivative(scene_.k, r) * std::exp(Complex(0.0, m * theta));
  return w;
}

double oracle_indicator(const ConcentricScene& scene, const Point& x) {
  if (!scene.obstacle) return 0.0;
  const double k = scene.k, rho = scene.rho;
  const ReflectedOracle w(scene, x);
  const auto gm = green_modes(k, x, rho, 1e-16);
  // Parseval on r = rho: integral of f conj(g) ds = 2 pi rho sum f_m conj(g_m); d/dn = d/dr there.
  double e_w = 0.0, e_g = 0.0, mixed = 0.0, w2 = 0.0, g2 = 0.0;
  Complex wg = 0.0;
  const double circ = 2.0 * kPi * rho;
  for (const auto& [m, c] : gm) {
    const Complex gv = to_double(c * jm(m, k * rho));
    const Complex gd = to_double(c * (static_cast<LD>(k) * jpm(m, k * rho)));
    const auto it = w.modes().find(m);
    const Complex wv = it->second.radial(k, rho);
    const Complex wd = it->second.radial_derivative(k, rho);
    e_w += circ * std::real(-wd * std::conj(wv));
    e_g += circ * std::real(gd * std::conj(gv));
    mixed += circ * std::real((gd + wd) * std::conj(gv));
    w2 += circ * std::norm(wv);
    g2 += circ * std::norm(gv);
    wg += circ * wv * std::conj(gv);
  }
  if (scene.obstacle->kind == BoundaryKind::SoundSoft) return -mixed;
  const Complex lam = scene.obstacle->lambda;
  return e_w + e_g - lam.real() * w2 + lam.real() * g2 - 2.0 * lam.imag() * wg.imag();
}

}  // namespace probe
