#include <doctest.h>

#include <cmath>

#include "probe/oracle.hpp"

using namespace probe;

namespace {

ConcentricScene scene(BoundaryKind kind, Complex lambda = {0.0, 1.0}) {
  ConcentricScene c;
  c.R = 1.0;
  c.rho = 0.4;
  c.k = 2.0;
  c.obstacle = ModeObstacle{kind, lambda};
  return c;
}

}  // namespace

TEST_CASE("zero data gives zero coefficients") {
  for (int m : {0, 3, -2}) {
    const ModeSolution s = annulus_mode_solve(scene(BoundaryKind::SoundSoft), m, 0.0);
    CHECK(s.a == LongComplex(0.0, 0.0));
    CHECK(s.b == LongComplex(0.0, 0.0));
  }
}

TEST_CASE("sound-soft mode 0 solves the two-point system") {
  const ModeSolution ms = annulus_mode_solve(scene(BoundaryKind::SoundSoft), 0, 1.0);
  const Complex a(ms.a), b(ms.b);
  CHECK(std::abs(a * bessel_j(0, 0.8) + b * bessel_y(0, 0.8)) <= 1e-14);
  CHECK(std::abs(a * bessel_j(0, 2.0) + b * bessel_y(0, 2.0) - 1.0) <= 1e-14);
  // Cramer's rule by hand.
  const double det = bessel_j(0, 0.8) * bessel_y(0, 2.0) - bessel_y(0, 0.8) * bessel_j(0, 2.0);
  CHECK(a.real() == doctest::Approx(-bessel_y(0, 0.8) / det).epsilon(1e-13));
  CHECK(b.real() == doctest::Approx(bessel_j(0, 0.8) / det).epsilon(1e-13));
}

TEST_CASE("impedance mode residuals") {
  const ConcentricScene c = scene(BoundaryKind::Impedance, {0.0, 1.0});
  const Complex f(0.7, -0.2);
  const ModeSolution s = annulus_mode_solve(c, 1, f);
  const Complex outer = s.radial(c.k, c.R) - f;
  const Complex inner = s.radial_derivative(c.k, c.rho) + Complex(0.0, 1.0) * s.radial(c.k, c.rho);
  CHECK(std::abs(outer) <= 1e-12);
  CHECK(std::abs(inner) <= 1e-12);
}

TEST_CASE("no-obstacle Neumann reproduces k J_m'/J_m") {
  ConcentricScene c;
  c.k = 2.0;
  const int n = 64;
  for (int m : {0, 1, -3}) {
    CVector f(n);
    for (int j = 0; j < n; ++j) f[j] = std::exp(Complex(0.0, 2.0 * kPi * m * j / n));
    const CVector g = oracle_neumann(c, f);
    const double ratio = c.k * bessel_j_prime(std::abs(m), 2.0) / bessel_j(std::abs(m), 2.0);
    CHECK((g - ratio * f).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("symmetry, equivariance and mode orthogonality") {
  const ConcentricScene c = scene(BoundaryKind::SoundSoft);
  const int n = 64;
  const CVector one = CVector::Ones(n);
  const CVector g = oracle_neumann(c, one);
  CHECK((g.array() - g[0]).abs().maxCoeff() <= 1e-12 * std::abs(g[0]));

  CVector f(n), fr(n);
  auto data = [](double t) { return std::exp(Complex(0.0, 2.0 * t)) + 0.3 * std::cos(5.0 * t) + Complex(0.0, 0.1) * std::sin(t); };
  const int shift = 5;
  for (int j = 0; j < n; ++j) {
    f[j] = data(2.0 * kPi * j / n);
    fr[j] = data(2.0 * kPi * (j - shift) / n);
  }
  const CVector a = oracle_neumann(c, f), b = oracle_neumann(c, fr);
  for (int j = 0; j < n; ++j) CHECK(std::abs(b[j] - a[(j - shift + n) % n]) <= 1e-12);

  CVector m2(n);
  for (int j = 0; j < n; ++j) m2[j] = std::exp(Complex(0.0, 2.0 * kPi * 2 * j / n));
  const auto out = fourier_modes(oracle_neumann(c, m2), 64, 1.0);
  for (const auto& [m, v] : out) {
    if (m != 2) CHECK(std::abs(v) <= 1e-13);
  }
}

TEST_CASE("refinement independence and tail rejection") {
  const ConcentricScene c = scene(BoundaryKind::Impedance, {1.0, 1.0});
  auto sample = [](int n) {
    CVector f(n);
    for (int j = 0; j < n; ++j) f[j] = std::exp(Complex(0.0, 3.0 * 2.0 * kPi * j / n));
    return f;
  };
  const CVector a = oracle_neumann(c, sample(32));
  const CVector b = oracle_neumann(c, sample(128));
  for (int j = 0; j < 32; ++j) CHECK(std::abs(a[j] - b[4 * j]) <= 1e-12);
  CVector noisy(256);
  for (int j = 0; j < 256; ++j) noisy[j] = (j % 2) ? 1.0 : -1.0;
  CHECK_THROWS_AS(oracle_neumann(c, noisy), TailTooLarge);
}

TEST_CASE("Graf expansion reproduces the fundamental solution") {
  const double k = 2.0;
  const Point x(0.3, 0.6);
  const auto modes = green_modes(k, x, 0.5);
  for (double r : {0.1, 0.3, 0.5}) {
    for (double t : {0.0, 1.3, 3.9}) {
      Complex s = 0.0;
      for (const auto& [m, c] : modes) s += Complex(c) * bessel_j(std::abs(m), k * r) * std::exp(Complex(0.0, m * t));
      const Complex ref = green2d(k, Point(r * std::cos(t), r * std::sin(t)), x).value;
      CHECK(std::abs(s - ref) <= 1e-10 * std::abs(ref));
    }
  }
}

TEST_CASE("high orders stay finite for sources close to the obstacle") {
  // |x| / rho close to 1 needs a few hundred Graf terms, where J and Y leave double range.
  const Point x(0.45, 0.1);
  const auto modes = green_modes(2.0, x, 0.4, 1e-16);
  CHECK(modes.size() > 300);
  for (BoundaryKind kind : {BoundaryKind::SoundSoft, BoundaryKind::Impedance}) {
    ConcentricScene c = scene(kind);
    const ModeSolution hi = annulus_mode_solve(c, 200, 0.0, 1e-20);
    CHECK(std::abs(hi.radial(c.k, c.rho)) < 1e-10);
    CHECK(std::isfinite(oracle_indicator(c, x)));
  }
}

TEST_CASE("reflected oracle satisfies its boundary conditions") {
  for (BoundaryKind kind : {BoundaryKind::SoundSoft, BoundaryKind::Impedance}) {
    const ConcentricScene c = scene(kind, {1.0, 1.0});
    const Point x(0.0, 0.7);
    const ReflectedOracle w(c, x);
    for (double t : {0.2, 2.0, 5.0}) {
      CHECK(std::abs(w.value(1.0, t)) <= 1e-12);
      const Point z(c.rho * std::cos(t), c.rho * std::sin(t));
      const GreenValue g = green2d(c.k, z, x);
      const Complex gr = g.gradient_z[0] * std::cos(t) + g.gradient_z[1] * std::sin(t);
      if (kind == BoundaryKind::SoundSoft) {
        CHECK(std::abs(w.value(c.rho, t) + g.value) <= 1e-10);
      } else {
        const Complex lam(1.0, 1.0);
        const Complex lhs = w.dr(c.rho, t) + lam * w.value(c.rho, t);
        CHECK(std::abs(lhs + (gr + lam * g.value)) <= 1e-10);
      }
    }
  }
}

TEST_CASE("mode resonance is detected") {
  ConcentricScene c;
  c.k = 2.404825557695773;  // J_0(k R) = 0
  CHECK_THROWS_AS(annulus_mode_solve(c, 0, 1.0), ModeResonance);
}
