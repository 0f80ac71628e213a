#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>

#include <Eigen/Geometry>

#include "probe/geometry.hpp"
#include "probe/quadrature.hpp"

using namespace probe;

namespace {

ObstacleScene disk_scene(double rho = 0.4) {
  ObstacleScene s;
  s.outer = Curve(Circle{{0, 0}, 1.0});
  s.obstacles.push_back({Curve(Circle{{0, 0}, rho}), {}});
  return s;
}

// Adaptive Simpson, the arc-length oracle.
double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol) {
  const double c = 0.5 * (a + b);
  const double fa = f(a), fb = f(b), fc = f(c);
  std::function<double(double, double, double, double, double, double, double)> rec =
      [&](double a0, double b0, double fa0, double fb0, double fc0, double whole, double t) -> double {
    const double c0 = 0.5 * (a0 + b0);
    const double d = 0.5 * (a0 + c0), e = 0.5 * (c0 + b0);
    const double fd = f(d), fe = f(e);
    const double left = (c0 - a0) / 6.0 * (fa0 + 4.0 * fd + fc0);
    const double right = (b0 - c0) / 6.0 * (fc0 + 4.0 * fe + fb0);
    if (std::abs(left + right - whole) <= 15.0 * t) return left + right + (left + right - whole) / 15.0;
    return rec(a0, c0, fa0, fc0, fd, left, 0.5 * t) + rec(c0, b0, fc0, fb0, fe, right, 0.5 * t);
  };
  return rec(a, b, fa, fb, fc, (b - a) / 6.0 * (fa + 4.0 * fc + fb), tol);
}

}  // namespace

TEST_CASE("dist_to_needle examples") {
  const Needle s = straight_needle({0, 0}, {1, 0});
  CHECK(dist_to_needle({0.5, 1.0}, s) == doctest::Approx(1.0));
  CHECK(dist_to_needle({0.5, 0.0}, s) == 0.0);
  CHECK(dist_to_needle({2.0, 0.0}, s) == doctest::Approx(1.0));
}

TEST_CASE("validate_needle examples") {
  const Curve unit(Circle{{0, 0}, 1.0});
  CHECK_FALSE(validate_needle(straight_needle({1, 0}, {0, 0}), unit).has_value());
  const auto bad = validate_needle(straight_needle({0.5, 0}, {0, 0}), unit);
  REQUIRE(bad.has_value());
  CHECK(*bad == "start not on boundary");
  CHECK(*validate_needle(straight_needle({1, 0}, {1.5, 0}), unit) == "vertex outside domain");
  CHECK(*validate_needle(Needle{{{1, 0}, {0.5, 0}, {0.5, 0}}}, unit) == "repeated vertex");
  CHECK(*validate_needle(Needle{{{1, 0}, {0.2, 0}, {0.6, 0}}}, unit) == "self-intersecting");
  CHECK(*validate_needle(Needle{{{1, 0}, {0.0, 0}, {0.5, 0.5}, {0.5, -0.5}}}, unit) == "self-intersecting");

  // Tangent to the obstacle at (0, 0.4) from the boundary point (1, 0.4).
  const ObstacleScene scene = disk_scene();
  const Point start(std::sqrt(1.0 - 0.16), 0.4);
  const auto graze = validate_needle(straight_needle(start, {-0.5, 0.4}), unit, &scene);
  REQUIRE(graze.has_value());
  CHECK(*graze == "grazing needle");
}

TEST_CASE("snap_needle projects near-boundary starts and rejects far ones") {
  const Curve unit(Circle{{0, 0}, 1.0});
  const Needle n = snap_needle(straight_needle({1.0 + 5e-7, 0.0}, {0, 0}), unit);
  CHECK(n.start().norm() == doctest::Approx(1.0).epsilon(1e-15));
  CHECK_THROWS_AS(snap_needle(straight_needle({1.01, 0.0}, {0, 0}), unit), std::invalid_argument);
}

TEST_CASE("classify_needle_vs_obstacle examples") {
  const ObstacleScene scene = disk_scene();
  CHECK(classify_needle_vs_obstacle(straight_needle({1, 0}, {0, 0}), scene) == NeedleClass::TipInObstacle);
  CHECK(classify_needle_vs_obstacle(straight_needle({1, 0}, {0.6, 0}), scene) == NeedleClass::Avoids);
  CHECK(classify_needle_vs_obstacle(straight_needle({1, 0}, {-0.6, 0}), scene) == NeedleClass::CrossesObstacle);
  const Point start(std::sqrt(1.0 - 0.16), 0.4);
  CHECK(classify_needle_vs_obstacle(straight_needle(start, {-0.5, 0.4}), scene) == NeedleClass::Grazing);
}

TEST_CASE("classification is invariant under rigid motions") {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> ang(0.0, 2.0 * kPi), sh(-3.0, 3.0), rad(-0.95, 0.95);
  ObstacleScene scene;
  scene.outer = Curve(Circle{{0, 0}, 1.0});
  scene.obstacles.push_back({Curve::kite({-0.2, 0.1}, 0.25), {}});
  scene.obstacles.push_back({Curve(Ellipse{{0.5, -0.3}, 0.2, 0.1, 0.4}), {}});
  for (int trial = 0; trial < 40; ++trial) {
    const double a = ang(rng);
    const Point tip(rad(rng) * 0.9, rad(rng) * 0.9);
    if (tip.norm() > 0.9) continue;
    const Needle n = straight_needle(Point(std::cos(a), std::sin(a)), tip);
    const NeedleClass before = classify_needle_vs_obstacle(n, scene);
    const double phi = ang(rng);
    const Point shift(sh(rng), sh(rng));
    ObstacleScene moved;
    moved.outer = scene.outer.transformed(phi, shift);
    for (const auto& o : scene.obstacles) moved.obstacles.push_back({o.shape.transformed(phi, shift), o.lambda});
    Needle mn = n;
    const Eigen::Rotation2Dd r(phi);
    for (auto& v : mn.vertices) v = r * v + shift;
    CHECK(classify_needle_vs_obstacle(mn, moved) == before);
  }
}

TEST_CASE("tube monotonicity and Lipschitz distance") {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0), e(0.0, 0.5);
  const Needle n{{{1, 0}, {0.2, 0.1}, {-0.3, 0.5}}};
  for (int i = 0; i < 10000; ++i) {
    const Point z(u(rng), u(rng));
    double e1 = e(rng), e2 = e(rng);
    if (e1 > e2) std::swap(e1, e2);
    if (TubeSet{n, e1}.contains(z)) CHECK(TubeSet{n, e2}.contains(z));
    const Point w(u(rng), u(rng));
    CHECK(std::abs(dist_to_needle(z, n) - dist_to_needle(w, n)) <= (z - w).norm() + 1e-15);
  }
}

TEST_CASE("discretize examples and invariants") {
  const DiscretizedCurve c = discretize(Curve(Circle{{0, 0}, 1.0}), 64);
  double len = 0.0;
  for (int j = 0; j < c.size; ++j) {
    CHECK(c.x[j].norm() == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(c.speed[j] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(std::abs(c.normal[j].norm() - 1.0) <= 1e-12);
    len += c.weight(j);
  }
  CHECK(std::abs(len - 2.0 * kPi) <= 1e-12);

  const DiscretizedCurve small = discretize(Curve(Circle{{0.1, 0.2}, 0.4}), 32);
  double ls = 0.0;
  for (int j = 0; j < small.size; ++j) ls += small.weight(j);
  CHECK(std::abs(ls - 0.8 * kPi) <= 1e-12);

  const Ellipse el{{0, 0}, 1.0, 0.5, 0.0};
  const DiscretizedCurve de = discretize(Curve(el), 128);
  double le = 0.0;
  for (int j = 0; j < de.size; ++j) le += de.weight(j);
  const double oracle = adaptive_simpson(
      [](double t) { return std::hypot(std::sin(t), 0.5 * std::cos(t)); }, 0.0, 2.0 * kPi, 1e-13);
  CHECK(std::abs(le - oracle) <= 1e-8);

  CHECK_THROWS_AS(discretize(Curve(Circle{{0, 0}, 1.0}), 15), std::invalid_argument);
  CHECK_THROWS_AS(discretize(Curve(Circle{{0, 0}, 1.0}), 8), std::invalid_argument);
  CHECK_THROWS_AS(discretize(Curve(Circle{{0, 0}, -1.0}), 32), std::invalid_argument);
}

TEST_CASE("curve validation") {
  CHECK(validate_curve(Curve(Circle{{0, 0}, 0.0})).has_value());
  CHECK(validate_curve(Curve(Ellipse{{0, 0}, 1.0, -0.1, 0.0})).has_value());
  CHECK_FALSE(validate_curve(Curve::kite({0, 0}, 0.3)).has_value());
  FourierCurve figure8;
  figure8.x_sin = {1.0};
  figure8.y_sin = {0.0, 0.5};
  CHECK(validate_curve(Curve(figure8)).has_value());
}

TEST_CASE("inside tests and signed distance") {
  const Curve kite = Curve::kite({0.1, -0.1}, 0.3);
  CHECK(kite.contains({0.1, -0.1}));
  CHECK_FALSE(kite.contains({0.9, 0.9}));
  const Curve unit(Circle{{0, 0}, 1.0});
  CHECK(unit.signed_distance({0.25, 0.0}) == doctest::Approx(-0.75).epsilon(1e-12));
  CHECK(unit.signed_distance({0.0, 2.0}) == doctest::Approx(1.0).epsilon(1e-12));
  const Curve e(Ellipse{{0, 0}, 1.0, 0.5, 0.3});
  const Point on = e.eval(1.1).x;
  CHECK(std::abs(e.signed_distance(on)) < 1e-12);
}

TEST_CASE("scene validation") {
  ObstacleScene s = disk_scene();
  s.kind = BoundaryKind::Impedance;
  s.obstacles[0].lambda.constant = Complex(1.0, 1.0);
  CHECK_FALSE(validate_scene(s).has_value());
  s.obstacles[0].lambda.constant = Complex(1.0, 0.0);
  CHECK(validate_scene(s).has_value());
  SceneValidation relaxed;
  relaxed.allow_real_lambda = true;
  CHECK_FALSE(validate_scene(s, relaxed).has_value());
  ObstacleScene t = disk_scene(0.99);
  CHECK(validate_scene(t).has_value());
  ObstacleScene two;
  two.outer = Curve(Circle{{0, 0}, 1.0});
  two.obstacles.push_back({Curve(Circle{{-0.2, 0}, 0.3}), {}});
  two.obstacles.push_back({Curve(Circle{{0.2, 0}, 0.3}), {}});
  CHECK(validate_scene(two).has_value());
}

TEST_CASE("area quadrature examples") {
  const AreaRule d = disk_rule({0.3, -0.2}, 0.4, 16, 32);
  CHECK(std::abs(d.area() - 0.16 * kPi) <= 1e-6);
  const AreaRule u = disk_rule({0, 0}, 1.0, 16, 32);
  CHECK(std::abs(integrate(u, [](const Point& z) { return z.squaredNorm(); }) - kPi / 2.0) <= 1e-6);
  const AreaRule s = star_rule(Curve(Circle{{0, 0}, 0.4}), 16, 64);
  CHECK(std::abs(s.area() - 0.16 * kPi) <= 1e-12);
  const AreaRule e = star_rule(Curve(Ellipse{{0.1, 0}, 0.5, 0.25, 0.7}), 12, 64);
  CHECK(std::abs(e.area() - kPi * 0.125) <= 1e-12);
  // Kite area from the boundary integral of x dy.
  const Curve kite = Curve::kite({0, 0}, 0.3);
  double green_area = 0.0;
  for (int j = 0; j < 512; ++j) {
    const CurvePoint p = kite.eval(2.0 * kPi * j / 512);
    green_area += 0.5 * (p.x.x() * p.dx.y() - p.x.y() * p.dx.x()) * 2.0 * kPi / 512;
  }
  CHECK(std::abs(star_rule(kite, 16, 128).area() - green_area) <= 1e-10);
}

TEST_CASE("area quadrature converges on polynomials and detects the singular gradient energy") {
  // Masked rule over the unit disk minus a tube: error of a polynomial integrand shrinks under refinement.
  auto masked_error = [](int n) {
    const AreaRule full = disk_rule({0, 0}, 1.0, n, 4 * n);
    const AreaRule cut = full.restricted([](const Point& z) { return z.x() < 0.3; });
    // Exact integral of x^2 over {|z| < 1, x < a}: pi/4 minus the cap x > a.
    const double a = 0.3;
    const double cap = 0.25 * (kPi / 2.0 - std::asin(a) + a * (1.0 - 2.0 * a * a) * std::sqrt(1.0 - a * a));
    const double exact = kPi / 4.0 - cap;
    return std::abs(integrate(cut, [](const Point& z) { return z.x() * z.x(); }) - exact);
  };
  const double e1 = masked_error(8), e2 = masked_error(16), e3 = masked_error(32);
  CHECK(e2 < e1);
  CHECK(e3 < e2);

  // |grad Re G|^2 over a disk around the source grows without bound under refinement.
  const Point x(0.0, 0.0);
  double prev = 0.0;
  for (int n : {4, 8, 16, 32}) {
    const AreaRule r = disk_rule(x, 0.2, n, 8);
    const double val = integrate(r, [&](const Point& z) {
      const GreenValue g = green2d(2.0, z, x);
      return std::norm(g.gradient_z[0].real()) + std::norm(g.gradient_z[1].real());
    });
    CHECK(val > prev);
    prev = val;
  }
}
