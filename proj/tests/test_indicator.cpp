#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "probe/contour.hpp"
#include "probe/indicator.hpp"
#include "probe/oracle.hpp"
#include "probe/specfun.hpp"

using namespace probe;

namespace {

ObstacleScene unit_disk(double k) {
  ObstacleScene s;
  s.outer = Curve(Circle{{0, 0}, 1.0});
  s.k = k;
  return s;
}

ObstacleScene with_disk(double k, BoundaryKind kind, const Point& c, double r, Complex lambda = {1.0, 1.0}) {
  ObstacleScene s = unit_disk(k);
  s.kind = kind;
  Obstacle o{Curve(Circle{c, r}), {}};
  o.lambda.constant = lambda;
  s.obstacles.push_back(o);
  return s;
}

ConcentricScene oracle_scene(double k, BoundaryKind kind, Complex lambda = {1.0, 1.0}) {
  ConcentricScene c;
  c.k = k;
  c.obstacle = ModeObstacle{kind, lambda};
  return c;
}

EntireSolution single_mode(double k, int m) {
  EntireSolution v;
  v.k = k;
  v.order = std::abs(m);
  v.coeffs.assign(2 * v.order + 1, 0.0);
  v.coeffs[m + v.order] = 1.0;
  return v;
}

NeedlePolicy light_policy() {
  NeedlePolicy p;
  p.schedule = default_schedule(8, 0.3, 0.8, 8, 8, 1e-10, 0.5);
  p.fit.cloud_spacing = 0.03;
  p.fit.boundary_nodes = 256;
  return p;
}

}  // namespace

TEST_CASE("indicator_term vanishes without obstacles") {
  const DtnSolver solver = DtnSolver::build(unit_disk(2.0), 128, 64);
  std::mt19937 rng(4);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 3; ++trial) {
    EntireSolution v;
    v.k = 2.0;
    v.order = 10;
    v.center = Point(0.1, -0.2);
    for (int m = -10; m <= 10; ++m) v.coeffs.emplace_back(g(rng), g(rng));
    const IndicatorTerm t = indicator_term(solver, v);
    CHECK(std::abs(t.value) <= 1e-8);
    CHECK(std::abs(t.pairing) <= 1e-8 * (1.0 + std::abs(t.background)));
  }
}

TEST_CASE("indicator_term on a single mode matches the concentric oracle") {
  for (BoundaryKind kind : {BoundaryKind::SoundSoft, BoundaryKind::Impedance}) {
    const double k = 2.0;
    const DtnSolver solver = DtnSolver::build(with_disk(k, kind, {0, 0}, 0.4), 256, 128);
    const ConcentricScene cs = oracle_scene(k, kind);
    for (int m : {0, 2, -3}) {
      const int a = std::abs(m);
      const double f = bessel_j(a, k);
      const ModeSolution u = annulus_mode_solve(cs, m, f);
      const Complex pairing = 2.0 * kPi * (k * bessel_j_prime(a, k) - u.radial_derivative(k, 1.0)) * f;
      const IndicatorTerm t = indicator_term(solver, single_mode(k, m));
      CHECK(std::abs(t.pairing - pairing) <= 1e-6 * std::max(1.0, std::abs(pairing)));
      CHECK(t.value == doctest::Approx(pairing.real()).epsilon(1e-6));
    }
  }
}

TEST_CASE("sound-soft indicator of a Green fit far from D is negative") {
  const double k = 2.0;
  const DtnSolver solver = DtnSolver::build(with_disk(k, BoundaryKind::SoundSoft, {0, 0}, 0.4), 256, 128);
  const Point x(0.0, 0.8);
  FitOptions opts;
  opts.cloud_spacing = 0.02;
  opts.boundary_nodes = 512;
  const NeedleElement el = fit_needle_element(x, straight_needle({0, 1}, x), 0.15, 40, 1e-10, Curve(Circle{{0, 0}, 1.0}), k, opts);
  const double value = indicator_term(solver, el.v).value;
  const double oracle = oracle_indicator(oracle_scene(k, BoundaryKind::SoundSoft), x);
  CHECK(oracle < 0.0);
  CHECK(value < 0.0);
}

TEST_CASE("indicator_direct: empty scene, oracle, boundary vs area") {
  const double k = 2.0;
  const DtnSolver empty = DtnSolver::build(unit_disk(k), 128, 64);
  CHECK(indicator_direct(empty, {0.3, -0.2}) == 0.0);

  for (BoundaryKind kind : {BoundaryKind::Impedance, BoundaryKind::SoundSoft}) {
    const DtnSolver solver = DtnSolver::build(with_disk(k, kind, {0, 0}, 0.4), 256, 128);
    const ConcentricScene cs = oracle_scene(k, kind);
    for (const Point x : {Point(0.0, 0.7), Point(-0.5, 0.3), Point(0.45, 0.1)}) {
      const double b = indicator_direct(solver, x);
      DirectOptions area;
      area.method = VolumeMethod::Area;
      area.area_radial = 64;
      area.area_angular = 256;
      const double a = indicator_direct(solver, x, area);
      CHECK(std::abs(a - b) <= 1e-3 * std::abs(b));
      CHECK(b == doctest::Approx(oracle_indicator(cs, x)).epsilon(1e-6));
    }
    CHECK_THROWS_AS(indicator_direct(solver, {0.0, 0.41}), TipTooClose);
    CHECK_THROWS(indicator_direct(solver, {0.0, 0.1}));
  }
}

TEST_CASE("indicator_direct is monotone along a ray towards the obstacle") {
  const double k = 2.0, t = 0.8;
  const Point dir(std::cos(t), std::sin(t));
  for (BoundaryKind kind : {BoundaryKind::Impedance, BoundaryKind::SoundSoft}) {
    const DtnSolver solver = DtnSolver::build(with_disk(k, kind, {0, 0}, 0.4), 256, 128);
    std::vector<double> values;
    for (double d : {0.2, 0.1, 0.05, 0.02}) values.push_back(indicator_direct(solver, (0.4 + d) * dir));
    for (std::size_t j = 1; j < values.size(); ++j) {
      if (kind == BoundaryKind::Impedance) {
        CHECK(values[j] > values[j - 1]);
      } else {
        CHECK(values[j] < values[j - 1]);
      }
    }
  }
}

TEST_CASE("detect_divergence examples") {
  CHECK(detect_divergence({1, 2, 4, 8, 16, 32, 64, 128}, 4) == DivergenceStatus::DivergingPlus);
  CHECK(detect_divergence({5, 5.01, 5.001, 5.0001, 5.00001, 5.000001}, 3) == DivergenceStatus::Converged);
  CHECK(detect_divergence({-1, -2, -4, -8, -16, -32}, 3) == DivergenceStatus::DivergingMinus);
  CHECK(detect_divergence({1, 3, 1, 3, 1, 3}, 3) == DivergenceStatus::Inconclusive);
  CHECK_THROWS_AS(detect_divergence({1, 2, 4}, 2), std::invalid_argument);

  DivergenceThresholds th;
  th.a_min = 1000.0;
  CHECK(detect_divergence({1, 2, 4, 8, 16, 32, 64, 128}, 4, th) == DivergenceStatus::Inconclusive);
  CHECK(growth_ratio({1, 2, 4, 8, 16, 32}, 3) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("marching squares and Hausdorff distance") {
  // Disk indicator on a grid: the 0.5 contour lies within one cell of the circle.
  const double h = 0.05, x0 = -1.0;
  const int n = 41;
  std::vector<double> mask(n * n);
  for (int iy = 0; iy < n; ++iy) {
    for (int ix = 0; ix < n; ++ix) mask[iy * n + ix] = Point(x0 + ix * h, x0 + iy * h).norm() <= 0.4 ? 1.0 : 0.0;
  }
  const auto lines = marching_squares(mask, n, n, x0, x0, h, 0.5);
  REQUIRE(lines.size() == 1);
  CHECK((lines[0].front() - lines[0].back()).norm() < 1e-12);
  const auto pts = sample_polylines(lines, 0.01);
  const auto circle = sample_curve(Curve(Circle{{0, 0}, 0.4}), 512);
  CHECK(hausdorff_distance(pts, circle) <= h);

  CHECK(marching_squares(std::vector<double>(n * n, 0.0), n, n, x0, x0, h, 0.5).empty());
  CHECK(std::isinf(hausdorff_distance({}, circle)));
  CHECK(hausdorff_distance({Point(0, 0)}, {Point(3, 4)}) == doctest::Approx(5.0));
}

TEST_CASE("classify_point: off-obstacle tip with an avoiding needle is Outside") {
  const DtnSolver solver =
      DtnSolver::build(with_disk(2.0, BoundaryKind::Impedance, {0, 0}, 0.4), 256, 128);
  const Verdict v = classify_point(solver, {0.0, 0.7}, light_policy());
  CHECK(v.classification == Classification::Outside);
  CHECK(v.confidence == Confidence::Normal);
  REQUIRE(v.evidence.size() == 1);
  CHECK(v.evidence[0].name == "straight");
  CHECK(v.evidence[0].status == DivergenceStatus::Converged);
}

TEST_CASE("classify_point: crossing straight needle with an avoiding detour is Outside") {
  const DtnSolver solver =
      DtnSolver::build(with_disk(2.0, BoundaryKind::Impedance, {0.5, 0}, 0.25), 256, 128);
  NeedlePolicy p = light_policy();
  p.detours.push_back(straight_needle({-1, 0}, {0.1, 0}));
  const Verdict v = classify_point(solver, {0.1, 0}, p);
  CHECK(v.classification == Classification::Outside);
  REQUIRE_FALSE(v.evidence.empty());
  CHECK(v.evidence.back().status == DivergenceStatus::Converged);
}

TEST_CASE("classify_point: a rejected grazing needle falls back to the detour") {
  // The straight needle from (1, 0) to x is tangent to the obstacle at (0.5, 0).
  const DtnSolver solver =
      DtnSolver::build(with_disk(2.0, BoundaryKind::Impedance, {0.5, 0.25}, 0.25), 256, 128);
  NeedlePolicy p = light_policy();
  p.detours.push_back(straight_needle({-1, 0}, {0.1, 0}));
  const Verdict v = classify_point(solver, {0.1, 0}, p);
  REQUIRE(v.evidence.size() == 2);
  CHECK(v.evidence[0].steps == 0);
  CHECK_FALSE(v.evidence[0].note.empty());
  CHECK(v.evidence[1].name == "detour:0");
  CHECK(v.evidence[1].status == DivergenceStatus::Converged);
  CHECK(v.classification == Classification::Outside);
  CHECK(v.confidence == Confidence::Normal);
}

TEST_CASE("reconstruct_grid on the empty scene") {
  const DtnSolver solver = DtnSolver::build(unit_disk(2.0), 256, 64);
  GridSpec grid{-0.3, 0.3, -0.3, 0.3, 0.3};
  REQUIRE(grid.nx() == 3);
  for (ScanMode mode : {ScanMode::SideB, ScanMode::SideA}) {
    ScanOptions so;
    so.mode = mode;
    const IndicatorField f = reconstruct_grid(solver, grid, light_policy(), so);
    REQUIRE(f.entries.size() == 9);
    for (const auto& e : f.entries) {
      CHECK(e.status == PointStatus::Converged);
      CHECK_FALSE(e.inside);
      CHECK(std::abs(e.value) <= 1e-8);
    }
    CHECK(f.at(2, 1).x.isApprox(Point(0.3, 0.0)));
  }
}

TEST_CASE("grid scan is independent of the worker count") {
  const DtnSolver solver =
      DtnSolver::build(with_disk(2.0, BoundaryKind::Impedance, {0, 0}, 0.4), 256, 64);
  GridSpec grid{0.5, 0.7, -0.1, 0.1, 0.1};
  NeedlePolicy p = light_policy();
  p.schedule.resize(6);
  ScanOptions one, two;
  two.threads = 2;
  const IndicatorField a = reconstruct_grid(solver, grid, p, one);
  const IndicatorField b = reconstruct_grid(solver, grid, p, two);
  REQUIRE(a.entries.size() == b.entries.size());
  for (std::size_t i = 0; i < a.entries.size(); ++i) {
    CHECK(a.entries[i].value == b.entries[i].value);
    CHECK(a.entries[i].status == b.entries[i].status);
  }
}

TEST_CASE("Side-A series converges to the direct indicator for an avoiding needle") {
  const double k = 2.0;
  const DtnSolver solver = DtnSolver::build(with_disk(k, BoundaryKind::Impedance, {0, 0}, 0.4), 512, 128);
  FitOptions opts;
  opts.cloud_spacing = 0.02;
  opts.boundary_nodes = 512;
  const Point x(0.0, 0.7);
  const auto schedule = default_schedule(10, 0.3, 0.97, 8, 12, 1e-10, 0.5);
  const NeedleSequence seq = build_needle_sequence(solver.scene().outer, k, nearest_point_needle(solver.scene().outer, x), schedule, opts);
  const IndicatorSeries s = indicator_series(solver, seq);
  REQUIRE(s.rows.size() == schedule.size());
  const double direct = indicator_direct(solver, x);
  CHECK(std::abs(s.rows.back().value - direct) <= 0.05 * std::abs(direct));
  for (const auto& r : s.rows) {
    CHECK(r.grad_energy_D.has_value());
    CHECK(*r.ratio == doctest::Approx(*r.l2_D / *r.h1semi_D));
    CHECK(r.scale > 0.0);
  }
}
