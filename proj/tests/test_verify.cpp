#include <doctest.h>

#include <cmath>
#include <set>

#include "probe/specfun.hpp"
#include "probe/verify.hpp"

using namespace probe;

namespace {

ObstacleScene unit_disk(double k, BoundaryKind kind = BoundaryKind::SoundSoft) {
  ObstacleScene s;
  s.outer = Curve(Circle{{0, 0}, 1.0});
  s.k = k;
  s.kind = kind;
  return s;
}

ObstacleScene concentric_soft(double k) {
  ObstacleScene s = unit_disk(k);
  s.obstacles.push_back({Curve(Circle{{0, 0}, 0.4}), {}});
  return s;
}

ObstacleScene kite_soft(double k) {
  ObstacleScene s = unit_disk(k);
  s.obstacles.push_back({Curve::kite({0.1, 0.0}, 0.3), {}});
  return s;
}

SuiteScenario light_scenario(const std::string& id, const ObstacleScene& scene) {
  SuiteScenario sc;
  sc.id = id;
  sc.scene = scene;
  sc.m_outer = 256;
  sc.m_obstacle = 64;
  sc.schedule = default_schedule(6, 0.3, 0.8, 8, 8, 1e-10, 0.5);
  sc.blowup_schedule = sc.schedule;
  sc.fit.cloud_spacing = 0.04;
  sc.fit.boundary_nodes = 256;
  return sc;
}

}  // namespace

TEST_CASE("ratio decay on injected series") {
  const TheoremReport r = check_ratio_decay({1, 2, 4, 8, 16}, {1, 1.2, 1.5, 1.9, 2.4});
  CHECK(r.status == CheckStatus::Pass);
  CHECK(r.stat("growth") == doctest::Approx(16.0));
  CHECK(r.stat("ratio_last") == doctest::Approx(0.15));

  CHECK(check_ratio_decay({3, 3, 3, 3, 3}, {1, 0.9, 0.8, 0.7, 0.6}).status == CheckStatus::PremiseNotRealized);
  // Growth without decay of the ratio.
  CHECK(check_ratio_decay({1, 2, 4, 8, 16}, {1, 2, 4, 8, 16}).status == CheckStatus::Fail);
  CHECK(std::isnan(r.stat("no such statistic")));
}

TEST_CASE("energy growth check") {
  CHECK(check_energy_growth(Check::ObstacleEnergy, {1, 1.5, 3, 9, 27}).status == CheckStatus::Pass);
  CHECK(check_energy_growth(Check::ObstacleEnergy, {1, 1.5, 3, 2, 27}).status == CheckStatus::Fail);
  CHECK(check_energy_growth(Check::ObstacleEnergy, {1, 1.2, 1.5, 1.8, 2}).status == CheckStatus::Fail);
}

TEST_CASE("lower-bound regression recovers injected constants") {
  std::vector<double> h1, l2, values;
  for (int n = 0; n < 8; ++n) {
    h1.push_back(1.0 + 0.7 * n * n);
    l2.push_back(1.0 + 0.3 * n);
    values.push_back(2.0 * h1.back() * h1.back() - 3.0 * l2.back() * l2.back());
  }
  const FittedBound b = estimate_lower_bound(values, h1, l2);
  CHECK(std::abs(b.c1 - 2.0) <= 1e-9);
  CHECK(std::abs(b.c2 + 3.0) <= 1e-9);
  CHECK(b.residual <= 1e-9);
  CHECK(b.samples == 8);

  std::vector<double> proportional;
  for (double v : h1) proportional.push_back(2.0 * v);
  CHECK_THROWS_AS(estimate_lower_bound(values, h1, proportional), DegenerateRegression);
  CHECK_THROWS_AS(estimate_lower_bound({1.0}, {1.0}, {2.0}), DegenerateRegression);
}

TEST_CASE("energy identity without obstacles") {
  const DtnSolver solver = DtnSolver::build(unit_disk(2.0), 128, 64);
  const EntireSolution v = random_entire({0, 0}, 2.0, 16, 3);
  const IdentityParts p = identity_parts(solver, v);
  CHECK(p.energy_v == 0.0);
  CHECK(p.energy_w == 0.0);
  CHECK(std::abs(p.lhs) <= 1e-10 * std::abs(p.background));
  CHECK(check_energy_identity(solver, v).pass());
}

TEST_CASE("energy identity on the concentric scene matches the mode oracle") {
  const double k = 2.0, rho = 0.4;
  const DtnSolver solver = DtnSolver::build(concentric_soft(k), 256, 128);
  EntireSolution v;
  v.k = k;
  v.order = 2;
  v.coeffs = {0.0, 0.0, 0.0, 0.0, 1.0};
  // u_2 = a J_2 + b Y_2 with u(1) = J_2(k) and u(rho) = 0.
  const double j1 = bessel_j(2, k), jr = bessel_j(2, k * rho), yr = bessel_y(2, k * rho), y1 = bessel_y(2, k);
  const double det = j1 * yr - jr * y1;
  const double a = j1 * yr / det, b = -j1 * jr / det;
  const double du1 = k * (a * bessel_j_prime(2, k) + b * bessel_y_prime(2, k));
  const double dur = k * (a * bessel_j_prime(2, k * rho) + b * bessel_y_prime(2, k * rho));
  const double lhs = 2.0 * kPi * (k * bessel_j_prime(2, k) - du1) * j1;
  const double energy_v = 2.0 * kPi * rho * k * bessel_j_prime(2, k * rho) * jr;
  const double energy_w = 2.0 * kPi * rho * (dur - k * bessel_j_prime(2, k * rho)) * jr;
  CHECK(lhs == doctest::Approx(-energy_v - energy_w).epsilon(1e-12));

  const IdentityParts p = identity_parts(solver, v);
  CHECK(p.lhs == doctest::Approx(lhs).epsilon(1e-6));
  CHECK(p.energy_v == doctest::Approx(energy_v).epsilon(1e-6));
  CHECK(p.energy_w == doctest::Approx(energy_w).epsilon(1e-6));
  CHECK(p.gap() <= 1e-6);
}

TEST_CASE("energy identity on a kite with random entire v, under refinement") {
  const double k = 2.0;
  const ObstacleScene scene = kite_soft(k);
  for (std::uint64_t seed : {1u, 2u}) {
    const EntireSolution v = random_entire({0, 0}, k, 16, seed);
    double prev = 1e300;
    for (int m : {32, 64, 128}) {
      const DtnSolver solver = DtnSolver::build(scene, 2 * m, m);
      const double gap = identity_parts(solver, v).gap();
      CHECK(gap <= std::max(prev, 1e-13));
      prev = gap;
    }
    CHECK(prev <= 1e-3);
  }
  CHECK_THROWS_AS(identity_parts(DtnSolver::build(unit_disk(k, BoundaryKind::Impedance), 64, 32),
                                 random_entire({0, 0}, k, 4, 1)),
                  std::invalid_argument);
}

TEST_CASE("random_entire is seeded and normalized") {
  const EntireSolution a = random_entire({0.1, 0}, 2.0, 16, 42);
  const EntireSolution b = random_entire({0.1, 0}, 2.0, 16, 42);
  const EntireSolution c = random_entire({0.1, 0}, 2.0, 16, 43);
  CHECK(a.coeffs.size() == 33);
  CHECK(a.coefficient_norm() == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(a.coeffs == b.coeffs);
  CHECK(a.coeffs != c.coeffs);
}

TEST_CASE("empty-scene scenario: nullity passes, blow-up checks lack their premise") {
  SuiteScenario sc = light_scenario("empty", unit_disk(2.0, BoundaryKind::Impedance));
  sc.tips = {{0.0, 0.7}};
  sc.needles = {straight_needle({1, 0}, {0.2, 0})};
  const auto reports = run_scenario(sc);
  REQUIRE_FALSE(reports.empty());
  int nullity = 0;
  for (const auto& r : reports) {
    CHECK(r.scenario == "empty");
    switch (r.check) {
      case Check::Nullity:
        ++nullity;
        CHECK(r.status == CheckStatus::Pass);
        break;
      case Check::RatioDecay:
      case Check::ObstacleEnergy:
      case Check::DivergenceImpedance:
      case Check::DivergenceSoft:
      case Check::BoundaryBlowup:
      case Check::LowerBound:
        CHECK(r.status == CheckStatus::PremiseNotRealized);
        break;
      default:
        break;
    }
  }
  CHECK(nullity == 1);
}

TEST_CASE("suite reports are reproducible and ordered by scenario") {
  SuiteScenario a = light_scenario("b-soft", concentric_soft(2.0));
  a.tips = {{0.0, 0.75}};
  a.identity_samples = 1;
  a.identity_order = 8;
  SuiteScenario b = light_scenario("a-empty", unit_disk(2.0));
  b.tips = {{0.5, 0.0}};
  const auto first = run_suite({a, b}, 2);
  const auto second = run_suite({a, b}, 1);
  REQUIRE(first.size() == second.size());
  for (std::size_t i = 0; i < first.size(); ++i) {
    CHECK(first[i].scenario == second[i].scenario);
    CHECK(first[i].check == second[i].check);
    CHECK(first[i].status == second[i].status);
    CHECK(first[i].stats == second[i].stats);
  }
  CHECK(first.front().scenario == "a-empty");
  CHECK(first.back().scenario == "b-soft");
  std::set<Check> seen;
  for (const auto& r : first) {
    if (r.scenario == "b-soft") seen.insert(r.check);
  }
  CHECK(seen.count(Check::Convergence) == 1);
  CHECK(seen.count(Check::EnergyIdentity) == 1);
}
