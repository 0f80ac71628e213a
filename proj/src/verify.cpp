#include "probe/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <random>

#include <Eigen/QR>

#include "probe/contour.hpp"
#include "probe/parallel.hpp"

namespace probe {

const char* to_string(Check c) {
  switch (c) {
    case Check::RatioDecay: return "ratio-decay";
    case Check::ConeBlowup: return "cone-blowup";
    case Check::NeedleBlowup: return "needle-blowup";
    case Check::ObstacleEnergy: return "obstacle-energy";
    case Check::Convergence: return "convergence";
    case Check::Boundedness: return "boundedness";
    case Check::BoundaryBlowup: return "boundary-blowup";
    case Check::DivergenceImpedance: return "divergence-impedance";
    case Check::DivergenceSoft: return "divergence-soundsoft";
    case Check::EnergyIdentity: return "energy-identity";
    case Check::LowerBound: return "lower-bound";
    case Check::Nullity: return "nullity";
  }
  return "?";
}

const char* to_string(CheckStatus s) {
  switch (s) {
    case CheckStatus::Pass: return "pass";
    case CheckStatus::Fail: return "fail";
    case CheckStatus::PremiseNotRealized: return "premise-not-realized";
    case CheckStatus::Error: return "error";
  }
  return "?";
}

double TheoremReport::stat(const std::string& name) const {
  for (const auto& [k, v] : stats) {
    if (k == name) return v;
  }
  return std::numeric_limits<double>::quiet_NaN();
}

namespace {

bool strictly_monotone(const std::vector<double>& v, std::size_t from, int sign) {
  for (std::size_t i = std::max<std::size_t>(from, 1); i < v.size(); ++i) {
    if (!(sign * (v[i] - v[i - 1]) > 0.0)) return false;
  }
  return true;
}

bool nondecreasing(const std::vector<double>& v, std::size_t from) {
  for (std::size_t i = std::max<std::size_t>(from, 1); i < v.size(); ++i) {
    if (v[i] < v[i - 1]) return false;
  }
  return true;
}

std::size_t tail_start(std::size_t n) { return n / 2; }

TheoremReport premise_missing(Check c, const std::string& note) {
  TheoremReport r;
  r.check = c;
  r.status = CheckStatus::PremiseNotRealized;
  r.note = note;
  return r;
}

bool meets_obstacle(const Needle& needle, const ObstacleScene& scene) {
  if (scene.empty()) return false;
  const NeedleClass c = classify_needle_vs_obstacle(needle, scene);
  return c == NeedleClass::TipInObstacle || c == NeedleClass::CrossesObstacle;
}

}  // namespace

TheoremReport check_ratio_decay(const std::vector<double>& h1, const std::vector<double>& l2,
                                const VerifyThresholds& th) {
  TheoremReport r;
  r.check = Check::RatioDecay;
  r.thresholds = {{"growth", th.growth}, {"ratio_factor", th.ratio_factor}};
  if (h1.size() != l2.size() || h1.size() < 2) {
    r.status = CheckStatus::Error;
    r.note = "need matching series of length >= 2";
    return r;
  }
  const std::size_t n = h1.size();
  const double growth = h1.front() > 0.0 ? h1.back() / h1.front() : std::numeric_limits<double>::infinity();
  r.stats.emplace_back("growth", growth);
  if (!(growth >= th.growth)) {
    r.status = CheckStatus::PremiseNotRealized;
    r.note = "gradient energy in D did not grow enough over the schedule";
    return r;
  }
  std::vector<double> ratio(n);
  for (std::size_t i = 0; i < n; ++i) ratio[i] = h1[i] > 0.0 ? l2[i] / h1[i] : 0.0;
  std::size_t onset = 0;
  while (onset + 1 < n && !(h1[onset + 1] > h1[onset])) ++onset;
  const double decay = ratio[onset] > 0.0 ? ratio.back() / ratio[onset] : 0.0;
  const bool decreasing = strictly_monotone(ratio, tail_start(n), -1);
  r.stats.emplace_back("onset", static_cast<double>(onset));
  r.stats.emplace_back("ratio_onset", ratio[onset]);
  r.stats.emplace_back("ratio_last", ratio.back());
  r.stats.emplace_back("ratio_decay", decay);
  r.stats.emplace_back("tail_decreasing", decreasing ? 1.0 : 0.0);
  r.status = decay <= th.ratio_factor && decreasing ? CheckStatus::Pass : CheckStatus::Fail;
  return r;
}

TheoremReport check_ratio_decay(const IndicatorSeries& series, const ObstacleScene& scene, const VerifyThresholds& th) {
  if (!meets_obstacle(series.needle, scene)) return premise_missing(Check::RatioDecay, "needle does not meet D");
  std::vector<double> h1, l2;
  for (const auto& row : series.rows) {
    if (!row.h1semi_D || !row.l2_D) return premise_missing(Check::RatioDecay, "series has no D companions");
    h1.push_back(*row.h1semi_D);
    l2.push_back(*row.l2_D);
  }
  return check_ratio_decay(h1, l2, th);
}

TheoremReport check_energy_growth(Check check, const std::vector<double>& energy, const VerifyThresholds& th) {
  TheoremReport r;
  r.check = check;
  r.thresholds = {{"growth", th.growth}};
  if (energy.size() < 2) {
    r.status = CheckStatus::Error;
    r.note = "need a series of length >= 2";
    return r;
  }
  const double growth = energy.front() > 0.0 ? energy.back() / energy.front() : std::numeric_limits<double>::infinity();
  const bool tail = nondecreasing(energy, tail_start(energy.size()));
  r.stats = {{"first", energy.front()}, {"last", energy.back()}, {"growth", growth}, {"tail_nondecreasing", tail ? 1.0 : 0.0}};
  r.status = growth >= th.growth && tail ? CheckStatus::Pass : CheckStatus::Fail;
  return r;
}

double IdentityParts::gap() const {
  // Without obstacles both sides vanish and lhs is a cancellation against the background pairing.
  const double size = obstacle_free ? std::abs(background) : std::max(std::abs(lhs), std::abs(rhs()));
  const double scale = std::max(size, std::numeric_limits<double>::min());
  return std::abs(lhs - rhs()) / scale;
}

IdentityParts identity_parts(const DtnSolver& solver, const EntireSolution& v) {
  const ObstacleScene& scene = solver.scene();
  if (scene.kind != BoundaryKind::SoundSoft) throw std::invalid_argument("identity_parts: sound-soft scene required");
  const DiscretizedCurve& c = solver.outer();
  CVector trace(c.size), normal(c.size);
  for (int j = 0; j < c.size; ++j) {
    const FieldPoint p = eval_entire(v, c.x[j]);
    trace[j] = p.value;
    normal[j] = p.gradient[0] * c.normal[j].x() + p.gradient[1] * c.normal[j].y();
  }
  const FieldSolution u = solver.solve_dirichlet(trace);
  const CVector un = u.neumann_trace().values;
  IdentityParts out;
  out.obstacle_free = scene.empty();
  for (int j = 0; j < c.size; ++j) {
    out.lhs += c.weight(j) * std::real((normal[j] - un[j]) * std::conj(trace[j]));
    out.background += c.weight(j) * std::real(normal[j] * std::conj(trace[j]));
  }
  for (int b = 0; b < solver.obstacle_count(); ++b) {
    const DiscretizedCurve& d = solver.obstacle(b);
    const CVector ud = u.normal_derivative(b + 1);
    for (int j = 0; j < d.size; ++j) {
      const FieldPoint p = eval_entire(v, d.x[j]);
      const Complex vn = p.gradient[0] * d.normal[j].x() + p.gradient[1] * d.normal[j].y();
      // w = u - v equals -v on the obstacle and vanishes on the outer boundary.
      out.energy_v += d.weight(j) * std::real(vn * std::conj(p.value));
      out.energy_w += d.weight(j) * std::real((ud[j] - vn) * std::conj(p.value));
    }
  }
  return out;
}

TheoremReport check_energy_identity(const DtnSolver& solver, const EntireSolution& v, const VerifyThresholds& th) {
  TheoremReport r;
  r.check = Check::EnergyIdentity;
  r.thresholds = {{"gap", th.identity_gap}};
  const IdentityParts p = identity_parts(solver, v);
  r.stats = {{"lhs", p.lhs}, {"energy_v_D", p.energy_v}, {"energy_w", p.energy_w}, {"rhs", p.rhs()}, {"gap", p.gap()}};
  r.status = p.gap() <= th.identity_gap ? CheckStatus::Pass : CheckStatus::Fail;
  return r;
}

FittedBound estimate_lower_bound(const std::vector<double>& values, const std::vector<double>& h1,
                                 const std::vector<double>& l2) {
  const std::size_t n = values.size();
  if (h1.size() != n || l2.size() != n) throw std::invalid_argument("estimate_lower_bound: length mismatch");
  if (n < 2) throw DegenerateRegression("estimate_lower_bound: fewer samples than unknowns");
  Eigen::MatrixXd a(n, 2);
  Eigen::VectorXd y(n);
  for (std::size_t i = 0; i < n; ++i) {
    a(i, 0) = h1[i] * h1[i];
    a(i, 1) = l2[i] * l2[i];
    y[i] = values[i];
  }
  // Column scaling keeps the rank test meaningful when the energies differ by orders of magnitude.
  const Eigen::Vector2d scale(a.col(0).norm(), a.col(1).norm());
  if (!(scale[0] > 0.0) || !(scale[1] > 0.0)) throw DegenerateRegression("estimate_lower_bound: zero column");
  const Eigen::MatrixXd as = a * scale.cwiseInverse().asDiagonal();
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(as);
  qr.setThreshold(1e-10);
  if (qr.rank() < 2) throw DegenerateRegression("estimate_lower_bound: design matrix is rank-deficient");
  const Eigen::Vector2d c = qr.solve(y).cwiseQuotient(scale);
  FittedBound out;
  out.c1 = c[0];
  out.c2 = c[1];
  out.residual = (a * c - y).norm();
  out.samples = static_cast<int>(n);
  return out;
}

FittedBound estimate_lower_bound(const IndicatorSeries& series) {
  std::vector<double> values, h1, l2;
  for (std::size_t i = tail_start(series.rows.size()); i < series.rows.size(); ++i) {
    const auto& row = series.rows[i];
    if (!row.h1semi_D || !row.l2_D) throw std::invalid_argument("estimate_lower_bound: series has no D companions");
    values.push_back(row.value);
    h1.push_back(*row.h1semi_D);
    l2.push_back(*row.l2_D);
  }
  return estimate_lower_bound(values, h1, l2);
}

EntireSolution random_entire(const Point& center, double k, int order, std::uint64_t seed) {
  // Bits to [-1, 1) by hand so the coefficients do not depend on the standard library's distributions.
  std::mt19937_64 rng(seed);
  auto uniform = [&] { return 2.0 * static_cast<double>(rng() >> 11) * 0x1.0p-53 - 1.0; };
  EntireSolution v;
  v.center = center;
  v.k = k;
  v.order = order;
  v.coeffs.resize(2 * order + 1);
  for (auto& c : v.coeffs) {
    const double re = uniform();
    c = Complex(re, uniform());
  }
  const double norm = v.coefficient_norm();
  for (auto& c : v.coeffs) c /= norm;
  return v;
}

namespace {

int max_order(const SuiteScenario& s) {
  int m = 0;
  for (const auto& st : s.schedule) m = std::max(m, st.order);
  for (const auto& st : s.blowup_schedule) m = std::max(m, st.order);
  return m;
}

std::string point_label(const Point& x) {
  auto snap = [](double v) { return std::abs(v) < 1e-12 ? 0.0 : v; };
  char buf[64];
  std::snprintf(buf, sizeof buf, "(%.4g,%.4g)", snap(x.x()), snap(x.y()));
  return buf;
}

std::string needle_label(const Needle& n) { return point_label(n.start()) + "->" + point_label(n.tip()); }

// ||grad v_n|| over a region for every element of a sequence.
std::vector<double> gradient_norms(const NeedleSequence& seq, const AreaRule& region) {
  std::vector<double> out;
  if (region.size() == 0) return out;
  const BasisTable t = tabulate(seq.basis, region.nodes);
  for (const auto& el : seq.elements) {
    const int p = static_cast<int>(el.normalized.size());
    const CVector gx = t.dx.leftCols(p) * el.normalized;
    const CVector gy = t.dy.leftCols(p) * el.normalized;
    double e = 0.0;
    for (std::size_t i = 0; i < region.size(); ++i) e += region.weights[i] * (std::norm(gx[i]) + std::norm(gy[i]));
    out.push_back(std::sqrt(e));
  }
  return out;
}

// Direct indicator values on a grid over Omega, at points at least 0.2 from D and 0.05 inside Omega.
double sup_direct(const DtnSolver& solver, double h) {
  const ObstacleScene& scene = solver.scene();
  const Curve& outer = scene.outer;
  double lo_x = 1e300, hi_x = -1e300, lo_y = 1e300, hi_y = -1e300;
  for (const Point& p : sample_curve(outer, 1024)) {
    lo_x = std::min(lo_x, p.x());
    hi_x = std::max(hi_x, p.x());
    lo_y = std::min(lo_y, p.y());
    hi_y = std::max(hi_y, p.y());
  }
  double sup = 0.0;
  for (double y = lo_y; y <= hi_y + 1e-12; y += h) {
    for (double x = lo_x; x <= hi_x + 1e-12; x += h) {
      const Point z(x, y);
      if (outer.signed_distance(z) > -0.05 || scene.dist_to_obstacles(z) <= 0.2) continue;
      sup = std::max(sup, std::abs(indicator_direct(solver, z)));
    }
  }
  return sup;
}

}  // namespace

std::vector<TheoremReport> run_scenario(const SuiteScenario& s) {
  std::vector<TheoremReport> out;
  auto push = [&](TheoremReport r, const std::string& subject) {
    r.scenario = s.id;
    r.subject = subject;
    out.push_back(std::move(r));
  };
  auto error = [&](Check c, const std::string& subject, const std::string& what) {
    TheoremReport r;
    r.check = c;
    r.status = CheckStatus::Error;
    r.note = what;
    push(r, subject);
  };

  std::optional<DtnSolver> solver;
  try {
    solver.emplace(DtnSolver::build(s.scene, s.m_outer, s.m_obstacle));
  } catch (const std::exception& e) {
    error(Check::Nullity, "solver", e.what());
    return out;
  }
  const ObstacleScene& scene = s.scene;
  const bool empty = scene.empty();
  const VerifyThresholds& th = s.thresholds;
  std::shared_ptr<const FitContext> ctx;
  if (!s.tips.empty() || !s.needles.empty()) {
    ctx = std::make_shared<const FitContext>(scene.outer, scene.k, max_order(s), s.fit);
  }

  // Off-obstacle tips: convergence to the direct indicator, or nullity without an obstacle.
  double reference = 0.0, reference_direct = 0.0;
  bool have_reference = false;
  for (const Point& x : s.tips) {
    const Check c = empty ? Check::Nullity : Check::Convergence;
    const std::string subject = "tip" + point_label(x);
    try {
      const Needle needle = nearest_point_needle(scene.outer, x);
      if (!empty && classify_needle_vs_obstacle(needle, scene) != NeedleClass::Avoids) {
        error(c, subject, "straight needle does not avoid D");
        continue;
      }
      const NeedleSequence seq = build_needle_sequence(ctx, needle, s.schedule, s.fit);
      const IndicatorSeries series = indicator_series(*solver, seq);
      const std::vector<double> values = series.values();
      if (values.empty()) throw std::runtime_error("no elements: " + seq.stop_reason);
      TheoremReport r;
      r.check = c;
      r.note = seq.stop_reason;
      if (empty) {
        // Relative to the pairing size once that exceeds one: I_n is a difference of two such pairings.
        double worst = 0.0, worst_rel = 0.0;
        for (const auto& row : series.rows) {
          worst = std::max(worst, std::abs(row.value));
          worst_rel = std::max(worst_rel, std::abs(row.value) / std::max(1.0, row.scale));
        }
        r.stats = {{"max_abs_I", worst}, {"max_scaled_I", worst_rel}};
        r.thresholds = {{"scaled", th.nullity_abs}};
        r.status = worst_rel <= th.nullity_abs ? CheckStatus::Pass : CheckStatus::Fail;
      } else {
        const double direct = indicator_direct(*solver, x);
        const double rel = std::abs(values.back() - direct) / std::abs(direct);
        r.stats = {{"I_last", values.back()}, {"I_direct", direct}, {"rel_error", rel},
                   {"dist_to_D", scene.dist_to_obstacles(x)}};
        r.thresholds = {{"rel", th.convergence_rel}};
        r.status = rel <= th.convergence_rel ? CheckStatus::Pass : CheckStatus::Fail;
        if (scene.dist_to_obstacles(x) >= 0.2) {
          reference_direct = std::max(reference_direct, std::abs(direct));
          if (static_cast<int>(values.size()) >= 2 * s.window &&
              detect_divergence(values, s.window, s.divergence) == DivergenceStatus::Converged) {
            reference = std::max(reference, std::abs(values.back()));
            have_reference = true;
          }
        }
      }
      push(r, subject);
    } catch (const std::exception& e) {
      error(c, subject, e.what());
    }
  }
  if (!have_reference) reference = reference_direct;

  // Boundedness away from D under grid refinement.
  if (!s.tips.empty()) {
    try {
      const double coarse = sup_direct(*solver, 0.05), fine = sup_direct(*solver, 0.025);
      TheoremReport r;
      r.check = Check::Boundedness;
      const double rel = std::max(coarse, fine) > 0.0 ? std::abs(fine - coarse) / std::max(coarse, fine) : 0.0;
      r.stats = {{"sup_h0.05", coarse}, {"sup_h0.025", fine}, {"rel_change", rel}};
      r.thresholds = {{"rel", th.boundedness_rel}};
      r.status = std::isfinite(fine) && rel <= th.boundedness_rel ? CheckStatus::Pass : CheckStatus::Fail;
      push(r, "grid");
    } catch (const std::exception& e) {
      error(Check::Boundedness, "grid", e.what());
    }
  }

  // Monotone blow-up of I(x) towards the obstacle boundary.
  if (empty) {
    push(premise_missing(Check::BoundaryBlowup, "scene has no obstacle"), "ray");
  }
  for (std::size_t i = 0; i < s.rays.size() && !empty; ++i) {
    const std::string subject = "ray" + std::to_string(i);
    try {
      const Ray& ray = s.rays[i];
      const Curve& shape = scene.obstacles.at(ray.obstacle).shape;
      const Point a = shape.eval(ray.t).x;
      const Point nrm = shape.outward_normal(ray.t).normalized();
      std::vector<double> values;
      TheoremReport r;
      r.check = Check::BoundaryBlowup;
      for (double d : s.ray_distances) {
        const double v = indicator_direct(*solver, a + d * nrm);
        values.push_back(v);
        r.stats.emplace_back("I_d" + std::to_string(d).substr(0, 5), v);
      }
      const int sign = scene.kind == BoundaryKind::Impedance ? 1 : -1;
      const bool mono = strictly_monotone(values, 0, sign);
      r.stats.emplace_back("monotone", mono ? 1.0 : 0.0);
      r.status = mono ? CheckStatus::Pass : CheckStatus::Fail;
      push(r, subject);
    } catch (const std::exception& e) {
      error(Check::BoundaryBlowup, subject, e.what());
    }
  }

  // Needles meeting D: energies, ratio decay, divergence and the fitted bound.
  const Check divergence = scene.kind == BoundaryKind::Impedance ? Check::DivergenceImpedance : Check::DivergenceSoft;
  if (empty) {
    for (Check c : {Check::ObstacleEnergy, Check::RatioDecay, divergence, Check::LowerBound}) {
      push(premise_missing(c, "scene has no obstacle"), "needles");
    }
  }
  for (const Needle& needle : s.needles) {
    const std::string subject = "needle" + needle_label(needle);
    NeedleSequence seq;
    IndicatorSeries series;
    try {
      seq = build_needle_sequence(ctx, needle, s.blowup_schedule, s.fit);
      series = indicator_series(*solver, seq);
      if (series.rows.size() < 2) throw std::runtime_error("schedule stopped early: " + seq.stop_reason);
    } catch (const std::exception& e) {
      error(Check::NeedleBlowup, subject, e.what());
      continue;
    }
    auto in_omega = [&](const Point& z) { return scene.outer.contains(z); };
    const Point mid = 0.5 * (needle.start() + needle.tip());
    const Point dir = (needle.tip() - needle.vertices[needle.vertices.size() - 2]).normalized();
    {
      TheoremReport r = check_energy_growth(Check::NeedleBlowup, gradient_norms(seq, disk_rule(mid, 0.1, 16, 64).restricted(in_omega)), th);
      r.note = seq.stop_reason;
      push(r, subject);
      TheoremReport c = check_energy_growth(
          Check::ConeBlowup,
          gradient_norms(seq, sector_rule(needle.tip(), std::atan2(dir.y(), dir.x()), kPi / 8.0, 0.15, 16, 16)
                                  .restricted(in_omega)),
          th);
      c.note = seq.stop_reason;
      push(c, subject);
    }
    if (empty) continue;
    if (!meets_obstacle(needle, scene)) {
      for (Check c : {Check::ObstacleEnergy, Check::RatioDecay, divergence, Check::LowerBound}) {
        push(premise_missing(c, "needle does not meet D"), subject);
      }
      continue;
    }
    std::vector<double> h1, values = series.values();
    for (const auto& row : series.rows) h1.push_back(row.h1semi_D.value_or(0.0));
    push(check_energy_growth(Check::ObstacleEnergy, h1, th), subject);
    push(check_ratio_decay(series, scene, th), subject);

    TheoremReport d;
    d.check = divergence;
    d.note = seq.stop_reason;
    const int sign = scene.kind == BoundaryKind::Impedance ? 1 : -1;
    const bool mono = strictly_monotone(values, tail_start(values.size()), sign);
    const double factor = reference > 0.0 ? sign * values.back() / reference : 0.0;
    d.stats = {{"I_first", values.front()}, {"I_last", values.back()}, {"reference", reference},
               {"factor", factor}, {"tail_monotone", mono ? 1.0 : 0.0}};
    d.thresholds = {{"factor", th.growth}};
    if (!(reference > 0.0)) {
      d.status = CheckStatus::Error;
      d.note = "no off-obstacle reference value";
    } else {
      d.status = mono && factor >= th.growth ? CheckStatus::Pass : CheckStatus::Fail;
    }
    push(d, subject);

    TheoremReport b;
    b.check = Check::LowerBound;
    try {
      const FittedBound fb = estimate_lower_bound(series);
      b.stats = {{"c1", fb.c1}, {"c2", fb.c2}, {"residual", fb.residual}, {"samples", static_cast<double>(fb.samples)}};
      const bool consistent = scene.kind == BoundaryKind::Impedance ? fb.c1 > 0.0 : fb.c1 < 0.0;
      b.status = consistent ? CheckStatus::Pass : CheckStatus::Fail;
      b.note = "estimate only";
    } catch (const std::exception& e) {
      b.status = CheckStatus::Error;
      b.note = e.what();
    }
    push(b, subject);
  }

  // Sound-soft identity with random entire solutions.
  if (scene.kind == BoundaryKind::SoundSoft && !empty) {
    for (int i = 0; i < s.identity_samples; ++i) {
      const std::string subject = "random" + std::to_string(i);
      try {
        const EntireSolution v = random_entire(scene.outer.star_center(), scene.k, s.identity_order, s.seed + i);
        push(check_energy_identity(*solver, v, th), subject);
      } catch (const std::exception& e) {
        error(Check::EnergyIdentity, subject, e.what());
      }
    }
  }
  return out;
}

std::vector<TheoremReport> run_suite(const std::vector<SuiteScenario>& scenarios, int threads) {
  std::vector<std::vector<TheoremReport>> parts(scenarios.size());
  parallel_for(static_cast<int>(scenarios.size()), threads, [&](int i) {
    try {
      parts[i] = run_scenario(scenarios[i]);
    } catch (const std::exception& e) {
      TheoremReport r;
      r.scenario = scenarios[i].id;
      r.status = CheckStatus::Error;
      r.note = e.what();
      parts[i] = {r};
    }
  });
  std::vector<std::size_t> order(scenarios.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scenarios[a].id < scenarios[b].id; });
  std::vector<TheoremReport> out;
  for (std::size_t i : order) out.insert(out.end(), parts[i].begin(), parts[i].end());
  return out;
}

}  // namespace probe
