#include "probe/indicator.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <tuple>

#include "probe/parallel.hpp"

namespace probe {

namespace {

CVector normal_component(const BasisTable& t, const std::vector<Point>& normal, int p, const CVector& c) {
  const CVector gx = t.dx.leftCols(p) * c;
  const CVector gy = t.dy.leftCols(p) * c;
  CVector out(gx.size());
  for (Eigen::Index i = 0; i < gx.size(); ++i) out[i] = gx[i] * normal[i].x() + gy[i] * normal[i].y();
  return out;
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

int schedule_order(const std::vector<ScheduleStep>& schedule) {
  int m = 0;
  for (const auto& s : schedule) m = std::max(m, s.order);
  return m;
}

}  // namespace

IndicatorTerm indicator_term(const DtnSolver& solver, const CVector& trace, const CVector& normal) {
  const DiscretizedCurve& c = solver.outer();
  if (trace.size() != c.size || normal.size() != c.size) {
    throw std::invalid_argument("indicator_term: data does not match the outer discretization");
  }
  const CVector un = solver.dtn(trace);
  IndicatorTerm out;
  for (int j = 0; j < c.size; ++j) {
    const double w = c.weight(j);
    out.background += w * normal[j] * std::conj(trace[j]);
    out.obstacle += w * un[j] * std::conj(trace[j]);
  }
  out.pairing = out.background - out.obstacle;
  out.value = out.pairing.real();
  return out;
}

IndicatorTerm indicator_term(const DtnSolver& solver, const EntireSolution& v) {
  if (std::abs(v.k - solver.k()) > 1e-12 * solver.k()) throw std::invalid_argument("indicator_term: wavenumber mismatch");
  const DiscretizedCurve& c = solver.outer();
  CVector trace(c.size), normal(c.size);
  for (int j = 0; j < c.size; ++j) {
    const FieldPoint p = eval_entire(v, c.x[j]);
    trace[j] = p.value;
    normal[j] = p.gradient[0] * c.normal[j].x() + p.gradient[1] * c.normal[j].y();
  }
  return indicator_term(solver, trace, normal);
}

std::vector<double> IndicatorSeries::values() const {
  std::vector<double> out;
  for (const auto& r : rows) out.push_back(r.value);
  return out;
}

AreaRule obstacle_region_rule(const ObstacleScene& scene, int n_radial, int n_angular) {
  AreaRule rule;
  for (const auto& ob : scene.obstacles) rule.append(star_rule(ob.shape, n_radial, n_angular));
  return rule;
}

IndicatorSeries indicator_series(const DtnSolver& solver, const NeedleSequence& seq, const SeriesOptions& opts) {
  if (std::abs(seq.basis.k - solver.k()) > 1e-12 * solver.k()) {
    throw std::invalid_argument("indicator_series: wavenumber mismatch");
  }
  IndicatorSeries out;
  out.x = seq.x;
  out.needle = seq.needle;
  out.stop_reason = seq.stop_reason;
  const DiscretizedCurve& c = solver.outer();
  const BasisTable outer_table = tabulate(seq.basis, c.x);

  const ObstacleScene& scene = solver.scene();
  const bool companions = opts.truth_known && !scene.empty();
  AreaRule region;
  BasisTable region_table, edge_table;
  std::vector<double> edge_weight;
  if (companions) {
    region = obstacle_region_rule(scene, opts.region_radial, opts.region_angular);
    region_table = tabulate(seq.basis, region.nodes);
    std::vector<Point> edge;
    for (int b = 0; b < solver.obstacle_count(); ++b) {
      const DiscretizedCurve& d = solver.obstacle(b);
      for (int j = 0; j < d.size; ++j) {
        edge.push_back(d.x[j]);
        edge_weight.push_back(d.weight(j));
      }
    }
    edge_table = tabulate(seq.basis, edge);
  }

  for (const auto& el : seq.elements) {
    const int p = static_cast<int>(el.normalized.size());
    const CVector trace = outer_table.value.leftCols(p) * el.normalized;
    const CVector normal = normal_component(outer_table, c.normal, p, el.normalized);
    const IndicatorTerm term = indicator_term(solver, trace, normal);
    IndicatorRow row;
    row.n = el.report.n;
    row.value = term.value;
    row.pairing = term.pairing;
    row.residual = el.report.residual;
    row.coef_norm = el.report.coef_norm;
    row.scale = std::abs(term.background);
    if (companions) {
      const CVector v = region_table.value.leftCols(p) * el.normalized;
      const CVector gx = region_table.dx.leftCols(p) * el.normalized;
      const CVector gy = region_table.dy.leftCols(p) * el.normalized;
      double l2 = 0.0, h1 = 0.0, edge2 = 0.0;
      for (std::size_t i = 0; i < region.size(); ++i) {
        l2 += region.weights[i] * std::norm(v[i]);
        h1 += region.weights[i] * (std::norm(gx[i]) + std::norm(gy[i]));
      }
      const CVector ve = edge_table.value.leftCols(p) * el.normalized;
      for (std::size_t i = 0; i < edge_weight.size(); ++i) edge2 += edge_weight[i] * std::norm(ve[i]);
      row.grad_energy_D = h1;
      row.l2_D = std::sqrt(l2);
      row.h1semi_D = std::sqrt(h1);
      row.ratio = h1 > 0.0 ? std::sqrt(l2 / h1) : 0.0;
      row.boundary_l2_D = std::sqrt(edge2);
    }
    out.rows.push_back(row);
  }
  return out;
}

namespace {

// Boundary terms of I(x) on the obstacles, sampled finely enough for the tip distance.
struct BoundaryParts {
  double e_w = 0.0;   // int over Omega minus D of |grad w|^2 - k^2 |w|^2, reduced to the obstacle boundary
  double e_g = 0.0;   // same for G over D
  double mixed = 0.0; // Re int (dG/dn + dw/dn) conj(G)
  double lambda_w = 0.0, lambda_g = 0.0, lambda_wg = 0.0;
};

BoundaryParts boundary_parts(const DtnSolver& solver, const FieldSolution& w, const Point& x, int max_upsample) {
  const ObstacleScene& scene = solver.scene();
  const double k = solver.k();
  BoundaryParts out;
  for (int b = 0; b < solver.obstacle_count(); ++b) {
    const DiscretizedCurve& d = solver.obstacle(b);
    const Obstacle& ob = scene.obstacles[b];
    const double dist = std::max(std::abs(ob.shape.signed_distance(x)), 1e-12);
    double hmax = 0.0;
    for (int j = 0; j < d.size; ++j) hmax = std::max(hmax, d.weight(j));
    int level = 1;
    while (level < max_upsample && hmax / level > 0.25 * dist) level *= 2;
    const int n = d.size * level;
    const double dt = 2.0 * kPi / n;
    CVector node_trace, node_normal;
    if (level == 1) {
      node_trace = w.trace(b + 1);
      node_normal = w.normal_derivative(b + 1);
    }
    for (int j = 0; j < n; ++j) {
      const double t = j * dt;
      const CurvePoint cp = ob.shape.eval(t);
      const double speed = cp.dx.norm();
      const Point nrm(cp.dx.y() / speed, -cp.dx.x() / speed);
      const double ds = dt * speed;
      Complex wv, wn;
      if (level == 1) {
        wv = node_trace[j];
        wn = node_normal[j];
      } else {
        std::tie(wv, wn) = w.boundary_values(b + 1, t);
      }
      const GreenValue g = green2d(k, cp.x, x);
      const Complex gn = g.gradient_z[0] * nrm.x() + g.gradient_z[1] * nrm.y();
      out.e_w += -ds * std::real(wn * std::conj(wv));
      out.e_g += ds * std::real(gn * std::conj(g.value));
      out.mixed += ds * std::real((gn + wn) * std::conj(g.value));
      if (scene.kind == BoundaryKind::Impedance) {
        const Complex lam = ob.lambda(t);
        out.lambda_w += ds * lam.real() * std::norm(wv);
        out.lambda_g += ds * lam.real() * std::norm(g.value);
        out.lambda_wg += ds * lam.imag() * std::imag(wv * std::conj(g.value));
      }
    }
  }
  return out;
}

// Omega minus the closure of D. Exact polar rule for a concentric annulus, masked star rule otherwise.
AreaRule exterior_rule(const ObstacleScene& scene, int n_radial, int n_angular) {
  const Circle* outer = scene.outer.as_circle();
  if (outer && scene.obstacles.size() == 1) {
    const Circle* inner = scene.obstacles[0].shape.as_circle();
    if (inner && (inner->center - outer->center).norm() < 1e-14) {
      return annulus_rule(outer->center, inner->radius, outer->radius, n_radial, n_angular);
    }
  }
  return star_rule(scene.outer, n_radial, n_angular).restricted([&](const Point& z) {
    return !scene.obstacle_containing(z).has_value();
  });
}

}  // namespace

double indicator_direct(const DtnSolver& solver, const Point& x, const DirectOptions& opts) {
  const ObstacleScene& scene = solver.scene();
  if (scene.empty()) return 0.0;
  if (scene.obstacle_containing(x)) throw OutsideDomain("indicator_direct: point lies in the closure of D");
  const FieldSolution w = solver.solve_reflected(x);
  const BoundaryParts bp = boundary_parts(solver, w, x, 64);
  double e_w = bp.e_w, e_g = bp.e_g;
  if (opts.method == VolumeMethod::Area) {
    const double k2 = solver.k() * solver.k();
    const AreaRule ext = exterior_rule(scene, opts.area_radial, opts.area_angular);
    e_w = 0.0;
    for (std::size_t i = 0; i < ext.size(); ++i) {
      const FieldPoint p = w.eval(ext.nodes[i]);
      e_w += ext.weights[i] * (std::norm(p.gradient[0]) + std::norm(p.gradient[1]) - k2 * std::norm(p.value));
    }
    const AreaRule in = obstacle_region_rule(scene, opts.area_radial, opts.area_angular);
    e_g = 0.0;
    for (std::size_t i = 0; i < in.size(); ++i) {
      const GreenValue g = green2d(solver.k(), in.nodes[i], x);
      e_g += in.weights[i] * (g.gradient_z.squaredNorm() - k2 * std::norm(g.value));
    }
  }
  if (scene.kind == BoundaryKind::SoundSoft) return -e_g - e_w;
  return e_w - bp.lambda_w + e_g + bp.lambda_g - 2.0 * bp.lambda_wg;
}

const char* to_string(DivergenceStatus s) {
  switch (s) {
    case DivergenceStatus::DivergingPlus: return "Diverging+";
    case DivergenceStatus::DivergingMinus: return "Diverging-";
    case DivergenceStatus::Converged: return "Converged";
    case DivergenceStatus::Inconclusive: return "Inconclusive";
  }
  return "?";
}

double growth_ratio(const std::vector<double>& series, int window) {
  if (window < 2 || static_cast<int>(series.size()) < window) return 0.0;
  const std::size_t start = series.size() - window;
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (int i = 0; i < window; ++i) {
    const double y = std::abs(series[start + i]);
    if (!(y > 0.0)) return 0.0;
    const double ly = std::log(y);
    sx += i;
    sy += ly;
    sxx += static_cast<double>(i) * i;
    sxy += i * ly;
  }
  const double slope = (window * sxy - sx * sy) / (window * sxx - sx * sx);
  return std::exp(slope);
}

DivergenceStatus detect_divergence(const std::vector<double>& series, int window, const DivergenceThresholds& th) {
  if (window < 2) throw std::invalid_argument("detect_divergence: window must be at least 2");
  if (static_cast<int>(series.size()) < 2 * window) {
    throw std::invalid_argument("detect_divergence: series shorter than two windows");
  }
  const std::size_t start = series.size() - window;
  const double last = series.back();
  double tv = 0.0;
  bool up = true, down = true;
  for (std::size_t i = start + 1; i < series.size(); ++i) {
    const double d = series[i] - series[i - 1];
    tv += std::abs(d);
    up = up && d > 0.0;
    down = down && d < 0.0;
  }
  if (tv <= th.tau_rel * (1.0 + std::abs(last))) return DivergenceStatus::Converged;
  if ((up || down) && std::abs(last) >= th.a_min && growth_ratio(series, window) >= th.g_min) {
    if (up && last > 0.0) return DivergenceStatus::DivergingPlus;
    if (down && last < 0.0) return DivergenceStatus::DivergingMinus;
  }
  return DivergenceStatus::Inconclusive;
}

Needle nearest_point_needle(const Curve& outer, const Point& x) {
  return straight_needle(outer.eval(outer.closest_parameter(x)).x, x);
}

namespace {

// First exit point of the ray x + s d from Omega.
std::optional<Point> ray_exit(const Curve& outer, const Point& x, const Point& d) {
  const double step = outer.diameter() / 400.0;
  double lo = 0.0;
  for (int i = 1; i <= 800; ++i) {
    const double s = i * step;
    if (outer.signed_distance(x + s * d) >= 0.0) {
      double a = lo, b = s;
      for (int it = 0; it < 80; ++it) {
        const double m = 0.5 * (a + b);
        (outer.signed_distance(x + m * d) >= 0.0 ? b : a) = m;
      }
      const Point p = x + b * d;
      return outer.eval(outer.closest_parameter(p)).x;
    }
    lo = s;
  }
  return std::nullopt;
}

}  // namespace

const char* to_string(Classification c) {
  return c == Classification::InObstacleClosure ? "InObstacleClosure" : "Outside";
}

Verdict classify_point(const DtnSolver& solver, const Point& x, const NeedlePolicy& policy,
                       std::shared_ptr<const FitContext> ctx) {
  const ObstacleScene& scene = solver.scene();
  if (policy.schedule.empty()) throw std::invalid_argument("classify_point: empty schedule");
  if (!ctx) ctx = std::make_shared<const FitContext>(scene.outer, solver.k(), schedule_order(policy.schedule), policy.fit);

  std::vector<std::pair<std::string, Needle>> candidates;
  const Needle first = nearest_point_needle(scene.outer, x);
  candidates.emplace_back("straight", first);
  const Point d0 = (first.start() - x).normalized();
  for (std::size_t a = 0; a < policy.extra_angles.size(); ++a) {
    const double c = std::cos(policy.extra_angles[a]), s = std::sin(policy.extra_angles[a]);
    const Point d(c * d0.x() - s * d0.y(), s * d0.x() + c * d0.y());
    if (auto start = ray_exit(scene.outer, x, d)) candidates.emplace_back("extra:" + std::to_string(a), straight_needle(*start, x));
  }
  for (std::size_t j = 0; j < policy.detours.size(); ++j) candidates.emplace_back("detour:" + std::to_string(j), policy.detours[j]);

  Verdict verdict;
  bool any_diverging = false, any_open = false;
  SeriesOptions sopts;
  sopts.truth_known = false;
  for (const auto& [name, needle] : candidates) {
    NeedleEvidence ev;
    ev.needle = needle;
    ev.name = name;
    if ((needle.tip() - x).norm() > 1e-9 * scene.outer.diameter()) {
      ev.note = "tip differs from x";
      verdict.evidence.push_back(ev);
      any_open = true;
      continue;
    }
    if (auto err = validate_needle(needle, scene.outer, policy.reject_grazing ? &scene : nullptr)) {
      ev.note = *err;
      verdict.evidence.push_back(ev);
      any_open = true;
      continue;
    }
    const NeedleSequence seq = build_needle_sequence(ctx, needle, policy.schedule, policy.fit);
    const IndicatorSeries series = indicator_series(solver, seq, sopts);
    const std::vector<double> values = series.values();
    ev.steps = static_cast<int>(values.size());
    ev.last_value = values.empty() ? 0.0 : values.back();
    ev.growth = growth_ratio(values, policy.window);
    ev.note = seq.stop_reason;
    ev.status = static_cast<int>(values.size()) >= 2 * policy.window
                    ? detect_divergence(values, policy.window, policy.thresholds)
                    : DivergenceStatus::Inconclusive;
    verdict.evidence.push_back(ev);
    if (ev.status == DivergenceStatus::Converged) {
      verdict.classification = Classification::Outside;
      verdict.confidence = Confidence::Normal;
      verdict.value = ev.last_value;
      return verdict;
    }
    if (ev.status == DivergenceStatus::Inconclusive) {
      any_open = true;
    } else {
      any_diverging = true;
    }
  }
  for (const auto& ev : verdict.evidence) {
    if (ev.status == DivergenceStatus::DivergingPlus || ev.status == DivergenceStatus::DivergingMinus) {
      verdict.value = ev.last_value;
      break;
    }
  }
  if (any_diverging) {
    verdict.classification = Classification::InObstacleClosure;
    verdict.confidence = any_open ? Confidence::Low : Confidence::Normal;
  } else {
    verdict.classification = Classification::Outside;
    verdict.confidence = Confidence::Low;
    if (!verdict.evidence.empty()) verdict.value = verdict.evidence.front().last_value;
  }
  return verdict;
}

const char* to_string(PointStatus s) {
  switch (s) {
    case PointStatus::Converged: return "Converged";
    case PointStatus::DivergedPlus: return "Diverged+";
    case PointStatus::DivergedMinus: return "Diverged-";
    case PointStatus::Inconclusive: return "Inconclusive";
    case PointStatus::Rejected: return "Rejected";
  }
  return "?";
}

int GridSpec::nx() const { return static_cast<int>(std::floor((x1 - x0) / h + 1e-9)) + 1; }
int GridSpec::ny() const { return static_cast<int>(std::floor((y1 - y0) / h + 1e-9)) + 1; }
Point GridSpec::at(int ix, int iy) const { return {x0 + ix * h, y0 + iy * h}; }

std::vector<double> IndicatorField::mask() const {
  std::vector<double> out;
  for (const auto& e : entries) out.push_back(e.inside ? 1.0 : 0.0);
  return out;
}

namespace {

PointStatus point_status(DivergenceStatus s) {
  switch (s) {
    case DivergenceStatus::DivergingPlus: return PointStatus::DivergedPlus;
    case DivergenceStatus::DivergingMinus: return PointStatus::DivergedMinus;
    case DivergenceStatus::Converged: return PointStatus::Converged;
    case DivergenceStatus::Inconclusive: return PointStatus::Inconclusive;
  }
  return PointStatus::Rejected;
}

}  // namespace

IndicatorField reconstruct_grid(const DtnSolver& solver, const GridSpec& grid, const NeedlePolicy& policy,
                                const ScanOptions& opts) {
  if (!(grid.h > 0.0) || grid.x1 < grid.x0 || grid.y1 < grid.y0) throw std::invalid_argument("reconstruct_grid: bad grid");
  if (policy.schedule.empty()) throw std::invalid_argument("reconstruct_grid: empty schedule");
  const ObstacleScene& scene = solver.scene();
  IndicatorField field;
  field.grid = grid;
  field.mode = opts.mode;
  const int nx = grid.nx(), ny = grid.ny();
  field.entries.resize(static_cast<std::size_t>(nx) * ny);
  const auto ctx =
      std::make_shared<const FitContext>(scene.outer, solver.k(), schedule_order(policy.schedule), policy.fit);
  const double margin = 1e-3 * scene.outer.diameter();

  parallel_for(nx * ny, opts.threads, [&](int idx) {
    FieldEntry& e = field.entries[idx];
    e.x = grid.at(idx % nx, idx / nx);
    e.needle = "straight";
    if (scene.outer.signed_distance(e.x) > -margin) {
      e.status = PointStatus::Rejected;
      e.note = "outside the domain";
      return;
    }
    try {
      if (opts.mode == ScanMode::SideB) {
        const Verdict v = classify_point(solver, e.x, policy, ctx);
        e.inside = v.classification == Classification::InObstacleClosure;
        e.value = v.value;
        const NeedleEvidence* decisive = nullptr;
        for (const auto& ev : v.evidence) {
          const bool match = e.inside ? (ev.status == DivergenceStatus::DivergingPlus ||
                                         ev.status == DivergenceStatus::DivergingMinus)
                                      : ev.status == DivergenceStatus::Converged;
          if (match) {
            decisive = &ev;
            break;
          }
        }
        if (!decisive && !v.evidence.empty()) decisive = &v.evidence.front();
        if (decisive) {
          e.status = point_status(decisive->status);
          e.needle = decisive->name;
          e.note = decisive->note;
        }
        if (v.confidence == Confidence::Low) e.note += e.note.empty() ? "low confidence" : "; low confidence";
      } else {
        const Needle needle = nearest_point_needle(scene.outer, e.x);
        if (auto err = validate_needle(needle, scene.outer, policy.reject_grazing ? &scene : nullptr)) {
          e.status = PointStatus::Rejected;
          e.note = *err;
          return;
        }
        const NeedleSequence seq = build_needle_sequence(ctx, needle, policy.schedule, policy.fit);
        SeriesOptions sopts;
        sopts.truth_known = false;
        const auto values = indicator_series(solver, seq, sopts).values();
        e.value = values.empty() ? 0.0 : values.back();
        e.status = static_cast<int>(values.size()) >= 2 * policy.window
                       ? point_status(detect_divergence(values, policy.window, policy.thresholds))
                       : PointStatus::Inconclusive;
        e.note = seq.stop_reason;
      }
    } catch (const std::exception& ex) {
      e.status = PointStatus::Rejected;
      e.note = ex.what();
    }
  });

  if (opts.mode == ScanMode::SideA) {
    std::vector<double> converged;
    for (const auto& e : field.entries) {
      if (e.status == PointStatus::Converged) converged.push_back(std::abs(e.value));
    }
    field.threshold = opts.threshold > 0.0 ? opts.threshold : 10.0 * median(converged);
    for (auto& e : field.entries) {
      if (e.status == PointStatus::Rejected) continue;
      e.inside = e.status == PointStatus::DivergedPlus || e.status == PointStatus::DivergedMinus ||
                 (field.threshold > 0.0 && std::abs(e.value) >= field.threshold);
    }
  }
  return field;
}

}  // namespace probe
