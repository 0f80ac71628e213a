#include "probe/forward.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <sstream>

namespace probe {

namespace {

const Complex kI(0.0, 1.0);

// Quadrature weight for the logarithmic part: R(s) approximates the integral of
// ln(4 sin^2((t - tau)/2)) against the trigonometric cardinal function centred at t - s.
double log_weight(double s, int m) {
  const int n = m / 2;
  double sum = 0.0;
  for (int j = 1; j < n; ++j) sum += std::cos(j * s) / j;
  return -2.0 * kPi / n * sum - kPi / (static_cast<double>(n) * n) * std::cos(n * s);
}

double log_weight_derivative(double s, int m) {
  const int n = m / 2;
  double sum = 0.0;
  for (int j = 1; j < n; ++j) sum += std::sin(j * s);
  return 2.0 * kPi / n * sum + kPi / n * std::sin(n * s);
}

struct Kern {
  Complex phi;   // Phi(r)
  Complex dphi;  // Phi'(r)
  double j0, j1;
};

Kern kernel(double k, double r) {
  const Hankel01 h = hankel01(k * r);
  return {0.25 * kI * h.h0, -0.25 * kI * k * h.h1, h.j0, h.j1};
}

double diag_log_term(double k, double speed) {
  return -kEulerGamma / (2.0 * kPi) - std::log(0.5 * k * speed) / (2.0 * kPi);
}

Point unnormalized_normal(const Point& dx) { return {dx.y(), -dx.x()}; }

}  // namespace

struct UpsampledCurve {
  std::once_flag flag;
  DiscretizedCurve geom;
};

struct SolverImpl {
  ObstacleScene scene;
  SolverOptions opts;
  double k = 1.0;
  double eta = 1.0;
  std::vector<std::shared_ptr<const DiscretizedCurve>> curves;
  std::vector<int> offset;
  std::vector<double> side;     // -1 interior limit (outer curve), +1 exterior limit (obstacles)
  std::vector<double> coupling; // c_b in the representation D + i c_b eta S
  std::vector<std::vector<Complex>> lambda;
  int total = 0;
  CMatrix trace_op;
  CMatrix normal_op;
  Eigen::PartialPivLU<CMatrix> lu;
  double condition = 0.0;
  CMatrix dtn;
  mutable std::vector<std::vector<std::unique_ptr<UpsampledCurve>>> upsampled;

  int levels() const {
    int l = 0;
    while ((1 << l) < opts.max_upsample) ++l;
    return l + 1;
  }

  const DiscretizedCurve& level_curve(int b, int level) const {
    if (level == 0) return *curves[b];
    auto& slot = *upsampled[b][level];
    std::call_once(slot.flag, [&] { slot.geom = discretize(curves[b]->curve, curves[b]->size << level); });
    return slot.geom;
  }
};

namespace {

struct Blocks {
  CMatrix s, d, kp, t;
};

// Operators with target and source on the same curve.
Blocks own_blocks(const DiscretizedCurve& c, double k) {
  const int m = c.size;
  const double w = 2.0 * kPi / m;
  std::vector<double> rw(m);
  for (int q = 0; q < m; ++q) rw[q] = log_weight(2.0 * kPi * q / m, m);
  Blocks b{CMatrix(m, m), CMatrix(m, m), CMatrix(m, m), CMatrix(m, m)};
  CMatrix a(m, m), bb(m, m);
  for (int i = 0; i < m; ++i) {
    const Point ni = unnormalized_normal(c.dx[i]);
    const double si = c.speed[i];
    for (int j = 0; j < m; ++j) {
      const double rij = rw[(i - j + m) % m];
      const double sj = c.speed[j];
      const Point nj = unnormalized_normal(c.dx[j]);
      if (i == j) {
        const Complex a2 = 0.25 * kI + diag_log_term(k, si);
        const double dd = ni.dot(c.ddx[i]) / (4.0 * kPi * si * si);
        b.s(i, j) = rij * (-si / (4.0 * kPi)) + w * a2 * si;
        b.d(i, j) = w * dd;
        b.kp(i, j) = w * dd;
        a(i, j) = rij * (-1.0 / (4.0 * kPi)) + w * a2;
        bb(i, j) = rij * (-si / (4.0 * kPi)) + w * a2 * si;
        continue;
      }
      const Point d = c.x[i] - c.x[j];
      const double r = d.norm();
      const Kern kk = kernel(k, r);
      const double lg = std::log(4.0 * std::pow(std::sin(0.5 * (c.t[i] - c.t[j])), 2));
      // single layer
      {
        const double k1 = -kk.j0 * sj / (4.0 * kPi);
        const Complex full = kk.phi * sj;
        b.s(i, j) = rij * k1 + w * (full - k1 * lg);
      }
      // double layer
      {
        const double nd = nj.dot(d) / r;
        const double k1 = -k * kk.j1 * nd / (4.0 * kPi);
        const Complex full = -kk.dphi * nd;
        b.d(i, j) = rij * k1 + w * (full - k1 * lg);
      }
      // adjoint double layer
      {
        const double nd = ni.dot(d) / (r * si);
        const double k1 = k * kk.j1 * nd * sj / (4.0 * kPi);
        const Complex full = kk.dphi * nd * sj;
        b.kp(i, j) = rij * k1 + w * (full - k1 * lg);
      }
      // Maue pieces
      {
        const double k1 = -kk.j0 / (4.0 * kPi);
        a(i, j) = rij * k1 + w * (kk.phi - k1 * lg);
        const double nn = ni.dot(nj) / si;
        bb(i, j) = rij * k1 * nn + w * (kk.phi - k1 * lg) * nn;
      }
    }
  }
  // Spectral differentiation on the periodic grid.
  Eigen::MatrixXd dm = Eigen::MatrixXd::Zero(m, m);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      if (i == j) continue;
      const double sgn = ((i - j) % 2 == 0) ? 1.0 : -1.0;
      dm(i, j) = 0.5 * sgn / std::tan(0.5 * (c.t[i] - c.t[j]));
    }
  }
  const CMatrix dmc = dm.cast<Complex>();
  b.t = dmc * a * dmc;
  for (int i = 0; i < m; ++i) b.t.row(i) /= c.speed[i];
  b.t += k * k * bb;
  return b;
}

// Regular operators between distinct curves (target a, source b).
Blocks cross_blocks(const DiscretizedCurve& ta, const DiscretizedCurve& sb, double k) {
  const int ma = ta.size, mb = sb.size;
  const double w = 2.0 * kPi / mb;
  Blocks b{CMatrix(ma, mb), CMatrix(ma, mb), CMatrix(ma, mb), CMatrix(ma, mb)};
  for (int i = 0; i < ma; ++i) {
    const Point& nu = ta.normal[i];
    for (int j = 0; j < mb; ++j) {
      const Point d = ta.x[i] - sb.x[j];
      const double r = d.norm();
      const Point nj = unnormalized_normal(sb.dx[j]);
      const Kern kk = kernel(k, r);
      const double a1 = nu.dot(d) / r, a2 = nj.dot(d) / r;
      b.s(i, j) = w * kk.phi * sb.speed[j];
      b.d(i, j) = w * (-kk.dphi) * a2;
      b.kp(i, j) = w * kk.dphi * a1 * sb.speed[j];
      const Complex second = -k * k * kk.phi - 2.0 * kk.dphi / r;
      b.t(i, j) = -w * (second * a1 * a2 + kk.dphi / r * nu.dot(nj));
    }
  }
  return b;
}

// Fourier coefficients of nodal values (index q = 0..M-1 for frequencies 0..M/2, -M/2+1..-1).
CVector fourier_coefficients(const CVector& v) {
  const int m = static_cast<int>(v.size());
  CVector c(m);
  for (int q = 0; q < m; ++q) {
    const int freq = q <= m / 2 ? q : q - m;
    Complex s = 0.0;
    for (int j = 0; j < m; ++j) s += v[j] * std::exp(Complex(0.0, -2.0 * kPi * freq * j / m));
    c[q] = s / static_cast<double>(m);
  }
  return c;
}

Complex fourier_eval(const CVector& c, double t) {
  const int m = static_cast<int>(c.size());
  Complex s = 0.0;
  for (int q = 0; q < m; ++q) {
    const int freq = q <= m / 2 ? q : q - m;
    // The Nyquist term is split symmetrically so the interpolant stays real for real data.
    if (q == m / 2) {
      s += c[q] * std::cos(freq * t);
      continue;
    }
    s += c[q] * std::exp(Complex(0.0, freq * t));
  }
  return s;
}

// Values of the trigonometric interpolant of v on the grid refined by 2^level.
CVector upsample(const CVector& v, int level) {
  const int m = static_cast<int>(v.size());
  const int big = m << level;
  const CVector c = fourier_coefficients(v);
  std::vector<Complex> roots(big);
  for (int q = 0; q < big; ++q) roots[q] = std::exp(Complex(0.0, 2.0 * kPi * q / big));
  CVector out(big);
  for (int j = 0; j < big; ++j) {
    Complex s = 0.0;
    for (int q = 0; q < m; ++q) {
      const int freq = q <= m / 2 ? q : q - m;
      if (q == m / 2) {
        s += c[q] * roots[(static_cast<long>(freq) * j) % big].real();
        continue;
      }
      long idx = (static_cast<long>(freq) * j) % big;
      if (idx < 0) idx += big;
      s += c[q] * roots[idx];
    }
    out[j] = s;
  }
  return out;
}

}  // namespace

struct DensityCache {
  std::mutex mutex;
  std::vector<std::vector<CVector>> levels;  // [curve][level], empty until needed
};

DtnSolver DtnSolver::build(const ObstacleScene& scene, int m_outer, int m_obstacle, const SolverOptions& opts) {
  if (!(scene.k > 0.0)) throw std::invalid_argument("build_solver: wavenumber must be positive");
  auto impl = std::make_shared<SolverImpl>();
  impl->scene = scene;
  impl->opts = opts;
  impl->k = scene.k;
  impl->eta = opts.eta_scale * scene.k;
  impl->curves.push_back(std::make_shared<const DiscretizedCurve>(discretize(scene.outer, m_outer)));
  impl->side.push_back(-1.0);
  impl->coupling.push_back(1.0);
  impl->lambda.emplace_back();
  for (const auto& o : scene.obstacles) {
    auto dc = std::make_shared<const DiscretizedCurve>(discretize(o.shape, m_obstacle));
    std::vector<Complex> lam(dc->size);
    for (int i = 0; i < dc->size; ++i) lam[i] = o.lambda(dc->t[i]);
    impl->curves.push_back(dc);
    impl->side.push_back(1.0);
    impl->coupling.push_back(-1.0);
    impl->lambda.push_back(std::move(lam));
  }
  const int nc = static_cast<int>(impl->curves.size());
  impl->offset.resize(nc + 1, 0);
  for (int b = 0; b < nc; ++b) impl->offset[b + 1] = impl->offset[b] + impl->curves[b]->size;
  impl->total = impl->offset[nc];
  const int total = impl->total;
  const double k = impl->k, eta = impl->eta;

  impl->trace_op = CMatrix::Zero(total, total);
  impl->normal_op = CMatrix::Zero(total, total);
  for (int a = 0; a < nc; ++a) {
    const auto& ca = *impl->curves[a];
    const int oa = impl->offset[a], ma = ca.size;
    for (int b = 0; b < nc; ++b) {
      const int ob = impl->offset[b], mb = impl->curves[b]->size;
      const Complex ceta = kI * impl->coupling[b] * eta;
      if (a == b) {
        Blocks bl = own_blocks(ca, k);
        const double half = 0.5 * impl->side[a];
        CMatrix tr = bl.d + ceta * bl.s;
        tr.diagonal().array() += half;
        CMatrix nr = bl.kp;
        nr.diagonal().array() -= half;
        nr = bl.t + ceta * nr;
        impl->trace_op.block(oa, ob, ma, mb) = tr;
        impl->normal_op.block(oa, ob, ma, mb) = nr;
      } else {
        Blocks bl = cross_blocks(ca, *impl->curves[b], k);
        impl->trace_op.block(oa, ob, ma, mb) = bl.d + ceta * bl.s;
        impl->normal_op.block(oa, ob, ma, mb) = bl.t + ceta * bl.kp;
      }
    }
  }

  CMatrix system = impl->trace_op;
  if (scene.kind == BoundaryKind::Impedance) {
    for (int a = 1; a < nc; ++a) {
      for (int i = 0; i < impl->curves[a]->size; ++i) {
        const int row = impl->offset[a] + i;
        system.row(row) = impl->normal_op.row(row) + impl->lambda[a][i] * impl->trace_op.row(row);
      }
    }
  }
  impl->lu.compute(system);
  const double rc = impl->lu.rcond();
  impl->condition = rc > 0.0 ? 1.0 / rc : std::numeric_limits<double>::infinity();
  if (!(impl->condition <= opts.condition_ceiling)) {
    std::ostringstream os;
    os << "boundary integral system is ill-conditioned (condition estimate " << impl->condition
       << " above ceiling " << opts.condition_ceiling
       << "); k^2 may be close to an interior eigenvalue or the curves are under-resolved";
    throw IllConditioned(os.str(), impl->condition);
  }

  const int m0 = impl->curves[0]->size;
  CMatrix rhs = CMatrix::Zero(total, m0);
  rhs.topRows(m0).setIdentity();
  const CMatrix dens = impl->lu.solve(rhs);
  impl->dtn = impl->normal_op.topRows(m0) * dens;

  impl->upsampled.resize(nc);
  for (int b = 0; b < nc; ++b) {
    for (int l = 0; l < impl->levels(); ++l) impl->upsampled[b].push_back(std::make_unique<UpsampledCurve>());
  }

  DtnSolver s;
  s.impl_ = impl;
  return s;
}

const ObstacleScene& DtnSolver::scene() const { return impl_->scene; }
const DiscretizedCurve& DtnSolver::outer() const { return *impl_->curves[0]; }
std::shared_ptr<const DiscretizedCurve> DtnSolver::outer_ptr() const { return impl_->curves[0]; }
const DiscretizedCurve& DtnSolver::obstacle(int j) const { return *impl_->curves.at(j + 1); }
int DtnSolver::obstacle_count() const { return static_cast<int>(impl_->curves.size()) - 1; }
double DtnSolver::condition_estimate() const { return impl_->condition; }
double DtnSolver::k() const { return impl_->k; }
const CMatrix& DtnSolver::dtn_matrix() const { return impl_->dtn; }

CVector DtnSolver::dtn(const CVector& f) const {
  if (f.size() != impl_->dtn.cols()) throw std::invalid_argument("dtn: data size does not match the outer discretization");
  return impl_->dtn * f;
}

FieldSolution DtnSolver::solve_dirichlet(const CVector& f) const {
  const int m0 = impl_->curves[0]->size;
  if (f.size() != m0) throw std::invalid_argument("solve_dirichlet: data size does not match the outer discretization");
  CVector rhs = CVector::Zero(impl_->total);
  rhs.head(m0) = f;
  FieldSolution u;
  u.impl_ = impl_;
  u.cache_ = std::make_shared<DensityCache>();
  u.stacked_ = impl_->lu.solve(rhs);
  for (std::size_t b = 0; b < impl_->curves.size(); ++b) {
    u.density_.push_back(u.stacked_.segment(impl_->offset[b], impl_->curves[b]->size));
  }
  return u;
}

FieldSolution DtnSolver::solve_dirichlet(const BoundaryData& f) const {
  if (f.curve && f.curve->size != impl_->curves[0]->size) {
    throw std::invalid_argument("solve_dirichlet: boundary data lives on a different discretization");
  }
  return solve_dirichlet(f.values);
}

FieldSolution DtnSolver::solve_reflected(const Point& x) const {
  const auto& sc = impl_->scene;
  if (sc.outer.signed_distance(x) >= 0.0) throw OutsideDomain("solve_reflected: source point outside the domain");
  if (sc.empty()) {
    return solve_dirichlet(CVector(CVector::Zero(impl_->curves[0]->size)));
  }
  const double dist = sc.dist_to_obstacles(x);
  // Relative slack so points placed at exactly the margin are accepted despite rounding.
  if (dist < impl_->opts.tip_margin * (1.0 - 1e-9)) {
    std::ostringstream os;
    os << "source point at distance " << dist << " from the obstacles, below the margin " << impl_->opts.tip_margin;
    throw TipTooClose(os.str());
  }
  CVector rhs = CVector::Zero(impl_->total);
  for (std::size_t b = 1; b < impl_->curves.size(); ++b) {
    const auto& c = *impl_->curves[b];
    for (int i = 0; i < c.size; ++i) {
      const GreenValue g = green2d(impl_->k, c.x[i], x);
      Complex val;
      if (sc.kind == BoundaryKind::SoundSoft) {
        val = -g.value;
      } else {
        const Complex dn = g.gradient_z[0] * c.normal[i].x() + g.gradient_z[1] * c.normal[i].y();
        val = -dn - impl_->lambda[b][i] * g.value;
      }
      rhs[impl_->offset[b] + i] = val;
    }
  }
  FieldSolution u;
  u.impl_ = impl_;
  u.cache_ = std::make_shared<DensityCache>();
  u.stacked_ = impl_->lu.solve(rhs);
  for (std::size_t b = 0; b < impl_->curves.size(); ++b) {
    u.density_.push_back(u.stacked_.segment(impl_->offset[b], impl_->curves[b]->size));
  }
  return u;
}

const CVector& FieldSolution::upsampled_density(int b, int level) const {
  if (level == 0) return density_[b];
  std::lock_guard<std::mutex> lock(cache_->mutex);
  auto& slots = cache_->levels;
  if (slots.empty()) slots.resize(density_.size());
  auto& per = slots[b];
  if (per.size() <= static_cast<std::size_t>(level)) per.resize(level + 1);
  if (per[level].size() == 0) per[level] = upsample(density_[b], level);
  return per[level];
}

BoundaryData FieldSolution::neumann_trace() const {
  return BoundaryData{impl_->curves[0], normal_derivative(0)};
}

CVector FieldSolution::trace(int b) const {
  return impl_->trace_op.middleRows(impl_->offset.at(b), impl_->curves.at(b)->size) * stacked_;
}

CVector FieldSolution::normal_derivative(int b) const {
  return impl_->normal_op.middleRows(impl_->offset.at(b), impl_->curves.at(b)->size) * stacked_;
}

FieldPoint FieldSolution::eval(const Point& z) const {
  const auto& sc = impl_->scene;
  const double tol = 1e-12 * sc.outer.diameter();
  if (sc.outer.signed_distance(z) > tol) throw OutsideDomain("evaluation point outside the domain");
  for (const auto& o : sc.obstacles) {
    if (o.shape.signed_distance(z) < -tol) throw OutsideDomain("evaluation point inside an obstacle");
  }
  // Closer to a curve than the finest upsampled grid resolves: interpolate along the normal between
  // the boundary data at the foot point and resolved points further out.
  const int finest = 1 << (impl_->levels() - 1);
  for (std::size_t b = 0; b < impl_->curves.size(); ++b) {
    const auto& base = *impl_->curves[b];
    double h = 0.0, dnode = std::numeric_limits<double>::infinity();
    for (int j = 0; j < base.size; ++j) {
      h = std::max(h, base.weight(j));
      dnode = std::min(dnode, (z - base.x[j]).norm());
    }
    const double reach = 4.0 * h / finest;
    if (dnode > reach + h) continue;
    const double t = base.curve.closest_parameter(z);
    const CurvePoint p = base.curve.eval(t);
    const double dist = (z - p.x).norm();
    if (dist >= reach) continue;
    const Point nu = unnormalized_normal(p.dx).normalized();
    const Point inward = b == 0 ? Point(-nu) : nu;
    const Point tau(-inward.y(), inward.x());
    const auto [trace, dnu] = boundary_values(static_cast<int>(b), t);
    const double s[4] = {0.0, 1.5 * reach, 2.5 * reach, 3.5 * reach};
    Complex val[4], dn[4], dt[4];
    val[0] = trace;
    dn[0] = b == 0 ? -dnu : dnu;
    // Tangential derivative from the spectral derivative of the nodal trace.
    const CVector coef = fourier_coefficients(this->trace(static_cast<int>(b)));
    const int m = static_cast<int>(coef.size());
    Complex dtrace = 0.0;
    for (int q = 0; q < m; ++q) {
      const int freq = q <= m / 2 ? q : q - m;
      if (q == m / 2) {
        dtrace -= coef[q] * (freq * std::sin(freq * t));
      } else {
        dtrace += coef[q] * (kI * static_cast<double>(freq)) * std::exp(kI * (freq * t));
      }
    }
    dt[0] = (b == 0 ? -dtrace : dtrace) / p.dx.norm();
    for (int i = 1; i < 4; ++i) {
      const FieldPoint f = eval_resolved(p.x + s[i] * inward);
      val[i] = f.value;
      dn[i] = f.gradient[0] * inward.x() + f.gradient[1] * inward.y();
      dt[i] = f.gradient[0] * tau.x() + f.gradient[1] * tau.y();
    }
    auto lagrange = [&](const Complex* y) {
      Complex sum = 0.0;
      for (int i = 0; i < 4; ++i) {
        double l = 1.0;
        for (int j = 0; j < 4; ++j) {
          if (j != i) l *= (dist - s[j]) / (s[i] - s[j]);
        }
        sum += l * y[i];
      }
      return sum;
    };
    const Complex gn = lagrange(dn), gt = lagrange(dt);
    FieldPoint out;
    out.value = lagrange(val);
    out.gradient = CVec2(gn * inward.x() + gt * tau.x(), gn * inward.y() + gt * tau.y());
    return out;
  }
  return eval_resolved(z);
}

FieldPoint FieldSolution::eval_resolved(const Point& z) const {
  const double k = impl_->k;
  FieldPoint out{0.0, CVec2::Zero()};
  for (std::size_t b = 0; b < impl_->curves.size(); ++b) {
    const auto& base = *impl_->curves[b];
    double dnode = std::numeric_limits<double>::infinity();
    double h = 0.0;
    for (int j = 0; j < base.size; ++j) {
      dnode = std::min(dnode, (z - base.x[j]).norm());
      h = std::max(h, base.weight(j));
    }
    const double delta = std::max(dnode - 0.5 * h, 0.0);
    int level = 0;
    while (level + 1 < impl_->levels() && h / (1 << level) > 0.25 * delta) ++level;
    const DiscretizedCurve& c = impl_->level_curve(static_cast<int>(b), level);
    const CVector& phi = upsampled_density(static_cast<int>(b), level);
    const Complex ceta = kI * impl_->coupling[b] * impl_->eta;
    const double w = 2.0 * kPi / c.size;
    for (int j = 0; j < c.size; ++j) {
      const Point d = z - c.x[j];
      const double r = d.norm();
      if (r == 0.0) throw OutsideDomain("evaluation point coincides with a quadrature node");
      const Point nj = unnormalized_normal(c.dx[j]);
      const Kern kk = kernel(k, r);
      const double nd = nj.dot(d) / r;
      const Complex dl = -kk.dphi * nd;
      const Complex sl = kk.phi * c.speed[j];
      out.value += w * phi[j] * (dl + ceta * sl);
      const Complex second = -k * k * kk.phi - 2.0 * kk.dphi / r;
      const Eigen::Vector2cd gdl = -(second * nd / r * d.cast<Complex>() + kk.dphi / r * nj.cast<Complex>());
      const Eigen::Vector2cd gsl = (kk.dphi / r * c.speed[j]) * d.cast<Complex>();
      out.gradient += (w * phi[j]) * (gdl + ceta * gsl);
    }
  }
  return out;
}

std::pair<Complex, Complex> FieldSolution::boundary_values(int b, double t) const {
  const double k = impl_->k;
  const auto& own = *impl_->curves.at(b);
  const int m = own.size;
  const double w = 2.0 * kPi / m;
  for (int j = 0; j < m; ++j) {
    double s = std::remainder(t - own.t[j], 2.0 * kPi);
    if (std::abs(s) < 1e-12) {
      const int row = impl_->offset[b] + j;
      return {impl_->trace_op.row(row) * stacked_, impl_->normal_op.row(row) * stacked_};
    }
  }
  const CurvePoint p = own.curve.eval(t);
  const double speed = p.dx.norm();
  const Point nu = unnormalized_normal(p.dx) / speed;
  const CVector coef = fourier_coefficients(density_[b]);
  const Complex phi_t = fourier_eval(coef, t);
  // Nodal tangential derivative of the density for the Maue term.
  CVector dphi(m);
  for (int i = 0; i < m; ++i) {
    Complex s = 0.0;
    for (int j = 0; j < m; ++j) {
      if (i == j) continue;
      const double sgn = ((i - j) % 2 == 0) ? 1.0 : -1.0;
      s += 0.5 * sgn / std::tan(0.5 * (own.t[i] - own.t[j])) * density_[b][j];
    }
    dphi[i] = s;
  }
  const Complex ceta = kI * impl_->coupling[b] * impl_->eta;
  const double half = 0.5 * impl_->side[b];
  Complex s_val = 0.0, d_val = 0.0, kp_val = 0.0, a_der = 0.0, b_val = 0.0;
  for (int j = 0; j < m; ++j) {
    const double s = t - own.t[j];
    const double rw = log_weight(s, m);
    const double rwd = log_weight_derivative(s, m);
    const double lg = std::log(4.0 * std::pow(std::sin(0.5 * s), 2));
    const double lgd = 1.0 / std::tan(0.5 * s);
    const Point d = p.x - own.x[j];
    const double r = d.norm();
    const Kern kk = kernel(k, r);
    const Point nj = unnormalized_normal(own.dx[j]);
    const double sj = own.speed[j];
    {
      const double k1 = -kk.j0 * sj / (4.0 * kPi);
      s_val += (rw * k1 + w * (kk.phi * sj - k1 * lg)) * density_[b][j];
    }
    {
      const double nd = nj.dot(d) / r;
      const double k1 = -k * kk.j1 * nd / (4.0 * kPi);
      d_val += (rw * k1 + w * (-kk.dphi * nd - k1 * lg)) * density_[b][j];
    }
    {
      const double nd = nu.dot(d) / r;
      const double k1 = k * kk.j1 * nd * sj / (4.0 * kPi);
      kp_val += (rw * k1 + w * (kk.dphi * nd * sj - k1 * lg)) * density_[b][j];
    }
    {
      const double k1 = -kk.j0 / (4.0 * kPi);
      const double rt = d.dot(p.dx) / r;  // dr/dt
      const double k1d = k * kk.j1 * rt / (4.0 * kPi);
      const Complex phid = kk.dphi * rt;
      const Complex k2 = kk.phi - k1 * lg;
      const Complex k2d = phid - k1d * lg - k1 * lgd;
      a_der += (rwd * k1 + rw * k1d + w * k2d) * dphi[j];
      const double nn = nu.dot(nj);
      b_val += (rw * k1 * nn + w * k2 * nn) * density_[b][j];
    }
  }
  Complex trace = d_val + half * phi_t + ceta * s_val;
  Complex normal = a_der / speed + k * k * b_val + ceta * (kp_val - half * phi_t);
  for (std::size_t c = 0; c < impl_->curves.size(); ++c) {
    if (static_cast<int>(c) == b) continue;
    const auto& src = *impl_->curves[c];
    const Complex cc = kI * impl_->coupling[c] * impl_->eta;
    const double wc = 2.0 * kPi / src.size;
    for (int j = 0; j < src.size; ++j) {
      const Point d = p.x - src.x[j];
      const double r = d.norm();
      const Point nj = unnormalized_normal(src.dx[j]);
      const Kern kk = kernel(k, r);
      const double a1 = nu.dot(d) / r, a2 = nj.dot(d) / r;
      const Complex second = -k * k * kk.phi - 2.0 * kk.dphi / r;
      trace += wc * density_[c][j] * (-kk.dphi * a2 + cc * kk.phi * src.speed[j]);
      normal += wc * density_[c][j] *
                (-(second * a1 * a2 + kk.dphi / r * nu.dot(nj)) + cc * kk.dphi * a1 * src.speed[j]);
    }
  }
  return {trace, normal};
}

BoundaryData neumann_trace(const FieldSolution& u) { return u.neumann_trace(); }

BoundaryData dtn_background(const Curve& outer, double k, const BoundaryData& f) {
  if (!f.curve) throw std::invalid_argument("dtn_background: boundary data without a curve");
  ObstacleScene scene;
  scene.outer = outer;
  scene.k = k;
  const DtnSolver s = DtnSolver::build(scene, f.curve->size, 16);
  return BoundaryData{s.outer_ptr(), s.dtn(f.values)};
}

}  // namespace probe
