#include "probe/needles.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/Cholesky>

namespace probe {

namespace {

const Complex kI(0.0, 1.0);

// Signed-order values b_m = J_m(k r) e^{i m theta}, m = -(M+1) .. M+1, at index m + M + 1.
void signed_terms(const Point& d, double k, int order, std::vector<double>& jbuf, std::vector<Complex>& b) {
  const double r = d.norm();
  const double theta = r > 0.0 ? std::atan2(d.y(), d.x()) : 0.0;
  jbuf.resize(order + 2);
  bessel_j_sequence(k * r, jbuf);
  b.resize(2 * order + 3);
  const Complex e = std::exp(Complex(0.0, theta));
  Complex pw = 1.0;
  for (int m = 0; m <= order + 1; ++m) {
    b[order + 1 + m] = jbuf[m] * pw;
    const double sgn = (m % 2) ? -1.0 : 1.0;
    b[order + 1 - m] = sgn * jbuf[m] * std::conj(pw);
    pw *= e;
  }
}

}  // namespace

std::vector<ScheduleStep> default_schedule(int n_max, double eps0, double q, int m0, int m_step, double alpha0,
                                           double alpha_ratio) {
  if (n_max < 4) throw std::invalid_argument("default_schedule: n_max must be at least 4");
  if (!(eps0 > 0.0) || !(q > 0.0 && q < 1.0)) throw std::invalid_argument("default_schedule: need eps0 > 0 and 0 < q < 1");
  if (m0 < 1 || m_step < 0) throw std::invalid_argument("default_schedule: need M0 >= 1 and M_step >= 0");
  if (!(alpha0 > 0.0) || !(alpha_ratio > 0.0 && alpha_ratio < 1.0)) {
    throw std::invalid_argument("default_schedule: need alpha0 > 0 and 0 < alpha_ratio < 1");
  }
  std::vector<ScheduleStep> s;
  for (int n = 0; n <= n_max; ++n) {
    s.push_back({eps0 * std::pow(q, n), m0 + n * m_step, alpha0 * std::pow(alpha_ratio, n)});
  }
  return s;
}

double EntireSolution::coefficient_norm() const {
  double s = 0.0;
  for (const auto& c : coeffs) s += std::norm(c);
  return std::sqrt(s);
}

FieldPoint eval_entire(const EntireSolution& v, const Point& z) {
  std::vector<double> jbuf;
  std::vector<Complex> b;
  signed_terms(z - v.center, v.k, v.order, jbuf, b);
  const int off = v.order + 1;
  FieldPoint out{0.0, CVec2::Zero()};
  for (int m = -v.order; m <= v.order; ++m) {
    const Complex c = v.coeffs[m + v.order];
    if (c == Complex(0.0, 0.0)) continue;
    const double sgn = (m < 0 && (m % 2)) ? -1.0 : 1.0;  // J_|m| = (-1)^m J_m for m < 0
    const Complex cs = sgn * c;
    out.value += cs * b[off + m];
    out.gradient[0] += cs * (0.5 * v.k) * (b[off + m - 1] - b[off + m + 1]);
    out.gradient[1] += cs * (0.5 * v.k * kI) * (b[off + m - 1] + b[off + m + 1]);
  }
  return out;
}

EntireSolution rotated(const EntireSolution& v, double phi) {
  EntireSolution out = v;
  for (int m = -v.order; m <= v.order; ++m) out.coeffs[m + v.order] *= std::exp(Complex(0.0, -m * phi));
  return out;
}

Norms needle_norms(const EntireSolution& v, const AreaRule& region) {
  double l2 = 0.0, h1 = 0.0;
  for (std::size_t i = 0; i < region.size(); ++i) {
    const FieldPoint p = eval_entire(v, region.nodes[i]);
    l2 += region.weights[i] * std::norm(p.value);
    h1 += region.weights[i] * (std::norm(p.gradient[0]) + std::norm(p.gradient[1]));
  }
  return {std::sqrt(l2), std::sqrt(h1)};
}

double FourierBessel::normalization(int m) const {
  const int a = std::abs(m);
  if (a < k * scale_radius) return 1.0;
  return bessel_j(a, k * scale_radius);
}

BasisTable tabulate(const FourierBessel& basis, const std::vector<Point>& points) {
  const int order = basis.max_order;
  const int p = 2 * order + 1;
  const int n = static_cast<int>(points.size());
  BasisTable t{CMatrix(n, p), CMatrix(n, p), CMatrix(n, p)};
  std::vector<double> scale(p);
  for (int col = 0; col < p; ++col) {
    const int m = basis_order_of(col);
    const double sgn = (m < 0 && (m % 2)) ? -1.0 : 1.0;
    const double norm = basis.normalization(m);
    if (!std::isnormal(norm)) {
      throw RankDeficient("Fourier-Bessel order " + std::to_string(m) + " underflows at k*R = " +
                          std::to_string(basis.k * basis.scale_radius));
    }
    scale[col] = sgn / norm;
  }
  std::vector<double> jbuf;
  std::vector<Complex> b;
  const int off = order + 1;
  const double hk = 0.5 * basis.k;
  for (int i = 0; i < n; ++i) {
    signed_terms(points[i] - basis.center, basis.k, order, jbuf, b);
    for (int col = 0; col < p; ++col) {
      const int m = basis_order_of(col);
      const double s = scale[col];
      t.value(i, col) = s * b[off + m];
      t.dx(i, col) = (s * hk) * (b[off + m - 1] - b[off + m + 1]);
      t.dy(i, col) = (s * hk) * kI * (b[off + m - 1] + b[off + m + 1]);
    }
  }
  return t;
}

EntireSolution to_entire(const FourierBessel& basis, const CVector& normalized) {
  const int p = static_cast<int>(normalized.size());
  const int order = (p - 1) / 2;
  EntireSolution v;
  v.center = basis.center;
  v.k = basis.k;
  v.order = order;
  v.coeffs.assign(p, 0.0);
  for (int col = 0; col < p; ++col) {
    const int m = basis_order_of(col);
    v.coeffs[m + order] = normalized[col] / basis.normalization(m);
  }
  return v;
}

double h1_distance_to_green(const EntireSolution& v, const Point& x, const AreaRule& rule) {
  double e0 = 0.0, e1 = 0.0;
  for (std::size_t i = 0; i < rule.size(); ++i) {
    const FieldPoint p = eval_entire(v, rule.nodes[i]);
    const GreenValue g = green2d(v.k, rule.nodes[i], x);
    e0 += rule.weights[i] * std::norm(p.value - g.value);
    e1 += rule.weights[i] * (std::norm(p.gradient[0] - g.gradient_z[0]) + std::norm(p.gradient[1] - g.gradient_z[1]));
  }
  return std::sqrt(e0) + std::sqrt(e1);
}

FitContext::FitContext(const Curve& outer, double k, int max_order, const FitOptions& opts)
    : outer_(outer), spacing_(opts.cloud_spacing) {
  if (!(k > 0.0)) throw std::invalid_argument("needle fit: wavenumber must be positive");
  if (max_order < 0) throw std::invalid_argument("needle fit: negative order");
  if (!(spacing_ > 0.0)) throw std::invalid_argument("needle fit: cloud spacing must be positive");
  basis_.k = k;
  basis_.max_order = max_order;
  basis_.center = opts.center.value_or(outer.star_center());
  double rs = 0.0;
  const int probe_n = 2048;
  for (int j = 0; j < probe_n; ++j) rs = std::max(rs, (outer.eval(2.0 * kPi * j / probe_n).x - basis_.center).norm());
  basis_.scale_radius = rs;

  // Matching cloud: interior grid plus outer boundary nodes.
  const double h = spacing_;
  const Point c = basis_.center;
  const int span = static_cast<int>(std::ceil(rs / h)) + 1;
  for (int iy = -span; iy <= span; ++iy) {
    for (int ix = -span; ix <= span; ++ix) {
      const Point z = c + h * Point(ix, iy);
      if ((z - c).norm() > rs + h) continue;
      if (outer.signed_distance(z) < -0.5 * h) cloud_.push_back(z);
    }
  }
  const DiscretizedCurve bd = discretize(outer, opts.boundary_nodes);
  for (const auto& z : bd.x) cloud_.push_back(z);

  table_ = tabulate(basis_, cloud_);
  const double h2 = h * h;
  gram_ = table_.value.adjoint() * table_.value;
  gram_ += h2 * (table_.dx.adjoint() * table_.dx);
  gram_ += h2 * (table_.dy.adjoint() * table_.dy);
}

NeedleFitter::NeedleFitter(std::shared_ptr<const FitContext> ctx, const Needle& needle, const FitOptions& opts)
    : ctx_(std::move(ctx)), needle_(needle), opts_(opts) {
  if (!ctx_) throw std::invalid_argument("needle fit: missing context");
  if (auto err = validate_needle(needle, ctx_->outer())) throw std::invalid_argument("needle fit: " + *err);
  init_targets();
}

NeedleFitter::NeedleFitter(const Curve& outer, double k, const Needle& needle, int max_order, const FitOptions& opts)
    : NeedleFitter(std::make_shared<const FitContext>(outer, k, max_order, opts), needle, opts) {}

void NeedleFitter::init_targets() {
  const auto& cloud = ctx_->cloud();
  const int n = static_cast<int>(cloud.size());
  const double k = ctx_->k();
  const double touch = 1e-12 * ctx_->outer().diameter();
  dist_.resize(n);
  target_value_.resize(n);
  target_dx_.resize(n);
  target_dy_.resize(n);
  for (int i = 0; i < n; ++i) {
    dist_[i] = dist_to_needle(cloud[i], needle_);
    if (opts_.target) {
      const FieldPoint f = opts_.target(cloud[i]);
      target_value_[i] = f.value;
      target_dx_[i] = f.gradient[0];
      target_dy_[i] = f.gradient[1];
    } else if (dist_[i] > touch) {
      const GreenValue g = green2d(k, cloud[i], needle_.tip());
      target_value_[i] = g.value;
      target_dx_[i] = g.gradient_z[0];
      target_dy_[i] = g.gradient_z[1];
    } else {
      target_value_[i] = target_dx_[i] = target_dy_[i] = 0.0;  // on the needle; always excised
    }
  }
  for (const auto& ts : opts_.test_sets) {
    test_tables_.push_back(tabulate(ctx_->basis(), ts.rule.nodes));
    std::vector<FieldPoint> tg;
    for (const auto& z : ts.rule.nodes) {
      if (opts_.target) {
        tg.push_back(opts_.target(z));
      } else {
        const GreenValue g = green2d(k, z, needle_.tip());
        tg.push_back({g.value, g.gradient_z});
      }
    }
    test_targets_.push_back(std::move(tg));
  }
}

namespace {

// Adds sign * sum over rows of the (value, h dx, h dy) outer products to gram.
void accumulate_rows(const BasisTable& t, const std::vector<int>& rows, double h, double sign, CMatrix& gram) {
  if (rows.empty()) return;
  const int p = static_cast<int>(gram.cols());
  CMatrix ex(3 * rows.size(), p);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    ex.row(3 * r) = t.value.row(rows[r]).head(p);
    ex.row(3 * r + 1) = h * t.dx.row(rows[r]).head(p);
    ex.row(3 * r + 2) = h * t.dy.row(rows[r]).head(p);
  }
  gram.noalias() += sign * (ex.adjoint() * ex);
}

}  // namespace

NeedleElement NeedleFitter::fit(const ScheduleStep& step, int n) {
  const FitContext& ctx = *ctx_;
  if (step.order > ctx.basis().max_order) throw std::invalid_argument("needle fit: step order exceeds the tabulated order");
  const int p = 2 * step.order + 1;
  const int pmax = 2 * ctx.basis().max_order + 1;
  const double h = ctx.spacing();
  const double h2 = h * h;
  const int rows = static_cast<int>(dist_.size());
  int nk = 0;
  for (int i = 0; i < rows; ++i) nk += dist_[i] > step.eps;
  if (3 * nk < p) {
    std::ostringstream os;
    os << "needle fit: " << nk << " matching points for " << p << " unknowns";
    throw RankDeficient(os.str());
  }

  // Excised-row Gram at full order: rebuilt when eps grows, otherwise rows re-entering are removed.
  std::vector<int> delta;
  if (cached_eps_ < 0.0 || step.eps > cached_eps_) {
    excised_ = CMatrix::Zero(pmax, pmax);
    for (int i = 0; i < rows; ++i) {
      if (dist_[i] <= step.eps) delta.push_back(i);
    }
    accumulate_rows(ctx.table(), delta, h, 1.0, excised_);
  } else {
    for (int i = 0; i < rows; ++i) {
      if (dist_[i] <= cached_eps_ && dist_[i] > step.eps) delta.push_back(i);
    }
    accumulate_rows(ctx.table(), delta, h, -1.0, excised_);
  }
  cached_eps_ = step.eps;

  CMatrix gram = ctx.gram().topLeftCorner(p, p) - excised_.topLeftCorner(p, p);
  CVector tv = target_value_, tx = target_dx_, ty = target_dy_;
  double target_norm2 = 0.0;
  for (int i = 0; i < rows; ++i) {
    if (dist_[i] <= step.eps) {
      tv[i] = tx[i] = ty[i] = 0.0;
    } else {
      target_norm2 += std::norm(tv[i]) + h2 * (std::norm(tx[i]) + std::norm(ty[i]));
    }
  }
  const auto& t = ctx.table();
  CVector rhs = t.value.leftCols(p).adjoint() * tv;
  rhs.noalias() += h2 * (t.dx.leftCols(p).adjoint() * tx);
  rhs.noalias() += h2 * (t.dy.leftCols(p).adjoint() * ty);
  gram /= static_cast<double>(nk);
  rhs /= static_cast<double>(nk);
  gram.diagonal().array() += step.alpha;
  // Symmetrize against rounding from the downdate.
  gram = 0.5 * (gram + gram.adjoint()).eval();
  Eigen::LDLT<CMatrix> ldlt(gram);
  CVector c = ldlt.solve(rhs);
  if (ldlt.info() != Eigen::Success || !c.allFinite()) throw RankDeficient("needle fit: normal equations are singular");

  const CVector v = t.value.leftCols(p) * c;
  const CVector gx = t.dx.leftCols(p) * c;
  const CVector gy = t.dy.leftCols(p) * c;
  double res2 = 0.0;
  for (int i = 0; i < rows; ++i) {
    if (dist_[i] <= step.eps) continue;
    res2 += std::norm(v[i] - tv[i]) + h2 * (std::norm(gx[i] - tx[i]) + std::norm(gy[i] - ty[i]));
  }

  NeedleElement el;
  el.normalized = c;
  el.v = to_entire(ctx.basis(), c);
  el.report.n = n;
  el.report.eps = step.eps;
  el.report.order = step.order;
  el.report.alpha = step.alpha;
  el.report.residual = target_norm2 > 0.0 ? std::sqrt(res2 / target_norm2) : std::sqrt(res2);
  el.report.coef_norm = c.norm();
  el.report.matching_points = nk;
  for (std::size_t s = 0; s < test_tables_.size(); ++s) {
    const auto& tt = test_tables_[s];
    const auto& rule = opts_.test_sets[s].rule;
    const CVector tv2 = tt.value.leftCols(p) * c;
    const CVector tx2 = tt.dx.leftCols(p) * c;
    const CVector ty2 = tt.dy.leftCols(p) * c;
    double e0 = 0.0, e1 = 0.0;
    for (std::size_t i = 0; i < rule.size(); ++i) {
      const auto& g = test_targets_[s][i];
      e0 += rule.weights[i] * std::norm(tv2[i] - g.value);
      e1 += rule.weights[i] * (std::norm(tx2[i] - g.gradient[0]) + std::norm(ty2[i] - g.gradient[1]));
    }
    el.report.h1_on_K.push_back(std::sqrt(e0) + std::sqrt(e1));
  }
  return el;
}

namespace {

void check_schedule(const std::vector<ScheduleStep>& schedule) {
  if (schedule.empty()) throw std::invalid_argument("needle sequence: empty schedule");
  for (std::size_t n = 1; n < schedule.size(); ++n) {
    if (!(schedule[n].eps < schedule[n - 1].eps)) throw std::invalid_argument("needle sequence: eps must decrease strictly");
    if (schedule[n].order < schedule[n - 1].order) throw std::invalid_argument("needle sequence: order must not decrease");
  }
}

int schedule_order(const std::vector<ScheduleStep>& schedule) {
  int m = 0;
  for (const auto& s : schedule) m = std::max(m, s.order);
  return m;
}

}  // namespace

NeedleSequence build_needle_sequence(std::shared_ptr<const FitContext> ctx, const Needle& needle,
                                     const std::vector<ScheduleStep>& schedule, const FitOptions& opts) {
  check_schedule(schedule);
  if (schedule_order(schedule) > ctx->basis().max_order) {
    throw std::invalid_argument("needle sequence: schedule order exceeds the context order");
  }
  NeedleFitter fitter(ctx, needle, opts);
  NeedleSequence seq;
  seq.x = needle.tip();
  seq.needle = needle;
  seq.schedule = schedule;
  seq.basis = ctx->basis();
  for (std::size_t n = 0; n < schedule.size(); ++n) {
    NeedleElement el = fitter.fit(schedule[n], static_cast<int>(n));
    std::ostringstream why;
    if (!(el.report.coef_norm <= opts.coef_limit)) {
      why << "step " << n << ": coefficient norm " << el.report.coef_norm << " exceeds " << opts.coef_limit;
    } else if (n > 0 && el.report.residual > opts.residual_growth_limit * seq.elements.back().report.residual) {
      why << "step " << n << ": residual " << el.report.residual << " grew more than "
          << opts.residual_growth_limit << "x";
    }
    if (!why.str().empty()) {
      seq.stop_reason = "ScheduleTooAggressive: " + why.str();
      break;
    }
    seq.elements.push_back(std::move(el));
  }
  return seq;
}

NeedleSequence build_needle_sequence(const Curve& outer, double k, const Needle& needle,
                                     const std::vector<ScheduleStep>& schedule, const FitOptions& opts) {
  check_schedule(schedule);
  return build_needle_sequence(std::make_shared<const FitContext>(outer, k, schedule_order(schedule), opts), needle,
                               schedule, opts);
}

NeedleElement fit_needle_element(const Point& x, const Needle& needle, double eps, int order, double alpha,
                                 const Curve& outer, double k, const FitOptions& opts) {
  if ((needle.tip() - x).norm() > 1e-12 * outer.diameter()) throw std::invalid_argument("needle fit: tip differs from x");
  NeedleFitter fitter(outer, k, needle, order, opts);
  const NeedleElement el = fitter.fit({eps, order, alpha}, 0);
  if (!(el.report.coef_norm <= opts.coef_limit)) throw ScheduleTooAggressive("needle fit: coefficient norm out of range");
  return el;
}

}  // namespace probe
