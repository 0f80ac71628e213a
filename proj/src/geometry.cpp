#include "probe/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace probe {

namespace {

constexpr int kPolygonSize = 1024;

double cross(const Point& a, const Point& b) { return a.x() * b.y() - a.y() * b.x(); }

Point rotate(const Point& p, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  return {c * p.x() - s * p.y(), s * p.x() + c * p.y()};
}

double coef(const std::vector<double>& v, std::size_t j) { return j < v.size() ? v[j] : 0.0; }

CurvePoint eval_fourier(const FourierCurve& f, double t) {
  CurvePoint p{f.center, Point::Zero(), Point::Zero()};
  const std::size_t n = std::max({f.x_cos.size(), f.x_sin.size(), f.y_cos.size(), f.y_sin.size()});
  for (std::size_t idx = 0; idx < n; ++idx) {
    const double j = static_cast<double>(idx + 1);
    const double c = std::cos(j * t), s = std::sin(j * t);
    const double xc = coef(f.x_cos, idx), xs = coef(f.x_sin, idx);
    const double yc = coef(f.y_cos, idx), ys = coef(f.y_sin, idx);
    p.x += Point(xc * c + xs * s, yc * c + ys * s);
    p.dx += j * Point(-xc * s + xs * c, -yc * s + ys * c);
    p.ddx += -j * j * Point(xc * c + xs * s, yc * c + ys * s);
  }
  return p;
}

bool segments_intersect(const Point& a, const Point& b, const Point& c, const Point& d) {
  const double d1 = cross(b - a, c - a), d2 = cross(b - a, d - a);
  const double d3 = cross(d - c, a - c), d4 = cross(d - c, b - c);
  if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0))) return true;
  auto on_seg = [](const Point& p, const Point& q, const Point& r) {
    return std::min(p.x(), q.x()) <= r.x() && r.x() <= std::max(p.x(), q.x()) &&
           std::min(p.y(), q.y()) <= r.y() && r.y() <= std::max(p.y(), q.y());
  };
  if (d1 == 0 && on_seg(a, b, c)) return true;
  if (d2 == 0 && on_seg(a, b, d)) return true;
  if (d3 == 0 && on_seg(c, d, a)) return true;
  if (d4 == 0 && on_seg(c, d, b)) return true;
  return false;
}

double dist_to_segment(const Point& z, const Point& a, const Point& b) {
  const Point ab = b - a;
  const double len2 = ab.squaredNorm();
  double s = len2 > 0.0 ? (z - a).dot(ab) / len2 : 0.0;
  s = std::clamp(s, 0.0, 1.0);
  return (z - (a + s * ab)).norm();
}

}  // namespace

Curve::Curve(Shape shape) : shape_(std::move(shape)) { finalize(); }

Curve Curve::kite(const Point& center, double scale) {
  FourierCurve f;
  f.center = center + Point(-0.65 * scale, 0.0);
  f.x_cos = {scale, 0.65 * scale};
  f.y_sin = {1.5 * scale};
  return Curve(f);
}

CurvePoint Curve::eval(double t) const {
  if (const auto* c = std::get_if<Circle>(&shape_)) {
    const double ct = std::cos(t), st = std::sin(t);
    return {c->center + c->radius * Point(ct, st), c->radius * Point(-st, ct), -c->radius * Point(ct, st)};
  }
  if (const auto* e = std::get_if<Ellipse>(&shape_)) {
    const double ct = std::cos(t), st = std::sin(t);
    return {e->center + rotate(Point(e->semi_a * ct, e->semi_b * st), e->rotation),
            rotate(Point(-e->semi_a * st, e->semi_b * ct), e->rotation),
            rotate(Point(-e->semi_a * ct, -e->semi_b * st), e->rotation)};
  }
  return eval_fourier(std::get<FourierCurve>(shape_), t);
}

Point Curve::outward_normal(double t) const {
  const Point d = eval(t).dx;
  return {d.y(), -d.x()};
}

void Curve::finalize() {
  polygon_.resize(kPolygonSize);
  length_ = 0.0;
  const double dt = 2.0 * kPi / kPolygonSize;
  for (int j = 0; j < kPolygonSize; ++j) {
    const CurvePoint p = eval(j * dt);
    polygon_[j] = p.x;
    length_ += p.dx.norm() * dt;
  }
  diameter_ = 0.0;
  max_chord_ = 0.0;
  Point centroid = Point::Zero();
  double area2 = 0.0;
  for (int i = 0; i < kPolygonSize; ++i) {
    const Point& a = polygon_[i];
    const Point& b = polygon_[(i + 1) % kPolygonSize];
    max_chord_ = std::max(max_chord_, (b - a).norm());
    const double w = cross(a, b);
    area2 += w;
    centroid += w * (a + b);
    for (int j = i + 1; j < kPolygonSize; ++j) diameter_ = std::max(diameter_, (polygon_[j] - a).norm());
  }
  centroid /= (3.0 * area2);

  auto star_about = [&](const Point& c) {
    for (int j = 0; j < kPolygonSize; ++j) {
      const CurvePoint p = eval(j * dt);
      if (cross(p.x - c, p.dx) <= 0.0) return false;
    }
    return true;
  };
  Point reference = centroid;
  if (const auto* c = std::get_if<Circle>(&shape_)) reference = c->center;
  if (const auto* e = std::get_if<Ellipse>(&shape_)) reference = e->center;
  if (const auto* f = std::get_if<FourierCurve>(&shape_)) {
    if (star_about(f->center)) reference = f->center;
  }
  star_center_ = reference;
  star_shaped_ = star_about(reference);
}

int Curve::winding_number(const Point& z) const {
  double total = 0.0;
  for (int i = 0; i < kPolygonSize; ++i) {
    const Point a = polygon_[i] - z;
    const Point b = polygon_[(i + 1) % kPolygonSize] - z;
    total += std::atan2(cross(a, b), a.dot(b));
  }
  return static_cast<int>(std::lround(total / (2.0 * kPi)));
}

double Curve::closest_parameter(const Point& z) const {
  const double dt = 2.0 * kPi / kPolygonSize;
  // Seed Newton from the best few polygon vertices; keep the best converged root.
  std::vector<std::pair<double, int>> cand;
  cand.reserve(kPolygonSize);
  for (int j = 0; j < kPolygonSize; ++j) cand.emplace_back((polygon_[j] - z).squaredNorm(), j);
  const int nseed = 4;
  std::partial_sort(cand.begin(), cand.begin() + nseed, cand.end());
  double best_t = cand[0].second * dt;
  double best_d = std::numeric_limits<double>::infinity();
  for (int s = 0; s < nseed; ++s) {
    double t = cand[s].second * dt;
    for (int it = 0; it < 50; ++it) {
      const CurvePoint p = eval(t);
      const Point r = p.x - z;
      const double g = r.dot(p.dx);
      double h = p.dx.squaredNorm() + r.dot(p.ddx);
      if (h <= 0.0) h = p.dx.squaredNorm();
      const double step = std::clamp(g / h, -dt, dt);
      t -= step;
      if (std::abs(step) < 1e-15) break;
    }
    const double d = (eval(t).x - z).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best_t = t;
    }
  }
  best_t = std::fmod(best_t, 2.0 * kPi);
  if (best_t < 0.0) best_t += 2.0 * kPi;
  return best_t;
}

double Curve::signed_distance(const Point& z) const {
  const double t = closest_parameter(z);
  const CurvePoint p = eval(t);
  const Point r = z - p.x;
  const double d = r.norm();
  const Point n(p.dx.y(), -p.dx.x());
  // The closest point is normal to the curve, so the sign comes from the normal side.
  if (d > 4.0 * max_chord_) return winding_number(z) != 0 ? -d : d;
  return r.dot(n) > 0.0 ? d : -d;
}

bool Curve::contains(const Point& z) const { return signed_distance(z) < 0.0; }

Curve Curve::transformed(double angle, const Point& shift) const {
  if (const auto* c = std::get_if<Circle>(&shape_)) return Curve(Circle{rotate(c->center, angle) + shift, c->radius});
  if (const auto* e = std::get_if<Ellipse>(&shape_)) {
    return Curve(Ellipse{rotate(e->center, angle) + shift, e->semi_a, e->semi_b, e->rotation + angle});
  }
  FourierCurve f = std::get<FourierCurve>(shape_);
  f.center = rotate(f.center, angle) + shift;
  const std::size_t n = std::max({f.x_cos.size(), f.x_sin.size(), f.y_cos.size(), f.y_sin.size()});
  f.x_cos.resize(n, 0.0);
  f.x_sin.resize(n, 0.0);
  f.y_cos.resize(n, 0.0);
  f.y_sin.resize(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    const Point c = rotate(Point(f.x_cos[j], f.y_cos[j]), angle);
    const Point s = rotate(Point(f.x_sin[j], f.y_sin[j]), angle);
    f.x_cos[j] = c.x();
    f.y_cos[j] = c.y();
    f.x_sin[j] = s.x();
    f.y_sin[j] = s.y();
  }
  return Curve(f);
}

std::optional<std::string> validate_curve(const Curve& c) {
  if (const auto* ci = std::get_if<Circle>(&c.shape())) {
    if (!(ci->radius > 0.0)) return "circle radius must be positive";
    return std::nullopt;
  }
  if (const auto* e = std::get_if<Ellipse>(&c.shape())) {
    if (!(e->semi_a > 0.0) || !(e->semi_b > 0.0)) return "ellipse semi-axes must be positive";
    return std::nullopt;
  }
  const int n = 2048;
  std::vector<Point> poly(n);
  double area2 = 0.0;
  for (int j = 0; j < n; ++j) {
    const CurvePoint p = c.eval(2.0 * kPi * j / n);
    if (!(p.dx.norm() > 1e-10 * std::max(c.diameter(), 1e-300))) return "parametrization has vanishing speed";
    poly[j] = p.x;
  }
  for (int j = 0; j < n; ++j) area2 += cross(poly[j], poly[(j + 1) % n]);
  if (!(area2 > 0.0)) return "curve must be counter-clockwise with positive area";
  for (int i = 0; i < n; ++i) {
    for (int j = i + 2; j < n; ++j) {
      if (i == 0 && j == n - 1) continue;
      if (segments_intersect(poly[i], poly[(i + 1) % n], poly[j], poly[(j + 1) % n])) return "curve is self-intersecting";
    }
  }
  return std::nullopt;
}

DiscretizedCurve discretize(const Curve& curve, int m) {
  if (m < 16 || m % 2 != 0) throw std::invalid_argument("discretize: node count must be even and at least 16");
  if (auto err = validate_curve(curve)) throw std::invalid_argument("discretize: " + *err);
  DiscretizedCurve d;
  d.curve = curve;
  d.size = m;
  d.t.resize(m);
  d.x.resize(m);
  d.dx.resize(m);
  d.ddx.resize(m);
  d.normal.resize(m);
  d.speed.resize(m);
  for (int j = 0; j < m; ++j) {
    const double t = 2.0 * kPi * j / m;
    const CurvePoint p = curve.eval(t);
    d.t[j] = t;
    d.x[j] = p.x;
    d.dx[j] = p.dx;
    d.ddx[j] = p.ddx;
    d.speed[j] = p.dx.norm();
    d.normal[j] = Point(p.dx.y(), -p.dx.x()) / d.speed[j];
  }
  return d;
}

Needle straight_needle(const Point& start, const Point& tip) { return Needle{{start, tip}}; }

double dist_to_needle(const Point& z, const Needle& needle) {
  if (needle.vertices.size() == 1) return (z - needle.vertices[0]).norm();
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < needle.vertices.size(); ++i) {
    best = std::min(best, dist_to_segment(z, needle.vertices[i], needle.vertices[i + 1]));
  }
  return best;
}

Complex ImpedanceFunction::operator()(double t) const {
  Complex v = constant;
  for (const auto& [j, c] : modes) v += c * std::exp(Complex(0.0, j * t));
  return v;
}

double ImpedanceFunction::min_imag() const {
  if (modes.empty()) return constant.imag();
  double lo = std::numeric_limits<double>::infinity();
  for (int j = 0; j < 4096; ++j) lo = std::min(lo, (*this)(2.0 * kPi * j / 4096).imag());
  return lo;
}

std::optional<int> ObstacleScene::obstacle_containing(const Point& z, double tol) const {
  for (std::size_t j = 0; j < obstacles.size(); ++j) {
    if (obstacles[j].shape.signed_distance(z) <= tol) return static_cast<int>(j);
  }
  return std::nullopt;
}

double ObstacleScene::dist_to_obstacles(const Point& z) const {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& o : obstacles) best = std::min(best, std::max(0.0, o.shape.signed_distance(z)));
  return best;
}

double ObstacleScene::dist_to_obstacle_boundary(const Point& z) const {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& o : obstacles) best = std::min(best, std::abs(o.shape.signed_distance(z)));
  return best;
}

std::optional<std::string> validate_scene(const ObstacleScene& scene, const SceneValidation& opts) {
  if (!(scene.k > 0.0)) return "wavenumber k must be positive";
  if (auto err = validate_curve(scene.outer)) return "outer boundary: " + *err;
  const int n = 256;
  for (std::size_t j = 0; j < scene.obstacles.size(); ++j) {
    const auto& o = scene.obstacles[j];
    const std::string tag = "obstacle " + std::to_string(j) + ": ";
    if (auto err = validate_curve(o.shape)) return tag + *err;
    for (int i = 0; i < n; ++i) {
      const Point p = o.shape.eval(2.0 * kPi * i / n).x;
      if (scene.outer.signed_distance(p) > -opts.margin) return tag + "closer to the outer boundary than the margin";
    }
    for (std::size_t l = 0; l < j; ++l) {
      const auto& other = scene.obstacles[l].shape;
      if (other.contains(o.shape.eval(0.0).x) || o.shape.contains(other.eval(0.0).x)) {
        return tag + "overlaps obstacle " + std::to_string(l);
      }
      for (int i = 0; i < n; ++i) {
        if (other.signed_distance(o.shape.eval(2.0 * kPi * i / n).x) < opts.margin) {
          return tag + "separation from obstacle " + std::to_string(l) + " below the margin";
        }
      }
    }
    if (scene.kind == BoundaryKind::Impedance && !opts.allow_real_lambda && o.lambda.min_imag() < opts.lambda_min) {
      std::ostringstream os;
      os << tag << "Im lambda lower bound " << o.lambda.min_imag() << " below required " << opts.lambda_min;
      return os.str();
    }
  }
  return std::nullopt;
}

Needle snap_needle(const Needle& needle, const Curve& outer) {
  if (needle.vertices.empty()) throw std::invalid_argument("needle has no vertices");
  Needle out = needle;
  const double t = outer.closest_parameter(needle.start());
  const Point foot = outer.eval(t).x;
  const double d = (foot - needle.start()).norm();
  if (d > kSnapRelTol * outer.diameter()) throw std::invalid_argument("start not on boundary");
  out.vertices.front() = foot;
  return out;
}

std::optional<std::string> validate_needle(const Needle& needle, const Curve& outer, const ObstacleScene* scene) {
  const auto& v = needle.vertices;
  if (v.size() < 2) return "needle needs at least two vertices";
  for (std::size_t i = 0; i + 1 < v.size(); ++i) {
    if ((v[i + 1] - v[i]).norm() == 0.0) return "repeated vertex";
  }
  const double tol = kOnBoundaryRelTol * outer.diameter();
  if (std::abs(outer.signed_distance(v[0])) > tol) return "start not on boundary";
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (!(outer.signed_distance(v[i]) < -tol)) return "vertex outside domain";
  }
  // Segments must stay inside; the first one may only touch the boundary at its start.
  for (std::size_t i = 0; i + 1 < v.size(); ++i) {
    const int samples = 256;
    for (int s = 1; s < samples; ++s) {
      const Point p = v[i] + (v[i + 1] - v[i]) * (static_cast<double>(s) / samples);
      if (!(outer.signed_distance(p) < 0.0)) return "needle leaves the domain";
    }
  }
  for (std::size_t i = 0; i + 1 < v.size(); ++i) {
    for (std::size_t j = i + 1; j + 1 < v.size(); ++j) {
      if (j == i + 1) {
        // Adjacent segments share a vertex; they intersect elsewhere only when folded back.
        const Point a = v[i] - v[i + 1], b = v[j + 1] - v[j];
        if (std::abs(cross(a, b)) <= 1e-14 * a.norm() * b.norm() && a.dot(b) > 0.0) return "self-intersecting";
        continue;
      }
      if (segments_intersect(v[i], v[i + 1], v[j], v[j + 1])) return "self-intersecting";
    }
  }
  if (scene && classify_needle_vs_obstacle(needle, *scene) == NeedleClass::Grazing) return "grazing needle";
  return std::nullopt;
}

const char* to_string(NeedleClass c) {
  switch (c) {
    case NeedleClass::TipInObstacle: return "TipInObstacle";
    case NeedleClass::CrossesObstacle: return "CrossesObstacle";
    case NeedleClass::Avoids: return "Avoids";
    case NeedleClass::Grazing: return "Grazing";
  }
  return "?";
}

double needle_depth(const Needle& needle, const Curve& curve) {
  double best = -std::numeric_limits<double>::infinity();
  const auto& v = needle.vertices;
  for (std::size_t i = 0; i + 1 < v.size(); ++i) {
    const Point a = v[i], b = v[i + 1];
    auto depth = [&](double s) { return -curve.signed_distance(a + s * (b - a)); };
    const int samples = 200;
    int arg = 0;
    double val = -std::numeric_limits<double>::infinity();
    for (int s = 0; s <= samples; ++s) {
      const double d = depth(static_cast<double>(s) / samples);
      if (d > val) {
        val = d;
        arg = s;
      }
    }
    // Golden-section refinement around the best sample.
    double lo = std::max(0, arg - 1) / static_cast<double>(samples);
    double hi = std::min(samples, arg + 1) / static_cast<double>(samples);
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
    double f1 = depth(x1), f2 = depth(x2);
    for (int it = 0; it < 80 && hi - lo > 1e-15; ++it) {
      if (f1 > f2) {
        hi = x2;
        x2 = x1;
        f2 = f1;
        x1 = hi - g * (hi - lo);
        f1 = depth(x1);
      } else {
        lo = x1;
        x1 = x2;
        f1 = f2;
        x2 = lo + g * (hi - lo);
        f2 = depth(x2);
      }
    }
    best = std::max({best, val, f1, f2});
  }
  return best;
}

NeedleClass classify_needle_vs_obstacle(const Needle& needle, const ObstacleScene& scene, std::optional<double> tol) {
  const double eps = tol.value_or(1e-9 * scene.outer.diameter());
  if (scene.obstacle_containing(needle.tip(), eps)) return NeedleClass::TipInObstacle;
  double depth = -std::numeric_limits<double>::infinity();
  for (const auto& o : scene.obstacles) depth = std::max(depth, needle_depth(needle, o.shape));
  if (depth > eps) return NeedleClass::CrossesObstacle;
  if (depth >= -eps) return NeedleClass::Grazing;
  return NeedleClass::Avoids;
}

}  // namespace probe
