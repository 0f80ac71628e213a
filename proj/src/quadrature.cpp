#include "probe/quadrature.hpp"

#include <cmath>
#include <stdexcept>

namespace probe {

double AreaRule::area() const {
  double a = 0.0;
  for (double w : weights) a += w;
  return a;
}

AreaRule AreaRule::restricted(const std::function<bool(const Point&)>& keep) const {
  AreaRule out;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (keep(nodes[i])) {
      out.nodes.push_back(nodes[i]);
      out.weights.push_back(weights[i]);
    }
  }
  return out;
}

AreaRule& AreaRule::append(const AreaRule& other) {
  nodes.insert(nodes.end(), other.nodes.begin(), other.nodes.end());
  weights.insert(weights.end(), other.weights.begin(), other.weights.end());
  return *this;
}

void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: n must be positive");
  x.assign(n, 0.0);
  w.assign(n, 0.0);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double dp = 1.0;
    for (int it = 0; it < 100; ++it) {
      double p1 = 1.0, p2 = 0.0;
      for (int j = 1; j <= n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = ((2.0 * j - 1.0) * z * p2 - (j - 1.0) * p3) / j;
      }
      dp = n * (z * p1 - p2) / (z * z - 1.0);
      const double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    x[i] = -z;
    x[n - 1 - i] = z;
    w[i] = w[n - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
  }
}

AreaRule annulus_rule(const Point& center, double r_in, double r_out, int n_radial, int n_angular) {
  std::vector<double> gx, gw;
  gauss_legendre(n_radial, gx, gw);
  AreaRule rule;
  const double half = 0.5 * (r_out - r_in);
  const double dt = 2.0 * kPi / n_angular;
  for (int a = 0; a < n_angular; ++a) {
    const double t = (a + 0.5) * dt;
    const Point dir(std::cos(t), std::sin(t));
    for (int i = 0; i < n_radial; ++i) {
      const double r = r_in + half * (gx[i] + 1.0);
      rule.nodes.push_back(center + r * dir);
      rule.weights.push_back(gw[i] * half * r * dt);
    }
  }
  return rule;
}

AreaRule disk_rule(const Point& center, double radius, int n_radial, int n_angular) {
  return annulus_rule(center, 0.0, radius, n_radial, n_angular);
}

AreaRule star_rule(const Curve& curve, int n_radial, int n_angular) {
  if (!curve.is_star_shaped()) throw std::invalid_argument("star_rule: curve is not star-shaped about its reference point");
  std::vector<double> gx, gw;
  gauss_legendre(n_radial, gx, gw);
  const Point c = curve.star_center();
  AreaRule rule;
  const double dt = 2.0 * kPi / n_angular;
  for (int a = 0; a < n_angular; ++a) {
    const CurvePoint p = curve.eval(a * dt);
    const Point r = p.x - c;
    const double jac = r.x() * p.dx.y() - r.y() * p.dx.x();
    for (int i = 0; i < n_radial; ++i) {
      const double s = 0.5 * (gx[i] + 1.0);
      rule.nodes.push_back(c + s * r);
      rule.weights.push_back(0.5 * gw[i] * s * jac * dt);
    }
  }
  return rule;
}

AreaRule sector_rule(const Point& apex, double direction, double half_angle, double radius, int n_radial,
                     int n_angular) {
  std::vector<double> rx, rw, ax, aw;
  gauss_legendre(n_radial, rx, rw);
  gauss_legendre(n_angular, ax, aw);
  AreaRule rule;
  for (int a = 0; a < n_angular; ++a) {
    const double t = direction + half_angle * ax[a];
    const Point dir(std::cos(t), std::sin(t));
    for (int i = 0; i < n_radial; ++i) {
      const double r = 0.5 * radius * (rx[i] + 1.0);
      rule.nodes.push_back(apex + r * dir);
      rule.weights.push_back(rw[i] * 0.5 * radius * r * aw[a] * half_angle);
    }
  }
  return rule;
}

}  // namespace probe
