#pragma once

#include <functional>
#include <vector>

#include "probe/geometry.hpp"

namespace probe {

/// Nodes and weights of a planar area rule.
struct AreaRule {
  std::vector<Point> nodes;
  std::vector<double> weights;

  std::size_t size() const { return nodes.size(); }
  double area() const;
  /// Keeps only the nodes satisfying the predicate.
  AreaRule restricted(const std::function<bool(const Point&)>& keep) const;
  AreaRule& append(const AreaRule& other);
};

/// Gauss-Legendre nodes and weights on [-1, 1].
void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w);

/// Polar rule on a disk: Gauss-Legendre in radius, trapezoid in angle.
AreaRule disk_rule(const Point& center, double radius, int n_radial, int n_angular);

/// Polar rule on the annulus r_in < |z - center| < r_out.
AreaRule annulus_rule(const Point& center, double r_in, double r_out, int n_radial, int n_angular);

/// Interior of a curve that is star-shaped about its star center:
/// z = c + s (x(t) - c), Gauss-Legendre in s and trapezoid in t.
/// Throws std::invalid_argument for curves that are not star-shaped.
AreaRule star_rule(const Curve& curve, int n_radial, int n_angular);

/// Circular sector with apex at the given point.
AreaRule sector_rule(const Point& apex, double direction, double half_angle, double radius, int n_radial,
                     int n_angular);

template <class F>
auto integrate(const AreaRule& rule, F&& f) -> decltype(f(rule.nodes[0]) * 1.0) {
  using R = decltype(f(rule.nodes[0]) * 1.0);
  R sum{};
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) sum += f(rule.nodes[i]) * rule.weights[i];
  return sum;
}

}  // namespace probe
