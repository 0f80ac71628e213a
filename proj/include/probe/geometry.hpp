#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "probe/specfun.hpp"

namespace probe {

struct Circle {
  Point center{0.0, 0.0};
  double radius = 1.0;
};

struct Ellipse {
  Point center{0.0, 0.0};
  double semi_a = 1.0;
  double semi_b = 1.0;
  double rotation = 0.0;
};

/// x(t) = center + sum_{j>=1} (xc_j cos jt + xs_j sin jt, yc_j cos jt + ys_j sin jt).
/// Coefficient vectors are indexed from j = 1.
struct FourierCurve {
  Point center{0.0, 0.0};
  std::vector<double> x_cos, x_sin, y_cos, y_sin;
};

struct CurvePoint {
  Point x;
  Point dx;
  Point ddx;
};

/// Smooth closed 2pi-periodic curve, counter-clockwise.
class Curve {
 public:
  using Shape = std::variant<Circle, Ellipse, FourierCurve>;

  Curve() = default;
  explicit Curve(Shape shape);

  /// The classic kite x(t) = (cos t + 0.65 cos 2t - 0.65, 1.5 sin t), scaled about the origin and shifted.
  static Curve kite(const Point& center, double scale);

  const Shape& shape() const { return shape_; }
  const Circle* as_circle() const { return std::get_if<Circle>(&shape_); }

  CurvePoint eval(double t) const;
  /// Unnormalised outward normal (dy, -dx); its length equals the speed.
  Point outward_normal(double t) const;

  double diameter() const { return diameter_; }
  double length() const { return length_; }
  /// Reference point of the parametrisation: a point the curve is star-shaped about when one exists.
  const Point& star_center() const { return star_center_; }
  bool is_star_shaped() const { return star_shaped_; }

  /// Parameter of the nearest curve point.
  double closest_parameter(const Point& z) const;
  /// Distance to the curve, negative inside.
  double signed_distance(const Point& z) const;
  /// Winding-number containment (closed interior excluded when on the curve within tolerance).
  bool contains(const Point& z) const;

  /// Rigid motion: rotate by angle about the origin, then translate.
  Curve transformed(double angle, const Point& shift) const;

 private:
  void finalize();
  int winding_number(const Point& z) const;

  Shape shape_{Circle{}};
  std::vector<Point> polygon_;
  double diameter_ = 2.0;
  double length_ = 2.0 * kPi;
  double max_chord_ = 0.0;
  Point star_center_{0.0, 0.0};
  bool star_shaped_ = true;
};

/// Checks the curve invariants; returns the first violation.
std::optional<std::string> validate_curve(const Curve& c);

/// Equispaced-in-parameter sampling of a curve: t_j = 2 pi j / M.
struct DiscretizedCurve {
  Curve curve;
  int size = 0;
  std::vector<double> t;
  std::vector<Point> x, dx, ddx;
  std::vector<Point> normal;  // unit outward
  std::vector<double> speed;  // |x'(t_j)|, the arc-length Jacobian

  double spacing() const { return 2.0 * kPi / size; }
  /// Trapezoid weight for node j: spacing * speed_j.
  double weight(int j) const { return spacing() * speed[j]; }
};

/// M even, M >= 16. Throws std::invalid_argument otherwise or when the curve is invalid.
DiscretizedCurve discretize(const Curve& curve, int m);

struct Needle {
  std::vector<Point> vertices;  // p_0 on the outer boundary ... p_L = tip
  const Point& tip() const { return vertices.back(); }
  const Point& start() const { return vertices.front(); }
};

Needle straight_needle(const Point& start, const Point& tip);

/// Euclidean distance from z to the polyline.
double dist_to_needle(const Point& z, const Needle& needle);

struct TubeSet {
  Needle needle;
  double radius = 0.0;
  bool contains(const Point& z) const { return dist_to_needle(z, needle) <= radius; }
};

enum class BoundaryKind { Impedance, SoundSoft };

/// lambda(t) = constant + sum_j c_j e^{i j t} on an obstacle boundary parametrised by t.
struct ImpedanceFunction {
  Complex constant{0.0, 1.0};
  std::vector<std::pair<int, Complex>> modes;
  Complex operator()(double t) const;
  /// Lower bound of Im lambda estimated on a fine sample.
  double min_imag() const;
};

struct Obstacle {
  Curve shape;
  ImpedanceFunction lambda;
};

struct ObstacleScene {
  Curve outer;
  std::vector<Obstacle> obstacles;
  BoundaryKind kind = BoundaryKind::SoundSoft;
  double k = 1.0;

  bool empty() const { return obstacles.empty(); }
  /// Index of the obstacle whose closure contains z, if any.
  std::optional<int> obstacle_containing(const Point& z, double tol = 0.0) const;
  /// Distance from z to the closure of D (0 when inside).
  double dist_to_obstacles(const Point& z) const;
  /// Distance from z to the nearest obstacle boundary.
  double dist_to_obstacle_boundary(const Point& z) const;
};

struct SceneValidation {
  double margin = 0.02;         // clearance of each obstacle from the outer boundary and each other
  double lambda_min = 1e-3;     // required lower bound of Im lambda for impedance scenes
  bool allow_real_lambda = false;
};

/// Returns the first violated scene invariant.
std::optional<std::string> validate_scene(const ObstacleScene& scene, const SceneValidation& opts = {});

/// Relative tolerance for "on the outer boundary".
inline constexpr double kOnBoundaryRelTol = 1e-9;
/// Needles whose start is this close (relative) to the outer boundary are projected onto it.
inline constexpr double kSnapRelTol = 1e-6;

/// Projects the first vertex onto the outer boundary when within the snap tolerance,
/// throws std::invalid_argument otherwise.
Needle snap_needle(const Needle& needle, const Curve& outer);

/// First violated needle invariant; with a scene, grazing needles are rejected too.
std::optional<std::string> validate_needle(const Needle& needle, const Curve& outer,
                                           const ObstacleScene* scene = nullptr);

enum class NeedleClass { TipInObstacle, CrossesObstacle, Avoids, Grazing };

const char* to_string(NeedleClass c);

/// Relation of the needle (tip = x) to the obstacle closure. tol is an absolute contact tolerance;
/// by default 1e-9 times the outer diameter.
NeedleClass classify_needle_vs_obstacle(const Needle& needle, const ObstacleScene& scene,
                                        std::optional<double> tol = std::nullopt);

/// Largest depth of the polyline inside the curve (positive = penetrates, negative = clearance).
double needle_depth(const Needle& needle, const Curve& curve);

}  // namespace probe
