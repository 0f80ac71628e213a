#pragma once

#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "probe/geometry.hpp"

namespace probe {

using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;

/// Near-singular system: k^2 close to an interior eigenvalue or the curves are under-resolved.
class IllConditioned : public std::runtime_error {
 public:
  IllConditioned(const std::string& what, double condition) : std::runtime_error(what), condition_(condition) {}
  double condition() const { return condition_; }

 private:
  double condition_;
};

/// Source point too close to the obstacles for the reflected-solution data to be resolved.
class TipTooClose : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Evaluation point not in the closure of Omega minus D.
class OutsideDomain : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Samples of a function at the nodes of a discretized curve.
struct BoundaryData {
  std::shared_ptr<const DiscretizedCurve> curve;
  CVector values;
};

struct SolverOptions {
  double condition_ceiling = 1e10;
  /// Minimum dist(x, D) for reflected solutions, relative to nothing (absolute length).
  double tip_margin = 0.02;
  /// Coupling parameter is eta = eta_scale * k.
  double eta_scale = 1.0;
  /// Largest trigonometric upsampling factor used for near-boundary evaluation.
  int max_upsample = 64;
};

class DtnSolver;

struct FieldPoint {
  Complex value;
  CVec2 gradient;
};

/// Layer densities on every curve plus evaluators; valid on the closure of Omega minus D.
class FieldSolution {
 public:
  /// Value and gradient at an interior point. Throws OutsideDomain for points in D or outside Omega.
  FieldPoint eval(const Point& z) const;
  Complex value(const Point& z) const { return eval(z).value; }

  /// Normal derivative on the outer boundary nodes (outward normal of Omega).
  BoundaryData neumann_trace() const;
  /// Trace values at the nodes of curve b (0 = outer, j = obstacle j-1).
  CVector trace(int b) const;
  /// Normal derivative at the nodes of curve b along that curve's own outward normal.
  CVector normal_derivative(int b) const;
  /// Trace and own-normal derivative at an arbitrary parameter of curve b (Nystrom interpolation).
  std::pair<Complex, Complex> boundary_values(int b, double t) const;

  const std::vector<CVector>& densities() const { return density_; }

 private:
  friend class DtnSolver;
  FieldPoint eval_resolved(const Point& z) const;
  const CVector& upsampled_density(int b, int level) const;

  std::shared_ptr<const struct SolverImpl> impl_;
  std::shared_ptr<struct DensityCache> cache_;
  std::vector<CVector> density_;
  CVector stacked_;
};

/// Assembled and factored combined-layer system for the scene; immutable after construction.
class DtnSolver {
 public:
  /// Throws IllConditioned when the condition estimate exceeds the ceiling, std::invalid_argument for bad scenes.
  static DtnSolver build(const ObstacleScene& scene, int m_outer, int m_obstacle, const SolverOptions& opts = {});

  const ObstacleScene& scene() const;
  const DiscretizedCurve& outer() const;
  std::shared_ptr<const DiscretizedCurve> outer_ptr() const;
  const DiscretizedCurve& obstacle(int j) const;
  int obstacle_count() const;
  double condition_estimate() const;
  double k() const;

  FieldSolution solve_dirichlet(const BoundaryData& f) const;
  FieldSolution solve_dirichlet(const CVector& f) const;
  /// Reflected solution w_x: zero outer data, obstacle data from G(., x). Throws TipTooClose.
  FieldSolution solve_reflected(const Point& x) const;
  /// Outer Neumann data of the scene's solution for Dirichlet data f, via the precomputed DtN matrix.
  CVector dtn(const CVector& f) const;
  const CMatrix& dtn_matrix() const;

 private:
  std::shared_ptr<const SolverImpl> impl_;
};

/// Neumann trace of the obstacle-free solution with Dirichlet data f on Omega.
BoundaryData dtn_background(const Curve& outer, double k, const BoundaryData& f);

/// Neumann trace of the scene's solution for data f: solve_dirichlet followed by neumann_trace.
BoundaryData neumann_trace(const FieldSolution& u);

}  // namespace probe
