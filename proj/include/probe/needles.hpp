#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "probe/forward.hpp"
#include "probe/quadrature.hpp"

namespace probe {

/// Too few matching points survive the tube excision for the number of unknowns.
class RankDeficient : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The fit degraded sharply or the coefficients left double-precision range.
class ScheduleTooAggressive : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ScheduleStep {
  double eps = 0.0;
  int order = 0;
  double alpha = 0.0;
};

/// eps_n = eps0 q^n, M_n = m0 + n m_step, alpha_n = alpha0 alpha_ratio^n for n = 0 .. n_max.
std::vector<ScheduleStep> default_schedule(int n_max, double eps0, double q, int m0, int m_step, double alpha0,
                                           double alpha_ratio);

/// sum_{m=-M}^{M} c_m J_|m|(k |z - center|) e^{i m theta}.
struct EntireSolution {
  Point center{0.0, 0.0};
  double k = 1.0;
  int order = 0;
  std::vector<Complex> coeffs;  // index m + order

  Complex coefficient(int m) const { return coeffs.at(m + order); }
  double coefficient_norm() const;
};

FieldPoint eval_entire(const EntireSolution& v, const Point& z);

/// Coefficients after rotating the argument: v'(z) = v(center + R_phi^{-1}(z - center)).
EntireSolution rotated(const EntireSolution& v, double phi);

struct Norms {
  double l2 = 0.0;
  double h1semi = 0.0;
};

Norms needle_norms(const EntireSolution& v, const AreaRule& region);

/// Column layout of the normalized Fourier-Bessel basis: orders 0, -1, 1, -2, 2, ... so that the
/// basis of order M is the leading 2M+1 columns of any higher order.
inline int basis_column(int m) { return m == 0 ? 0 : (m < 0 ? -2 * m - 1 : 2 * m); }
inline int basis_order_of(int col) { return col == 0 ? 0 : (col % 2 ? -(col + 1) / 2 : col / 2); }

/// phi_m = J_|m|(k r) e^{i m theta} / s_m, with s_m = J_|m|(k r_s) for |m| >= k r_s and 1 below,
/// r_s the largest distance from the centre to the outer boundary.
struct FourierBessel {
  Point center{0.0, 0.0};
  double k = 1.0;
  double scale_radius = 1.0;
  int max_order = 0;

  double normalization(int m) const;
};

/// Basis values and gradients at a fixed point set.
struct BasisTable {
  CMatrix value, dx, dy;
  int rows() const { return static_cast<int>(value.rows()); }
};

BasisTable tabulate(const FourierBessel& basis, const std::vector<Point>& points);

/// Converts normalized coefficients (basis_column layout) into an EntireSolution.
EntireSolution to_entire(const FourierBessel& basis, const CVector& normalized);

/// A registered compact set K away from the needle, with its area rule.
struct TestSet {
  std::string name;
  AreaRule rule;
};

struct FitOptions {
  double cloud_spacing = 0.03;
  int boundary_nodes = 256;
  std::optional<Point> center;
  double coef_limit = 1e12;
  double residual_growth_limit = 10.0;
  /// Replaces G(., x) as the fitting target when set (value and gradient).
  std::function<FieldPoint(const Point&)> target;
  std::vector<TestSet> test_sets;
};

struct FitReport {
  int n = 0;
  double eps = 0.0;
  int order = 0;
  double alpha = 0.0;
  double residual = 0.0;
  double coef_norm = 0.0;
  int matching_points = 0;
  std::vector<double> h1_on_K;
};

struct NeedleElement {
  EntireSolution v;
  CVector normalized;
  FitReport report;
};

struct NeedleSequence {
  Point x{0.0, 0.0};
  Needle needle;
  std::vector<ScheduleStep> schedule;
  std::vector<NeedleElement> elements;
  FourierBessel basis;
  std::string stop_reason;  // empty when the schedule completed
};

/// Needle-independent part of the fits: matching cloud, basis table and full-cloud Gram matrix.
/// Shared read-only across needles with the same domain, k and maximum order.
class FitContext {
 public:
  FitContext(const Curve& outer, double k, int max_order, const FitOptions& opts = {});

  const Curve& outer() const { return outer_; }
  double k() const { return basis_.k; }
  const FourierBessel& basis() const { return basis_; }
  const std::vector<Point>& cloud() const { return cloud_; }
  const BasisTable& table() const { return table_; }
  const CMatrix& gram() const { return gram_; }
  double spacing() const { return spacing_; }

 private:
  Curve outer_;
  FourierBessel basis_;
  double spacing_;
  std::vector<Point> cloud_;
  BasisTable table_;
  CMatrix gram_;
};

/// Fits schedule steps for one (x, sigma) on a shared context. Steps with decreasing eps reuse the
/// previous tube downdate, so fitting a schedule in order costs one pass over the excised rows.
class NeedleFitter {
 public:
  NeedleFitter(std::shared_ptr<const FitContext> ctx, const Needle& needle, const FitOptions& opts = {});
  NeedleFitter(const Curve& outer, double k, const Needle& needle, int max_order, const FitOptions& opts = {});

  /// Tikhonov fit of the step; throws RankDeficient.
  NeedleElement fit(const ScheduleStep& step, int n = 0);

  const FitContext& context() const { return *ctx_; }
  std::shared_ptr<const FitContext> context_ptr() const { return ctx_; }
  const Point& tip() const { return needle_.tip(); }

 private:
  void init_targets();

  std::shared_ptr<const FitContext> ctx_;
  Needle needle_;
  FitOptions opts_;
  std::vector<double> dist_;
  CVector target_value_, target_dx_, target_dy_;
  std::vector<BasisTable> test_tables_;
  std::vector<std::vector<FieldPoint>> test_targets_;
  // Gram contribution of the rows with dist <= cached_eps_, at the full order.
  double cached_eps_ = -1.0;
  CMatrix excised_;
};

/// Fits every step in order; stops early (recording the reason) on ScheduleTooAggressive.
NeedleSequence build_needle_sequence(const Curve& outer, double k, const Needle& needle,
                                     const std::vector<ScheduleStep>& schedule, const FitOptions& opts = {});
NeedleSequence build_needle_sequence(std::shared_ptr<const FitContext> ctx, const Needle& needle,
                                     const std::vector<ScheduleStep>& schedule, const FitOptions& opts = {});

/// Single fit: x is the needle tip.
NeedleElement fit_needle_element(const Point& x, const Needle& needle, double eps, int order, double alpha,
                                 const Curve& outer, double k, const FitOptions& opts = {});

/// sqrt(sum w |v - G|^2) + sqrt(sum w |grad(v - G)|^2) over the rule.
double h1_distance_to_green(const EntireSolution& v, const Point& x, const AreaRule& rule);

}  // namespace probe
