#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "probe/needles.hpp"

namespace probe {

/// I = Re of the pairing, pairing = background - obstacle,
/// background = int dv/dnu conj(v) ds, obstacle = int du/dnu conj(v) ds over the outer boundary.
struct IndicatorTerm {
  double value = 0.0;
  Complex pairing{0.0, 0.0};
  Complex background{0.0, 0.0};
  Complex obstacle{0.0, 0.0};
};

IndicatorTerm indicator_term(const DtnSolver& solver, const EntireSolution& v);
/// Same from the trace and analytic normal derivative of v at the solver's outer nodes.
IndicatorTerm indicator_term(const DtnSolver& solver, const CVector& trace, const CVector& normal);

struct IndicatorRow {
  int n = 0;
  double value = 0.0;
  Complex pairing{0.0, 0.0};
  double residual = 0.0;
  double coef_norm = 0.0;
  /// |background pairing|: the magnitude value is a cancellation against.
  double scale = 0.0;
  // Truth-scene companions; empty in pure reconstruction mode.
  std::optional<double> grad_energy_D;  // ||grad v_n||^2 on D
  std::optional<double> l2_D;           // ||v_n|| on D
  std::optional<double> h1semi_D;       // ||grad v_n|| on D
  std::optional<double> ratio;          // l2_D / h1semi_D
  std::optional<double> boundary_l2_D;  // ||v_n|| on the obstacle boundary
};

struct IndicatorSeries {
  Point x{0.0, 0.0};
  Needle needle;
  std::vector<IndicatorRow> rows;
  std::string stop_reason;

  std::vector<double> values() const;
};

struct SeriesOptions {
  /// Computes the D companions from the solver's scene.
  bool truth_known = true;
  int region_radial = 32;
  int region_angular = 128;
};

IndicatorSeries indicator_series(const DtnSolver& solver, const NeedleSequence& seq, const SeriesOptions& opts = {});

/// Area rule for D (union of star rules over the obstacles).
AreaRule obstacle_region_rule(const ObstacleScene& scene, int n_radial, int n_angular);

enum class VolumeMethod { Boundary, Area };

struct DirectOptions {
  VolumeMethod method = VolumeMethod::Boundary;
  int area_radial = 48;
  int area_angular = 256;
};

/// I(x) from the reflected solution. Throws TipTooClose, OutsideDomain for x in the closure of D.
double indicator_direct(const DtnSolver& solver, const Point& x, const DirectOptions& opts = {});

enum class DivergenceStatus { DivergingPlus, DivergingMinus, Converged, Inconclusive };

const char* to_string(DivergenceStatus s);

struct DivergenceThresholds {
  double tau_rel = 0.02;
  double g_min = 1.3;
  double a_min = 0.0;
};

/// Requires series.size() >= 2 * window, throws std::invalid_argument otherwise.
DivergenceStatus detect_divergence(const std::vector<double>& series, int window, const DivergenceThresholds& th = {});

/// Geometric growth factor per step of |y| over the last window (exp of the least-squares slope of log|y|).
double growth_ratio(const std::vector<double>& series, int window);

struct NeedlePolicy {
  std::vector<ScheduleStep> schedule;
  FitOptions fit;
  int window = 3;
  DivergenceThresholds thresholds;
  /// Extra straight needles from boundary points rotated by these angles (radians) about the star
  /// centre of Omega, tried after the nearest-point needle when it does not converge.
  std::vector<double> extra_angles;
  /// User-supplied detours (tip must equal x); tried after the straight candidates.
  std::vector<Needle> detours;
  /// Reject needles that graze the solver's obstacles (simulation mode).
  bool reject_grazing = true;
};

/// Straight needle from the nearest outer-boundary point to x.
Needle nearest_point_needle(const Curve& outer, const Point& x);

enum class Classification { InObstacleClosure, Outside };
enum class Confidence { Normal, Low };

const char* to_string(Classification c);

struct NeedleEvidence {
  std::string name;  // "straight", "extra:<k>" or "detour:<k>"
  Needle needle;
  DivergenceStatus status = DivergenceStatus::Inconclusive;
  double last_value = 0.0;
  double growth = 0.0;
  int steps = 0;
  std::string note;
};

struct Verdict {
  Classification classification = Classification::Outside;
  Confidence confidence = Confidence::Low;
  std::vector<NeedleEvidence> evidence;
  /// Last indicator value of the deciding needle.
  double value = 0.0;
};

/// Converged on any candidate: Outside. Otherwise, any diverging candidate: InObstacleClosure.
/// Otherwise Outside with low confidence. Candidates are tried in order and the scan stops at the
/// first converged one.
Verdict classify_point(const DtnSolver& solver, const Point& x, const NeedlePolicy& policy,
                       std::shared_ptr<const FitContext> ctx = nullptr);

enum class PointStatus { Converged, DivergedPlus, DivergedMinus, Inconclusive, Rejected };

const char* to_string(PointStatus s);

struct GridSpec {
  double x0 = -1.0, x1 = 1.0, y0 = -1.0, y1 = 1.0;
  double h = 0.05;

  int nx() const;
  int ny() const;
  Point at(int ix, int iy) const;
};

enum class ScanMode { SideA, SideB };

struct FieldEntry {
  Point x{0.0, 0.0};
  double value = 0.0;
  PointStatus status = PointStatus::Rejected;
  bool inside = false;  // InObstacleClosure (Side B) or above the threshold (Side A)
  std::string needle;   // "straight", "extra:<k>" or "detour:<k>"
  std::string note;
};

struct IndicatorField {
  GridSpec grid;
  ScanMode mode = ScanMode::SideB;
  double threshold = 0.0;
  std::vector<FieldEntry> entries;  // row-major: iy outer, ix inner

  const FieldEntry& at(int ix, int iy) const { return entries.at(static_cast<std::size_t>(iy) * grid.nx() + ix); }
  /// 1 for inside, 0 otherwise; row-major like entries.
  std::vector<double> mask() const;
};

struct ScanOptions {
  ScanMode mode = ScanMode::SideB;
  /// Side A: |I| at or above this marks the blow-up region; 0 uses 10x the median converged |I|.
  double threshold = 0.0;
  int threads = 1;
};

/// Per-point failures become Rejected entries; the scan never aborts.
IndicatorField reconstruct_grid(const DtnSolver& solver, const GridSpec& grid, const NeedlePolicy& policy,
                                const ScanOptions& opts = {});

}  // namespace probe
