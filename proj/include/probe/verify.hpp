#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "probe/indicator.hpp"

namespace probe {

/// The least-squares design matrix of estimate_lower_bound is rank-deficient.
class DegenerateRegression : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Checked claims. Names are stable identifiers used in reports and CSV files.
enum class Check {
  RatioDecay,          // l2/h1 over D decays while the gradient energy in D blows up
  ConeBlowup,          // gradient energy in a cone at the tip grows
  NeedleBlowup,        // gradient energy in a ball on the needle grows
  ObstacleEnergy,      // gradient energy in D grows for needles meeting D
  Convergence,         // Side-A series converges to the direct indicator
  Boundedness,         // sup |I| away from D is stable under refinement
  BoundaryBlowup,      // I(x) monotone along a ray towards the obstacle boundary
  DivergenceImpedance, // I_n -> +infinity for needles meeting D
  DivergenceSoft,      // I_n -> -infinity for needles meeting D
  EnergyIdentity,      // boundary pairing = -E(v; D) - E(w; Omega minus D), sound-soft
  LowerBound,          // sign of the fitted gradient-energy coefficient
  Nullity,             // obstacle-free scene gives I_n = 0
};

const char* to_string(Check c);

enum class CheckStatus { Pass, Fail, PremiseNotRealized, Error };

const char* to_string(CheckStatus s);

using Stats = std::vector<std::pair<std::string, double>>;

struct TheoremReport {
  Check check = Check::Nullity;
  std::string scenario;
  std::string subject;  // needle, tip or ray label within the scenario
  Stats stats;
  Stats thresholds;
  CheckStatus status = CheckStatus::Error;
  std::string note;

  bool pass() const { return status == CheckStatus::Pass; }
  /// Value of a named statistic; NaN when absent.
  double stat(const std::string& name) const;
};

struct VerifyThresholds {
  double growth = 10.0;          // blow-up factor for energies and divergence
  double ratio_factor = 0.2;     // final l2/h1 relative to its onset value
  double identity_gap = 1e-3;
  double convergence_rel = 0.05;
  double boundedness_rel = 0.10;
  double nullity_abs = 1e-8;
};

/// Ratio-decay verdict from the D companions: gradient growth h1.back()/h1.front() >= growth (else
/// PremiseNotRealized), ratio at the end <= ratio_factor times the ratio at growth onset (first n with
/// h1[n+1] > h1[n]), ratio strictly decreasing over the last half.
TheoremReport check_ratio_decay(const std::vector<double>& h1, const std::vector<double>& l2,
                                const VerifyThresholds& th = {});
/// From an indicator series with companions; PremiseNotRealized unless the needle meets D.
TheoremReport check_ratio_decay(const IndicatorSeries& series, const ObstacleScene& scene,
                                const VerifyThresholds& th = {});

/// Growth of an energy series: last / first >= growth and nondecreasing over the last half.
TheoremReport check_energy_growth(Check check, const std::vector<double>& energy, const VerifyThresholds& th = {});

/// Sound-soft identity from boundary data only. The volume energies of v over D and of w = u - v over
/// Omega minus D are reduced to obstacle-boundary integrals.
TheoremReport check_energy_identity(const DtnSolver& solver, const EntireSolution& v, const VerifyThresholds& th = {});

/// Relative gap of the identity and its two sides, for refinement studies.
struct IdentityParts {
  double lhs = 0.0;
  double energy_v = 0.0;  // E(v; D)
  double energy_w = 0.0;  // E(w; Omega minus D)
  double background = 0.0;  // Re of the pairing of dv/dnu with v on the outer boundary
  bool obstacle_free = false;
  double rhs() const { return -energy_v - energy_w; }
  double gap() const;
};
IdentityParts identity_parts(const DtnSolver& solver, const EntireSolution& v);

struct FittedBound {
  double c1 = 0.0;  // coefficient of ||grad v_n||^2 on D
  double c2 = 0.0;  // coefficient of ||v_n||^2 on D
  double residual = 0.0;
  int samples = 0;
};

/// Least squares I_n ~ c1 h1_n^2 + c2 l2_n^2 over the given samples. Throws DegenerateRegression.
FittedBound estimate_lower_bound(const std::vector<double>& values, const std::vector<double>& h1,
                                 const std::vector<double>& l2);
/// Over the second half of the series (companions required).
FittedBound estimate_lower_bound(const IndicatorSeries& series);

/// Random entire solution with coefficients of order `order`, unit coefficient norm.
EntireSolution random_entire(const Point& center, double k, int order, std::uint64_t seed);

struct Ray {
  int obstacle = 0;
  double t = 0.0;  // parameter of the boundary point a
};

struct SuiteScenario {
  std::string id;
  ObstacleScene scene;
  int m_outer = 256;
  int m_obstacle = 128;
  std::vector<ScheduleStep> schedule;          // convergence runs
  std::vector<ScheduleStep> blowup_schedule;   // needles meeting D
  FitOptions fit;
  int window = 3;
  DivergenceThresholds divergence;
  std::vector<Point> tips;     // off-obstacle tips with straight nearest-point needles
  std::vector<Needle> needles; // needles expected to meet D
  std::vector<Ray> rays;
  std::vector<double> ray_distances{0.2, 0.1, 0.05, 0.02};
  int identity_samples = 0;    // sound-soft scenes only
  int identity_order = 16;
  std::uint64_t seed = 1;
  VerifyThresholds thresholds;
};

/// Runs every applicable check; failures are recorded, never thrown. Scenarios run on up to `threads`
/// workers and the reports come back ordered by scenario id, then by check order within a scenario.
std::vector<TheoremReport> run_suite(const std::vector<SuiteScenario>& scenarios, int threads = 1);

/// Reports for one scenario.
std::vector<TheoremReport> run_scenario(const SuiteScenario& scenario);

}  // namespace probe
