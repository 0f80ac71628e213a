#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "probe/config.hpp"
#include "probe/contour.hpp"
#include "probe/oracle.hpp"

namespace probe {

/// Forward solve failed; condition() carries the estimate when one is available (0 otherwise).
class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, double condition) : std::runtime_error(what), condition_(condition) {}
  double condition() const { return condition_; }

 private:
  double condition_;
};

/// The needle schedule could not be realized (rank-deficient or runaway fits).
class ScheduleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunOptions {
  std::optional<std::string> out;  // overrides the config's output directory
  int threads = 0;                 // 0: the config's value, then available parallelism
  std::string timestamp;           // manifest timestamp; empty: current UTC time
};

struct RunResult {
  std::string directory;
  std::vector<std::string> files;  // emitted files relative to the directory, manifest last
  std::vector<std::pair<std::string, std::string>> summary;
};

/// Executes the configured mode and writes its files plus effective_config.json and manifest.txt.
/// Library failures are rethrown as ConfigError, SolverError or ScheduleError.
RunResult run(const RunConfig& config, const RunOptions& opts = {});

/// Process exit code of each error category: 2 config, 3 solver, 4 schedule, 1 anything else.
int exit_code(const std::exception& e);
const char* error_category(const std::exception& e);

/// Comparison of a reconstruction mask with the true obstacle.
struct FieldScore {
  int checked = 0;     // grid points at least `margin` from the obstacle boundary and not rejected
  int mismatched = 0;
  int rejected = 0;
  double hausdorff = 0.0;  // mask contour vs obstacle boundary; infinity without a contour
  std::vector<Polyline> contour;
};

FieldScore score_field(const IndicatorField& field, const ObstacleScene& scene, double margin = 0.05);

/// The mask's 0.5 level set.
std::vector<Polyline> mask_contour(const IndicatorField& field);

/// True when the scene is a disk with (at most) one concentric disk obstacle of constant lambda.
std::optional<ConcentricScene> as_concentric(const ObstacleScene& scene);

}  // namespace probe
