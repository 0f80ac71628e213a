#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "probe/verify.hpp"

namespace probe {

/// Invalid configuration; field() names the offending key path (e.g. "scene.obstacles[0].shape.radius").
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& field, const std::string& what)
      : std::runtime_error(field.empty() ? what : field + ": " + what), field_(field) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

enum class Mode { ForwardCheck, NeedleFit, IndicatorSeries, SideAField, SideBField, VerifySuite };

const char* to_string(Mode m);
/// Throws ConfigError for unknown names.
Mode parse_mode(const std::string& name);

struct ScheduleConfig {
  int n_max = 10;
  double eps0 = 0.3;
  double q = 0.97;
  int m0 = 8;
  int m_step = 12;
  double alpha0 = 1e-10;
  double alpha_ratio = 0.5;

  std::vector<ScheduleStep> steps() const;
};

struct TestDisk {
  std::string name;
  Point center{0.0, 0.0};
  double radius = 0.1;
};

struct RunConfig {
  std::string id = "run";
  Mode mode = Mode::ForwardCheck;
  std::uint64_t seed = 1;
  std::string output = "out";
  int threads = 0;  // 0: available parallelism

  ObstacleScene scene;
  int m_outer = 512;
  int m_obstacle = 128;

  ScheduleConfig schedule;
  std::optional<ScheduleConfig> blowup_schedule;  // needles meeting D; defaults to schedule
  double cloud_spacing = 0.02;
  int boundary_nodes = 512;
  std::optional<Point> basis_center;
  double coef_limit = 1e12;
  double residual_growth_limit = 10.0;
  std::vector<TestDisk> test_sets;

  int window = 3;
  DivergenceThresholds divergence;
  VerifyThresholds thresholds;

  GridSpec grid;
  double side_a_threshold = 0.0;
  std::vector<double> extra_angles;
  std::vector<Needle> detours;

  std::vector<Point> tips;
  std::vector<Needle> needles;
  std::vector<Ray> rays;
  std::vector<double> ray_distances{0.2, 0.1, 0.05, 0.02};
  int identity_samples = 0;
  int identity_order = 16;

  FitOptions fit_options() const;
  NeedlePolicy policy() const;
  SuiteScenario scenario() const;
};

/// Parses a JSON document. Unknown keys, wrong types and invalid values throw ConfigError.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

/// Effective configuration with every default resolved; parse_config(effective_config(c)) reproduces c.
std::string effective_config(const RunConfig& c);

/// Documented defaults, one "key = value" line each, for --help.
std::string config_defaults_help();

}  // namespace probe
