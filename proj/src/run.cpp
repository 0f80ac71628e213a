#include "probe/run.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <limits>

#include "probe/emit.hpp"
#include "probe/oracle.hpp"
#include "probe/parallel.hpp"

namespace probe {

namespace fs = std::filesystem;

namespace {

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

class Emitter {
 public:
  explicit Emitter(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

  void file(const std::string& name, const std::string& bytes) {
    write_file(dir_ / name, bytes);
    files_.push_back(name);
  }

  const fs::path& dir() const { return dir_; }
  const std::vector<std::string>& files() const { return files_; }

 private:
  fs::path dir_;
  std::vector<std::string> files_;
};

DtnSolver build_solver(const RunConfig& c) { return DtnSolver::build(c.scene, c.m_outer, c.m_obstacle); }

std::string label(const Needle& n) {
  std::string s;
  for (const Point& p : n.vertices) s += (s.empty() ? "" : " ") + format_double(p.x()) + " " + format_double(p.y());
  return s;
}

// Needles of the run in file order: the configured needles, then nearest-point needles of the tips.
std::vector<std::pair<Needle, bool>> run_needles(const RunConfig& c) {
  std::vector<std::pair<Needle, bool>> out;
  for (const auto& n : c.needles) out.emplace_back(n, true);
  for (const auto& x : c.tips) out.emplace_back(nearest_point_needle(c.scene.outer, x), false);
  return out;
}

int schedule_order(const RunConfig& c) {
  int m = 0;
  for (const auto& s : c.schedule.steps()) m = std::max(m, s.order);
  if (c.blowup_schedule) {
    for (const auto& s : c.blowup_schedule->steps()) m = std::max(m, s.order);
  }
  return m;
}

void forward_check(const RunConfig& c, Emitter& em, RunResult& res) {
  const auto cs = as_concentric(c.scene);
  if (!cs) throw ConfigError("scene", "forward-check needs a disk domain with at most one concentric disk obstacle of constant lambda");
  const DtnSolver solver = build_solver(c);
  const DiscretizedCurve& outer = solver.outer();
  struct Data {
    const char* name;
    Complex (*f)(double);
  };
  const Data data[] = {
      {"mode0", [](double) { return Complex(1.0, 0.0); }},
      {"mode3", [](double t) { return std::exp(Complex(0.0, 3.0 * t)); }},
      {"mode-5", [](double t) { return std::exp(Complex(0.0, -5.0 * t)); }},
      {"mixture", [](double t) { return std::exp(Complex(0.0, 2.0 * t)) + 0.3 * std::cos(5.0 * t) + Complex(0.0, 0.1) * std::sin(t); }},
  };
  std::string csv = "data,j,t,re_num,im_num,re_oracle,im_oracle,abs_err\n";
  double worst = 0.0;
  for (const Data& d : data) {
    CVector f(outer.size);
    for (int j = 0; j < outer.size; ++j) f[j] = d.f(outer.t[j]);
    const CVector num = solver.dtn(f);
    const CVector ref = oracle_neumann(*cs, f, std::min(64, outer.size / 2 - 1));
    for (int j = 0; j < outer.size; ++j) {
      csv += std::string(d.name) + "," + std::to_string(j) + "," + format_double(outer.t[j]) + "," +
             format_double(num[j].real()) + "," + format_double(num[j].imag()) + "," + format_double(ref[j].real()) +
             "," + format_double(ref[j].imag()) + "," + format_double(std::abs(num[j] - ref[j])) + "\n";
    }
    const double rel = (num - ref).norm() / ref.norm();
    worst = std::max(worst, rel);
    res.summary.emplace_back(std::string("rel_l2_") + d.name, format_double(rel));
  }
  res.summary.emplace_back("rel_l2_max", format_double(worst));
  res.summary.emplace_back("condition_estimate", format_double(solver.condition_estimate()));
  em.file("forward_check.csv", csv);
}

void needle_runs(const RunConfig& c, bool series, Emitter& em, RunResult& res) {
  const auto needles = run_needles(c);
  if (needles.empty()) throw ConfigError("probes", "needle-fit and indicator-series need probes.needles or probes.tips");
  const FitOptions fo = c.fit_options();
  std::vector<std::string> names;
  for (const auto& t : c.test_sets) names.push_back(t.name);
  const auto ctx = std::make_shared<const FitContext>(c.scene.outer, c.scene.k, schedule_order(c), fo);
  std::optional<DtnSolver> solver;
  if (series) solver.emplace(build_solver(c));
  const auto plain = c.schedule.steps();
  const auto blowup = c.blowup_schedule ? c.blowup_schedule->steps() : plain;
  for (std::size_t i = 0; i < needles.size(); ++i) {
    const auto& [needle, configured] = needles[i];
    const auto& schedule = configured ? blowup : plain;
    const NeedleSequence seq = build_needle_sequence(ctx, needle, schedule, fo);
    if (seq.elements.empty()) throw ScheduleError("needle " + std::to_string(i) + ": " + seq.stop_reason);
    const std::string key = "needle" + std::to_string(i);
    res.summary.emplace_back(key, label(needle));
    if (!c.scene.empty()) res.summary.emplace_back(key + ".class", to_string(classify_needle_vs_obstacle(needle, c.scene)));
    res.summary.emplace_back(key + ".stop", seq.stop_reason.empty() ? "completed" : seq.stop_reason);
    if (!series) {
      em.file("fit_" + std::to_string(i) + ".csv", fit_report_csv(seq, names));
      continue;
    }
    const IndicatorSeries s = indicator_series(*solver, seq);
    em.file("series_" + std::to_string(i) + ".csv", series_csv(s, schedule));
    const auto values = s.values();
    if (static_cast<int>(values.size()) >= 2 * c.window) {
      res.summary.emplace_back(key + ".status", to_string(detect_divergence(values, c.window, c.divergence)));
    }
    if (!c.scene.empty() && !c.scene.obstacle_containing(needle.tip())) {
      try {
        res.summary.emplace_back(key + ".I_direct", format_double(indicator_direct(*solver, needle.tip())));
      } catch (const TipTooClose& e) {
        res.summary.emplace_back(key + ".I_direct", std::string("unavailable: ") + e.what());
      }
    }
  }
}

void field_run(const RunConfig& c, ScanMode mode, int threads, Emitter& em, RunResult& res) {
  const DtnSolver solver = build_solver(c);
  NeedlePolicy policy = c.policy();
  if (mode == ScanMode::SideA) policy.schedule = c.schedule.steps();
  ScanOptions so;
  so.mode = mode;
  so.threshold = c.side_a_threshold;
  so.threads = threads;
  const IndicatorField field = reconstruct_grid(solver, c.grid, policy, so);
  em.file("field.csv", field_csv(field));
  em.file("field_values.txt", grid_matrix(field, false));
  em.file("field_mask.txt", grid_matrix(field, true));
  const FieldScore score = score_field(field, c.scene);
  em.file("contour.csv", contour_csv(score.contour));
  int inside = 0;
  for (const auto& e : field.entries) inside += e.inside;
  res.summary.emplace_back("grid_points", std::to_string(field.entries.size()));
  res.summary.emplace_back("inside_points", std::to_string(inside));
  res.summary.emplace_back("rejected_points", std::to_string(score.rejected));
  res.summary.emplace_back("threshold", format_double(field.threshold));
  res.summary.emplace_back("contour_polylines", std::to_string(score.contour.size()));
  if (!c.scene.empty()) {
    res.summary.emplace_back("truth_checked", std::to_string(score.checked));
    res.summary.emplace_back("truth_mismatched", std::to_string(score.mismatched));
    res.summary.emplace_back("hausdorff", format_double(score.hausdorff));
  }
}

void suite_run(const RunConfig& c, int threads, Emitter& em, RunResult& res) {
  const auto reports = run_suite({c.scenario()}, threads);
  em.file("suite.csv", suite_csv(reports));
  int counts[4] = {0, 0, 0, 0};
  for (const auto& r : reports) ++counts[static_cast<int>(r.status)];
  res.summary.emplace_back("reports", std::to_string(reports.size()));
  for (int i = 0; i < 4; ++i) res.summary.emplace_back(to_string(static_cast<CheckStatus>(i)), std::to_string(counts[i]));
}

}  // namespace

std::optional<ConcentricScene> as_concentric(const ObstacleScene& scene) {
  const Circle* outer = scene.outer.as_circle();
  if (!outer || scene.obstacles.size() > 1) return std::nullopt;
  ConcentricScene c;
  c.R = outer->radius;
  c.k = scene.k;
  if (scene.obstacles.size() == 1) {
    const Obstacle& ob = scene.obstacles[0];
    const Circle* inner = ob.shape.as_circle();
    if (!inner || (inner->center - outer->center).norm() > 1e-14 || !ob.lambda.modes.empty()) return std::nullopt;
    c.rho = inner->radius;
    c.obstacle = ModeObstacle{scene.kind, ob.lambda.constant};
  }
  return c;
}

std::vector<Polyline> mask_contour(const IndicatorField& field) {
  if (field.entries.empty()) return {};
  return marching_squares(field.mask(), field.grid.nx(), field.grid.ny(), field.grid.x0, field.grid.y0, field.grid.h, 0.5);
}

FieldScore score_field(const IndicatorField& field, const ObstacleScene& scene, double margin) {
  FieldScore s;
  for (const auto& e : field.entries) {
    if (e.status == PointStatus::Rejected) {
      ++s.rejected;
      continue;
    }
    if (scene.empty()) {
      ++s.checked;
      s.mismatched += e.inside;
      continue;
    }
    if (scene.dist_to_obstacle_boundary(e.x) < margin) continue;
    ++s.checked;
    const bool truth = scene.obstacle_containing(e.x).has_value();
    s.mismatched += truth != e.inside;
  }
  s.contour = mask_contour(field);
  if (scene.empty()) {
    s.hausdorff = s.contour.empty() ? 0.0 : std::numeric_limits<double>::infinity();
    return s;
  }
  std::vector<Point> truth;
  for (const auto& ob : scene.obstacles) {
    const auto pts = sample_curve(ob.shape, 512);
    truth.insert(truth.end(), pts.begin(), pts.end());
  }
  s.hausdorff = hausdorff_distance(sample_polylines(s.contour, 0.25 * field.grid.h), truth);
  return s;
}

RunResult run(const RunConfig& config, const RunOptions& opts) {
  RunResult res;
  const fs::path dir = opts.out ? fs::path(*opts.out) : fs::path(config.output);
  const int threads = opts.threads > 0 ? opts.threads : (config.threads > 0 ? config.threads : default_threads());
  Emitter em(dir);
  res.directory = dir.string();
  res.summary.emplace_back("id", config.id);
  res.summary.emplace_back("mode", to_string(config.mode));
  res.summary.emplace_back("seed", std::to_string(config.seed));
  try {
    switch (config.mode) {
      case Mode::ForwardCheck: forward_check(config, em, res); break;
      case Mode::NeedleFit: needle_runs(config, false, em, res); break;
      case Mode::IndicatorSeries: needle_runs(config, true, em, res); break;
      case Mode::SideAField: field_run(config, ScanMode::SideA, threads, em, res); break;
      case Mode::SideBField: field_run(config, ScanMode::SideB, threads, em, res); break;
      case Mode::VerifySuite: suite_run(config, threads, em, res); break;
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const SolverError&) {
    throw;
  } catch (const ScheduleError&) {
    throw;
  } catch (const IllConditioned& e) {
    throw SolverError(std::string(e.what()) + " (condition estimate " + format_double(e.condition()) +
                          "; change k or refine solver.m_outer / solver.m_obstacle)",
                      e.condition());
  } catch (const TipTooClose& e) {
    throw SolverError(std::string(e.what()) + " (move the tip away from the obstacle)", 0.0);
  } catch (const ModeResonance& e) {
    throw SolverError(std::string(e.what()) + " (k is an interior resonance; change scene.k)", 0.0);
  } catch (const TailTooLarge& e) {
    throw SolverError(std::string(e.what()) + " (raise solver.m_outer)", 0.0);
  } catch (const RankDeficient& e) {
    throw ScheduleError(std::string(e.what()) + " (lower the schedule orders or refine fit.cloud_spacing)");
  } catch (const ScheduleTooAggressive& e) {
    throw ScheduleError(std::string(e.what()) + " (slow down the schedule: larger q or smaller m_step)");
  }
  em.file("report.txt", report_text(res.summary));
  em.file("effective_config.json", effective_config(config));
  const std::string manifest = manifest_text(dir, em.files(), opts.timestamp.empty() ? utc_now() : opts.timestamp);
  write_file(dir / "manifest.txt", manifest);
  res.files = em.files();
  res.files.push_back("manifest.txt");
  return res;
}

const char* error_category(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return "ConfigError";
  if (dynamic_cast<const SolverError*>(&e)) return "SolverError";
  if (dynamic_cast<const ScheduleError*>(&e)) return "ScheduleError";
  return "Error";
}

int exit_code(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return 2;
  if (dynamic_cast<const SolverError*>(&e)) return 3;
  if (dynamic_cast<const ScheduleError*>(&e)) return 4;
  return 1;
}

}  // namespace probe
