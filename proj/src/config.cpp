#include "probe/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace probe {

using json = nlohmann::ordered_json;

namespace {

const char* const kModeNames[] = {"forward-check", "needle-fit", "indicator-series",
                                  "side-a-field", "side-b-field", "verify-suite"};

// Object reader that remembers which keys were consumed and rejects the rest.
class Obj {
 public:
  Obj(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j.is_object()) throw ConfigError(path_, "expected an object");
  }

  std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  bool has(const std::string& key) const { return j_.contains(key); }

  const json* raw(const std::string& key) {
    used_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  double num(const std::string& key, double def) {
    const json* v = raw(key);
    if (!v) return def;
    if (!v->is_number()) throw ConfigError(at(key), "expected a number");
    return v->get<double>();
  }

  double positive(const std::string& key, double def) {
    const double v = num(key, def);
    if (!(v > 0.0)) throw ConfigError(at(key), "must be positive");
    return v;
  }

  long long integer(const std::string& key, long long def) {
    const json* v = raw(key);
    if (!v) return def;
    if (!v->is_number_integer()) throw ConfigError(at(key), "expected an integer");
    return v->get<long long>();
  }

  std::uint64_t unsigned_integer(const std::string& key, std::uint64_t def) {
    const json* v = raw(key);
    if (!v) return def;
    if (!v->is_number_unsigned()) throw ConfigError(at(key), "expected a non-negative integer");
    return v->get<std::uint64_t>();
  }

  std::string str(const std::string& key, const std::string& def) {
    const json* v = raw(key);
    if (!v) return def;
    if (!v->is_string()) throw ConfigError(at(key), "expected a string");
    return v->get<std::string>();
  }

  bool flag(const std::string& key, bool def) {
    const json* v = raw(key);
    if (!v) return def;
    if (!v->is_boolean()) throw ConfigError(at(key), "expected true or false");
    return v->get<bool>();
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!used_.count(it.key())) throw ConfigError(at(it.key()), "unknown key");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

Point point(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
    throw ConfigError(path, "expected [x, y]");
  }
  return {j[0].get<double>(), j[1].get<double>()};
}

std::vector<double> numbers(const json& j, const std::string& path) {
  if (!j.is_array()) throw ConfigError(path, "expected an array of numbers");
  std::vector<double> out;
  for (const auto& v : j) {
    if (!v.is_number()) throw ConfigError(path, "expected an array of numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

const json& array(const json* j, const std::string& path) {
  if (!j->is_array()) throw ConfigError(path, "expected an array");
  return *j;
}

Curve parse_shape(const json& j, const std::string& path) {
  Obj o(j, path);
  const std::string type = o.str("type", "");
  Curve c;
  if (type == "circle") {
    Circle s;
    if (const json* v = o.raw("center")) s.center = point(*v, o.at("center"));
    s.radius = o.positive("radius", 1.0);
    c = Curve(s);
  } else if (type == "ellipse") {
    Ellipse s;
    if (const json* v = o.raw("center")) s.center = point(*v, o.at("center"));
    s.semi_a = o.positive("semi_a", 1.0);
    s.semi_b = o.positive("semi_b", 1.0);
    s.rotation = o.num("rotation", 0.0);
    c = Curve(s);
  } else if (type == "kite") {
    Point center(0.0, 0.0);
    if (const json* v = o.raw("center")) center = point(*v, o.at("center"));
    c = Curve::kite(center, o.positive("scale", 1.0));
  } else if (type == "fourier") {
    FourierCurve s;
    if (const json* v = o.raw("center")) s.center = point(*v, o.at("center"));
    for (auto [key, dst] : {std::pair{"x_cos", &s.x_cos}, std::pair{"x_sin", &s.x_sin},
                            std::pair{"y_cos", &s.y_cos}, std::pair{"y_sin", &s.y_sin}}) {
      if (const json* v = o.raw(key)) *dst = numbers(*v, o.at(key));
    }
    c = Curve(s);
  } else {
    throw ConfigError(o.at("type"), "expected circle, ellipse, kite or fourier");
  }
  o.finish();
  if (auto err = validate_curve(c)) throw ConfigError(path, *err);
  return c;
}

json shape_json(const Curve& c) {
  json j;
  const auto pt = [](const Point& p) { return json::array({p.x(), p.y()}); };
  if (const auto* s = std::get_if<Circle>(&c.shape())) {
    j = {{"type", "circle"}, {"center", pt(s->center)}, {"radius", s->radius}};
  } else if (const auto* e = std::get_if<Ellipse>(&c.shape())) {
    j = {{"type", "ellipse"}, {"center", pt(e->center)}, {"semi_a", e->semi_a}, {"semi_b", e->semi_b},
         {"rotation", e->rotation}};
  } else {
    const auto& s = std::get<FourierCurve>(c.shape());
    j = {{"type", "fourier"}, {"center", pt(s.center)}, {"x_cos", s.x_cos}, {"x_sin", s.x_sin},
         {"y_cos", s.y_cos}, {"y_sin", s.y_sin}};
  }
  return j;
}

Complex complex_value(const json& j, const std::string& path) {
  if (j.is_number()) return {j.get<double>(), 0.0};
  const Point p = point(j, path);
  return {p.x(), p.y()};
}

ImpedanceFunction parse_lambda(const json& j, const std::string& path) {
  ImpedanceFunction f;
  f.modes.clear();
  if (!j.is_object()) {
    f.constant = complex_value(j, path);
    return f;
  }
  Obj o(j, path);
  if (const json* v = o.raw("constant")) f.constant = complex_value(*v, o.at("constant"));
  if (const json* v = o.raw("modes")) {
    for (const auto& m : array(v, o.at("modes"))) {
      if (!m.is_array() || m.size() != 3 || !m[0].is_number_integer() || !m[1].is_number() || !m[2].is_number()) {
        throw ConfigError(o.at("modes"), "expected [j, re, im] entries");
      }
      f.modes.emplace_back(m[0].get<int>(), Complex(m[1].get<double>(), m[2].get<double>()));
    }
  }
  o.finish();
  return f;
}

json lambda_json(const ImpedanceFunction& f) {
  json modes = json::array();
  for (const auto& [m, c] : f.modes) modes.push_back(json::array({m, c.real(), c.imag()}));
  return {{"constant", json::array({f.constant.real(), f.constant.imag()})}, {"modes", modes}};
}

Needle parse_needle(const json& j, const std::string& path, const Curve& outer) {
  if (!j.is_array() || j.size() < 2) throw ConfigError(path, "expected at least two [x, y] vertices");
  Needle n;
  for (std::size_t i = 0; i < j.size(); ++i) n.vertices.push_back(point(j[i], path + "[" + std::to_string(i) + "]"));
  try {
    n = snap_needle(n, outer);
  } catch (const std::exception& e) {
    throw ConfigError(path, e.what());
  }
  if (auto err = validate_needle(n, outer)) throw ConfigError(path, *err);
  return n;
}

json needle_json(const Needle& n) {
  json j = json::array();
  for (const Point& p : n.vertices) j.push_back(json::array({p.x(), p.y()}));
  return j;
}

ScheduleConfig parse_schedule(const json& j, const std::string& path) {
  Obj o(j, path);
  ScheduleConfig s;
  s.n_max = static_cast<int>(o.integer("n_max", s.n_max));
  s.eps0 = o.num("eps0", s.eps0);
  s.q = o.num("q", s.q);
  s.m0 = static_cast<int>(o.integer("m0", s.m0));
  s.m_step = static_cast<int>(o.integer("m_step", s.m_step));
  s.alpha0 = o.num("alpha0", s.alpha0);
  s.alpha_ratio = o.num("alpha_ratio", s.alpha_ratio);
  o.finish();
  try {
    s.steps();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path, e.what());
  }
  return s;
}

json schedule_json(const ScheduleConfig& s) {
  return {{"n_max", s.n_max}, {"eps0", s.eps0}, {"q", s.q}, {"m0", s.m0},
          {"m_step", s.m_step}, {"alpha0", s.alpha0}, {"alpha_ratio", s.alpha_ratio}};
}

void parse_scene(const json& j, RunConfig& c) {
  Obj o(j, "scene");
  ObstacleScene& s = c.scene;
  s.k = o.positive("k", 2.0);
  const std::string bc = o.str("bc", "impedance");
  if (bc == "impedance") {
    s.kind = BoundaryKind::Impedance;
  } else if (bc == "sound-soft") {
    s.kind = BoundaryKind::SoundSoft;
  } else {
    throw ConfigError("scene.bc", "expected impedance or sound-soft");
  }
  if (const json* v = o.raw("domain")) {
    s.outer = parse_shape(*v, "scene.domain");
  } else {
    s.outer = Curve(Circle{{0.0, 0.0}, 1.0});
  }
  s.obstacles.clear();
  if (const json* v = o.raw("obstacles")) {
    const json& arr = array(v, "scene.obstacles");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string p = "scene.obstacles[" + std::to_string(i) + "]";
      Obj ob(arr[i], p);
      Obstacle obstacle;
      const json* shape = ob.raw("shape");
      if (!shape) throw ConfigError(p + ".shape", "missing");
      obstacle.shape = parse_shape(*shape, p + ".shape");
      if (const json* l = ob.raw("lambda")) obstacle.lambda = parse_lambda(*l, p + ".lambda");
      ob.finish();
      s.obstacles.push_back(obstacle);
    }
  }
  o.finish();
  if (auto err = validate_scene(s)) throw ConfigError("scene", *err);
}

void check_resolution(int m, const std::string& path) {
  if (m < 16 || m % 2) throw ConfigError(path, "must be even and at least 16");
}

}  // namespace

const char* to_string(Mode m) { return kModeNames[static_cast<int>(m)]; }

Mode parse_mode(const std::string& name) {
  for (int i = 0; i < 6; ++i) {
    if (name == kModeNames[i]) return static_cast<Mode>(i);
  }
  throw ConfigError("mode", "unknown mode '" + name + "'");
}

std::vector<ScheduleStep> ScheduleConfig::steps() const {
  return default_schedule(n_max, eps0, q, m0, m_step, alpha0, alpha_ratio);
}

FitOptions RunConfig::fit_options() const {
  FitOptions f;
  f.cloud_spacing = cloud_spacing;
  f.boundary_nodes = boundary_nodes;
  f.center = basis_center;
  f.coef_limit = coef_limit;
  f.residual_growth_limit = residual_growth_limit;
  for (const auto& t : test_sets) f.test_sets.push_back({t.name, disk_rule(t.center, t.radius, 16, 64)});
  return f;
}

NeedlePolicy RunConfig::policy() const {
  NeedlePolicy p;
  p.schedule = (blowup_schedule ? *blowup_schedule : schedule).steps();
  p.fit = fit_options();
  p.window = window;
  p.thresholds = divergence;
  p.extra_angles = extra_angles;
  p.detours = detours;
  return p;
}

SuiteScenario RunConfig::scenario() const {
  SuiteScenario s;
  s.id = id;
  s.scene = scene;
  s.m_outer = m_outer;
  s.m_obstacle = m_obstacle;
  s.schedule = schedule.steps();
  s.blowup_schedule = (blowup_schedule ? *blowup_schedule : schedule).steps();
  s.fit = fit_options();
  s.window = window;
  s.divergence = divergence;
  s.tips = tips;
  s.needles = needles;
  s.rays = rays;
  s.ray_distances = ray_distances;
  s.identity_samples = identity_samples;
  s.identity_order = identity_order;
  s.seed = seed;
  s.thresholds = thresholds;
  return s;
}

RunConfig parse_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("", std::string("malformed JSON: ") + e.what());
  }
  RunConfig c;
  Obj o(root, "");
  c.id = o.str("id", c.id);
  c.mode = parse_mode(o.str("mode", to_string(c.mode)));
  c.seed = o.unsigned_integer("seed", c.seed);
  c.output = o.str("output", c.output);
  c.threads = static_cast<int>(o.integer("threads", c.threads));
  if (c.threads < 0) throw ConfigError("threads", "must be non-negative");

  const json* scene = o.raw("scene");
  parse_scene(scene ? *scene : json::object(), c);

  if (const json* v = o.raw("solver")) {
    Obj s(*v, "solver");
    c.m_outer = static_cast<int>(s.integer("m_outer", c.m_outer));
    c.m_obstacle = static_cast<int>(s.integer("m_obstacle", c.m_obstacle));
    s.finish();
  }
  check_resolution(c.m_outer, "solver.m_outer");
  check_resolution(c.m_obstacle, "solver.m_obstacle");

  if (const json* v = o.raw("schedule")) c.schedule = parse_schedule(*v, "schedule");
  if (const json* v = o.raw("blowup_schedule")) c.blowup_schedule = parse_schedule(*v, "blowup_schedule");

  if (const json* v = o.raw("fit")) {
    Obj f(*v, "fit");
    c.cloud_spacing = f.positive("cloud_spacing", c.cloud_spacing);
    c.boundary_nodes = static_cast<int>(f.integer("boundary_nodes", c.boundary_nodes));
    if (c.boundary_nodes < 16 || c.boundary_nodes % 2) throw ConfigError("fit.boundary_nodes", "must be even and at least 16");
    if (const json* p = f.raw("center")) c.basis_center = point(*p, "fit.center");
    c.coef_limit = f.positive("coef_limit", c.coef_limit);
    c.residual_growth_limit = f.positive("residual_growth_limit", c.residual_growth_limit);
    if (const json* t = f.raw("test_sets")) {
      const json& arr = array(t, "fit.test_sets");
      for (std::size_t i = 0; i < arr.size(); ++i) {
        const std::string p = "fit.test_sets[" + std::to_string(i) + "]";
        Obj d(arr[i], p);
        TestDisk disk;
        disk.name = d.str("name", "K" + std::to_string(i + 1));
        if (const json* ctr = d.raw("center")) disk.center = point(*ctr, p + ".center");
        disk.radius = d.positive("radius", disk.radius);
        d.finish();
        c.test_sets.push_back(disk);
      }
    }
    f.finish();
  }

  if (const json* v = o.raw("divergence")) {
    Obj d(*v, "divergence");
    c.window = static_cast<int>(d.integer("window", c.window));
    if (c.window < 2) throw ConfigError("divergence.window", "must be at least 2");
    c.divergence.tau_rel = d.positive("tau_rel", c.divergence.tau_rel);
    c.divergence.g_min = d.positive("g_min", c.divergence.g_min);
    c.divergence.a_min = d.num("a_min", c.divergence.a_min);
    if (c.divergence.a_min < 0.0) throw ConfigError("divergence.a_min", "must be non-negative");
    d.finish();
  }

  if (const json* v = o.raw("thresholds")) {
    Obj t(*v, "thresholds");
    VerifyThresholds& th = c.thresholds;
    th.growth = t.positive("growth", th.growth);
    th.ratio_factor = t.positive("ratio_factor", th.ratio_factor);
    th.identity_gap = t.positive("identity_gap", th.identity_gap);
    th.convergence_rel = t.positive("convergence_rel", th.convergence_rel);
    th.boundedness_rel = t.positive("boundedness_rel", th.boundedness_rel);
    th.nullity_abs = t.positive("nullity_abs", th.nullity_abs);
    t.finish();
  }

  if (const json* v = o.raw("grid")) {
    Obj g(*v, "grid");
    c.grid.x0 = g.num("x0", c.grid.x0);
    c.grid.x1 = g.num("x1", c.grid.x1);
    c.grid.y0 = g.num("y0", c.grid.y0);
    c.grid.y1 = g.num("y1", c.grid.y1);
    c.grid.h = g.positive("h", c.grid.h);
    if (c.grid.x1 < c.grid.x0) throw ConfigError("grid.x1", "must not be below x0");
    if (c.grid.y1 < c.grid.y0) throw ConfigError("grid.y1", "must not be below y0");
    c.side_a_threshold = g.num("side_a_threshold", c.side_a_threshold);
    if (c.side_a_threshold < 0.0) throw ConfigError("grid.side_a_threshold", "must be non-negative");
    if (const json* a = g.raw("extra_angles")) c.extra_angles = numbers(*a, "grid.extra_angles");
    if (const json* d = g.raw("detours")) {
      const json& arr = array(d, "grid.detours");
      for (std::size_t i = 0; i < arr.size(); ++i) {
        c.detours.push_back(parse_needle(arr[i], "grid.detours[" + std::to_string(i) + "]", c.scene.outer));
      }
    }
    g.finish();
  }

  if (const json* v = o.raw("probes")) {
    Obj p(*v, "probes");
    if (const json* t = p.raw("tips")) {
      const json& arr = array(t, "probes.tips");
      for (std::size_t i = 0; i < arr.size(); ++i) {
        const std::string path = "probes.tips[" + std::to_string(i) + "]";
        const Point x = point(arr[i], path);
        if (!c.scene.outer.contains(x)) throw ConfigError(path, "tip must lie inside the domain");
        c.tips.push_back(x);
      }
    }
    if (const json* n = p.raw("needles")) {
      const json& arr = array(n, "probes.needles");
      for (std::size_t i = 0; i < arr.size(); ++i) {
        c.needles.push_back(parse_needle(arr[i], "probes.needles[" + std::to_string(i) + "]", c.scene.outer));
      }
    }
    if (const json* r = p.raw("rays")) {
      const json& arr = array(r, "probes.rays");
      for (std::size_t i = 0; i < arr.size(); ++i) {
        const std::string path = "probes.rays[" + std::to_string(i) + "]";
        Obj ray(arr[i], path);
        Ray out;
        out.obstacle = static_cast<int>(ray.integer("obstacle", 0));
        if (out.obstacle < 0 || out.obstacle >= static_cast<int>(c.scene.obstacles.size())) {
          throw ConfigError(path + ".obstacle", "no such obstacle");
        }
        out.t = ray.num("t", 0.0);
        ray.finish();
        c.rays.push_back(out);
      }
    }
    if (const json* d = p.raw("ray_distances")) c.ray_distances = numbers(*d, "probes.ray_distances");
    for (double d : c.ray_distances) {
      if (!(d > 0.0)) throw ConfigError("probes.ray_distances", "distances must be positive");
    }
    c.identity_samples = static_cast<int>(p.integer("identity_samples", c.identity_samples));
    if (c.identity_samples < 0) throw ConfigError("probes.identity_samples", "must be non-negative");
    c.identity_order = static_cast<int>(p.integer("identity_order", c.identity_order));
    if (c.identity_order < 0) throw ConfigError("probes.identity_order", "must be non-negative");
    p.finish();
  }
  o.finish();

  // Fitted elements are paired with the solver on the outer nodes, which alias orders at or above m_outer / 2.
  const bool fits = c.mode == Mode::IndicatorSeries || c.mode == Mode::SideAField || c.mode == Mode::SideBField ||
                    (c.mode == Mode::VerifySuite && (!c.tips.empty() || !c.needles.empty()));
  if (fits) {
    int top = c.schedule.m0 + c.schedule.n_max * c.schedule.m_step;
    if (c.blowup_schedule) top = std::max(top, c.blowup_schedule->m0 + c.blowup_schedule->n_max * c.blowup_schedule->m_step);
    if (c.m_outer <= 2 * top) {
      throw ConfigError("solver.m_outer", "must exceed twice the largest schedule order (" + std::to_string(top) +
                                              "); raise m_outer or lower schedule.m_step");
    }
  }
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("", "cannot read config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string effective_config(const RunConfig& c) {
  const auto pt = [](const Point& p) { return json::array({p.x(), p.y()}); };
  json root;
  root["id"] = c.id;
  root["mode"] = to_string(c.mode);
  root["seed"] = c.seed;
  root["output"] = c.output;
  root["threads"] = c.threads;
  json obstacles = json::array();
  for (const auto& ob : c.scene.obstacles) obstacles.push_back({{"shape", shape_json(ob.shape)}, {"lambda", lambda_json(ob.lambda)}});
  root["scene"] = {{"k", c.scene.k},
                   {"bc", c.scene.kind == BoundaryKind::Impedance ? "impedance" : "sound-soft"},
                   {"domain", shape_json(c.scene.outer)},
                   {"obstacles", obstacles}};
  root["solver"] = {{"m_outer", c.m_outer}, {"m_obstacle", c.m_obstacle}};
  root["schedule"] = schedule_json(c.schedule);
  if (c.blowup_schedule) root["blowup_schedule"] = schedule_json(*c.blowup_schedule);
  json tests = json::array();
  for (const auto& t : c.test_sets) tests.push_back({{"name", t.name}, {"center", pt(t.center)}, {"radius", t.radius}});
  root["fit"] = {{"cloud_spacing", c.cloud_spacing}, {"boundary_nodes", c.boundary_nodes}};
  if (c.basis_center) root["fit"]["center"] = pt(*c.basis_center);
  root["fit"]["coef_limit"] = c.coef_limit;
  root["fit"]["residual_growth_limit"] = c.residual_growth_limit;
  root["fit"]["test_sets"] = tests;
  root["divergence"] = {{"window", c.window}, {"tau_rel", c.divergence.tau_rel}, {"g_min", c.divergence.g_min},
                        {"a_min", c.divergence.a_min}};
  root["thresholds"] = {{"growth", c.thresholds.growth},
                        {"ratio_factor", c.thresholds.ratio_factor},
                        {"identity_gap", c.thresholds.identity_gap},
                        {"convergence_rel", c.thresholds.convergence_rel},
                        {"boundedness_rel", c.thresholds.boundedness_rel},
                        {"nullity_abs", c.thresholds.nullity_abs}};
  json detours = json::array();
  for (const auto& d : c.detours) detours.push_back(needle_json(d));
  root["grid"] = {{"x0", c.grid.x0}, {"x1", c.grid.x1}, {"y0", c.grid.y0}, {"y1", c.grid.y1}, {"h", c.grid.h},
                  {"side_a_threshold", c.side_a_threshold}, {"extra_angles", c.extra_angles}, {"detours", detours}};
  json tips = json::array(), needles = json::array(), rays = json::array();
  for (const auto& x : c.tips) tips.push_back(pt(x));
  for (const auto& n : c.needles) needles.push_back(needle_json(n));
  for (const auto& r : c.rays) rays.push_back({{"obstacle", r.obstacle}, {"t", r.t}});
  root["probes"] = {{"tips", tips},
                    {"needles", needles},
                    {"rays", rays},
                    {"ray_distances", c.ray_distances},
                    {"identity_samples", c.identity_samples},
                    {"identity_order", c.identity_order}};
  return root.dump(2) + "\n";
}

std::string config_defaults_help() {
  const std::string s = effective_config(parse_config("{}"));
  return "Config keys with their defaults (JSON; unknown keys are rejected):\n" + s;
}

}  // namespace probe
