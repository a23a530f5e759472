#include "core/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace fogctl {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& what) { throw Error(ErrorCode::kConfig, what); }

void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) fail(where + " must be an object");
  for (const auto& [key, _] : obj.items()) {
    if (!allowed.count(key)) fail("unknown key " + where + "." + key);
  }
}

double number(const json& v, const std::string& where) {
  if (!v.is_number()) fail(where + " must be a number");
  return v.get<double>();
}

int integer(const json& v, const std::string& where) {
  if (!v.is_number_integer()) fail(where + " must be an integer");
  return v.get<int>();
}

std::uint64_t seed_value(const json& v, const std::string& where) {
  if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
    fail(where + " must be a nonnegative integer");
  }
  return v.get<std::uint64_t>();
}

double probability(const json& v, const std::string& where) {
  const double p = number(v, where);
  if (!(p >= 0.0 && p <= 1.0)) fail(where + " must lie in [0, 1]");
  return p;
}

int depth(const json& v) {
  int d = 0;
  const json* cur = &v;
  while (cur->is_array() && !cur->empty()) {
    ++d;
    cur = &(*cur)[0];
  }
  return cur->is_number() ? d : -1;
}

Matrix parse_matrix(const json& v, const std::string& where) {
  if (v.is_number()) return Matrix::Constant(1, 1, v.get<double>());
  if (depth(v) != 2) fail(where + " must be a matrix (array of rows)");
  const auto rows = static_cast<Eigen::Index>(v.size());
  const auto cols = static_cast<Eigen::Index>(v[0].size());
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const json& row = v[static_cast<size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) fail(where + " has ragged rows");
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = number(row[static_cast<size_t>(j)], where);
  }
  return m;
}

Vector parse_vector(const json& v, const std::string& where) {
  if (v.is_number()) return Vector::Constant(1, v.get<double>());
  if (depth(v) != 1) fail(where + " must be an array of numbers");
  Vector out(static_cast<Eigen::Index>(v.size()));
  for (size_t i = 0; i < v.size(); ++i) out[static_cast<Eigen::Index>(i)] = number(v[i], where);
  return out;
}

// Either one matrix for every stage or an explicit per-stage list.
std::vector<Matrix> parse_sequence(const json& v, int count, const std::string& where) {
  if (v.is_number() || depth(v) == 2) return std::vector<Matrix>(static_cast<size_t>(count), parse_matrix(v, where));
  if (depth(v) != 3) fail(where + " must be a matrix or a per-stage list of matrices");
  if (static_cast<int>(v.size()) != count) {
    fail(where + " lists " + std::to_string(v.size()) + " stages, expected " + std::to_string(count));
  }
  std::vector<Matrix> out;
  for (size_t k = 0; k < v.size(); ++k) out.push_back(parse_matrix(v[k], where + "[" + std::to_string(k) + "]"));
  return out;
}

void symmetrize_all(std::vector<Matrix>& ms, const std::string& name, std::vector<std::string>& warnings) {
  for (size_t k = 0; k < ms.size(); ++k) {
    Matrix& m = ms[k];
    if (m.rows() != m.cols()) continue;
    const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-9) warnings.push_back(name + "[" + std::to_string(k) + "] not symmetric; symmetrized");
    m = symmetrized(m);
  }
}

Observation parse_observation(const json& v) {
  if (!v.is_string()) fail("system.observation must be \"full\" or \"partial\"");
  const auto s = v.get<std::string>();
  if (s == "full") return Observation::kFull;
  if (s == "partial") return Observation::kPartial;
  fail("system.observation must be \"full\" or \"partial\"");
}

void parse_system(const json& sys, Experiment& e) {
  check_keys(sys, {"horizon", "A", "B", "C", "Q", "Q_N", "R", "W", "V", "drift", "x0", "initial_covariance",
                   "observation"},
             "system");
  for (const char* key : {"horizon", "A", "B", "Q", "R", "W", "x0"}) {
    if (!sys.contains(key)) fail(std::string("system.") + key + " required");
  }
  const int N = integer(sys["horizon"], "system.horizon");
  if (N < 1) fail("system.horizon must be positive");
  LinearSystemModel m;
  m.horizon = N;
  m.A = parse_sequence(sys["A"], N, "system.A");
  m.B = parse_sequence(sys["B"], N, "system.B");
  m.state_dim = static_cast<int>(m.A[0].rows());
  m.control_dim = static_cast<int>(m.B[0].cols());
  const int n = m.state_dim;
  if (sys.contains("C")) {
    m.C = parse_sequence(sys["C"], N, "system.C");
  } else {
    m.C.assign(static_cast<size_t>(N), Matrix::Identity(n, n));
  }
  m.obs_dim = static_cast<int>(m.C[0].rows());
  if (sys.contains("V")) {
    m.V = parse_sequence(sys["V"], N, "system.V");
  } else {
    m.V.assign(static_cast<size_t>(N), Matrix::Zero(m.obs_dim, m.obs_dim));
  }
  const json& q = sys["Q"];
  if (depth(q) == 3 && static_cast<int>(q.size()) == N + 1) {
    if (sys.contains("Q_N")) fail("system.Q already lists N+1 stages; drop system.Q_N");
    m.Q = parse_sequence(q, N + 1, "system.Q");
  } else {
    m.Q = parse_sequence(q, N, "system.Q");
    m.Q.push_back(sys.contains("Q_N") ? parse_matrix(sys["Q_N"], "system.Q_N") : m.Q.back());
  }
  m.R = parse_sequence(sys["R"], N, "system.R");
  m.W = parse_sequence(sys["W"], N, "system.W");
  if (sys.contains("drift")) {
    const json& d = sys["drift"];
    if (d.is_number() || depth(d) == 1) {
      m.drift.assign(static_cast<size_t>(N), parse_vector(d, "system.drift"));
    } else if (depth(d) == 2 && static_cast<int>(d.size()) == N) {
      for (size_t k = 0; k < d.size(); ++k) m.drift.push_back(parse_vector(d[k], "system.drift"));
    } else {
      fail("system.drift must be a vector or N vectors");
    }
  }
  m.initial_covariance = sys.contains("initial_covariance")
                             ? parse_matrix(sys["initial_covariance"], "system.initial_covariance")
                             : Matrix::Zero(n, n);
  symmetrize_all(m.Q, "Q", e.warnings);
  symmetrize_all(m.R, "R", e.warnings);
  symmetrize_all(m.W, "W", e.warnings);
  symmetrize_all(m.V, "V", e.warnings);
  std::vector<Matrix> ic{m.initial_covariance};
  symmetrize_all(ic, "initial_covariance", e.warnings);
  m.initial_covariance = ic[0];
  e.model = validate_model(m);
  e.x0 = parse_vector(sys["x0"], "system.x0");
  if (e.x0.size() != n) fail("system.x0 has dimension " + std::to_string(e.x0.size()) + ", expected " + std::to_string(n));
  if (sys.contains("observation")) e.observation = parse_observation(sys["observation"]);
}

ReliabilityChain parse_reliability(const json& r) {
  check_keys(r, {"p", "q", "tau0"}, "reliability");
  if (!r.contains("p")) fail("reliability.p required");
  ReliabilityChain c;
  c.p = probability(r["p"], "reliability.p");
  c.q = r.contains("q") ? probability(r["q"], "reliability.q") : 1.0 - c.p;
  c.tau0_on = 1.0;
  if (r.contains("tau0")) {
    const json& t = r["tau0"];
    if (t.is_object()) {
      check_keys(t, {"on_probability"}, "reliability.tau0");
      if (!t.contains("on_probability")) fail("reliability.tau0.on_probability required");
      c.tau0_on = probability(t["on_probability"], "reliability.tau0.on_probability");
    } else {
      const int v = integer(t, "reliability.tau0");
      if (v != 0 && v != 1) fail("reliability.tau0 must be 0, 1 or {\"on_probability\": x}");
      c.tau0_on = v;
    }
  }
  return c;
}

DelayProfile parse_delay(const json& d, const std::string& where) {
  if (d.is_number_integer()) {
    const int M = d.get<int>();
    if (M < 0) fail(where + " must be nonnegative");
    const int forward = (M + 1) / 2;
    return {forward, M - forward};
  }
  check_keys(d, {"forward", "backward"}, where);
  DelayProfile out;
  if (d.contains("forward")) out.forward = integer(d["forward"], where + ".forward");
  if (d.contains("backward")) out.backward = integer(d["backward"], where + ".backward");
  if (out.forward < 0 || out.backward < 0) fail(where + " delays must be nonnegative");
  return out;
}

Point parse_point(const json& v, const std::string& where) {
  const Vector p = parse_vector(v, where);
  if (p.size() != 2) fail(where + " must be a 2-vector");
  return {p[0], p[1]};
}

ScenarioSettings parse_scenario(const json& s) {
  check_keys(s, {"delta_t", "alpha", "sigma_x", "sigma_v", "rho", "start", "start_velocity", "approach", "circle",
                 "return", "max_speed"},
             "scenario");
  ScenarioSettings out;
  WaypointPlan& plan = out.plan;
  DroneScenario& sc = out.scenario;
  if (s.contains("delta_t")) sc.delta_t = number(s["delta_t"], "scenario.delta_t");
  if (s.contains("alpha")) sc.alpha = number(s["alpha"], "scenario.alpha");
  if (s.contains("sigma_x")) sc.sigma_x = number(s["sigma_x"], "scenario.sigma_x");
  if (s.contains("sigma_v")) sc.sigma_v = number(s["sigma_v"], "scenario.sigma_v");
  sc.rho = s.contains("rho") ? number(s["rho"], "scenario.rho") : sc.sigma_x * sc.sigma_v / 2.0;
  if (s.contains("start")) plan.start = parse_point(s["start"], "scenario.start");
  sc.start_position = plan.start;
  if (s.contains("start_velocity")) sc.start_velocity = parse_point(s["start_velocity"], "scenario.start_velocity");
  if (s.contains("max_speed")) plan.max_speed = number(s["max_speed"], "scenario.max_speed");
  if (s.contains("approach")) {
    check_keys(s["approach"], {"stages"}, "scenario.approach");
    if (s["approach"].contains("stages")) plan.approach_stages = integer(s["approach"]["stages"], "scenario.approach.stages");
  }
  if (s.contains("circle")) {
    const json& c = s["circle"];
    check_keys(c, {"center", "radius", "stages"}, "scenario.circle");
    if (c.contains("center")) plan.center = parse_point(c["center"], "scenario.circle.center");
    if (c.contains("radius")) plan.radius = number(c["radius"], "scenario.circle.radius");
    if (c.contains("stages")) plan.circle_stages = integer(c["stages"], "scenario.circle.stages");
  }
  if (s.contains("return")) {
    check_keys(s["return"], {"stages"}, "scenario.return");
    if (s["return"].contains("stages")) plan.return_stages = integer(s["return"]["stages"], "scenario.return.stages");
  }
  try {
    sc.waypoints = make_waypoints(plan, sc.delta_t);
    sc.validate();
  } catch (const Error& err) {
    fail(std::string("scenario: ") + err.what());
  }
  return out;
}

ControllerMode parse_mode(const json& v) {
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "paper-faithful") return ControllerMode::kPaperFaithful;
    if (s == "affine-compensated") return ControllerMode::kAffineCompensated;
  }
  fail("simulation.mode must be \"paper-faithful\" or \"affine-compensated\"");
}

SimulationSettings parse_simulation(const json& s) {
  check_keys(s, {"replications", "seed", "record_traces", "mode", "sweep"}, "simulation");
  SimulationSettings out;
  if (s.contains("replications")) out.replications = integer(s["replications"], "simulation.replications");
  if (out.replications < 1) fail("simulation.replications must be >= 1");
  if (s.contains("seed")) out.seed = seed_value(s["seed"], "simulation.seed");
  if (s.contains("record_traces")) {
    if (!s["record_traces"].is_boolean()) fail("simulation.record_traces must be a boolean");
    out.record_traces = s["record_traces"].get<bool>();
  }
  if (s.contains("mode")) out.mode = parse_mode(s["mode"]);
  if (s.contains("sweep")) {
    const json& w = s["sweep"];
    check_keys(w, {"p", "delay"}, "simulation.sweep");
    SweepSettings sw;
    if (w.contains("p")) {
      if (!w["p"].is_array() || w["p"].empty()) fail("simulation.sweep.p must be a nonempty array");
      for (const json& p : w["p"]) sw.p.push_back(probability(p, "simulation.sweep.p"));
    }
    if (w.contains("delay")) {
      if (!w["delay"].is_array() || w["delay"].empty()) fail("simulation.sweep.delay must be a nonempty array");
      for (const json& d : w["delay"]) sw.delays.push_back(parse_delay(d, "simulation.sweep.delay"));
    }
    out.sweep = sw;
  }
  return out;
}

VerifySettings parse_verify(const json& v) {
  check_keys(v, {"instances", "seed", "inject"}, "verify");
  VerifySettings out;
  if (v.contains("instances")) out.instances = integer(v["instances"], "verify.instances");
  if (out.instances < 1) fail("verify.instances must be >= 1");
  if (v.contains("seed")) out.seed = seed_value(v["seed"], "verify.seed");
  if (v.contains("inject") && !v["inject"].is_null()) {
    if (v["inject"] != "lambda_sign") fail("verify.inject supports only \"lambda_sign\"");
    out.lambda_sign = -1.0;
  }
  return out;
}

PlacementSettings parse_placement(const json& p) {
  check_keys(p, {"delta_t", "catalog"}, "placement");
  PlacementSettings out;
  if (p.contains("delta_t")) out.delta_t = number(p["delta_t"], "placement.delta_t");
  if (!(out.delta_t > 0.0)) fail("placement.delta_t must be positive");
  if (!p.contains("catalog")) {
    out.catalog = default_catalog();
    return out;
  }
  if (!p["catalog"].is_array() || p["catalog"].empty()) fail("placement.catalog must be a nonempty array");
  for (const json& c : p["catalog"]) {
    check_keys(c, {"name", "latency", "p", "q", "forward", "backward"}, "placement.catalog[]");
    CatalogEntry e;
    if (!c.contains("name") || !c["name"].is_string()) fail("placement.catalog[].name required");
    e.name = c["name"].get<std::string>();
    if (!c.contains("latency")) fail("placement.catalog[].latency required");
    e.latency_seconds = number(c["latency"], "placement.catalog[].latency");
    if (e.latency_seconds < 0.0) fail("placement.catalog[].latency must be nonnegative");
    if (c.contains("p")) e.p = probability(c["p"], "placement.catalog[].p");
    if (c.contains("q")) e.q = probability(c["q"], "placement.catalog[].q");
    if (c.contains("forward")) e.forward = integer(c["forward"], "placement.catalog[].forward");
    if (c.contains("backward")) e.backward = integer(c["backward"], "placement.catalog[].backward");
    if (e.forward.has_value() != e.backward.has_value()) fail("placement.catalog[]: give both forward and backward");
    out.catalog.push_back(e);
  }
  return out;
}

json sequence_to_json(const std::vector<Matrix>& ms) {
  json out = json::array();
  for (const Matrix& m : ms) out.push_back(matrix_to_json(m));
  return out;
}

json point_to_json(const Point& p) { return json::array({p.x(), p.y()}); }

}  // namespace

std::vector<CatalogEntry> default_catalog() {
  return {
      {"Local node", 0.06, 0.9, std::nullopt, std::nullopt, std::nullopt},
      {"Azure US East", 0.08, 1.0, std::nullopt, std::nullopt, std::nullopt},
      {"AWS Virginia", 0.5, 1.0, std::nullopt, std::nullopt, std::nullopt},
      {"AWS Seattle", 0.8, 1.0, std::nullopt, std::nullopt, std::nullopt},
      {"AWS Tokyo", 1.3, 1.0, std::nullopt, std::nullopt, std::nullopt},
  };
}

const LinearSystemModel& Experiment::require_model() const {
  if (!model) throw Error(ErrorCode::kConfig, "system or scenario required");
  return *model;
}

const ReliabilityChain& Experiment::require_chain() const {
  if (!chain) throw Error(ErrorCode::kConfig, "reliability.p required");
  return *chain;
}

std::optional<DelayProfile> Experiment::delay_or_none() const {
  if (delay.perfect()) return std::nullopt;
  return delay;
}

Experiment parse_experiment(const json& doc) {
  check_keys(doc, {"system", "reliability", "delay", "scenario", "simulation", "verify", "placement"}, "config");
  Experiment e;
  if (doc.contains("system") && doc.contains("scenario")) fail("system and scenario are mutually exclusive");
  if (doc.contains("system")) parse_system(doc["system"], e);
  if (doc.contains("scenario")) {
    e.scenario = parse_scenario(doc["scenario"]);
    e.model = build_system(e.scenario->scenario);
    e.x0 = initial_error_state(e.scenario->scenario);
  }
  if (doc.contains("reliability")) e.chain = parse_reliability(doc["reliability"]);
  if (doc.contains("delay")) e.delay = parse_delay(doc["delay"], "delay");
  if (doc.contains("simulation")) e.simulation = parse_simulation(doc["simulation"]);
  if (doc.contains("verify")) e.verify = parse_verify(doc["verify"]);
  if (doc.contains("placement")) {
    e.placement = parse_placement(doc["placement"]);
  } else {
    e.placement.catalog = default_catalog();
  }
  return e;
}

Experiment load_experiment(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kConfig, "cannot open config " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::parse_error& err) {
    throw Error(ErrorCode::kConfig, std::string("config is not valid JSON: ") + err.what());
  }
  return parse_experiment(doc);
}

json matrix_to_json(const Matrix& m) {
  json out = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    out.push_back(row);
  }
  return out;
}

json vector_to_json(const Vector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

json to_json(const Experiment& e) {
  json doc = json::object();
  if (e.scenario) {
    const WaypointPlan& p = e.scenario->plan;
    const DroneScenario& s = e.scenario->scenario;
    doc["scenario"] = {{"delta_t", s.delta_t},
                       {"alpha", s.alpha},
                       {"sigma_x", s.sigma_x},
                       {"sigma_v", s.sigma_v},
                       {"rho", s.rho},
                       {"start", point_to_json(p.start)},
                       {"start_velocity", point_to_json(s.start_velocity)},
                       {"max_speed", p.max_speed},
                       {"approach", {{"stages", p.approach_stages}}},
                       {"circle", {{"center", point_to_json(p.center)}, {"radius", p.radius}, {"stages", p.circle_stages}}},
                       {"return", {{"stages", p.return_stages}}}};
  } else if (e.model) {
    const LinearSystemModel& m = *e.model;
    json sys = {{"horizon", m.horizon},
                {"A", sequence_to_json(m.A)},
                {"B", sequence_to_json(m.B)},
                {"C", sequence_to_json(m.C)},
                {"Q", sequence_to_json(m.Q)},
                {"R", sequence_to_json(m.R)},
                {"W", sequence_to_json(m.W)},
                {"V", sequence_to_json(m.V)},
                {"x0", vector_to_json(e.x0)},
                {"initial_covariance", matrix_to_json(m.initial_cov())},
                {"observation", e.observation == Observation::kFull ? "full" : "partial"}};
    if (m.has_drift()) {
      json d = json::array();
      for (const Vector& v : m.drift) d.push_back(vector_to_json(v));
      sys["drift"] = d;
    }
    doc["system"] = sys;
  }
  if (e.chain) {
    doc["reliability"] = {{"p", e.chain->p}, {"q", e.chain->q}, {"tau0", {{"on_probability", e.chain->tau0_on}}}};
  }
  doc["delay"] = {{"forward", e.delay.forward}, {"backward", e.delay.backward}};
  json sim = {{"replications", e.simulation.replications},
              {"seed", e.simulation.seed},
              {"record_traces", e.simulation.record_traces},
              {"mode", mode_name(e.simulation.mode)}};
  if (e.simulation.sweep) {
    json sweep = json::object();
    if (!e.simulation.sweep->p.empty()) sweep["p"] = e.simulation.sweep->p;
    if (!e.simulation.sweep->delays.empty()) {
      json ds = json::array();
      for (const DelayProfile& d : e.simulation.sweep->delays) ds.push_back({{"forward", d.forward}, {"backward", d.backward}});
      sweep["delay"] = ds;
    }
    sim["sweep"] = sweep;
  }
  doc["simulation"] = sim;
  json verify = {{"instances", e.verify.instances}, {"seed", e.verify.seed}};
  if (e.verify.lambda_sign < 0.0) verify["inject"] = "lambda_sign";
  doc["verify"] = verify;
  json catalog = json::array();
  for (const CatalogEntry& c : e.placement.catalog) {
    json entry = {{"name", c.name}, {"latency", c.latency_seconds}, {"p", c.p}};
    if (c.q) entry["q"] = *c.q;
    if (c.forward) entry["forward"] = *c.forward;
    if (c.backward) entry["backward"] = *c.backward;
    catalog.push_back(entry);
  }
  doc["placement"] = {{"delta_t", e.placement.delta_t}, {"catalog", catalog}};
  return doc;
}

}  // namespace fogctl
