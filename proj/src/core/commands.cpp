#include "core/commands.hpp"

#include "core/estimation.hpp"
#include "core/oracle.hpp"
#include "core/random_models.hpp"
#include "core/simulator.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

namespace fogctl {

using nlohmann::json;

namespace {

// Shortest text that reads back to the same double.
std::string num(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string dump(const json& doc) { return doc.dump(2) + "\n"; }

json sequence_json(const std::vector<Matrix>& ms) {
  json out = json::array();
  for (const Matrix& m : ms) out.push_back(matrix_to_json(m));
  return out;
}

json cost_json(const CostBreakdown& c) {
  return {{"initial_state_term", c.initial_state_term},
          {"disturbance_trace_sum", c.disturbance_trace_sum},
          {"collateral_trace_sum", c.collateral_trace_sum},
          {"estimation_penalty", c.estimation_penalty},
          {"total", c.total}};
}

json delay_json(const DelayProfile& d, int horizon) {
  json out = {{"forward", d.forward}, {"backward", d.backward}, {"M", d.total()}};
  if (!d.perfect()) {
    out["a"] = d.remainder_stages(horizon);
    out["c"] = d.control_rounds(horizon);
  }
  return out;
}

std::uint64_t seed_of(const Experiment& e, const CommandOptions& o) { return o.seed.value_or(e.simulation.seed); }
int replications_of(const Experiment& e, const CommandOptions& o) {
  return o.replications.value_or(e.simulation.replications);
}

std::optional<DelayProfile> as_optional(const DelayProfile& d) {
  if (d.perfect()) return std::nullopt;
  return d;
}

// Closed-form optimum when the theorems apply to this configuration.
std::optional<CostBreakdown> applicable_closed_form(const LinearSystemModel& model, const ReliabilityChain& chain,
                                                    const DelayProfile& delay, Observation observation,
                                                    const Vector& x0, const PenaltyConfig& penalty) {
  if (model.has_drift() || !chain.is_symmetric()) return std::nullopt;
  return closed_form_min_cost(model, chain, as_optional(delay), observation, x0, penalty);
}

}  // namespace

int latency_stages(double latency_seconds, double delta_t) {
  if (latency_seconds < 0.0 || !(delta_t > 0.0)) throw Error(ErrorCode::kInvalidArgument, "invalid latency or delta_t");
  return static_cast<int>(std::ceil(latency_seconds / delta_t - 1e-9));
}

CommandOutput cmd_gains(const Experiment& e, const CommandOptions& options) {
  const LinearSystemModel& model = e.require_model();
  const ReliabilityChain& chain = e.require_chain();
  const GainSchedule s = backward_recursion(model, chain.p, e.delay_or_none(), e.observation);
  CommandOutput out;
  if (options.format == OutputFormat::kCsv) {
    std::ostringstream os;
    os << "name,k,i,j,value\n";
    auto emit = [&](const char* name, const std::vector<Matrix>& ms) {
      for (size_t k = 0; k < ms.size(); ++k) {
        for (Eigen::Index i = 0; i < ms[k].rows(); ++i) {
          for (Eigen::Index j = 0; j < ms[k].cols(); ++j) {
            os << name << ',' << k << ',' << i << ',' << j << ',' << num(ms[k](i, j)) << '\n';
          }
        }
      }
    };
    emit("K", s.K);
    emit("L", s.L);
    emit("Lambda", s.Lambda);
    emit("V", s.V);
    emit("P", s.P);
    out.files["gains.csv"] = os.str();
    return out;
  }
  json doc = {{"regime", regime_name(s.regime)},
              {"p", chain.p},
              {"horizon", model.horizon},
              {"delay", delay_json(e.delay, model.horizon)},
              {"K", sequence_json(s.K)},
              {"L", sequence_json(s.L)},
              {"Lambda", sequence_json(s.Lambda)},
              {"V", sequence_json(s.V)},
              {"P", sequence_json(s.P)}};
  PenaltyConfig penalty;
  penalty.seed = seed_of(e, options);
  if (const auto cost = applicable_closed_form(model, chain, e.delay, e.observation, e.x0, penalty)) {
    doc["cost"] = cost_json(*cost);
  }
  doc["warnings"] = e.warnings;
  out.files["gains.json"] = dump(doc);
  return out;
}

CommandOutput cmd_simulate(const Experiment& e, const CommandOptions& options) {
  const LinearSystemModel& model = e.require_model();
  const ReliabilityChain& base = e.require_chain();
  const SimulationSettings& sim = e.simulation;
  std::vector<double> ps{base.p};
  std::vector<DelayProfile> delays{e.delay};
  if (sim.sweep) {
    if (!sim.sweep->p.empty()) ps = sim.sweep->p;
    if (!sim.sweep->delays.empty()) delays = sim.sweep->delays;
  }
  const bool sweeping = ps.size() * delays.size() > 1;

  SimulationConfig cfg;
  cfg.replications = replications_of(e, options);
  cfg.master_seed = seed_of(e, options);
  cfg.record_traces = sim.record_traces;
  if (e.scenario) cfg.tracking = TrackingSpec{2, e.scenario->scenario.alpha};

  CommandOutput out;
  json rows = json::array();
  std::ostringstream csv;
  csv << "row,p,q,forward,backward,regime,mode,mean_cost,std_error,closed_form,rms_position_error,rms_std_error,"
         "mean_control_energy,max_deviation\n";
  int index = 0;
  for (const DelayProfile& delay : delays) {
    for (double p : ps) {
      delay.validate();
      const ReliabilityChain chain = sim.sweep && !sim.sweep->p.empty()
                                         ? ReliabilityChain{p, 1.0 - p, base.tau0_on}
                                         : base;
      const ControllerRegime policy = make_controller(model, chain.p, as_optional(delay), e.observation, sim.mode);
      const SimulationResult r = run(model, chain, policy, e.x0, cfg);
      PenaltyConfig penalty;
      penalty.seed = cfg.master_seed;
      const auto closed = sim.mode == ControllerMode::kPaperFaithful
                              ? applicable_closed_form(model, chain, delay, e.observation, e.x0, penalty)
                              : std::nullopt;
      json row = {{"row", index},
                  {"p", chain.p},
                  {"q", chain.q},
                  {"forward", delay.forward},
                  {"backward", delay.backward},
                  {"regime", regime_name(policy.gains.regime)},
                  {"mode", mode_name(sim.mode)},
                  {"mean_cost", r.mean_cost},
                  {"std_error", r.std_error},
                  {"replications", r.replications}};
      if (closed) row["closed_form"] = cost_json(*closed);
      if (r.metrics) {
        row["tracking"] = {{"rms_position_error", r.metrics->rms_position_error},
                           {"rms_std_error", r.metrics->rms_std_error},
                           {"mean_control_energy", r.metrics->mean_control_energy},
                           {"energy_std_error", r.metrics->energy_std_error},
                           {"max_deviation", r.metrics->max_deviation}};
      }
      rows.push_back(row);
      csv << index << ',' << num(chain.p) << ',' << num(chain.q) << ',' << delay.forward << ',' << delay.backward << ','
          << regime_name(policy.gains.regime) << ',' << mode_name(sim.mode) << ',' << num(r.mean_cost) << ','
          << num(r.std_error) << ',' << (closed ? num(closed->total) : "") << ',';
      if (r.metrics) {
        csv << num(r.metrics->rms_position_error) << ',' << num(r.metrics->rms_std_error) << ','
            << num(r.metrics->mean_control_energy) << ',' << num(r.metrics->max_deviation);
      } else {
        csv << ",,,";
      }
      csv << '\n';
      if (sim.record_traces) {
        const std::string name = sweeping ? "trace_" + std::to_string(index) + ".csv" : "trace.csv";
        out.files[name] = trace_csv(r.traces, model.state_dim, model.control_dim);
      }
      ++index;
    }
  }
  if (options.format == OutputFormat::kCsv) {
    out.files["summary.csv"] = csv.str();
  } else {
    json doc = {{"seed", cfg.master_seed}, {"replications", cfg.replications}, {"rows", rows}};
    out.files["summary.json"] = dump(doc);
  }
  return out;
}

CommandOutput cmd_verify(const Experiment& e, const CommandOptions& options) {
  const VerifySettings& v = e.verify;
  const std::uint64_t seed = options.seed.value_or(v.seed);
  RecursionOptions inject;
  inject.lambda_sign = v.lambda_sign;
  json checks = json::array();
  bool all = true;

  {
    std::mt19937_64 rng(seed);
    double worst = 0.0;
    int failures = 0;
    for (int i = 0; i < v.instances; ++i) {
      const LinearSystemModel m = random_model(rng);
      const double p = random_unit(rng);
      const bool delayed = i % 2 == 1;
      const std::optional<DelayProfile> delay = delayed ? std::optional(random_delay(rng, m.horizon)) : std::nullopt;
      const Vector x0 = random_vector(rng, m.state_dim);
      const ReliabilityChain chain = ReliabilityChain::symmetric(p, random_unit(rng) < 0.5 ? 1.0 : 0.0);
      const GainSchedule s = backward_recursion(m, p, delay, Observation::kFull, inject);
      const double closed = delayed ? min_cost_full_delayed(s, m, x0).total
                                    : min_cost_full_perfect(s, m, x0, chain.tau0_on).total;
      const double oracle = brute_force_min_cost(m, chain, delay, x0);
      const double rel = std::abs(closed - oracle) / std::max(1.0, std::abs(oracle));
      worst = std::max(worst, rel);
      if (!(rel <= 1e-8)) ++failures;
    }
    const bool ok = failures == 0;
    all = all && ok;
    checks.push_back({{"name", "closed_form_vs_oracle"},
                      {"instances", v.instances},
                      {"max_relative_error", worst},
                      {"failures", failures},
                      {"passed", ok}});
  }

  {
    std::mt19937_64 rng(seed ^ 0x5a5a5a5aull);
    int violations = 0;
    double worst_excess = 0.0;
    for (int i = 0; i < v.instances; ++i) {
      const bool partial = i % 4 >= 2;
      RandomModelSpec spec;
      spec.partial = partial;
      spec.max_horizon = 8;
      const LinearSystemModel m = random_model(rng, spec);
      const std::optional<DelayProfile> delay = i % 2 == 1 ? std::optional(random_delay(rng, m.horizon)) : std::nullopt;
      const ReliabilityChain chain = random_asymmetric_chain(rng);
      const Vector x0 = random_vector(rng, m.state_dim);
      const BoundReport r = bound_check(m, chain, delay, partial ? Observation::kPartial : Observation::kFull, x0);
      if (!r.holds) ++violations;
      worst_excess = std::max({worst_excess, r.lower - r.policy_value, r.policy_value - r.upper});
    }
    const bool ok = violations == 0;
    all = all && ok;
    checks.push_back({{"name", "sandwich_bounds"},
                      {"instances", v.instances},
                      {"violations", violations},
                      {"worst_excess", worst_excess},
                      {"passed", ok}});
  }

  if (e.model && e.chain && !e.model->has_drift() && e.model->horizon <= kMaxOracleHorizon &&
      e.observation == Observation::kFull && e.chain->is_symmetric() &&
      (e.delay.perfect() || e.delay.forward >= 1)) {
    const LinearSystemModel& m = *e.model;
    const GainSchedule s = backward_recursion(m, e.chain->p, e.delay_or_none(), Observation::kFull, inject);
    const double closed = is_delayed(s.regime) ? min_cost_full_delayed(s, m, e.x0).total
                                               : min_cost_full_perfect(s, m, e.x0, e.chain->tau0_on).total;
    const double oracle = brute_force_min_cost(m, *e.chain, e.delay_or_none(), e.x0);
    const double rel = std::abs(closed - oracle) / std::max(1.0, std::abs(oracle));
    const bool ok = rel <= 1e-8;
    all = all && ok;
    checks.push_back({{"name", "configured_model"},
                      {"closed_form", closed},
                      {"oracle", oracle},
                      {"relative_error", rel},
                      {"passed", ok}});
  }

  CommandOutput out;
  out.passed = all;
  json doc = {{"seed", seed}, {"lambda_sign", v.lambda_sign}, {"checks", checks}, {"passed", all}};
  out.files["verify.json"] = dump(doc);
  out.message = all ? "all checks passed" : "verification failed";
  return out;
}

CommandOutput cmd_placement(const Experiment& e, const CommandOptions& options) {
  const LinearSystemModel& model = e.require_model();
  const PlacementSettings& pl = e.placement;
  if (pl.catalog.empty()) throw Error(ErrorCode::kConfig, "placement catalog is empty");
  const double tau0 = e.chain ? e.chain->tau0_on : 1.0;
  PenaltyConfig penalty;
  penalty.method = PenaltyMethod::kMonteCarlo;
  penalty.replications = std::max(2, replications_of(e, options));
  penalty.seed = seed_of(e, options);

  struct Row {
    CatalogEntry entry;
    DelayProfile delay;
    double q = 0.0;
    bool upper_bound = false;
    CostBreakdown cost;
  };
  std::vector<Row> rows;
  for (const CatalogEntry& c : pl.catalog) {
    Row r;
    r.entry = c;
    if (c.forward) {
      r.delay = {*c.forward, *c.backward};
    } else {
      const int M = latency_stages(c.latency_seconds, pl.delta_t);
      r.delay = {(M + 1) / 2, M - (M + 1) / 2};
    }
    if (r.delay.total() > model.horizon) {
      throw Error(ErrorCode::kConfig, "endpoint M > N for " + c.name);
    }
    r.q = c.q.value_or(1.0 - c.p);
    ReliabilityChain chain{c.p, r.q, tau0};
    if (!chain.is_symmetric()) {
      // Asymmetric endpoints report the bound J*(1-q, q).
      chain = ReliabilityChain{1.0 - r.q, r.q, tau0};
      r.upper_bound = true;
    }
    r.cost = closed_form_min_cost(model, chain, as_optional(r.delay), e.observation, e.x0, penalty);
    rows.push_back(r);
  }
  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.cost.total < b.cost.total; });

  CommandOutput out;
  std::ostringstream os;
  os << "rank,name,latency_s,M,M_F,M_B,p,q,bound,initial_state_term,disturbance_trace_sum,collateral_trace_sum,"
        "estimation_penalty,total\n";
  json list = json::array();
  for (size_t i = 0; i < rows.size(); ++i) {
    const Row& r = rows[i];
    const char* bound = r.upper_bound ? "upper_bound" : "exact";
    os << i + 1 << ',' << r.entry.name << ',' << num(r.entry.latency_seconds) << ',' << r.delay.total() << ','
       << r.delay.forward << ',' << r.delay.backward << ',' << num(r.entry.p) << ',' << num(r.q) << ',' << bound << ','
       << num(r.cost.initial_state_term) << ',' << num(r.cost.disturbance_trace_sum) << ','
       << num(r.cost.collateral_trace_sum) << ',' << num(r.cost.estimation_penalty) << ',' << num(r.cost.total)
       << '\n';
    list.push_back({{"rank", i + 1},
                    {"name", r.entry.name},
                    {"latency_s", r.entry.latency_seconds},
                    {"M", r.delay.total()},
                    {"M_F", r.delay.forward},
                    {"M_B", r.delay.backward},
                    {"p", r.entry.p},
                    {"q", r.q},
                    {"bound", bound},
                    {"cost", cost_json(r.cost)}});
  }
  out.files["placement.csv"] = os.str();
  if (options.format == OutputFormat::kJson) {
    out.files["placement.json"] = dump({{"delta_t", pl.delta_t}, {"endpoints", list}});
  }
  return out;
}

CommandOutput cmd_waypoints(const Experiment& e, const CommandOptions&) {
  if (!e.scenario) throw Error(ErrorCode::kConfig, "scenario required");
  std::ostringstream os;
  os << "k,x,y\n";
  const auto& wp = e.scenario->scenario.waypoints;
  for (size_t k = 0; k < wp.size(); ++k) os << k << ',' << num(wp[k].x()) << ',' << num(wp[k].y()) << '\n';
  CommandOutput out;
  out.files["waypoints.csv"] = os.str();
  return out;
}

}  // namespace fogctl
