#include "core/simulator.hpp"

#include "core/estimation.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <random>
#include <sstream>
#include <thread>

namespace fogctl {

namespace {

enum Stream : std::uint64_t { kDisturbance = 1, kMeasurement = 2, kChain = 3, kInitial = 4 };

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// xoshiro256** state filled from splitmix64. Cheap to seed, which matters
// because every replication starts four fresh streams.
class Xoshiro256 {
 public:
  using result_type = std::uint64_t;
  explicit Xoshiro256(std::uint64_t seed) {
    for (auto& w : s_) w = seed = splitmix64(seed);
  }
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }
  result_type operator()() {
    const result_type out = rotl(s_[1] * 5, 7) * 9;
    const result_type t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return out;
  }

 private:
  static result_type rotl(result_type x, int k) { return (x << k) | (x >> (64 - k)); }
  result_type s_[4];
};

struct Factors {
  std::vector<Matrix> w;
  std::vector<Matrix> v;
  Matrix initial;
};

Factors make_factors(const LinearSystemModel& model) {
  Factors f;
  for (const Matrix& w : model.W) f.w.push_back(psd_factor(w));
  for (const Matrix& v : model.V) f.v.push_back(psd_factor(v));
  f.initial = psd_factor(model.initial_cov());
  return f;
}

class Gaussian {
 public:
  explicit Gaussian(std::uint64_t seed) : rng_(seed) {}
  Vector draw(const Matrix& factor) {
    Vector n(factor.cols());
    for (Eigen::Index i = 0; i < n.size(); ++i) n[i] = normal_(rng_);
    return factor * n;
  }

 private:
  Xoshiro256 rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

std::vector<int> sample_chain(const ReliabilityChain& chain, int length, std::uint64_t seed) {
  Xoshiro256 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<int> tau(static_cast<size_t>(length));
  for (int k = 0; k < length; ++k) {
    const double p_on = k == 0 ? chain.tau0_on : chain.transition(tau[static_cast<size_t>(k - 1)], 1);
    tau[static_cast<size_t>(k)] = unit(rng) < p_on ? 1 : 0;
  }
  return tau;
}

struct Outcome {
  double cost = 0.0;
  double mean_sq_error = 0.0;
  double energy = 0.0;
  double max_deviation = 0.0;
  std::optional<SimulationTrace> trace;
};

struct Tracker {
  const std::optional<TrackingSpec>& spec;
  double sum_sq = 0.0;
  double energy = 0.0;
  double max_dev = 0.0;
  int count = 0;

  void observe(const Vector& x, const Vector& u) {
    if (!spec) return;
    const int d = spec->position_dims;
    const double e2 = x.head(d).squaredNorm();
    sum_sq += e2;
    max_dev = std::max(max_dev, std::sqrt(e2));
    energy += spec->alpha * (x.segment(d, d).squaredNorm() + u.squaredNorm());
    ++count;
  }
};

class Replication {
 public:
  Replication(const LinearSystemModel& model, const ReliabilityChain& chain, const ControllerRegime& policy,
              const Vector& x0, const SimulationConfig& config, const Factors& factors)
      : model_(model), chain_(chain), policy_(policy), x0_(x0), config_(config), factors_(factors) {}

  Outcome operator()(int rep) const {
    const std::uint64_t r = static_cast<std::uint64_t>(rep);
    Gaussian dist(derive_seed(config_.master_seed, r, kDisturbance));
    Gaussian meas(derive_seed(config_.master_seed, r, kMeasurement));
    Gaussian init(derive_seed(config_.master_seed, r, kInitial));
    const std::vector<int> tau = sample_chain(chain_, model_.horizon, derive_seed(config_.master_seed, r, kChain));
    Vector x = x0_ + init.draw(factors_.initial);
    return policy_.delayed() ? delayed(rep, x, tau, dist, meas) : perfect(rep, x, tau, dist, meas);
  }

 private:
  bool affine() const { return policy_.mode == ControllerMode::kAffineCompensated; }

  Vector known_drift(int k) const {
    return affine() ? model_.drift_at(k) : Vector::Zero(model_.state_dim);
  }

  double stage_cost(int k, const Vector& x, const Vector& u) const {
    const auto i = static_cast<size_t>(k);
    return x.dot(model_.Q[i] * x) + u.dot(model_.R[i] * u);
  }

  Vector measure(int k, const Vector& x, Gaussian& meas) const {
    const auto i = static_cast<size_t>(k);
    return model_.C[i] * x + meas.draw(factors_.v[i]);
  }

  Vector step(int k, const Vector& x, const Vector& u, Gaussian& dist) const {
    const auto i = static_cast<size_t>(k);
    return model_.A[i] * x + model_.B[i] * u + model_.drift_at(k) + dist.draw(factors_.w[i]);
  }

  void finish(Outcome& out, Tracker& tracker, const Vector& x, SimulationTrace* trace) const {
    const int N = model_.horizon;
    const double terminal = x.dot(model_.Q[static_cast<size_t>(N)] * x);
    out.cost += terminal;
    tracker.observe(x, Vector::Zero(model_.control_dim));
    if (tracker.count > 0) {
      out.mean_sq_error = tracker.sum_sq / tracker.count;
      out.energy = tracker.energy;
      out.max_deviation = tracker.max_dev;
    }
    if (trace) {
      trace->x_terminal = x;
      trace->terminal_cost = terminal;
      trace->total = out.cost;
      out.trace = std::move(*trace);
    }
  }

  Outcome perfect(int rep, Vector x, const std::vector<int>& tau, Gaussian& dist, Gaussian& meas) const {
    const int N = model_.horizon;
    const bool partial = policy_.observation == Observation::kPartial;
    Outcome out;
    Tracker tracker{config_.tracking};
    std::optional<SimulationTrace> trace;
    if (config_.record_traces) trace = SimulationTrace{rep, {}, {}, 0.0, 0.0};
    FilterState filter{x0_, model_.initial_cov(), 0, std::nullopt};
    for (int k = 0; k < N; ++k) {
      const int g = tau[static_cast<size_t>(k)];
      std::optional<Vector> z;
      PolicyDecision d;
      Vector xhat;
      if (partial) {
        z = measure(k, x, meas);
        if (g) filter = kalman_update(filter, model_, *z);
        d = act_partial_perfect(policy_.gains, k, filter, g);
        xhat = filter.mean;
      } else {
        d = act_full_perfect(policy_.gains, k, x, g);
        xhat = x;
      }
      d = with_feedforward(std::move(d), policy_, k);
      const double g_k = stage_cost(k, x, d.u);
      out.cost += g_k;
      tracker.observe(x, d.u);
      if (trace) trace->stages.push_back({k, x, g ? z : std::nullopt, g, d.u, d.applied, xhat, g_k});
      if (partial) filter = kalman_predict(filter, model_, d.u, known_drift(k));
      x = step(k, x, d.u, dist);
    }
    finish(out, tracker, x, trace ? &*trace : nullptr);
    return out;
  }

  // Grid stages jM: the plant snapshots x (or measures it), the packet reaches
  // the controller M_F stages later where tau_{jM+M_F} decides whether it is
  // served, and the resulting control lands at (j+1)M.
  Outcome delayed(int rep, Vector x, const std::vector<int>& tau, Gaussian& dist, Gaussian& meas) const {
    const int N = model_.horizon;
    const DelayProfile& delay = *policy_.delay;
    const int M = delay.total();
    const bool partial = policy_.observation == Observation::kPartial;
    Outcome out;
    Tracker tracker{config_.tracking};
    std::optional<SimulationTrace> trace;
    std::optional<InformationSet> info;
    if (config_.record_traces) {
      trace = SimulationTrace{rep, {}, {}, 0.0, 0.0};
      info.emplace();
    }
    FilterState filter{x0_, model_.initial_cov(), 0, std::nullopt};
    Vector snapshot = x;
    Vector z_snapshot;
    Vector last_u = Vector::Zero(model_.control_dim);
    for (int k = 0; k < N; ++k) {
      std::optional<Vector> z;
      if (partial) z = measure(k, x, meas);
      const int clock = std::max(k - delay.backward, 0);
      const int g = tau[static_cast<size_t>(clock)];
      PolicyDecision d = PolicyDecision::idle(model_.control_dim);
      std::optional<Vector> xhat;
      std::optional<Vector> delivered;
      if (policy_.gains.control_stage(k)) {
        const int sent = k - M;
        if (partial) {
          FilterState f = filter;
          if (g) f = kalman_update(f, model_, z_snapshot);
          for (int t = sent; t < k; ++t) f = kalman_predict(f, model_, t == sent ? last_u : Vector::Zero(model_.control_dim), known_drift(t));
          d = act_partial_delayed(policy_.gains, k, f, g);
          xhat = f.mean;
          filter = std::move(f);
          if (g) delivered = z_snapshot;
        } else {
          d = act_full_delayed(policy_.gains, model_, k, DelayedInformation{snapshot, last_u}, g, affine());
          if (g) {
            xhat = delayed_predictor(snapshot, last_u, model_, k, M, affine());
            delivered = snapshot;
          }
        }
        d = with_feedforward(std::move(d), policy_, k);
        if (info && delivered) {
          if (k - sent < delay.forward) throw Error(ErrorCode::kNumeric, "causality violated");
          info->add_observation(sent, *delivered);
          info->add_control(k, d.u);
        }
      }
      if (k % M == 0) {
        snapshot = x;
        last_u = d.u;
        if (partial) z_snapshot = *z;
      }
      const double g_k = stage_cost(k, x, d.u);
      out.cost += g_k;
      tracker.observe(x, d.u);
      if (trace) {
        std::optional<Vector> sent_z;
        if (k % M == 0 && k / M < policy_.gains.control_rounds()) sent_z = partial ? *z : x;
        trace->stages.push_back({k, x, sent_z, g, d.u, d.applied, xhat, g_k});
      }
      x = step(k, x, d.u, dist);
    }
    finish(out, tracker, x, trace ? &*trace : nullptr);
    return out;
  }

  const LinearSystemModel& model_;
  const ReliabilityChain& chain_;
  const ControllerRegime& policy_;
  const Vector& x0_;
  const SimulationConfig& config_;
  const Factors& factors_;
};

double mean_of(const std::vector<Outcome>& v, double Outcome::*field) {
  double s = 0.0;
  for (const Outcome& o : v) s += o.*field;
  return s / static_cast<double>(v.size());
}

double std_error_of(const std::vector<Outcome>& v, double Outcome::*field, double mean) {
  if (v.size() < 2) return 0.0;
  double s = 0.0;
  for (const Outcome& o : v) {
    const double d = o.*field - mean;
    s += d * d;
  }
  const double n = static_cast<double>(v.size());
  return std::sqrt(s / (n - 1.0) / n);
}

std::string fmt(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t replication, std::uint64_t stream) {
  return splitmix64(splitmix64(splitmix64(master) ^ replication) ^ (stream * 0xd1b54a32d192ed03ull));
}

SimulationResult run(const LinearSystemModel& model, const ReliabilityChain& chain, const ControllerRegime& policy,
                     const Vector& x0, const SimulationConfig& config) {
  validate_model(model);
  chain.validate();
  if (config.replications < 1) throw Error(ErrorCode::kInvalidArgument, "replications must be >= 1");
  if (x0.size() != model.state_dim) throw Error(ErrorCode::kInvalidArgument, "x0 dimension mismatch");
  if (policy.gains.horizon() != model.horizon) throw Error(ErrorCode::kInvalidArgument, "policy horizon mismatch");
  if (policy.delayed() && model.horizon < policy.round_trip()) {
    throw Error(ErrorCode::kInvalidArgument, "horizon shorter than round-trip delay");
  }
  if (config.tracking && model.state_dim != 2 * config.tracking->position_dims) {
    throw Error(ErrorCode::kInvalidArgument, "non-drone state layout: tracking needs a state of the form [e; v]");
  }

  const Factors factors = make_factors(model);
  const Replication replicate(model, chain, policy, x0, config, factors);
  std::vector<Outcome> outcomes(static_cast<size_t>(config.replications));

  int threads = config.threads > 0 ? config.threads : static_cast<int>(std::thread::hardware_concurrency());
  threads = std::clamp(threads, 1, config.replications);
  auto work = [&](int t) {
    for (int r = t; r < config.replications; r += threads) outcomes[static_cast<size_t>(r)] = replicate(r);
  };
  if (threads == 1) {
    work(0);
  } else {
    std::vector<std::exception_ptr> errors(static_cast<size_t>(threads));
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        try {
          work(t);
        } catch (...) {
          errors[static_cast<size_t>(t)] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  SimulationResult res;
  res.replications = config.replications;
  res.mean_cost = mean_of(outcomes, &Outcome::cost);
  res.std_error = std_error_of(outcomes, &Outcome::cost, res.mean_cost);
  if (config.tracking) {
    TrackingMetrics m;
    const double ms = mean_of(outcomes, &Outcome::mean_sq_error);
    m.rms_position_error = std::sqrt(ms);
    // Delta method: se(sqrt(X)) = se(X) / (2 sqrt(X)).
    const double ms_se = std_error_of(outcomes, &Outcome::mean_sq_error, ms);
    m.rms_std_error = ms > 0.0 ? ms_se / (2.0 * m.rms_position_error) : 0.0;
    m.mean_control_energy = mean_of(outcomes, &Outcome::energy);
    m.energy_std_error = std_error_of(outcomes, &Outcome::energy, m.mean_control_energy);
    for (const Outcome& o : outcomes) m.max_deviation = std::max(m.max_deviation, o.max_deviation);
    res.metrics = m;
  }
  if (config.record_traces) {
    for (Outcome& o : outcomes) res.traces.push_back(std::move(*o.trace));
  }
  return res;
}

TrackingMetrics tracking_metrics(const std::vector<SimulationTrace>& traces, const TrackingSpec& spec) {
  if (traces.empty()) throw Error(ErrorCode::kInvalidArgument, "no traces");
  std::vector<Outcome> outcomes;
  for (const SimulationTrace& t : traces) {
    if (t.x_terminal.size() != 2 * spec.position_dims) {
      throw Error(ErrorCode::kInvalidArgument, "non-drone state layout");
    }
    std::optional<TrackingSpec> s = spec;
    Tracker tr{s};
    for (const StageRecord& r : t.stages) tr.observe(r.x, r.u);
    tr.observe(t.x_terminal, Vector::Zero(t.stages.empty() ? 0 : t.stages.front().u.size()));
    outcomes.push_back({0.0, tr.sum_sq / tr.count, tr.energy, tr.max_dev, std::nullopt});
  }
  TrackingMetrics m;
  const double ms = mean_of(outcomes, &Outcome::mean_sq_error);
  m.rms_position_error = std::sqrt(ms);
  const double ms_se = std_error_of(outcomes, &Outcome::mean_sq_error, ms);
  m.rms_std_error = ms > 0.0 ? ms_se / (2.0 * m.rms_position_error) : 0.0;
  m.mean_control_energy = mean_of(outcomes, &Outcome::energy);
  m.energy_std_error = std_error_of(outcomes, &Outcome::energy, m.mean_control_energy);
  for (const Outcome& o : outcomes) m.max_deviation = std::max(m.max_deviation, o.max_deviation);
  return m;
}

std::string trace_csv(const std::vector<SimulationTrace>& traces, int state_dim, int control_dim) {
  std::ostringstream os;
  os << "rep,k,tau";
  for (int i = 0; i < state_dim; ++i) os << ",x" << i;
  for (int i = 0; i < control_dim; ++i) os << ",u" << i;
  for (int i = 0; i < state_dim; ++i) os << ",xhat" << i;
  os << ",cost_stage\n";
  for (const SimulationTrace& t : traces) {
    for (const StageRecord& r : t.stages) {
      os << t.replication << ',' << r.k << ',' << r.tau;
      for (int i = 0; i < state_dim; ++i) os << ',' << fmt(r.x[i]);
      for (int i = 0; i < control_dim; ++i) os << ',' << fmt(r.u[i]);
      for (int i = 0; i < state_dim; ++i) os << ',' << (r.xhat ? fmt((*r.xhat)[i]) : "");
      os << ',' << fmt(r.cost) << '\n';
    }
    const int N = static_cast<int>(t.stages.size());
    os << t.replication << ',' << N << ',';
    for (int i = 0; i < state_dim; ++i) os << ',' << fmt(t.x_terminal[i]);
    for (int i = 0; i < control_dim; ++i) os << ",0";
    for (int i = 0; i < state_dim; ++i) os << ',';
    os << ',' << fmt(t.terminal_cost) << '\n';
  }
  return os.str();
}

}  // namespace fogctl
