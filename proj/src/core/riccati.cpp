#include "core/riccati.hpp"

#include "core/estimation.hpp"

#include <Eigen/Cholesky>

namespace fogctl {

namespace {

void check_probability(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorCode::kInvalidArgument, "p must lie in [0, 1]");
}

// One Riccati step at stage k given K_{k+1}: fills L_k, Lambda_k, V_k.
void riccati_step(const LinearSystemModel& model, int k, const Matrix& k_next, Matrix& l, Matrix& lambda,
                  Matrix& v) {
  const auto i = static_cast<size_t>(k);
  const Matrix& a = model.A[i];
  const Matrix& b = model.B[i];
  const Matrix bk = b.transpose() * k_next;
  const Matrix gram = symmetrized(model.R[i] + bk * b);
  Eigen::LLT<Matrix> llt(gram);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::kNumeric, "R + B^T K B not positive definite at k=" + std::to_string(k));
  }
  v = llt.solve(bk * a);
  l = symmetrized(model.Q[i] + a.transpose() * k_next * a);
  lambda = symmetrized(a.transpose() * k_next.transpose() * b * v);
}

void check_regime(const GainSchedule& s, Regime expected) {
  if (s.regime != expected) {
    throw Error(ErrorCode::kRegimeMismatch, std::string("schedule regime is ") + regime_name(s.regime) +
                                                ", expected " + regime_name(expected));
  }
}

double trace_sum(const std::vector<Matrix>& weights, const LinearSystemModel& model, int first, int last) {
  double total = 0.0;
  for (int k = first; k <= last; ++k) {
    total += (weights[static_cast<size_t>(k + 1)] * model.W[static_cast<size_t>(k)]).trace();
  }
  return total;
}

double quadratic_expectation(const Matrix& weight, const Vector& mean, const Matrix& cov) {
  return mean.dot(weight * mean) + (weight * cov).trace();
}

}  // namespace

const char* regime_name(Regime regime) {
  switch (regime) {
    case Regime::kFullPerfect: return "full-perfect";
    case Regime::kPartialPerfect: return "partial-perfect";
    case Regime::kFullDelayed: return "full-delayed";
    case Regime::kPartialDelayed: return "partial-delayed";
  }
  return "unknown";
}

Regime make_regime(Observation observation, bool delayed) {
  if (observation == Observation::kFull) return delayed ? Regime::kFullDelayed : Regime::kFullPerfect;
  return delayed ? Regime::kPartialDelayed : Regime::kPartialPerfect;
}

bool is_delayed(Regime regime) { return regime == Regime::kFullDelayed || regime == Regime::kPartialDelayed; }
bool is_partial(Regime regime) { return regime == Regime::kPartialPerfect || regime == Regime::kPartialDelayed; }

bool GainSchedule::control_stage(int k) const {
  if (k < 0 || k >= horizon()) return false;
  if (!delay || delay->perfect()) return true;
  const int m = delay->total();
  return k >= m && k % m == 0;
}

int GainSchedule::control_rounds() const {
  if (!delay || delay->perfect()) return horizon();
  return delay->control_rounds(horizon());
}

GainSchedule backward_recursion_perfect(const LinearSystemModel& model, double p, Observation observation,
                                        const RecursionOptions& options) {
  check_probability(p);
  const int N = model.horizon;
  const auto n = static_cast<size_t>(N);
  GainSchedule s;
  s.regime = make_regime(observation, false);
  s.p_used = p;
  s.K.resize(n + 1);
  s.L.resize(n);
  s.Lambda.resize(n);
  s.V.resize(n);
  s.K[n] = model.Q[n];
  for (int k = N - 1; k >= 0; --k) {
    const auto i = static_cast<size_t>(k);
    riccati_step(model, k, s.K[i + 1], s.L[i], s.Lambda[i], s.V[i]);
    s.K[i] = symmetrized(s.L[i] - options.lambda_sign * p * s.Lambda[i]);
  }
  return s;
}

GainSchedule backward_recursion_delayed(const LinearSystemModel& model, double p, const DelayProfile& delay,
                                        Observation observation, const RecursionOptions& options) {
  check_probability(p);
  delay.validate();
  const int M = delay.total();
  if (M < 1) throw Error(ErrorCode::kInvalidArgument, "delayed recursion needs M >= 1");
  const int N = model.horizon;
  if (N < M) throw Error(ErrorCode::kInvalidArgument, "horizon shorter than round-trip delay");

  const auto n = static_cast<size_t>(N);
  GainSchedule s;
  s.regime = make_regime(observation, true);
  s.p_used = p;
  s.delay = delay;
  s.K.resize(n + 1);
  s.L.resize(n);
  s.Lambda.resize(n);
  s.V.resize(n);
  s.K[n] = model.Q[n];
  for (int k = N - 1; k >= 0; --k) {
    const auto i = static_cast<size_t>(k);
    riccati_step(model, k, s.K[i + 1], s.L[i], s.Lambda[i], s.V[i]);
    s.K[i] = (k % M == 0) ? symmetrized(s.L[i] - options.lambda_sign * p * s.Lambda[i]) : s.L[i];
  }

  const int cm = delay.control_rounds(N) * M;
  s.P.resize(static_cast<size_t>(cm) + 1);
  s.P[static_cast<size_t>(cm)] = s.Lambda[static_cast<size_t>(cm)];
  for (int k = cm - 1; k >= 0; --k) {
    const auto i = static_cast<size_t>(k);
    s.P[i] = (k % M == 0) ? s.Lambda[i] : symmetrized(model.A[i].transpose() * s.P[i + 1] * model.A[i]);
  }
  return s;
}

GainSchedule backward_recursion(const LinearSystemModel& model, double p, const std::optional<DelayProfile>& delay,
                                Observation observation, const RecursionOptions& options) {
  if (!delay || delay->perfect()) return backward_recursion_perfect(model, p, observation, options);
  return backward_recursion_delayed(model, p, *delay, observation, options);
}

std::vector<Matrix> delayed_residual_weights(const GainSchedule& schedule, const LinearSystemModel& model) {
  if (!is_delayed(schedule.regime)) throw Error(ErrorCode::kRegimeMismatch, "residual weights need a delayed schedule");
  const int M = schedule.delay->total();
  const int c = schedule.control_rounds();
  std::vector<Matrix> out;
  out.reserve(static_cast<size_t>(std::max(c, 0)));
  for (int j = 0; j < c; ++j) {
    const auto i = static_cast<size_t>(j * M);
    out.push_back(symmetrized(model.A[i].transpose() * schedule.P[i + 1] * model.A[i]));
  }
  return out;
}

CostBreakdown min_cost_full_perfect(const GainSchedule& schedule, const LinearSystemModel& model, const Vector& x0,
                                    double tau0_on) {
  check_regime(schedule, Regime::kFullPerfect);
  CostBreakdown c;
  const Matrix w0 = schedule.L[0] - tau0_on * schedule.Lambda[0];
  c.initial_state_term = quadratic_expectation(w0, x0, model.initial_cov());
  c.disturbance_trace_sum = trace_sum(schedule.K, model, 0, model.horizon - 1);
  c.finalize();
  return c;
}

CostBreakdown min_cost_full_delayed(const GainSchedule& schedule, const LinearSystemModel& model, const Vector& x0) {
  check_regime(schedule, Regime::kFullDelayed);
  CostBreakdown c;
  c.initial_state_term = quadratic_expectation(schedule.L[0], x0, model.initial_cov());
  c.disturbance_trace_sum = trace_sum(schedule.K, model, 0, model.horizon - 1);
  const int cm = static_cast<int>(schedule.P.size()) - 1;
  c.collateral_trace_sum = schedule.p_used * trace_sum(schedule.P, model, 0, cm - 1);
  c.finalize();
  return c;
}

CostBreakdown min_cost_partial_perfect(const GainSchedule& schedule, const LinearSystemModel& model, const Vector& x0,
                                       double tau0_on, const EstimationPenalty& penalty) {
  check_regime(schedule, Regime::kPartialPerfect);
  if (static_cast<int>(penalty.per_stage.size()) != model.horizon) {
    throw Error(ErrorCode::kInvalidArgument, "penalty horizon mismatch");
  }
  GainSchedule as_full = schedule;
  as_full.regime = Regime::kFullPerfect;
  CostBreakdown c = min_cost_full_perfect(as_full, model, x0, tau0_on);
  c.estimation_penalty = penalty.total;
  c.finalize();
  return c;
}

CostBreakdown min_cost_partial_delayed(const GainSchedule& schedule, const LinearSystemModel& model, const Vector& x0,
                                       const EstimationPenalty& penalty) {
  check_regime(schedule, Regime::kPartialDelayed);
  if (static_cast<int>(penalty.per_stage.size()) != schedule.control_rounds()) {
    throw Error(ErrorCode::kInvalidArgument, "penalty horizon mismatch");
  }
  GainSchedule as_full = schedule;
  as_full.regime = Regime::kFullDelayed;
  CostBreakdown c = min_cost_full_delayed(as_full, model, x0);
  c.estimation_penalty = penalty.total;
  c.finalize();
  return c;
}

}  // namespace fogctl
