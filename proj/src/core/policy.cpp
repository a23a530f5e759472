#include "core/policy.hpp"

#include <Eigen/Cholesky>

namespace fogctl {

namespace {

void check_stage(const GainSchedule& gains, int k) {
  if (k < 0 || k >= gains.horizon()) throw Error(ErrorCode::kInvalidArgument, "stage outside the horizon");
}

// Linear term s_k of the value function under known drift; F_k is the
// control offset that minimizes it.
std::vector<Vector> affine_feedforward(const LinearSystemModel& model, const GainSchedule& gains) {
  const int N = model.horizon;
  std::vector<Vector> ff(static_cast<size_t>(N), Vector::Zero(model.control_dim));
  Vector s = Vector::Zero(model.state_dim);
  for (int k = N - 1; k >= 0; --k) {
    const auto i = static_cast<size_t>(k);
    const Matrix& a = model.A[i];
    const Matrix& b = model.B[i];
    const Matrix& kn = gains.K[i + 1];
    const Vector pull = kn * model.drift_at(k) + s;
    if (gains.control_stage(k)) {
      const Matrix gram = symmetrized(model.R[i] + b.transpose() * kn * b);
      ff[i] = gram.llt().solve(b.transpose() * pull);
      s = (a - gains.p_used * b * gains.V[i]).transpose() * pull;
    } else {
      s = a.transpose() * pull;
    }
  }
  return ff;
}

}  // namespace

const char* mode_name(ControllerMode mode) {
  return mode == ControllerMode::kPaperFaithful ? "paper-faithful" : "affine-compensated";
}

ControllerRegime make_controller(const LinearSystemModel& model, double p, const std::optional<DelayProfile>& delay,
                                 Observation observation, ControllerMode mode) {
  ControllerRegime r;
  r.observation = observation;
  if (delay && !delay->perfect()) r.delay = delay;
  r.gains = backward_recursion(model, p, r.delay, observation);
  r.mode = mode;
  if (mode == ControllerMode::kAffineCompensated) r.feedforward = affine_feedforward(model, r.gains);
  return r;
}

PolicyDecision act_full_perfect(const GainSchedule& gains, int k, const Vector& x, bool tau) {
  check_stage(gains, k);
  const Eigen::Index s = gains.V[static_cast<size_t>(k)].rows();
  if (!tau) return PolicyDecision::idle(static_cast<int>(s));
  return PolicyDecision::apply(-gains.V[static_cast<size_t>(k)] * x);
}

PolicyDecision act_partial_perfect(const GainSchedule& gains, int k, const FilterState& filter, bool tau) {
  if (filter.stage != k) throw Error(ErrorCode::kInvalidArgument, "filter stage does not match k");
  return act_full_perfect(gains, k, filter.mean, tau);
}

PolicyDecision act_full_delayed(const GainSchedule& gains, const LinearSystemModel& model, int k,
                                const std::optional<DelayedInformation>& lambda, bool gate, bool include_drift) {
  check_stage(gains, k);
  const auto s = static_cast<int>(gains.V[static_cast<size_t>(k)].rows());
  if (!gains.control_stage(k) || !gate) return PolicyDecision::idle(s);
  if (!lambda) throw Error(ErrorCode::kInvalidArgument, "on-grid stage without delayed information");
  const Vector xhat = delayed_predictor(lambda->x, lambda->u, model, k, gains.delay->total(), include_drift);
  return PolicyDecision::apply(-gains.V[static_cast<size_t>(k)] * xhat);
}

PolicyDecision act_partial_delayed(const GainSchedule& gains, int k, const FilterState& predicted, bool gate) {
  check_stage(gains, k);
  if (predicted.stage != k) throw Error(ErrorCode::kInvalidArgument, "filter clock not aligned to k");
  const auto s = static_cast<int>(gains.V[static_cast<size_t>(k)].rows());
  if (!gains.control_stage(k) || !gate) return PolicyDecision::idle(s);
  return PolicyDecision::apply(-gains.V[static_cast<size_t>(k)] * predicted.mean);
}

PolicyDecision with_feedforward(PolicyDecision decision, const ControllerRegime& regime, int k) {
  if (decision.applied && regime.mode == ControllerMode::kAffineCompensated) {
    decision.u -= regime.feedforward[static_cast<size_t>(k)];
  }
  return decision;
}

ControllerRegime sandwich_policy(const LinearSystemModel& model, const ReliabilityChain& chain,
                                 const std::optional<DelayProfile>& delay, Observation observation) {
  chain.validate();
  if (!(chain.p > 1.0 - chain.q) || chain.is_symmetric()) {
    throw Error(ErrorCode::kInvalidArgument, "sandwich hypotheses violated: need p > 1 - q");
  }
  return make_controller(model, 1.0 - chain.q, delay, observation);
}

}  // namespace fogctl
