#include "core/estimation.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <random>

namespace fogctl {

namespace {

// Moore-Penrose inverse of a symmetric PSD matrix.
Matrix psd_pseudo_inverse(const Matrix& s) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(s));
  const Vector& ev = es.eigenvalues();
  const double cutoff = 1e-12 * std::max(1.0, ev.cwiseAbs().maxCoeff());
  Vector inv(ev.size());
  for (Eigen::Index i = 0; i < ev.size(); ++i) inv[i] = ev[i] > cutoff ? 1.0 / ev[i] : 0.0;
  return es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
}

Matrix kalman_gain(const Matrix& cov, const Matrix& c, const Matrix& v) {
  const Matrix innovation = c * cov * c.transpose() + v;
  return cov * c.transpose() * psd_pseudo_inverse(innovation);
}

Matrix joseph(const Matrix& cov, const Matrix& gain, const Matrix& c, const Matrix& v) {
  const Eigen::Index n = cov.rows();
  const Matrix i_kc = Matrix::Identity(n, n) - gain * c;
  return symmetrized(i_kc * cov * i_kc.transpose() + gain * v * gain.transpose());
}

// Everything the penalty walk needs per gate: which stage is measured, the
// weight of its filter error, and how far to predict before the next gate.
struct PenaltyPlan {
  GateLayout layout;
  std::vector<Matrix> weights;
  std::vector<int> measured_stage;
  double first_on = 1.0;
  Eigen::Matrix2d step;
};

PenaltyPlan make_plan(const LinearSystemModel& model, const ReliabilityChain& chain, const GainSchedule& schedule) {
  PenaltyPlan plan;
  plan.layout = gate_layout(model.horizon, schedule.delay);
  if (is_delayed(schedule.regime)) {
    plan.weights = delayed_residual_weights(schedule, model);
  } else {
    plan.weights = schedule.Lambda;
  }
  const int stride = plan.layout.stride;
  for (int j = 0; j < plan.layout.count; ++j) plan.measured_stage.push_back(j * stride);
  const Eigen::Matrix2d lead = chain.transition_power(plan.layout.lead);
  plan.first_on = (1.0 - chain.tau0_on) * lead(0, 1) + chain.tau0_on * lead(1, 1);
  plan.step = chain.transition_power(stride);
  return plan;
}

Matrix predict_span(Matrix cov, const LinearSystemModel& model, int from, int stages) {
  for (int k = from; k < from + stages; ++k) cov = predict_covariance(cov, model, k);
  return cov;
}

struct Walker {
  const LinearSystemModel& model;
  const PenaltyPlan& plan;
  std::vector<double> per_stage;

  void visit(int j, int prev_gate, double prob, const Matrix& prior) {
    if (j == plan.layout.count || prob == 0.0) return;
    const double p_on = j == 0 ? plan.first_on : plan.step(prev_gate, 1);
    const int stage = plan.measured_stage[static_cast<size_t>(j)];
    const int stride = plan.layout.stride;
    const bool last = j + 1 == plan.layout.count;
    if (p_on > 0.0) {
      const Matrix post = update_covariance(prior, model, stage);
      per_stage[static_cast<size_t>(j)] += prob * p_on * (plan.weights[static_cast<size_t>(j)] * post).trace();
      if (!last) visit(j + 1, 1, prob * p_on, predict_span(post, model, stage, stride));
    }
    if (p_on < 1.0 && !last) visit(j + 1, 0, prob * (1.0 - p_on), predict_span(prior, model, stage, stride));
  }
};

EstimationPenalty enumerate(const LinearSystemModel& model, const PenaltyPlan& plan) {
  if (plan.layout.count > kMaxEnumeratedGates) {
    throw Error(ErrorCode::kInvalidArgument, "exact enumeration limited to " + std::to_string(kMaxEnumeratedGates) +
                                                 " gates; use the monte-carlo method");
  }
  Walker w{model, plan, std::vector<double>(static_cast<size_t>(plan.layout.count), 0.0)};
  w.visit(0, 1, 1.0, model.initial_cov());
  EstimationPenalty out;
  out.method = PenaltyMethod::kExactEnumeration;
  out.per_stage = std::move(w.per_stage);
  for (double v : out.per_stage) out.total += v;
  return out;
}

EstimationPenalty sample(const LinearSystemModel& model, const PenaltyPlan& plan, const PenaltyConfig& config) {
  if (config.replications < 2) throw Error(ErrorCode::kInvalidArgument, "monte-carlo penalty needs >= 2 samples");
  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto count = static_cast<size_t>(plan.layout.count);
  std::vector<double> sums(count, 0.0);
  double total_sum = 0.0, total_sq = 0.0;
  for (int r = 0; r < config.replications; ++r) {
    Matrix cov = model.initial_cov();
    int gate = 1;
    double path_total = 0.0;
    for (size_t j = 0; j < count; ++j) {
      const double p_on = j == 0 ? plan.first_on : plan.step(gate, 1);
      gate = unit(rng) < p_on ? 1 : 0;
      const int stage = plan.measured_stage[j];
      if (gate) {
        cov = update_covariance(cov, model, stage);
        const double term = (plan.weights[j] * cov).trace();
        sums[j] += term;
        path_total += term;
      }
      if (j + 1 < count) cov = predict_span(cov, model, stage, plan.layout.stride);
    }
    total_sum += path_total;
    total_sq += path_total * path_total;
  }
  const double n = config.replications;
  EstimationPenalty out;
  out.method = PenaltyMethod::kMonteCarlo;
  for (double s : sums) out.per_stage.push_back(s / n);
  out.total = total_sum / n;
  const double var = std::max(0.0, (total_sq - n * out.total * out.total) / (n - 1.0));
  out.standard_error = std::sqrt(var / n);
  return out;
}

}  // namespace

FilterState kalman_predict(const FilterState& state, const LinearSystemModel& model, const Vector& applied_control,
                           const Vector& known_drift) {
  if (state.stage < 0 || state.stage >= model.horizon) {
    throw Error(ErrorCode::kInvalidArgument, "kalman_predict past the horizon");
  }
  const auto k = static_cast<size_t>(state.stage);
  FilterState next;
  next.mean = model.A[k] * state.mean + model.B[k] * applied_control + known_drift;
  next.covariance = predict_covariance(state.covariance, model, state.stage);
  next.stage = state.stage + 1;
  next.last_update_stage = state.last_update_stage;
  return next;
}

FilterState kalman_update(const FilterState& state, const LinearSystemModel& model, const Vector& z) {
  const auto k = static_cast<size_t>(state.stage);
  if (state.stage < 0 || k >= model.C.size()) throw Error(ErrorCode::kInvalidArgument, "no measurement model at stage");
  const Matrix& c = model.C[k];
  const Matrix gain = kalman_gain(state.covariance, c, model.V[k]);
  FilterState next;
  next.mean = state.mean + gain * (z - c * state.mean);
  next.covariance = joseph(state.covariance, gain, c, model.V[k]);
  next.stage = state.stage;
  next.last_update_stage = state.stage;
  return next;
}

Matrix predict_covariance(const Matrix& cov, const LinearSystemModel& model, int k) {
  const auto i = static_cast<size_t>(k);
  return symmetrized(model.A[i] * cov * model.A[i].transpose() + model.W[i]);
}

Matrix update_covariance(const Matrix& cov, const LinearSystemModel& model, int k) {
  const auto i = static_cast<size_t>(k);
  const Matrix gain = kalman_gain(cov, model.C[i], model.V[i]);
  return joseph(cov, gain, model.C[i], model.V[i]);
}

Vector delayed_predictor(const Vector& x_delayed, const Vector& u_delayed, const LinearSystemModel& model, int k,
                         int M, bool include_drift) {
  if (M < 1 || k < M) throw Error(ErrorCode::kInvalidArgument, "delayed_predictor needs k >= M >= 1");
  const int start = k - M;
  Vector x = model.A[static_cast<size_t>(start)] * x_delayed + model.B[static_cast<size_t>(start)] * u_delayed;
  if (include_drift) x += model.drift_at(start);
  for (int j = start + 1; j < k; ++j) {
    x = model.A[static_cast<size_t>(j)] * x;
    if (include_drift) x += model.drift_at(j);
  }
  return x;
}

EstimationPenalty expected_estimation_penalty(const LinearSystemModel& model, const ReliabilityChain& chain,
                                              const GainSchedule& schedule, const PenaltyConfig& config) {
  if (!is_partial(schedule.regime)) {
    throw Error(ErrorCode::kRegimeMismatch, "estimation penalty applies to partial-observation regimes");
  }
  chain.validate();
  const PenaltyPlan plan = make_plan(model, chain, schedule);
  if (config.method == PenaltyMethod::kExactEnumeration) return enumerate(model, plan);
  return sample(model, plan, config);
}

}  // namespace fogctl
