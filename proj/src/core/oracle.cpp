#include "core/oracle.hpp"

#include "core/simulator.hpp"

#include <Eigen/Cholesky>

#include <array>
#include <cmath>
#include <string>

namespace fogctl {

namespace {

using ValuePair = std::array<Matrix, 2>;
using ConstPair = std::array<double, 2>;

void require_zero_drift(const LinearSystemModel& model) {
  if (model.has_drift()) throw Error(ErrorCode::kUnsupported, "oracle requires zero-mean disturbances");
}

void check_horizon(const LinearSystemModel& model) {
  if (model.horizon > kMaxOracleHorizon) {
    throw Error(ErrorCode::kInvalidArgument,
                "N too large for the oracle (limit " + std::to_string(kMaxOracleHorizon) + ")");
  }
}

double first_gate_on(const ReliabilityChain& chain, int lead) {
  const Eigen::Matrix2d t = chain.transition_power(lead);
  return (1.0 - chain.tau0_on) * t(0, 1) + chain.tau0_on * t(1, 1);
}

// Minimized quadratic form: H_xx - gate * H_ux^T H_uu^{-1} H_ux.
Matrix minimize(const Matrix& a, const Matrix& b, const Matrix& q, const Matrix& r, const Matrix& y, int gate) {
  Matrix out = q + a.transpose() * y * a;
  if (gate) {
    const Matrix hux = b.transpose() * y * a;
    const Matrix huu = symmetrized(r + b.transpose() * y * b);
    Eigen::LLT<Matrix> llt(huu);
    if (llt.info() != Eigen::Success) throw Error(ErrorCode::kNumeric, "oracle: R + B^T Y B not positive definite");
    out -= hux.transpose() * llt.solve(hux);
  }
  return symmetrized(out);
}

double perfect_dp(const LinearSystemModel& model, const ReliabilityChain& chain, const Vector& x0) {
  const int N = model.horizon;
  ValuePair s{model.Q[static_cast<size_t>(N)], model.Q[static_cast<size_t>(N)]};
  ConstPair c{0.0, 0.0};
  for (int k = N - 1; k >= 0; --k) {
    const auto i = static_cast<size_t>(k);
    ValuePair ns;
    ConstPair nc;
    for (int tau = 0; tau < 2; ++tau) {
      const double to_off = chain.transition(tau, 0);
      const double to_on = chain.transition(tau, 1);
      const Matrix mix = to_off * s[0] + to_on * s[1];
      ns[tau] = minimize(model.A[i], model.B[i], model.Q[i], model.R[i], mix, tau);
      nc[tau] = (mix * model.W[i]).trace() + to_off * c[0] + to_on * c[1];
    }
    s = ns;
    c = nc;
  }
  const Matrix sigma0 = model.initial_cov();
  double total = 0.0;
  for (int tau = 0; tau < 2; ++tau) {
    const double w = tau ? chain.tau0_on : 1.0 - chain.tau0_on;
    total += w * (x0.dot(s[tau] * x0) + (s[tau] * sigma0).trace() + c[tau]);
  }
  return total;
}

// Decision instants are t_j = jM (j = 1..c). Between instants the plant runs
// open loop; the controller at t_j knows x_{t_{j-1}} and u_{t_{j-1}}, so the
// value is quadratic in that prediction plus the prediction-error constants.
double delayed_dp(const LinearSystemModel& model, const ReliabilityChain& chain, const DelayProfile& delay,
                  const Vector& x0) {
  const int N = model.horizon;
  const int M = delay.total();
  if (N < M) throw Error(ErrorCode::kInvalidArgument, "horizon shorter than round-trip delay");
  const int c = delay.control_rounds(N);
  const int n = model.state_dim;
  const Eigen::Matrix2d step = chain.transition_power(M);

  // Block data for [from, to): tail weight Yq, its noise constant and the
  // open-loop transition from+1 -> to.
  struct Block {
    Matrix yq;
    double noise = 0.0;
    Matrix phi;
  };
  auto block = [&](int from, int to) {
    Block b;
    Matrix y = to == N ? model.Q[static_cast<size_t>(N)] : Matrix::Zero(n, n);
    Matrix phi = Matrix::Identity(n, n);
    for (int k = to - 1; k >= from; --k) {
      const auto i = static_cast<size_t>(k);
      b.noise += (y * model.W[i]).trace();
      if (k > from) {
        y = symmetrized(model.Q[i] + model.A[i].transpose() * y * model.A[i]);
        phi = phi * model.A[i];
      }
    }
    b.yq = y;
    b.phi = phi;
    return b;
  };
  auto prediction_error = [&](int from, int to) {
    Matrix cov = Matrix::Zero(n, n);
    for (int k = from; k < to; ++k) {
      const auto i = static_cast<size_t>(k);
      cov = model.A[i] * cov * model.A[i].transpose() + model.W[i];
    }
    return symmetrized(cov);
  };

  ValuePair s{Matrix::Zero(n, n), Matrix::Zero(n, n)};
  ConstPair cst{0.0, 0.0};
  for (int j = c; j >= 1; --j) {
    const int from = j * M;
    const int to = j < c ? (j + 1) * M : N;
    const Block b = block(from, to);
    const Matrix err = prediction_error((j - 1) * M, from);
    const auto i = static_cast<size_t>(from);
    ValuePair ns;
    ConstPair nc;
    for (int g = 0; g < 2; ++g) {
      Matrix y = b.yq;
      double tail = 0.0;
      if (j < c) {
        y += b.phi.transpose() * (step(g, 0) * s[0] + step(g, 1) * s[1]) * b.phi;
        tail = step(g, 0) * cst[0] + step(g, 1) * cst[1];
      }
      y = symmetrized(y);
      ns[g] = minimize(model.A[i], model.B[i], model.Q[i], model.R[i], y, g);
      const Matrix hxx = model.Q[i] + model.A[i].transpose() * y * model.A[i];
      nc[g] = (hxx * err).trace() + b.noise + tail;
    }
    s = ns;
    cst = nc;
  }

  const int first_end = c >= 1 ? M : N;
  const Block b = block(0, first_end);
  const Eigen::Matrix2d lead = chain.transition_power(delay.forward);
  const Matrix sigma0 = model.initial_cov();
  double total = 0.0;
  for (int tau = 0; tau < 2; ++tau) {
    const double w = tau ? chain.tau0_on : 1.0 - chain.tau0_on;
    if (w == 0.0) continue;
    Matrix y = b.yq;
    double tail = 0.0;
    if (c >= 1) {
      y += b.phi.transpose() * (lead(tau, 0) * s[0] + lead(tau, 1) * s[1]) * b.phi;
      tail = lead(tau, 0) * cst[0] + lead(tau, 1) * cst[1];
    }
    const Matrix v0 = symmetrized(model.Q[0] + model.A[0].transpose() * y * model.A[0]);
    total += w * (x0.dot(v0 * x0) + (v0 * sigma0).trace() + b.noise + tail);
  }
  return total;
}

Matrix kalman_gain_of(const Matrix& cov, const Matrix& c, const Matrix& v) {
  const Matrix innovation = symmetrized(c * cov * c.transpose() + v);
  Eigen::SelfAdjointEigenSolver<Matrix> es(innovation);
  const Vector& ev = es.eigenvalues();
  const double cutoff = 1e-12 * std::max(1.0, ev.cwiseAbs().maxCoeff());
  Vector inv(ev.size());
  for (Eigen::Index i = 0; i < ev.size(); ++i) inv[i] = ev[i] > cutoff ? 1.0 / ev[i] : 0.0;
  return cov * c.transpose() * es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
}

Matrix joseph_of(const Matrix& cov, const Matrix& gain, const Matrix& c, const Matrix& v) {
  const Matrix i_kc = Matrix::Identity(cov.rows(), cov.cols()) - gain * c;
  return symmetrized(i_kc * cov * i_kc.transpose() + gain * v * gain.transpose());
}

// Perfect match: xi = [x; m] with m the controller's prior mean of x_k.
struct PerfectEvaluator {
  const LinearSystemModel& model;
  const ReliabilityChain& chain;
  const ControllerRegime& policy;
  int n = 0;
  double total = 0.0;

  void visit(int k, int prev, double prob, const Matrix& xi, const Matrix& prior) {
    const int N = model.horizon;
    const auto i = static_cast<size_t>(k);
    if (k == N) {
      total += prob * (model.Q[i] * xi.topLeftCorner(n, n)).trace();
      return;
    }
    const double p_on = k == 0 ? chain.tau0_on : chain.transition(prev, 1);
    for (int g = 0; g < 2; ++g) {
      const double pg = g ? p_on : 1.0 - p_on;
      if (pg == 0.0) continue;
      Matrix post_xi = xi;
      Matrix post_cov = prior;
      if (g) {
        Matrix gmap = Matrix::Zero(2 * n, 2 * n);
        gmap.topLeftCorner(n, n).setIdentity();
        if (policy.observation == Observation::kFull) {
          gmap.bottomLeftCorner(n, n).setIdentity();
          post_xi = gmap * xi * gmap.transpose();
          post_cov.setZero();
        } else {
          const Matrix& c = model.C[i];
          const Matrix gain = kalman_gain_of(prior, c, model.V[i]);
          gmap.bottomLeftCorner(n, n) = gain * c;
          gmap.bottomRightCorner(n, n) = Matrix::Identity(n, n) - gain * c;
          Matrix h = Matrix::Zero(2 * n, gain.cols());
          h.bottomRows(n) = gain;
          post_xi = gmap * xi * gmap.transpose() + h * model.V[i] * h.transpose();
          post_cov = joseph_of(prior, gain, c, model.V[i]);
        }
      }
      const Matrix& v = policy.gains.V[i];
      double stage = (model.Q[i] * post_xi.topLeftCorner(n, n)).trace();
      Matrix f = Matrix::Zero(2 * n, 2 * n);
      f.topLeftCorner(n, n) = model.A[i];
      f.bottomRightCorner(n, n) = model.A[i];
      if (g) {
        stage += (v.transpose() * model.R[i] * v * post_xi.bottomRightCorner(n, n)).trace();
        f.topRightCorner(n, n) = -model.B[i] * v;
        f.bottomRightCorner(n, n) -= model.B[i] * v;
      }
      Matrix next = f * post_xi * f.transpose();
      next.topLeftCorner(n, n) += model.W[i];
      const Matrix next_cov = symmetrized(model.A[i] * post_cov * model.A[i].transpose() + model.W[i]);
      total += prob * pg * stage;
      visit(k + 1, g, prob * pg, next, next_cov);
    }
  }
};

// Delayed match: xi = [x; s; m; up] with s the snapshot x_{t_{j-1}}, m the
// controller's prior mean of s and up the control applied at t_{j-1}.
struct DelayedEvaluator {
  const LinearSystemModel& model;
  const ReliabilityChain& chain;
  const ControllerRegime& policy;
  int n = 0;
  int sd = 0;
  int M = 0;
  int c = 0;
  Eigen::Matrix2d step = Eigen::Matrix2d::Identity();
  double first_on = 1.0;
  double total = 0.0;

  int dim() const { return 3 * n + sd; }

  // Runs stages [from, to) open loop except for `up` at `from` when it is a
  // control stage; returns the accumulated cost and updates xi in place.
  double run_block(int from, int to, bool apply_up, Matrix& xi) const {
    double cost = 0.0;
    const int d = dim();
    for (int k = from; k < to; ++k) {
      const auto i = static_cast<size_t>(k);
      cost += (model.Q[i] * xi.topLeftCorner(n, n)).trace();
      Matrix f = Matrix::Identity(d, d);
      f.topLeftCorner(n, n) = model.A[i];
      if (apply_up && k == from) {
        cost += (model.R[i] * xi.bottomRightCorner(sd, sd)).trace();
        f.block(0, 3 * n, n, sd) = model.B[i];
      }
      xi = f * xi * f.transpose();
      xi.topLeftCorner(n, n) += model.W[i];
    }
    return cost;
  }

  Matrix transition(int from, int to) const {
    Matrix phi = Matrix::Identity(n, n);
    for (int k = from; k < to; ++k) phi = model.A[static_cast<size_t>(k)] * phi;
    return phi;
  }

  Matrix predict_cov(Matrix cov, int from, int to) const {
    for (int k = from; k < to; ++k) {
      const auto i = static_cast<size_t>(k);
      cov = symmetrized(model.A[i] * cov * model.A[i].transpose() + model.W[i]);
    }
    return cov;
  }

  void visit(int j, int prev, double prob, const Matrix& xi, const Matrix& prior) {
    const int N = model.horizon;
    const double p_on = j == 1 ? first_on : step(prev, 1);
    const int tj = j * M;
    const int prev_t = tj - M;
    const auto ip = static_cast<size_t>(prev_t);
    const Matrix phi1 = transition(prev_t, tj);
    const Matrix gamma = transition(prev_t + 1, tj) * model.B[ip];
    const Matrix& v = policy.gains.V[static_cast<size_t>(tj)];
    const int d = dim();
    for (int g = 0; g < 2; ++g) {
      const double pg = g ? p_on : 1.0 - p_on;
      if (pg == 0.0) continue;
      Matrix ps = Matrix::Zero(n, n);
      Matrix pm = Matrix::Identity(n, n);
      Matrix gain;
      Matrix post_cov = prior;
      if (g) {
        if (policy.observation == Observation::kFull) {
          ps.setIdentity();
          pm.setZero();
          post_cov.setZero();
        } else {
          const Matrix& cm = model.C[ip];
          gain = kalman_gain_of(prior, cm, model.V[ip]);
          ps = gain * cm;
          pm = Matrix::Identity(n, n) - gain * cm;
          post_cov = joseph_of(prior, gain, cm, model.V[ip]);
        }
      }
      Matrix gmap = Matrix::Zero(d, d);
      gmap.block(0, 0, n, n).setIdentity();
      gmap.block(n, 0, n, n).setIdentity();
      Matrix mrow = Matrix::Zero(n, d);
      mrow.block(0, n, n, n) = phi1 * ps;
      mrow.block(0, 2 * n, n, n) = phi1 * pm;
      mrow.block(0, 3 * n, n, sd) = gamma;
      gmap.block(2 * n, 0, n, d) = mrow;
      if (g) gmap.block(3 * n, 0, sd, d) = -v * mrow;
      Matrix next = gmap * xi * gmap.transpose();
      if (g && policy.observation == Observation::kPartial) {
        Matrix h = Matrix::Zero(d, gain.cols());
        h.block(2 * n, 0, n, gain.cols()) = phi1 * gain;
        h.block(3 * n, 0, sd, gain.cols()) = -v * phi1 * gain;
        next += h * model.V[ip] * h.transpose();
      }
      const Matrix next_prior = predict_cov(post_cov, prev_t, tj);
      const int to = j < c ? tj + M : N;
      const double cost = run_block(tj, to, true, next);
      total += prob * pg * cost;
      if (j < c) {
        visit(j + 1, g, prob * pg, next, next_prior);
      } else {
        total += prob * pg * (model.Q[static_cast<size_t>(N)] * next.topLeftCorner(n, n)).trace();
      }
    }
  }
};

}  // namespace

std::vector<TauPath> enumerate_tau_paths(const ReliabilityChain& chain, int length) {
  chain.validate();
  if (length < 1 || length > kMaxOracleHorizon) {
    throw Error(ErrorCode::kInvalidArgument, "path length must lie in [1, " + std::to_string(kMaxOracleHorizon) + "]");
  }
  std::vector<TauPath> out;
  out.reserve(size_t{1} << length);
  for (unsigned long bits = 0; bits < (1ul << length); ++bits) {
    TauPath t;
    t.path.resize(static_cast<size_t>(length));
    double prob = 1.0;
    for (int k = 0; k < length; ++k) {
      const int tau = static_cast<int>((bits >> k) & 1ul);
      t.path[static_cast<size_t>(k)] = tau;
      prob *= k == 0 ? (tau ? chain.tau0_on : 1.0 - chain.tau0_on)
                     : chain.transition(t.path[static_cast<size_t>(k - 1)], tau);
    }
    t.probability = prob;
    out.push_back(std::move(t));
  }
  return out;
}

double brute_force_min_cost(const LinearSystemModel& model, const ReliabilityChain& chain,
                            const std::optional<DelayProfile>& delay, const Vector& x0) {
  validate_model(model);
  chain.validate();
  check_horizon(model);
  require_zero_drift(model);
  if (x0.size() != model.state_dim) throw Error(ErrorCode::kInvalidArgument, "x0 dimension mismatch");
  if (!delay || delay->perfect()) return perfect_dp(model, chain, x0);
  delay->validate();
  return delayed_dp(model, chain, *delay, x0);
}

double evaluate_policy_cost(const LinearSystemModel& model, const ReliabilityChain& chain,
                            const ControllerRegime& policy, const Vector& x0) {
  validate_model(model);
  chain.validate();
  require_zero_drift(model);
  if (policy.mode != ControllerMode::kPaperFaithful) {
    throw Error(ErrorCode::kUnsupported, "policy evaluation covers the linear (paper-faithful) laws only");
  }
  if (policy.gains.horizon() != model.horizon) throw Error(ErrorCode::kInvalidArgument, "policy horizon mismatch");
  if (x0.size() != model.state_dim) throw Error(ErrorCode::kInvalidArgument, "x0 dimension mismatch");
  const int n = model.state_dim;
  const Matrix sigma0 = model.initial_cov();
  const Matrix mean = x0 * x0.transpose();

  if (!policy.delayed()) {
    if (model.horizon > kMaxOracleHorizon) check_horizon(model);
    PerfectEvaluator ev{model, chain, policy};
    ev.n = n;
    Matrix xi(2 * n, 2 * n);
    xi << mean + sigma0, mean, mean, mean;
    ev.visit(0, 1, 1.0, xi, sigma0);
    return ev.total;
  }

  const DelayProfile& delay = *policy.delay;
  DelayedEvaluator ev{model, chain, policy};
  ev.n = n;
  ev.sd = model.control_dim;
  ev.M = delay.total();
  ev.c = delay.control_rounds(model.horizon);
  if (ev.c > kMaxOracleHorizon) check_horizon(model);
  ev.step = chain.transition_power(ev.M);
  ev.first_on = first_gate_on(chain, delay.forward);
  const int d = ev.dim();
  Matrix xi = Matrix::Zero(d, d);
  xi.block(0, 0, n, n) = mean + sigma0;
  xi.block(0, n, n, n) = mean + sigma0;
  xi.block(n, 0, n, n) = mean + sigma0;
  xi.block(n, n, n, n) = mean + sigma0;
  xi.block(0, 2 * n, n, n) = mean;
  xi.block(n, 2 * n, n, n) = mean;
  xi.block(2 * n, 0, n, n) = mean;
  xi.block(2 * n, n, n, n) = mean;
  xi.block(2 * n, 2 * n, n, n) = mean;
  const int first_end = ev.c >= 1 ? ev.M : model.horizon;
  ev.total = ev.run_block(0, first_end, false, xi);
  if (ev.c >= 1) {
    ev.visit(1, 1, 1.0, xi, sigma0);
  } else {
    ev.total += (model.Q[static_cast<size_t>(model.horizon)] * xi.topLeftCorner(n, n)).trace();
  }
  return ev.total;
}

CostBreakdown closed_form_min_cost(const LinearSystemModel& model, const ReliabilityChain& symmetric_chain,
                                   const std::optional<DelayProfile>& delay, Observation observation, const Vector& x0,
                                   const PenaltyConfig& penalty) {
  symmetric_chain.validate();
  if (!symmetric_chain.is_symmetric()) {
    throw Error(ErrorCode::kInvalidArgument, "closed forms need a symmetric chain (p = 1 - q)");
  }
  const GainSchedule s = backward_recursion(model, symmetric_chain.p, delay, observation);
  const bool delayed = is_delayed(s.regime);
  if (observation == Observation::kFull) {
    return delayed ? min_cost_full_delayed(s, model, x0) : min_cost_full_perfect(s, model, x0, symmetric_chain.tau0_on);
  }
  PenaltyConfig cfg = penalty;
  if (cfg.method == PenaltyMethod::kExactEnumeration && s.control_rounds() > kMaxEnumeratedGates) {
    cfg.method = PenaltyMethod::kMonteCarlo;
  }
  const EstimationPenalty pen = expected_estimation_penalty(model, symmetric_chain, s, cfg);
  return delayed ? min_cost_partial_delayed(s, model, x0, pen)
                 : min_cost_partial_perfect(s, model, x0, symmetric_chain.tau0_on, pen);
}

BoundReport bound_check(const LinearSystemModel& model, const ReliabilityChain& chain,
                        const std::optional<DelayProfile>& delay, Observation observation, const Vector& x0,
                        const BoundCheckOptions& options) {
  chain.validate();
  if (!(chain.p > 1.0 - chain.q)) throw Error(ErrorCode::kInvalidArgument, "bound_check needs p > 1 - q");
  const bool delayed = delay && !delay->perfect();
  if (delayed && delay->forward == 0) {
    throw Error(ErrorCode::kInvalidArgument, "delayed bounds need M_F >= 1 (the first gate must forget tau_0)");
  }
  BoundReport r;
  r.lower = closed_form_min_cost(model, {chain.p, 1.0 - chain.p, chain.tau0_on}, delay, observation, x0).total;
  r.upper = closed_form_min_cost(model, {1.0 - chain.q, chain.q, chain.tau0_on}, delay, observation, x0).total;

  ControllerRegime policy = chain.is_symmetric() ? make_controller(model, chain.p, delay, observation)
                                                 : sandwich_policy(model, chain, delay, observation);
  const int gates = gate_layout(model.horizon, policy.delay).count;
  if (gates <= kMaxOracleHorizon && !model.has_drift()) {
    r.policy_value = evaluate_policy_cost(model, chain, policy, x0);
    r.exact = true;
    r.tolerance = 1e-9 * std::max(1.0, std::abs(r.upper));
  } else {
    SimulationConfig cfg;
    cfg.replications = options.replications;
    cfg.master_seed = options.seed;
    const SimulationResult sim = run(model, chain, policy, x0, cfg);
    r.policy_value = sim.mean_cost;
    r.standard_error = sim.std_error;
    r.exact = false;
    r.tolerance = 3.0 * sim.std_error;
  }
  r.holds = r.lower - r.tolerance <= r.policy_value && r.policy_value <= r.upper + r.tolerance;
  return r;
}

}  // namespace fogctl
