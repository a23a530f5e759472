#include "core/model.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <sstream>

namespace fogctl {

namespace {

std::string join(const std::vector<std::string>& items) {
  std::ostringstream os;
  for (size_t i = 0; i < items.size(); ++i) {
    if (i) os << "; ";
    os << items[i];
  }
  return os.str();
}

void check_shape(std::vector<std::string>& out, const char* name, const std::vector<Matrix>& seq,
                 size_t expected_len, Eigen::Index rows, Eigen::Index cols) {
  if (seq.size() != expected_len) {
    std::ostringstream os;
    os << name << " has " << seq.size() << " stages, expected " << expected_len;
    out.push_back(os.str());
    return;
  }
  for (size_t k = 0; k < seq.size(); ++k) {
    if (seq[k].rows() != rows || seq[k].cols() != cols) {
      std::ostringstream os;
      os << "dimension mismatch: " << name << "[" << k << "] is " << seq[k].rows() << "x" << seq[k].cols()
         << ", expected " << rows << "x" << cols;
      out.push_back(os.str());
    }
  }
}

bool nearly_symmetric(const Matrix& m) {
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= 1e-9 * scale;
}

void check_psd(std::vector<std::string>& out, const char* name, const std::vector<Matrix>& seq, bool definite) {
  for (size_t k = 0; k < seq.size(); ++k) {
    const Matrix& m = seq[k];
    if (m.rows() != m.cols() || m.size() == 0) continue;
    if (!nearly_symmetric(m)) {
      out.push_back(std::string(name) + " not symmetric at k=" + std::to_string(k));
      continue;
    }
    const double lo = min_eigenvalue(m);
    if (definite) {
      if (!(lo > kDefiniteTolerance)) {
        out.push_back(std::string(name) + " not positive definite at k=" + std::to_string(k));
      }
    } else if (lo < -kDefiniteTolerance) {
      out.push_back(std::string(name) + " not positive semidefinite at k=" + std::to_string(k));
    }
  }
}

}  // namespace

ModelError::ModelError(std::vector<std::string> violations)
    : Error(ErrorCode::kModel, "invalid model: " + join(violations)), violations_(std::move(violations)) {}

bool LinearSystemModel::has_drift() const {
  for (const auto& d : drift) {
    if (d.size() && d.cwiseAbs().maxCoeff() != 0.0) return true;
  }
  return false;
}

Vector LinearSystemModel::drift_at(int k) const {
  if (drift.empty()) return Vector::Zero(state_dim);
  return drift[static_cast<size_t>(k)];
}

Matrix LinearSystemModel::initial_cov() const {
  if (initial_covariance.size() == 0) return Matrix::Zero(state_dim, state_dim);
  return initial_covariance;
}

LinearSystemModel LinearSystemModel::constant(int horizon, const Matrix& a, const Matrix& b, const Matrix& q,
                                              const Matrix& r, const Matrix& w, const Matrix& q_terminal) {
  LinearSystemModel m;
  m.horizon = horizon;
  m.state_dim = static_cast<int>(a.rows());
  m.control_dim = static_cast<int>(b.cols());
  m.obs_dim = m.state_dim;
  const auto n = static_cast<size_t>(std::max(horizon, 0));
  m.A.assign(n, a);
  m.B.assign(n, b);
  m.C.assign(n, Matrix::Identity(m.state_dim, m.state_dim));
  m.Q.assign(n, q);
  m.Q.push_back(q_terminal);
  m.R.assign(n, r);
  m.W.assign(n, w);
  m.V.assign(n, Matrix::Zero(m.state_dim, m.state_dim));
  return m;
}

LinearSystemModel validate_model(const LinearSystemModel& model) {
  std::vector<std::string> errors;
  if (model.horizon < 1) errors.push_back("horizon N must be >= 1");
  if (model.state_dim < 1 || model.control_dim < 1 || model.obs_dim < 1) {
    errors.push_back("state, control and observation dimensions must be >= 1");
  }
  if (!errors.empty()) throw ModelError(errors);

  const auto N = static_cast<size_t>(model.horizon);
  const Eigen::Index n = model.state_dim, s = model.control_dim, m = model.obs_dim;
  check_shape(errors, "A", model.A, N, n, n);
  check_shape(errors, "B", model.B, N, n, s);
  check_shape(errors, "C", model.C, N, m, n);
  check_shape(errors, "Q", model.Q, N + 1, n, n);
  check_shape(errors, "R", model.R, N, s, s);
  check_shape(errors, "W", model.W, N, n, n);
  check_shape(errors, "V", model.V, N, m, m);
  if (!model.drift.empty()) {
    if (model.drift.size() != N) {
      errors.push_back("drift has " + std::to_string(model.drift.size()) + " stages, expected " + std::to_string(N));
    } else {
      for (size_t k = 0; k < N; ++k) {
        if (model.drift[k].size() != n) errors.push_back("dimension mismatch: drift[" + std::to_string(k) + "]");
      }
    }
  }
  if (model.initial_covariance.size() != 0 &&
      (model.initial_covariance.rows() != n || model.initial_covariance.cols() != n)) {
    errors.push_back("dimension mismatch: initial_covariance");
  }
  if (errors.empty()) {
    check_psd(errors, "Q", model.Q, false);
    check_psd(errors, "R", model.R, true);
    check_psd(errors, "W", model.W, false);
    check_psd(errors, "V", model.V, false);
    if (model.initial_covariance.size() != 0) check_psd(errors, "initial_covariance", {model.initial_covariance}, false);
  }
  if (!errors.empty()) throw ModelError(errors);
  return model;
}

bool ReliabilityChain::is_symmetric() const { return std::abs(p - (1.0 - q)) <= kSymmetricChainTolerance; }

void ReliabilityChain::validate() const {
  auto prob = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!prob(p)) throw Error(ErrorCode::kInvalidArgument, "reliability p must lie in [0, 1]");
  if (!prob(q)) throw Error(ErrorCode::kInvalidArgument, "reliability q must lie in [0, 1]");
  if (!prob(tau0_on)) throw Error(ErrorCode::kInvalidArgument, "tau0 ON probability must lie in [0, 1]");
}

double ReliabilityChain::transition(int from, int to) const {
  const double on = from == 1 ? p : 1.0 - q;
  return to == 1 ? on : 1.0 - on;
}

Eigen::Matrix2d ReliabilityChain::transition_power(int steps) const {
  Eigen::Matrix2d t;
  t << q, 1.0 - q, 1.0 - p, p;
  Eigen::Matrix2d out = Eigen::Matrix2d::Identity();
  for (int i = 0; i < steps; ++i) out = out * t;
  return out;
}

double stationary_on_probability(const ReliabilityChain& chain) {
  chain.validate();
  const double leave_on = 1.0 - chain.p;
  const double leave_off = 1.0 - chain.q;
  if (leave_on + leave_off == 0.0) {
    throw Error(ErrorCode::kInvalidArgument, "degenerate chain: both states absorbing (p = q = 1)");
  }
  return leave_off / (leave_on + leave_off);
}

void DelayProfile::validate() const {
  if (forward < 0 || backward < 0) throw Error(ErrorCode::kInvalidArgument, "delays must be nonnegative");
}

int DelayProfile::remainder_stages(int horizon) const {
  const int m = total();
  if (m < 1) throw Error(ErrorCode::kInvalidArgument, "a and c are undefined for a perfect match");
  const int r = horizon % m;
  return r == 0 ? m : r;
}

int DelayProfile::control_rounds(int horizon) const { return (horizon - remainder_stages(horizon)) / total(); }

GateLayout gate_layout(int horizon, const std::optional<DelayProfile>& delay) {
  if (!delay || delay->perfect()) return {horizon, 0, 1};
  return {delay->control_rounds(horizon), delay->forward, delay->total()};
}

void InformationSet::add_observation(int stage, Vector z) {
  if (!observations_.empty() && observations_.back().first >= stage) {
    throw Error(ErrorCode::kInvalidArgument, "observation stages must be strictly increasing");
  }
  observations_.emplace_back(stage, std::move(z));
}

void InformationSet::add_control(int stage, Vector u) {
  if (!controls_.empty() && controls_.back().first >= stage) {
    throw Error(ErrorCode::kInvalidArgument, "control stages must be strictly increasing");
  }
  controls_.emplace_back(stage, std::move(u));
}

std::optional<int> InformationSet::last_observation_stage() const {
  if (observations_.empty()) return std::nullopt;
  return observations_.back().first;
}

Matrix symmetrized(const Matrix& m) { return 0.5 * (m + m.transpose()); }

double min_eigenvalue(const Matrix& symmetric) {
  if (symmetric.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetric, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

bool is_psd(const Matrix& m, double tol) {
  if (!nearly_symmetric(m)) return false;
  return min_eigenvalue(symmetrized(m)) >= -tol;
}

Matrix psd_factor(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(m));
  const Vector roots = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * roots.asDiagonal();
}

}  // namespace fogctl
