#pragma once

#include <Eigen/Dense>

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace fogctl {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class ErrorCode {
  kInvalidArgument,
  kModel,
  kConfig,
  kNumeric,
  kUnsupported,
  kRegimeMismatch,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Raised by validate_model; carries every violated invariant, not just the first.
class ModelError : public Error {
 public:
  explicit ModelError(std::vector<std::string> violations);
  const std::vector<std::string>& violations() const noexcept { return violations_; }

 private:
  std::vector<std::string> violations_;
};

inline constexpr double kDefiniteTolerance = 1e-10;
inline constexpr double kPsdTolerance = 1e-9;
inline constexpr double kSymmetricChainTolerance = 1e-12;

/// Finite-horizon linear plant x_{k+1} = A_k x_k + B_k u_k + w_k observed
/// through z_k = C_k x_k + v_k, with quadratic stage weights Q_k, R_k.
///
/// Q holds N+1 matrices (Q[N] is the terminal weight); every other sequence
/// holds N. `drift` is either empty or N known disturbance means.
/// `initial_covariance` is the spread of x_0 around the nominal start the
/// controller is told about; zero means x_0 is known exactly.
struct LinearSystemModel {
  int horizon = 0;
  int state_dim = 0;
  int control_dim = 0;
  int obs_dim = 0;
  std::vector<Matrix> A;
  std::vector<Matrix> B;
  std::vector<Matrix> C;
  std::vector<Matrix> Q;
  std::vector<Matrix> R;
  std::vector<Matrix> W;
  std::vector<Matrix> V;
  std::vector<Vector> drift;
  Matrix initial_covariance;

  bool has_drift() const;
  Vector drift_at(int k) const;
  Matrix initial_cov() const;

  /// Same matrices at every stage; C = I, V = 0, no drift.
  static LinearSystemModel constant(int horizon, const Matrix& a, const Matrix& b, const Matrix& q,
                                    const Matrix& r, const Matrix& w, const Matrix& q_terminal);
};

LinearSystemModel validate_model(const LinearSystemModel& model);

/// Two-state Markov ON/OFF process of the fog endpoint.
/// p = P[on -> on], q = P[off -> off]; tau0_on = P[tau_0 = 1].
struct ReliabilityChain {
  double p = 1.0;
  double q = 0.0;
  double tau0_on = 1.0;

  static ReliabilityChain symmetric(double p, double tau0_on = 1.0) { return {p, 1.0 - p, tau0_on}; }

  bool is_symmetric() const;
  void validate() const;
  /// P[tau_{k+1} = to | tau_k = from].
  double transition(int from, int to) const;
  /// s-step transition matrix, rows indexed by the starting state (0 = OFF).
  Eigen::Matrix2d transition_power(int steps) const;
};

double stationary_on_probability(const ReliabilityChain& chain);

/// Forward (plant -> controller) and backward (controller -> plant, compute
/// time included) delays in stages.
struct DelayProfile {
  int forward = 0;
  int backward = 0;

  int total() const { return forward + backward; }
  bool perfect() const { return total() == 0; }
  void validate() const;
  /// a = N mod M, or M when M divides N. Undefined for a perfect match.
  int remainder_stages(int horizon) const;
  /// c = (N - a) / M: the number of on-grid stages M, 2M, ..., cM that can
  /// carry a control.
  int control_rounds(int horizon) const;
};

/// Where the chain is read when it decides whether a control (and, in
/// delayed regimes, the measurement that requested it) goes through.
/// Gate j sits `lead + j * stride` stages after tau_0.
struct GateLayout {
  int count = 0;
  int lead = 0;
  int stride = 1;
};

GateLayout gate_layout(int horizon, const std::optional<DelayProfile>& delay);

/// Controller-side history: received observations and applied controls.
class InformationSet {
 public:
  void add_observation(int stage, Vector z);
  void add_control(int stage, Vector u);
  const std::vector<std::pair<int, Vector>>& observations() const { return observations_; }
  const std::vector<std::pair<int, Vector>>& controls() const { return controls_; }
  std::optional<int> last_observation_stage() const;

 private:
  std::vector<std::pair<int, Vector>> observations_;
  std::vector<std::pair<int, Vector>> controls_;
};

struct PolicyDecision {
  Vector u;
  bool applied = false;

  static PolicyDecision idle(int control_dim) { return {Vector::Zero(control_dim), false}; }
  static PolicyDecision apply(Vector u) { return {std::move(u), true}; }
};

struct CostBreakdown {
  double initial_state_term = 0.0;
  double disturbance_trace_sum = 0.0;
  double collateral_trace_sum = 0.0;
  double estimation_penalty = 0.0;
  double total = 0.0;

  void finalize() { total = initial_state_term + disturbance_trace_sum + collateral_trace_sum + estimation_penalty; }
};

// Linear-algebra helpers shared across modules.
Matrix symmetrized(const Matrix& m);
double min_eigenvalue(const Matrix& symmetric);
bool is_psd(const Matrix& m, double tol = kPsdTolerance);
/// F with F F^T = m for symmetric PSD m (negative round-off eigenvalues clipped).
Matrix psd_factor(const Matrix& m);

}  // namespace fogctl
