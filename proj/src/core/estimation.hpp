#pragma once

#include "core/model.hpp"
#include "core/riccati.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace fogctl {

/// Conditional mean and error covariance of the plant state at `stage`.
struct FilterState {
  Vector mean;
  Matrix covariance;
  int stage = 0;
  std::optional<int> last_update_stage;
};

FilterState kalman_predict(const FilterState& state, const LinearSystemModel& model, const Vector& applied_control,
                           const Vector& known_drift);

/// Measurement update with z = C x + v at state.stage. Uses the
/// pseudo-inverse of the innovation covariance, so exact measurements
/// (V = 0) need no special casing.
FilterState kalman_update(const FilterState& state, const LinearSystemModel& model, const Vector& z);

/// Covariance-only halves of the filter; the penalty computations need
/// nothing else.
Matrix predict_covariance(const Matrix& cov, const LinearSystemModel& model, int k);
Matrix update_covariance(const Matrix& cov, const LinearSystemModel& model, int k);

/// E[x_k | x_{k-M}, u_{k-M}]: u_{k-M} applied once, no control in between,
/// zero-mean disturbances plus the known drift when `include_drift`.
Vector delayed_predictor(const Vector& x_delayed, const Vector& u_delayed, const LinearSystemModel& model, int k,
                         int M, bool include_drift = true);

enum class PenaltyMethod { kExactEnumeration, kMonteCarlo };

/// Expected estimation terms of the partial-observation cost. For a perfect
/// match per_stage[k] = E[1{tau_k = 1} eps_k^T Lambda_k eps_k] (k = 0..N-1);
/// with delay per_stage[j] = E[1{gate_{j+1} = 1} eps_{jM}^T Wj eps_{jM}]
/// (j = 0..c-1, Wj from delayed_residual_weights).
struct EstimationPenalty {
  std::vector<double> per_stage;
  double total = 0.0;
  PenaltyMethod method = PenaltyMethod::kExactEnumeration;
  double standard_error = 0.0;
};

struct PenaltyConfig {
  PenaltyMethod method = PenaltyMethod::kExactEnumeration;
  int replications = 100000;
  std::uint64_t seed = 1;
};

inline constexpr int kMaxEnumeratedGates = 20;

EstimationPenalty expected_estimation_penalty(const LinearSystemModel& model, const ReliabilityChain& chain,
                                              const GainSchedule& schedule, const PenaltyConfig& config = {});

}  // namespace fogctl
