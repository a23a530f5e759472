#pragma once

#include "core/estimation.hpp"
#include "core/model.hpp"
#include "core/policy.hpp"
#include "core/riccati.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace fogctl {

struct TauPath {
  std::vector<int> path;
  double probability = 0.0;
};

inline constexpr int kMaxOracleHorizon = 16;

/// All 2^length ON/OFF paths tau_0..tau_{length-1} with their probabilities
/// (tau_0 drawn from chain.tau0_on).
std::vector<TauPath> enumerate_tau_paths(const ReliabilityChain& chain, int length);

/// Exact minimum expected cost under full observation by backward induction
/// with one quadratic value function per (stage, chain state). Handles
/// asymmetric chains. With delay the admissible controls are functions of
/// lambda_k at on-grid stages, gated by tau_{k - M_B}.
double brute_force_min_cost(const LinearSystemModel& model, const ReliabilityChain& chain,
                            const std::optional<DelayProfile>& delay, const Vector& x0);

/// Exact expected cost of a fixed linear policy (paper-faithful mode, zero
/// drift) on `chain`, summing second-moment propagations of the closed loop
/// over every gate path.
double evaluate_policy_cost(const LinearSystemModel& model, const ReliabilityChain& chain,
                            const ControllerRegime& policy, const Vector& x0);

/// Closed-form optimum for a symmetric chain in whichever of the four regimes applies; the
/// estimation terms come from exact enumeration when the gate count allows.
CostBreakdown closed_form_min_cost(const LinearSystemModel& model, const ReliabilityChain& symmetric_chain,
                                   const std::optional<DelayProfile>& delay, Observation observation, const Vector& x0,
                                   const PenaltyConfig& penalty = {});

struct BoundReport {
  double lower = 0.0;
  double upper = 0.0;
  double policy_value = 0.0;
  double tolerance = 0.0;
  double standard_error = 0.0;
  bool exact = true;
  bool holds = false;
};

struct BoundCheckOptions {
  int replications = 100000;
  std::uint64_t seed = 7;
};

BoundReport bound_check(const LinearSystemModel& model, const ReliabilityChain& chain,
                        const std::optional<DelayProfile>& delay, Observation observation, const Vector& x0,
                        const BoundCheckOptions& options = {});

}  // namespace fogctl
