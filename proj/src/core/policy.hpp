#pragma once

#include "core/estimation.hpp"
#include "core/model.hpp"
#include "core/riccati.hpp"

#include <optional>
#include <vector>

namespace fogctl {

/// paper-faithful: the linear laws as derived for zero-mean disturbances,
/// applied to whatever the state is. affine-compensated: the controller also
/// knows the drift, predicts with it and adds the matching feedforward.
enum class ControllerMode { kPaperFaithful, kAffineCompensated };

const char* mode_name(ControllerMode mode);

struct ControllerRegime {
  Observation observation = Observation::kFull;
  std::optional<DelayProfile> delay;
  GainSchedule gains;
  ControllerMode mode = ControllerMode::kPaperFaithful;
  /// Per-stage feedforward F_k (affine mode only; u = -V_k xhat - F_k).
  std::vector<Vector> feedforward;

  bool delayed() const { return delay && !delay->perfect(); }
  int round_trip() const { return delayed() ? delay->total() : 0; }
};

ControllerRegime make_controller(const LinearSystemModel& model, double p, const std::optional<DelayProfile>& delay,
                                 Observation observation, ControllerMode mode = ControllerMode::kPaperFaithful);

/// The delayed information pair lambda_k = (x_{k-M}, u_{k-M}).
struct DelayedInformation {
  Vector x;
  Vector u;
};

PolicyDecision act_full_perfect(const GainSchedule& gains, int k, const Vector& x, bool tau);
PolicyDecision act_partial_perfect(const GainSchedule& gains, int k, const FilterState& filter, bool tau);
PolicyDecision act_full_delayed(const GainSchedule& gains, const LinearSystemModel& model, int k,
                                const std::optional<DelayedInformation>& lambda, bool gate,
                                bool include_drift = false);
/// `predicted` is the controller-side filter mean carried forward to stage k.
PolicyDecision act_partial_delayed(const GainSchedule& gains, int k, const FilterState& predicted, bool gate);

/// Adds the affine feedforward to an applied decision (no-op otherwise).
PolicyDecision with_feedforward(PolicyDecision decision, const ControllerRegime& regime, int k);

/// Gains of the symmetric chain p' = 1 - q, meant to run on the asymmetric
/// chain (p, q) with p > 1 - q.
ControllerRegime sandwich_policy(const LinearSystemModel& model, const ReliabilityChain& chain,
                                 const std::optional<DelayProfile>& delay, Observation observation);

}  // namespace fogctl
