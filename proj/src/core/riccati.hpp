#pragma once

#include "core/model.hpp"

#include <optional>
#include <vector>

namespace fogctl {

struct EstimationPenalty;

enum class Observation { kFull, kPartial };

enum class Regime { kFullPerfect, kPartialPerfect, kFullDelayed, kPartialDelayed };

const char* regime_name(Regime regime);
Regime make_regime(Observation observation, bool delayed);
bool is_delayed(Regime regime);
bool is_partial(Regime regime);

/// Output of the backward recursions. K has N+1 entries (K[N] = Q_N);
/// L, Lambda, V have N; P has cM+1 entries and is only present with delay.
struct GainSchedule {
  Regime regime = Regime::kFullPerfect;
  double p_used = 1.0;
  std::optional<DelayProfile> delay;
  std::vector<Matrix> K;
  std::vector<Matrix> L;
  std::vector<Matrix> Lambda;
  std::vector<Matrix> V;
  std::vector<Matrix> P;

  int horizon() const { return static_cast<int>(L.size()); }
  /// True at stages where the delayed policy may emit a control (k = jM,
  /// 1 <= j <= c). Every stage is on-grid for a perfect match.
  bool control_stage(int k) const;
  /// c: number of on-grid control stages (N for a perfect match).
  int control_rounds() const;
};

struct RecursionOptions {
  /// Sign applied to the -p*Lambda correction of K. Only the verifier's
  /// fault-injection fixture sets this to -1.
  double lambda_sign = 1.0;
};

GainSchedule backward_recursion_perfect(const LinearSystemModel& model, double p,
                                        Observation observation = Observation::kFull,
                                        const RecursionOptions& options = {});

GainSchedule backward_recursion_delayed(const LinearSystemModel& model, double p, const DelayProfile& delay,
                                        Observation observation = Observation::kFull,
                                        const RecursionOptions& options = {});

/// Dispatches on whether `delay` is a perfect match.
GainSchedule backward_recursion(const LinearSystemModel& model, double p, const std::optional<DelayProfile>& delay,
                                Observation observation = Observation::kFull, const RecursionOptions& options = {});

/// Weights of the filter errors at kM (k = 0..c-1) in the delayed
/// partial-observation cost: A_{kM}^T P_{kM+1} A_{kM}, i.e. Lambda_{(k+1)M}
/// pulled back through the M-step transition.
std::vector<Matrix> delayed_residual_weights(const GainSchedule& schedule, const LinearSystemModel& model);

CostBreakdown min_cost_full_perfect(const GainSchedule& schedule, const LinearSystemModel& model, const Vector& x0,
                                    double tau0_on);
CostBreakdown min_cost_full_delayed(const GainSchedule& schedule, const LinearSystemModel& model, const Vector& x0);
CostBreakdown min_cost_partial_perfect(const GainSchedule& schedule, const LinearSystemModel& model, const Vector& x0,
                                       double tau0_on, const EstimationPenalty& penalty);
CostBreakdown min_cost_partial_delayed(const GainSchedule& schedule, const LinearSystemModel& model, const Vector& x0,
                                       const EstimationPenalty& penalty);

}  // namespace fogctl
