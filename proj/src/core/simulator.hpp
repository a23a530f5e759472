#pragma once

#include "core/model.hpp"
#include "core/policy.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace fogctl {

enum class NoiseFamily { kGaussian };

/// Error-state layout of a tracking scenario: the first `position_dims`
/// coordinates are the position error, the next `position_dims` the velocity.
struct TrackingSpec {
  int position_dims = 2;
  double alpha = 0.1;
};

struct SimulationConfig {
  int replications = 1000;
  std::uint64_t master_seed = 1;
  NoiseFamily noise = NoiseFamily::kGaussian;
  bool record_traces = false;
  std::optional<TrackingSpec> tracking;
  /// 0 picks the hardware concurrency. Results do not depend on it.
  int threads = 0;
};

struct StageRecord {
  int k = 0;
  Vector x;
  std::optional<Vector> z;
  int tau = 0;
  Vector u;
  bool applied = false;
  std::optional<Vector> xhat;
  double cost = 0.0;
};

struct SimulationTrace {
  int replication = 0;
  std::vector<StageRecord> stages;
  Vector x_terminal;
  double terminal_cost = 0.0;
  double total = 0.0;
};

struct TrackingMetrics {
  double rms_position_error = 0.0;
  double rms_std_error = 0.0;
  double mean_control_energy = 0.0;
  double energy_std_error = 0.0;
  double max_deviation = 0.0;
};

struct SimulationResult {
  double mean_cost = 0.0;
  double std_error = 0.0;
  int replications = 0;
  std::vector<SimulationTrace> traces;
  std::optional<TrackingMetrics> metrics;
};

/// Seed of one (replication, stream) pair: splitmix64 applied to the master
/// seed, then to the replication index and the stream tag.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t replication, std::uint64_t stream);

/// Closed-loop Monte Carlo of `policy` on the plant. x0 is the nominal start;
/// the realized x_0 is drawn from N(x0, initial_covariance).
SimulationResult run(const LinearSystemModel& model, const ReliabilityChain& chain, const ControllerRegime& policy,
                     const Vector& x0, const SimulationConfig& config);

TrackingMetrics tracking_metrics(const std::vector<SimulationTrace>& traces, const TrackingSpec& spec);

/// CSV with header rep,k,tau,x...,u...,xhat...,cost_stage (terminal row has k = N).
std::string trace_csv(const std::vector<SimulationTrace>& traces, int state_dim, int control_dim);

}  // namespace fogctl
