#pragma once

#include "core/drone.hpp"
#include "core/model.hpp"
#include "core/policy.hpp"
#include "core/riccati.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace fogctl {

struct SweepSettings {
  std::vector<double> p;
  std::vector<DelayProfile> delays;
};

struct SimulationSettings {
  int replications = 1000;
  std::uint64_t seed = 1;
  bool record_traces = false;
  ControllerMode mode = ControllerMode::kPaperFaithful;
  std::optional<SweepSettings> sweep;
};

struct VerifySettings {
  int instances = 200;
  std::uint64_t seed = 2024;
  double lambda_sign = 1.0;
};

struct CatalogEntry {
  std::string name;
  double latency_seconds = 0.0;
  double p = 1.0;
  std::optional<double> q;
  std::optional<int> forward;
  std::optional<int> backward;
};

struct PlacementSettings {
  double delta_t = 0.5;
  std::vector<CatalogEntry> catalog;
};

/// The measured latencies of the reference endpoint table.
std::vector<CatalogEntry> default_catalog();

struct ScenarioSettings {
  WaypointPlan plan;
  DroneScenario scenario;
};

struct Experiment {
  std::optional<LinearSystemModel> model;
  Vector x0;
  Observation observation = Observation::kFull;
  std::optional<ReliabilityChain> chain;
  DelayProfile delay;
  std::optional<ScenarioSettings> scenario;
  SimulationSettings simulation;
  VerifySettings verify;
  PlacementSettings placement;
  std::vector<std::string> warnings;

  const LinearSystemModel& require_model() const;
  const ReliabilityChain& require_chain() const;
  std::optional<DelayProfile> delay_or_none() const;
};

/// Throws Error(kConfig) on schema violations and ModelError on invalid
/// matrices. Non-fatal issues (symmetrized covariances) go to `warnings`.
Experiment parse_experiment(const nlohmann::json& doc);
Experiment load_experiment(const std::string& path);
nlohmann::json to_json(const Experiment& experiment);

nlohmann::json matrix_to_json(const Matrix& m);
nlohmann::json vector_to_json(const Vector& v);

}  // namespace fogctl
