#pragma once

#include "core/drone.hpp"
#include "core/model.hpp"

#include <optional>
#include <random>

namespace fogctl {

struct RandomModelSpec {
  int max_state_dim = 3;
  int max_control_dim = 2;
  int max_obs_dim = 3;
  int min_horizon = 1;
  int max_horizon = 10;
  /// Spectral scale of A; keeps costs moderate over short horizons.
  double a_scale = 0.6;
  /// Draw C and a positive definite V (otherwise C = I, V = 0).
  bool partial = false;
  /// Some W_k exactly zero, some rank deficient.
  bool degenerate_noise = true;
};

Matrix random_psd(std::mt19937_64& rng, int n, int rank);
Matrix random_pd(std::mt19937_64& rng, int n, double floor = 0.1);

LinearSystemModel random_model(std::mt19937_64& rng, const RandomModelSpec& spec = {});

Vector random_vector(std::mt19937_64& rng, int n, double scale = 1.0);

/// A delay with 1 <= M <= N and forward >= 1 unless `allow_zero_forward`.
DelayProfile random_delay(std::mt19937_64& rng, int horizon, bool allow_zero_forward = false);

double random_unit(std::mt19937_64& rng);

/// Chain with p > 1 - q, away from the symmetric line.
ReliabilityChain random_asymmetric_chain(std::mt19937_64& rng);

/// Small tracking scenario with random geometry and noise levels.
DroneScenario random_drone_scenario(std::mt19937_64& rng);

}  // namespace fogctl
