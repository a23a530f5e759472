#include "core/random_models.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

namespace fogctl {

namespace {

Matrix gaussian_matrix(std::mt19937_64& rng, int rows, int cols) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(rows, cols);
  for (int j = 0; j < cols; ++j) {
    for (int i = 0; i < rows; ++i) m(i, j) = normal(rng);
  }
  return m;
}

int uniform_int(std::mt19937_64& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

Matrix scaled_dynamics(std::mt19937_64& rng, int n, double scale) {
  Matrix a = gaussian_matrix(rng, n, n);
  const double radius = a.eigenvalues().cwiseAbs().maxCoeff();
  // Spectral radius lands in [0.5, 1.5] * scale.
  const double target = scale * (0.5 + random_unit(rng));
  return radius > 1e-12 ? Matrix(a * (target / radius)) : a;
}

}  // namespace

double random_unit(std::mt19937_64& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

Matrix random_psd(std::mt19937_64& rng, int n, int rank) {
  if (rank <= 0) return Matrix::Zero(n, n);
  const Matrix f = gaussian_matrix(rng, n, rank) / std::sqrt(static_cast<double>(rank));
  return symmetrized(f * f.transpose());
}

Matrix random_pd(std::mt19937_64& rng, int n, double floor) {
  return symmetrized(random_psd(rng, n, n) + floor * Matrix::Identity(n, n));
}

Vector random_vector(std::mt19937_64& rng, int n, double scale) {
  return scale * gaussian_matrix(rng, n, 1).col(0);
}

LinearSystemModel random_model(std::mt19937_64& rng, const RandomModelSpec& spec) {
  const int n = uniform_int(rng, 1, spec.max_state_dim);
  const int s = uniform_int(rng, 1, spec.max_control_dim);
  const int N = uniform_int(rng, spec.min_horizon, spec.max_horizon);
  const int m = spec.partial ? uniform_int(rng, 1, spec.max_obs_dim) : n;

  LinearSystemModel model;
  model.horizon = N;
  model.state_dim = n;
  model.control_dim = s;
  model.obs_dim = m;
  const bool time_varying = random_unit(rng) < 0.5;
  Matrix a = scaled_dynamics(rng, n, spec.a_scale);
  Matrix b = gaussian_matrix(rng, n, s);
  Matrix c = spec.partial ? gaussian_matrix(rng, m, n) : Matrix::Identity(n, n);
  for (int k = 0; k < N; ++k) {
    if (time_varying && k > 0) {
      a = scaled_dynamics(rng, n, spec.a_scale);
      b = gaussian_matrix(rng, n, s);
      if (spec.partial) c = gaussian_matrix(rng, m, n);
    }
    model.A.push_back(a);
    model.B.push_back(b);
    model.C.push_back(c);
    model.Q.push_back(random_psd(rng, n, uniform_int(rng, 0, n)));
    model.R.push_back(random_pd(rng, s));
    int w_rank = n;
    if (spec.degenerate_noise) w_rank = uniform_int(rng, random_unit(rng) < 0.1 ? 0 : 1, n);
    model.W.push_back(random_psd(rng, n, w_rank));
    model.V.push_back(spec.partial ? random_pd(rng, m, 0.05) : Matrix::Zero(m, m));
  }
  model.Q.push_back(random_psd(rng, n, uniform_int(rng, 1, n)));
  model.initial_covariance = Matrix::Zero(n, n);
  return validate_model(model);
}

DelayProfile random_delay(std::mt19937_64& rng, int horizon, bool allow_zero_forward) {
  if (horizon < 1) throw Error(ErrorCode::kInvalidArgument, "horizon too short for a random delay");
  const int M = uniform_int(rng, 1, std::min(horizon, 4));
  const int forward = uniform_int(rng, allow_zero_forward ? 0 : 1, M);
  return {forward, M - forward};
}

ReliabilityChain random_asymmetric_chain(std::mt19937_64& rng) {
  for (;;) {
    const double p = random_unit(rng);
    const double q = random_unit(rng);
    if (p > 1.0 - q + 0.02) return {p, q, random_unit(rng) < 0.5 ? 1.0 : random_unit(rng)};
  }
}

DroneScenario random_drone_scenario(std::mt19937_64& rng) {
  WaypointPlan plan;
  plan.start = Point(20.0 * (random_unit(rng) - 0.5), 20.0 * (random_unit(rng) - 0.5));
  plan.center = plan.start + Point(10.0 + 20.0 * random_unit(rng), 20.0 * (random_unit(rng) - 0.5));
  plan.radius = 2.0 + 5.0 * random_unit(rng);
  plan.approach_stages = uniform_int(rng, 3, 8);
  plan.circle_stages = uniform_int(rng, 4, 12);
  plan.return_stages = uniform_int(rng, 3, 8);
  plan.max_speed = 100.0;
  DroneScenario s;
  s.delta_t = 0.5 + random_unit(rng);
  s.waypoints = make_waypoints(plan, s.delta_t);
  s.alpha = 0.01 + random_unit(rng);
  s.sigma_x = 0.3 * random_unit(rng);
  s.sigma_v = 0.3 * random_unit(rng);
  s.rho = (2.0 * random_unit(rng) - 1.0) * s.sigma_x * s.sigma_v;
  s.start_position = plan.start + Point(random_unit(rng) - 0.5, random_unit(rng) - 0.5);
  s.start_velocity = Point(random_unit(rng) - 0.5, random_unit(rng) - 0.5);
  return s;
}

}  // namespace fogctl
