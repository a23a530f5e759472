#include "core/drone.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <string>

namespace fogctl {

namespace {

Point lerp(const Point& a, const Point& b, double t) { return a + t * (b - a); }

}  // namespace

Point circle_entry(const WaypointPlan& plan) {
  const Point d = plan.start - plan.center;
  const double dist = d.norm();
  if (dist == 0.0) return plan.center + Point(plan.radius, 0.0);
  return plan.center + plan.radius * d / dist;
}

std::vector<Point> make_waypoints(const WaypointPlan& plan, double delta_t) {
  if (!(delta_t > 0.0)) throw Error(ErrorCode::kInvalidArgument, "delta_t must be positive");
  if (plan.approach_stages < 1 || plan.return_stages < 1 || plan.circle_stages < 0) {
    throw Error(ErrorCode::kInvalidArgument, "approach and return need at least one stage each");
  }
  if (plan.radius < 0.0) throw Error(ErrorCode::kInvalidArgument, "negative circle radius");
  if (plan.circle_stages > 0 && plan.radius == 0.0) {
    throw Error(ErrorCode::kInvalidArgument, "zero radius with nonzero circle stages");
  }
  const Point entry = circle_entry(plan);
  std::vector<Point> out;
  out.reserve(static_cast<size_t>(plan.horizon()) + 1);
  for (int i = 0; i < plan.approach_stages; ++i) {
    out.push_back(lerp(plan.start, entry, static_cast<double>(i) / plan.approach_stages));
  }
  const Point rel = entry - plan.center;
  const double phase = std::atan2(rel.y(), rel.x());
  for (int i = 0; i < plan.circle_stages; ++i) {
    const double th = phase + 2.0 * std::numbers::pi * i / plan.circle_stages;
    out.push_back(plan.center + plan.radius * Point(std::cos(th), std::sin(th)));
  }
  for (int i = 0; i < plan.return_stages; ++i) {
    out.push_back(lerp(entry, plan.start, static_cast<double>(i) / plan.return_stages));
  }
  out.push_back(plan.start);

  for (size_t k = 0; k + 1 < out.size(); ++k) {
    const double speed = (out[k + 1] - out[k]).norm() / delta_t;
    if (speed > plan.max_speed * (1.0 + 1e-12)) {
      throw Error(ErrorCode::kInvalidArgument, "waypoint spacing exceeds the speed bound at k=" + std::to_string(k));
    }
  }
  return out;
}

void DroneScenario::validate() const {
  if (!(delta_t > 0.0)) throw Error(ErrorCode::kInvalidArgument, "delta_t must be positive");
  if (waypoints.size() < 2) throw Error(ErrorCode::kInvalidArgument, "need at least two waypoints");
  if (!(alpha > 0.0)) throw Error(ErrorCode::kInvalidArgument, "alpha must be positive (R = alpha I)");
  if (sigma_x < 0.0 || sigma_v < 0.0) throw Error(ErrorCode::kInvalidArgument, "negative disturbance std dev");
  if (std::abs(rho) > sigma_x * sigma_v) throw Error(ErrorCode::kInvalidArgument, "invalid covariance: |rho| > sigma_x sigma_v");
}

DroneScenario reference_scenario(const WaypointPlan& plan) {
  DroneScenario s;
  s.delta_t = 1.0;
  s.waypoints = make_waypoints(plan, s.delta_t);
  s.alpha = 0.1;
  s.sigma_x = 0.1;
  s.sigma_v = 0.1;
  s.rho = s.sigma_x * s.sigma_v / 2.0;
  s.start_position = plan.start;
  return s;
}

Matrix disturbance_covariance(const DroneScenario& s) {
  const Matrix i2 = Matrix::Identity(2, 2);
  Matrix w(4, 4);
  w << s.sigma_x * s.sigma_x * i2, s.rho * i2, s.rho * i2, s.sigma_v * s.sigma_v * i2;
  return w;
}

LinearSystemModel build_system(const DroneScenario& s) {
  s.validate();
  const int N = s.horizon();
  const Matrix i2 = Matrix::Identity(2, 2);
  Matrix a = Matrix::Identity(4, 4);
  a.topRightCorner(2, 2) = s.delta_t * i2;
  Matrix b(4, 2);
  b << s.delta_t * i2, i2;
  Matrix q = Matrix::Zero(4, 4);
  q.topLeftCorner(2, 2) = i2;
  q.bottomRightCorner(2, 2) = s.alpha * i2;
  const Matrix r = s.alpha * i2;
  LinearSystemModel m = LinearSystemModel::constant(N, a, b, q, r, disturbance_covariance(s), q);
  m.drift.resize(static_cast<size_t>(N));
  for (int k = 0; k < N; ++k) {
    Vector d = Vector::Zero(4);
    d.head(2) = s.waypoints[static_cast<size_t>(k)] - s.waypoints[static_cast<size_t>(k + 1)];
    m.drift[static_cast<size_t>(k)] = d;
  }
  return validate_model(m);
}

Vector initial_error_state(const DroneScenario& s) {
  Vector x(4);
  x.head(2) = s.start_position - s.waypoints.front();
  x.tail(2) = s.start_velocity;
  return x;
}

ControllerRegime controller_mode(const DroneScenario& scenario, double p, const std::optional<DelayProfile>& delay,
                                 ControllerMode mode) {
  return make_controller(build_system(scenario), p, delay, Observation::kFull, mode);
}

double error_coordinate_gap(const DroneScenario& scenario, const ReliabilityChain& chain,
                            const ControllerRegime& policy, std::uint64_t seed) {
  if (policy.observation != Observation::kFull) {
    throw Error(ErrorCode::kUnsupported, "error-coordinate check uses full observation");
  }
  const LinearSystemModel model = build_system(scenario);
  const int N = model.horizon;
  const Matrix factor = psd_factor(disturbance_covariance(scenario));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Vector> noise;
  std::vector<int> tau;
  for (int k = 0; k < N; ++k) {
    Vector n(4);
    for (int i = 0; i < 4; ++i) n[i] = normal(rng);
    noise.push_back(factor * n);
    const double p_on = k == 0 ? chain.tau0_on : chain.transition(tau.back(), 1);
    tau.push_back(unit(rng) < p_on ? 1 : 0);
  }

  const double dt = scenario.delta_t;
  const auto& wp = scenario.waypoints;
  const bool affine = policy.mode == ControllerMode::kAffineCompensated;
  const int M = policy.round_trip();

  // Both loops keep their own lambda snapshot; the raw one rebuilds the error
  // from position and waypoint every time it needs it.
  Vector err = initial_error_state(scenario);
  Point pos = scenario.start_position;
  Point vel = scenario.start_velocity;
  Vector err_snap = err, raw_snap = err;
  Vector u_err_last = Vector::Zero(2), u_raw_last = Vector::Zero(2);
  double gap = 0.0;
  auto raw_error = [&](int k) {
    Vector e(4);
    e.head(2) = pos - wp[static_cast<size_t>(k)];
    e.tail(2) = vel;
    return e;
  };
  auto decide = [&](int k, const Vector& x, const Vector& snap, const Vector& u_last) {
    const int g = policy.delayed() ? tau[static_cast<size_t>(std::max(k - policy.delay->backward, 0))]
                                   : tau[static_cast<size_t>(k)];
    PolicyDecision d = policy.delayed()
                           ? act_full_delayed(policy.gains, model, k, DelayedInformation{snap, u_last}, g, affine)
                           : act_full_perfect(policy.gains, k, x, g);
    return with_feedforward(std::move(d), policy, k).u;
  };

  for (int k = 0; k < N; ++k) {
    const Vector raw_e = raw_error(k);
    gap = std::max(gap, (raw_e - err).cwiseAbs().maxCoeff());
    const Vector u_err = decide(k, err, err_snap, u_err_last);
    const Vector u_raw = decide(k, raw_e, raw_snap, u_raw_last);
    if (M > 0 && k % M == 0) {
      err_snap = err;
      raw_snap = raw_e;
      u_err_last = u_err;
      u_raw_last = u_raw;
    }
    const Vector& w = noise[static_cast<size_t>(k)];
    err = model.A[static_cast<size_t>(k)] * err + model.B[static_cast<size_t>(k)] * u_err + model.drift_at(k) + w;
    pos = pos + dt * vel + dt * Point(u_raw.head(2)) + Point(w.head(2));
    vel = vel + Point(u_raw.head(2)) + Point(w.tail(2));
  }
  gap = std::max(gap, (raw_error(N) - err).cwiseAbs().maxCoeff());
  return gap;
}

}  // namespace fogctl
