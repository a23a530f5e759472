#pragma once

#include "core/model.hpp"
#include "core/policy.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace fogctl {

using Point = Eigen::Vector2d;

/// Fly from the start to the circle, go once around it counter-clockwise and
/// come back. The circle is entered at its point nearest the start.
struct WaypointPlan {
  Point start = Point::Zero();
  int approach_stages = 20;
  Point center{60.0, 0.0};
  double radius = 20.0;
  int circle_stages = 40;
  int return_stages = 20;
  /// Upper bound on |xbar_{k+1} - xbar_k| / delta_t.
  double max_speed = 10.0;

  int horizon() const { return approach_stages + circle_stages + return_stages; }
};

std::vector<Point> make_waypoints(const WaypointPlan& plan, double delta_t);

Point circle_entry(const WaypointPlan& plan);

struct DroneScenario {
  double delta_t = 1.0;
  std::vector<Point> waypoints;
  double alpha = 0.1;
  double sigma_x = 0.1;
  double sigma_v = 0.1;
  double rho = 0.005;
  Point start_position = Point::Zero();
  Point start_velocity = Point::Zero();

  int horizon() const { return static_cast<int>(waypoints.size()) - 1; }
  void validate() const;
};

/// The caption parameters of the reference tracking study on `plan`.
DroneScenario reference_scenario(const WaypointPlan& plan = {});

/// Error-coordinate model: state (e, v) with e = position - waypoint, control
/// the velocity adjustment, drift_k = (xbar_k - xbar_{k+1}, 0).
LinearSystemModel build_system(const DroneScenario& scenario);

/// Disturbance covariance [[sx^2 I, rho I], [rho I, sv^2 I]].
Matrix disturbance_covariance(const DroneScenario& scenario);

Vector initial_error_state(const DroneScenario& scenario);

ControllerRegime controller_mode(const DroneScenario& scenario, double p, const std::optional<DelayProfile>& delay,
                                 ControllerMode mode = ControllerMode::kPaperFaithful);

/// Runs the raw kinematics (position, velocity) and the error-form model
/// side by side from the same disturbance and chain draws, each closing the
/// loop with its own view of the error, and returns max_k |e_raw - e_form|.
double error_coordinate_gap(const DroneScenario& scenario, const ReliabilityChain& chain,
                            const ControllerRegime& policy, std::uint64_t seed);

}  // namespace fogctl
