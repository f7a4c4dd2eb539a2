#pragma once

#include <Eigen/Core>

#include <array>

#include "qsm/geometry.hpp"

namespace qsm {

/// Uniform-rod mass model. Defaults: ABS printed links, 5 kg payload.
struct MassModel {
  double density = 1040.0;       ///< kg/m^3
  double section_area = 6e-4;    ///< m^2
  double payload = 5.0;          ///< kg
  double gravity = 9.81;         ///< m/s^2, acting along -y

  double linear_density() const { return density * section_area; }
  void validate() const;
};

struct TorqueLabel {
  double tau1 = 0.0;  ///< frame actuator, N m
  double tau2 = 0.0;  ///< crank actuator, N m
};

/// Jacobians with respect to (theta1, theta2) of every point a load acts on.
struct PoseJacobians {
  Pose<double> pose;
  Eigen::Matrix2d end_effector;
  /// Rod midpoints: frame, crank, coupler, rocker, ee_y rod, ee_x rod.
  std::array<Eigen::Matrix2d, 6> link_midpoints;
  std::array<Eigen::Vector2d, 6> midpoint_positions;
};

/// Throws ClosureInfeasible / DegeneratePose.
PoseJacobians pose_jacobians(const Linkage<double>& d, const JointAngles<double>& q);

/// d(x, y)/d(theta1, theta2) of the end effector. Throws SingularPose when the
/// condition number exceeds 1e8.
Eigen::Matrix2d jacobian(const Linkage<double>& d, const JointAngles<double>& q);

/// Generalized gravity force J^T F summed over payload and link weights, N m.
Eigen::Vector2d static_joint_torques(const Linkage<double>& d, const JointAngles<double>& q,
                                     const MassModel& m);

/// Peak |torque| per actuator over the pose grid. Throws EmptyWorkspace when
/// no grid pose closes.
TorqueLabel required_torques(const Linkage<double>& d, const MassModel& m,
                             const PoseGrid& grid = {});

}  // namespace qsm
