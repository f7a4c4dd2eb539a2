#include "qsm/dynamics.hpp"

#include <unsupported/Eigen/AutoDiff>

#include <Eigen/SVD>
#include <cmath>

namespace qsm {
namespace {

using Dual = Eigen::AutoDiffScalar<Eigen::Vector2d>;

Eigen::Matrix2d jac_of(const Point2<Dual>& p) {
  Eigen::Matrix2d j;
  j.row(0) = p.x().derivatives().transpose();
  j.row(1) = p.y().derivatives().transpose();
  return j;
}

Eigen::Vector2d value_of(const Point2<Dual>& p) { return {p.x().value(), p.y().value()}; }

std::array<double, 6> link_lengths(const Linkage<double>& d) {
  return {d.l1, d.l2, d.l3, d.l4, d.ee_y, d.ee_x};
}

}  // namespace

void MassModel::validate() const {
  if (!(density >= 0.0 && section_area >= 0.0 && payload >= 0.0 && std::isfinite(gravity)) ||
      !std::isfinite(density) || !std::isfinite(section_area) || !std::isfinite(payload))
    throw ConfigError("mass model: density, section area and payload must be finite and >= 0");
}

PoseJacobians pose_jacobians(const Linkage<double>& d, const JointAngles<double>& q) {
  const JointAngles<Dual> qd{Dual(q.theta1, 2, 0), Dual(q.theta2, 2, 1)};
  const auto pose = solve_pose(d.cast<Dual>(), qd);
  if (pose.status == PoseStatus::degenerate) throw DegeneratePose();
  if (pose.status == PoseStatus::closure_infeasible) throw ClosureInfeasible();

  const Point2<Dual> origin(Dual(0.0), Dual(0.0));
  const std::array<Point2<Dual>, 6> mids = {
      Point2<Dual>((origin + pose.frame_tip) / Dual(2)),
      Point2<Dual>((origin + pose.crank_tip) / Dual(2)),
      Point2<Dual>((pose.crank_tip + pose.rocker_tip) / Dual(2)),
      Point2<Dual>((pose.frame_tip + pose.rocker_tip) / Dual(2)),
      Point2<Dual>((pose.frame_tip + pose.upper_corner) / Dual(2)),
      Point2<Dual>((pose.upper_corner + pose.end_effector) / Dual(2)),
  };

  PoseJacobians out;
  out.pose.frame_tip = value_of(pose.frame_tip);
  out.pose.crank_tip = value_of(pose.crank_tip);
  out.pose.rocker_tip = value_of(pose.rocker_tip);
  out.pose.upper_corner = value_of(pose.upper_corner);
  out.pose.end_effector = value_of(pose.end_effector);
  out.pose.upper_arm_angle = pose.upper_arm_angle.value();
  out.end_effector = jac_of(pose.end_effector);
  for (std::size_t k = 0; k < mids.size(); ++k) {
    out.link_midpoints[k] = jac_of(mids[k]);
    out.midpoint_positions[k] = value_of(mids[k]);
  }
  return out;
}

Eigen::Matrix2d jacobian(const Linkage<double>& d, const JointAngles<double>& q) {
  const Eigen::Matrix2d j = pose_jacobians(d, q).end_effector;
  const Eigen::JacobiSVD<Eigen::Matrix2d> svd(j);
  const auto& sv = svd.singularValues();
  const double cond = sv(1) > 0.0 ? sv(0) / sv(1) : INFINITY;
  if (!(cond <= 1e8)) throw SingularPose(cond);
  return j;
}

namespace {

Eigen::Vector2d torques_from(const PoseJacobians& pj, const Linkage<double>& d, const MassModel& m) {
  const Eigen::Vector2d down(0.0, -m.gravity);
  Eigen::Vector2d tau = pj.end_effector.transpose() * (m.payload * down);
  const auto lengths = link_lengths(d);
  const double rho = m.linear_density();
  for (std::size_t k = 0; k < lengths.size(); ++k)
    tau += pj.link_midpoints[k].transpose() * (rho * lengths[k] * down);
  return tau;
}

}  // namespace

Eigen::Vector2d static_joint_torques(const Linkage<double>& d, const JointAngles<double>& q,
                                     const MassModel& m) {
  return torques_from(pose_jacobians(d, q), d, m);
}

TorqueLabel required_torques(const Linkage<double>& d, const MassModel& m, const PoseGrid& grid) {
  TorqueLabel label;
  bool any = false;
  for (int i = 0; i < grid.theta1_steps; ++i) {
    for (int j = 0; j < grid.theta2_steps; ++j) {
      const auto q = grid.at(i, j);
      if (!solve_transmission(d, coupler_diagonal(d, q)).ok()) continue;
      const Eigen::Vector2d tau = torques_from(pose_jacobians(d, q), d, m);
      label.tau1 = std::max(label.tau1, std::abs(tau(0)));
      label.tau2 = std::max(label.tau2, std::abs(tau(1)));
      any = true;
    }
  }
  if (!any) throw EmptyWorkspace();
  return label;
}

}  // namespace qsm
