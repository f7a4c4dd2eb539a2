#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "qsm/errors.hpp"

namespace qsm {

inline constexpr double kPi = 3.14159265358979323846;

constexpr double deg2rad(double deg) { return deg * kPi / 180.0; }
constexpr double rad2deg(double rad) { return rad * 180.0 / kPi; }

template <typename Scalar>
using Point2 = Eigen::Matrix<Scalar, 2, 1>;

/// Six link lengths of the quasi-serial mechanism: frame l1, crank l2,
/// coupler l3, rocker l4 and the two upper-arm offsets. For a unit design the
/// values are ratios to l1 (l1 == 1); for a scaled design they are meters.
template <typename Scalar = double>
struct Linkage {
  using Vector = Eigen::Matrix<Scalar, 6, 1>;

  Scalar l1{1}, l2{}, l3{}, l4{}, ee_x{}, ee_y{};

  Vector vector() const {
    Vector v;
    v << l1, l2, l3, l4, ee_x, ee_y;
    return v;
  }

  static Linkage from_vector(const Vector& v) { return {v(0), v(1), v(2), v(3), v(4), v(5)}; }

  Linkage scaled(const Scalar& s) const {
    return {l1 * s, l2 * s, l3 * s, l4 * s, ee_x * s, ee_y * s};
  }

  template <typename Other>
  Linkage<Other> cast() const {
    return {Other(l1), Other(l2), Other(l3), Other(l4), Other(ee_x), Other(ee_y)};
  }

  bool operator==(const Linkage&) const = default;
};

using UnitLinkage = Linkage<double>;

/// Unit design together with the absolute length of l1 (meters).
struct ScaledDesign {
  UnitLinkage unit;
  double scale = 1.0;

  Linkage<double> lengths_abs() const { return unit.scaled(scale); }
};

/// Names used in file headers and reports, in vector order.
inline constexpr const char* kLinkNames[6] = {"l1", "l2", "l3", "l4", "eex", "eey"};

template <typename Scalar = double>
struct JointAngles {
  Scalar theta1{};  ///< frame (lower-arm) angle, radians
  Scalar theta2{};  ///< crank angle, radians
};

enum class PoseStatus { ok, closure_infeasible, degenerate };

template <typename Scalar>
struct TransmissionAngles {
  Scalar zeta{};
  Scalar xi{};
  PoseStatus status = PoseStatus::ok;

  bool ok() const { return status == PoseStatus::ok; }
};

/// Joint positions of one pose. O is the origin (shared pivot of frame and
/// crank), B the frame tip, C the crank tip, D the rocker tip. The upper arm is
/// rigid with the rocker: it runs from B by ee_y along u - 90 degrees to the
/// corner, then by ee_x along u to the end effector.
template <typename Scalar>
struct Pose {
  Point2<Scalar> frame_tip;
  Point2<Scalar> crank_tip;
  Point2<Scalar> rocker_tip;
  Point2<Scalar> upper_corner;
  Point2<Scalar> end_effector;
  Scalar upper_arm_angle{};
  PoseStatus status = PoseStatus::ok;

  bool ok() const { return status == PoseStatus::ok; }
};

/// Distance between the frame tip B and the crank tip C (law of cosines).
template <typename Scalar>
Scalar coupler_diagonal(const Linkage<Scalar>& d, const JointAngles<Scalar>& q) {
  using std::cos;
  using std::sqrt;
  const Scalar sq = d.l1 * d.l1 + d.l2 * d.l2 - Scalar(2) * d.l1 * d.l2 * cos(q.theta1 - q.theta2);
  // Rounding can push the exact zero of the l1 == l2, theta1 == theta2 case negative.
  return sq > Scalar(0) ? Scalar(sqrt(sq)) : Scalar(0);
}

/// Angles at B in triangles OBC (zeta) and BCD (xi). Never throws; a failing
/// pose is reported through `status`.
template <typename Scalar>
TransmissionAngles<Scalar> solve_transmission(const Linkage<Scalar>& d, const Scalar& a) noexcept {
  using std::acos;
  TransmissionAngles<Scalar> out;
  if (!(a > Scalar(0))) {
    out.status = PoseStatus::degenerate;
    return out;
  }
  Scalar cz = (d.l1 * d.l1 + a * a - d.l2 * d.l2) / (Scalar(2) * d.l1 * a);
  Scalar cx = (d.l4 * d.l4 + a * a - d.l3 * d.l3) / (Scalar(2) * d.l4 * a);
  // Collinear poses (e.g. theta1 == theta2) sit exactly on +-1 and may round
  // just past it.
  constexpr double slack = 1.0 + 1e-12;
  if (!(cz >= Scalar(-slack) && cz <= Scalar(slack) && cx >= Scalar(-slack) && cx <= Scalar(slack))) {
    out.status = PoseStatus::closure_infeasible;
    return out;
  }
  if (cz > Scalar(1)) cz = Scalar(1);
  if (cz < Scalar(-1)) cz = Scalar(-1);
  if (cx > Scalar(1)) cx = Scalar(1);
  if (cx < Scalar(-1)) cx = Scalar(-1);
  out.zeta = acos(cz);
  out.xi = acos(cx);
  return out;
}

template <typename Scalar>
TransmissionAngles<Scalar> transmission_angles(const Linkage<Scalar>& d, const Scalar& a) {
  auto t = solve_transmission(d, a);
  if (t.status == PoseStatus::degenerate) throw DegeneratePose();
  if (t.status == PoseStatus::closure_infeasible) throw ClosureInfeasible();
  return t;
}

/// Full pose from the closed-form chain. Works for any scalar type with the
/// usual math overloads, including Eigen::AutoDiffScalar.
template <typename Scalar>
Pose<Scalar> solve_pose(const Linkage<Scalar>& d, const JointAngles<Scalar>& q) noexcept {
  using std::atan2;
  using std::cos;
  using std::sin;
  Pose<Scalar> pose;
  const auto t = solve_transmission(d, coupler_diagonal(d, q));
  if (!t.ok()) {
    pose.status = t.status;
    return pose;
  }
  pose.frame_tip = Point2<Scalar>(d.l1 * cos(q.theta1), d.l1 * sin(q.theta1));
  pose.crank_tip = Point2<Scalar>(d.l2 * cos(q.theta2), d.l2 * sin(q.theta2));

  // zeta taken as the signed turn from BO to BC: the arccos value loses its
  // sign once theta1 - theta2 passes pi, and its derivative blows up at
  // theta1 == theta2. Magnitude equals t.zeta.
  const Point2<Scalar> bo = -pose.frame_tip;
  const Point2<Scalar> bc = pose.crank_tip - pose.frame_tip;
  const Scalar zeta = atan2(bo.x() * bc.y() - bo.y() * bc.x(), bo.dot(bc));

  const Scalar u = q.theta1 + zeta + t.xi;
  const Scalar half_pi = Scalar(kPi / 2);
  const Point2<Scalar> along(cos(u), sin(u));
  const Point2<Scalar> across(cos(u - half_pi), sin(u - half_pi));

  pose.rocker_tip = pose.frame_tip - d.l4 * along;
  pose.upper_corner = pose.frame_tip + d.ee_y * across;
  pose.end_effector = pose.upper_corner + d.ee_x * along;
  pose.upper_arm_angle = u;
  return pose;
}

template <typename Scalar>
Point2<Scalar> end_effector_position(const Linkage<Scalar>& d, const JointAngles<Scalar>& q) {
  const auto pose = solve_pose(d, q);
  if (pose.status == PoseStatus::degenerate) throw DegeneratePose();
  if (pose.status == PoseStatus::closure_infeasible) throw ClosureInfeasible();
  return pose.end_effector;
}

/// Crank-rocker condition l3 + l2 < l1 + l4 (strict).
template <typename Scalar>
bool is_crank_rocker(const Linkage<Scalar>& d) {
  return d.l3 + d.l2 < d.l1 + d.l4;
}

/// Actuator operating range, radians. theta2 is additionally capped by theta1.
struct OperatingRange {
  double theta1_min = deg2rad(45.0);
  double theta1_max = deg2rad(180.0);
  double theta2_min = deg2rad(-37.5);
};

/// Grid over the operating range: `theta1_steps` rows, each with
/// `theta2_steps` values from theta2_min up to that row's theta1.
struct PoseGrid {
  int theta1_steps = 64;
  int theta2_steps = 64;
  OperatingRange range;

  JointAngles<double> at(int i, int j) const {
    const double t1 = range.theta1_min +
                      (range.theta1_max - range.theta1_min) * i / double(theta1_steps - 1);
    const double t2 = range.theta2_min + (t1 - range.theta2_min) * j / double(theta2_steps - 1);
    return {t1, t2};
  }

  std::size_t size() const { return std::size_t(theta1_steps) * std::size_t(theta2_steps); }
};

/// True iff every grid pose closes.
bool is_feasible_over_range(const UnitLinkage& d, const PoseGrid& grid = {});

/// Reachable end-effector region as a boolean raster over the bounding box of
/// the sampled points. Occupancy comes from filling the image of every grid
/// cell (two triangles per cell) plus the cell of every sampled point.
class Workspace {
 public:
  using Occupancy = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

  Workspace() = default;
  Workspace(std::vector<Eigen::Vector2d> points, Eigen::Vector2d origin, double cell_size,
            Occupancy occupancy);

  const std::vector<Eigen::Vector2d>& points() const { return points_; }
  const Occupancy& occupancy() const { return occupancy_; }
  const Eigen::Vector2d& origin() const { return origin_; }
  double cell_size() const { return cell_size_; }
  double area() const { return area_; }
  Eigen::Index occupied_cells() const { return occupied_; }

  /// Cell index of a point; may lie outside the raster.
  Eigen::Vector2i cell_of(const Eigen::Vector2d& p) const;
  bool occupied(const Eigen::Vector2d& p) const;
  /// Occupied cell at p or one of its 8 neighbours.
  bool occupied_dilated(const Eigen::Vector2d& p) const;
  /// Same as occupied_dilated(p) on the workspace scaled by s about the origin.
  bool occupied_dilated_scaled(const Eigen::Vector2d& p, double s) const {
    return occupied_dilated(p / s);
  }

  Workspace scaled(double s) const;

 private:
  bool cell_set(Eigen::Index ix, Eigen::Index iy) const;

  std::vector<Eigen::Vector2d> points_;
  Eigen::Vector2d origin_ = Eigen::Vector2d::Zero();
  double cell_size_ = 0.0;
  Occupancy occupancy_;
  Eigen::Index occupied_ = 0;
  double area_ = 0.0;
};

struct RasterOptions {
  int cells_per_axis = 256;
};

/// Throws EmptyWorkspace when no pose of the grid closes.
Workspace compute_workspace(const UnitLinkage& d, const PoseGrid& grid = {},
                            const RasterOptions& raster = {});

struct TaskRegion {
  Eigen::Vector2d center = Eigen::Vector2d::Zero();
  double radius = 0.0;

  double area() const { return kPi * radius * radius; }
  bool contains(const Eigen::Vector2d& p, double tol = 1e-12) const {
    return (p - center).norm() <= radius + tol;
  }
};

/// Exact minimum enclosing circle (randomised incremental, Welzl style).
TaskRegion min_enclosing_circle(std::span<const Eigen::Vector2d> points);

/// Boundary ring plus interior hexagonal lattice with the given pitch.
std::vector<Eigen::Vector2d> containment_samples(const TaskRegion& task, double pitch,
                                                 int boundary_points = 256);

struct ScaleSearch {
  double min_scale = 0.01;   ///< meters
  double max_scale = 100.0;  ///< meters
  double rel_tol = 1e-4;
  int scan_steps = 400;      ///< log-spaced coarse scan before bisection
  int boundary_points = 256;
};

/// True iff every containment sample of the task lies in the dilated
/// occupancy of the unit workspace scaled by s.
bool covers(const Workspace& unit, const TaskRegion& task, double s,
            int boundary_points = 256);

/// Smallest scale s (meters per unit length) whose workspace covers the task,
/// multiplied by `safety`. Throws Uncoverable.
double compute_scale_factor(const Workspace& unit, const TaskRegion& task, double safety = 1.0,
                            const ScaleSearch& search = {});

/// eta = task area / scaled workspace area. Throws NonPositiveArea.
double kinematic_performance(double task_area, double workspace_area);

}  // namespace qsm
