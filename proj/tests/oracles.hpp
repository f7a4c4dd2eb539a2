#pragma once

// Independent reference computations shared by the unit tests and the
// acceptance runner. None of these reuse the closed-form chain in geometry.hpp.

#include <Eigen/Core>

#include <cmath>
#include <limits>
#include <optional>
#include <span>

#include "qsm/dynamics.hpp"
#include "qsm/geometry.hpp"
#include "qsm/random.hpp"
#include "qsm/sampler.hpp"

namespace qsm::oracle {

inline Eigen::Vector2d unit_vector(double angle) { return {std::cos(angle), std::sin(angle)}; }

/// End effector by intersecting the coupler circle about C with the rocker
/// circle about B. The loop keeps one assembly mode: the rocker tip lies to
/// the left of the directed line B -> C. Empty when the circles miss.
inline std::optional<Eigen::Vector2d> circle_intersection_end_effector(const Linkage<double>& d,
                                                                      const JointAngles<double>& q) {
  const Eigen::Vector2d b = d.l1 * unit_vector(q.theta1);
  const Eigen::Vector2d c = d.l2 * unit_vector(q.theta2);
  const Eigen::Vector2d bc = c - b;
  const double dist = bc.norm();
  if (dist == 0.0 || dist > d.l3 + d.l4 || dist < std::abs(d.l3 - d.l4)) return std::nullopt;
  // Foot of the chord along BC, then half-chord offset.
  const double along = (d.l4 * d.l4 - d.l3 * d.l3 + dist * dist) / (2.0 * dist);
  const double h2 = d.l4 * d.l4 - along * along;
  const double h = std::sqrt(std::max(0.0, h2));
  const Eigen::Vector2d e = bc / dist;
  const Eigen::Vector2d n(-e.y(), e.x());
  // n is e turned counter-clockwise, so +h is the left-hand intersection.
  const Eigen::Vector2d rocker = b + along * e + h * n;
  const Eigen::Vector2d dir = (b - rocker) / d.l4;
  const Eigen::Vector2d perp(dir.y(), -dir.x());  // dir rotated by -90 degrees
  return Eigen::Vector2d(b + d.ee_y * perp + d.ee_x * dir);
}

/// Gravitational potential of payload plus uniform rods, J.
inline double potential_energy(const Linkage<double>& d, const JointAngles<double>& q, const MassModel& m) {
  const auto p = solve_pose(d, q);
  if (!p.ok()) return std::numeric_limits<double>::quiet_NaN();
  const double rho = m.linear_density();
  const Eigen::Vector2d o = Eigen::Vector2d::Zero();
  const auto mid_y = [](const Eigen::Vector2d& a, const Eigen::Vector2d& b) { return 0.5 * (a.y() + b.y()); };
  double v = m.payload * p.end_effector.y();
  v += rho * d.l1 * mid_y(o, p.frame_tip);
  v += rho * d.l2 * mid_y(o, p.crank_tip);
  v += rho * d.l3 * mid_y(p.crank_tip, p.rocker_tip);
  v += rho * d.l4 * mid_y(p.frame_tip, p.rocker_tip);
  v += rho * d.ee_y * mid_y(p.frame_tip, p.upper_corner);
  v += rho * d.ee_x * mid_y(p.upper_corner, p.end_effector);
  return m.gravity * v;
}

/// Generalized gravity force -dV/dtheta by central differences.
inline Eigen::Vector2d virtual_work_torques(const Linkage<double>& d, const JointAngles<double>& q,
                                            const MassModel& m, double h = 1e-6) {
  const auto v = [&](double t1, double t2) { return potential_energy(d, {t1, t2}, m); };
  return {-(v(q.theta1 + h, q.theta2) - v(q.theta1 - h, q.theta2)) / (2.0 * h),
          -(v(q.theta1, q.theta2 + h) - v(q.theta1, q.theta2 - h)) / (2.0 * h)};
}

/// Uniform draw from the reference box until the design is a crank-rocker
/// that closes over the operating-range grid.
inline UnitLinkage random_feasible_design(Rng& rng, const PoseGrid& grid = {}) {
  const auto b = DesignBounds::reference();
  for (;;) {
    Linkage<double>::Vector v;
    for (int k = 0; k < 6; ++k) v(k) = rng.uniform(b.lower(k), b.upper(k));
    const auto d = UnitLinkage::from_vector(v);
    if (is_crank_rocker(d) && is_feasible_over_range(d, grid)) return d;
  }
}

/// Uniform pose in the operating range that closes and stays clear of the
/// collinear configurations.
inline JointAngles<double> random_pose(Rng& rng, const Linkage<double>& d, const OperatingRange& r = {}) {
  for (;;) {
    const double t1 = rng.uniform(r.theta1_min, r.theta1_max);
    const double t2 = rng.uniform(r.theta2_min, t1);
    const JointAngles<double> q{t1, t2};
    const auto t = solve_transmission(d, coupler_diagonal(d, q));
    if (t.ok() && t.zeta > 1e-3 && t.zeta < kPi - 1e-3 && t.xi > 1e-3 && t.xi < kPi - 1e-3) return q;
  }
}

/// O(n^4) minimum enclosing circle over every pair and triple.
inline TaskRegion brute_force_circle(std::span<const Eigen::Vector2d> pts) {
  TaskRegion best;
  best.radius = std::numeric_limits<double>::infinity();
  const auto consider = [&](const Eigen::Vector2d& c, double r) {
    if (r >= best.radius) return;
    for (const auto& p : pts)
      if ((p - c).norm() > r * (1.0 + 1e-12) + 1e-12) return;
    best.center = c;
    best.radius = r;
  };
  if (pts.size() == 1) return {pts[0], 0.0};
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t j = i + 1; j < pts.size(); ++j) {
      const Eigen::Vector2d c = 0.5 * (pts[i] + pts[j]);
      consider(c, (pts[i] - c).norm());
      for (std::size_t k = j + 1; k < pts.size(); ++k) {
        const Eigen::Vector2d a = pts[i], b = pts[j], e = pts[k];
        const double den = 2.0 * (a.x() * (b.y() - e.y()) + b.x() * (e.y() - a.y()) + e.x() * (a.y() - b.y()));
        if (std::abs(den) < 1e-14) continue;
        const double a2 = a.squaredNorm(), b2 = b.squaredNorm(), e2 = e.squaredNorm();
        const Eigen::Vector2d cc((a2 * (b.y() - e.y()) + b2 * (e.y() - a.y()) + e2 * (a.y() - b.y())) / den,
                                 (a2 * (e.x() - b.x()) + b2 * (a.x() - e.x()) + e2 * (b.x() - a.x())) / den);
        consider(cc, (a - cc).norm());
      }
    }
  }
  return best;
}

}  // namespace qsm::oracle
