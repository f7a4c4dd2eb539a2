#include <cmath>

#include "qsm/geometry.hpp"

namespace qsm {
namespace {

/// Visits boundary ring points, then the interior hex lattice; stops early
/// when `visit` returns false. Returns false iff stopped early.
template <typename Visit>
bool for_each_sample(const TaskRegion& task, double pitch, int boundary_points, Visit&& visit) {
  for (int k = 0; k < boundary_points; ++k) {
    const double t = 2.0 * kPi * k / boundary_points;
    if (!visit(Eigen::Vector2d(task.center + task.radius * Eigen::Vector2d(std::cos(t), std::sin(t)))))
      return false;
  }
  const double row_step = pitch * std::sqrt(3.0) / 2.0;
  const int rows = int(std::floor(task.radius / row_step));
  for (int r = -rows; r <= rows; ++r) {
    const double y = r * row_step;
    const double shift = (r % 2 == 0) ? 0.0 : pitch / 2.0;
    const double half = std::sqrt(std::max(0.0, task.radius * task.radius - y * y));
    const int cols = int(std::floor((half + pitch) / pitch));
    for (int c = -cols; c <= cols; ++c) {
      const double x = c * pitch + shift;
      if (x * x + y * y >= task.radius * task.radius) continue;
      if (!visit(Eigen::Vector2d(task.center + Eigen::Vector2d(x, y)))) return false;
    }
  }
  return true;
}

}  // namespace

std::vector<Eigen::Vector2d> containment_samples(const TaskRegion& task, double pitch,
                                                 int boundary_points) {
  std::vector<Eigen::Vector2d> out;
  for_each_sample(task, pitch, boundary_points, [&](const Eigen::Vector2d& p) {
    out.push_back(p);
    return true;
  });
  return out;
}

bool covers(const Workspace& unit, const TaskRegion& task, double s, int boundary_points) {
  // The boundary ring rejects most scales before the lattice is walked.
  for (int k = 0; k < boundary_points; ++k) {
    const double t = 2.0 * kPi * k / boundary_points;
    const Eigen::Vector2d p = task.center + task.radius * Eigen::Vector2d(std::cos(t), std::sin(t));
    if (!unit.occupied_dilated_scaled(p, s)) return false;
  }
  return for_each_sample(task, unit.cell_size() * s, 0, [&](const Eigen::Vector2d& p) {
    return unit.occupied_dilated_scaled(p, s);
  });
}

double compute_scale_factor(const Workspace& unit, const TaskRegion& task, double safety,
                            const ScaleSearch& search) {
  if (!(task.radius > 0.0)) throw NonPositiveArea();
  const int steps = std::max(2, search.scan_steps);
  const double ratio = std::log(search.max_scale / search.min_scale);
  double lo = 0.0, hi = 0.0;
  bool found = false;
  for (int k = 0; k < steps; ++k) {
    const double s = search.min_scale * std::exp(ratio * k / (steps - 1));
    if (covers(unit, task, s, search.boundary_points)) {
      hi = s;
      found = true;
      break;
    }
    lo = s;
  }
  if (!found) throw Uncoverable();
  if (lo > 0.0) {
    while (hi - lo > search.rel_tol * hi) {
      const double mid = 0.5 * (lo + hi);
      if (covers(unit, task, mid, search.boundary_points))
        hi = mid;
      else
        lo = mid;
    }
  }
  return hi * safety;
}

}  // namespace qsm
