#include <algorithm>
#include <cmath>

#include "qsm/geometry.hpp"

namespace qsm {

bool is_feasible_over_range(const UnitLinkage& d, const PoseGrid& grid) {
  for (int i = 0; i < grid.theta1_steps; ++i) {
    for (int j = 0; j < grid.theta2_steps; ++j) {
      const auto q = grid.at(i, j);
      if (!solve_transmission(d, coupler_diagonal(d, q)).ok()) return false;
    }
  }
  return true;
}

Workspace::Workspace(std::vector<Eigen::Vector2d> points, Eigen::Vector2d origin, double cell_size,
                     Occupancy occupancy)
    : points_(std::move(points)),
      origin_(origin),
      cell_size_(cell_size),
      occupancy_(std::move(occupancy)),
      occupied_(occupancy_.count()),
      area_(double(occupied_) * cell_size_ * cell_size_) {}

Eigen::Vector2i Workspace::cell_of(const Eigen::Vector2d& p) const {
  const Eigen::Vector2d rel = (p - origin_) / cell_size_;
  return {int(std::floor(rel.x())), int(std::floor(rel.y()))};
}

bool Workspace::cell_set(Eigen::Index ix, Eigen::Index iy) const {
  if (ix < 0 || iy < 0 || ix >= occupancy_.rows() || iy >= occupancy_.cols()) return false;
  return occupancy_(ix, iy);
}

bool Workspace::occupied(const Eigen::Vector2d& p) const {
  const auto c = cell_of(p);
  return cell_set(c.x(), c.y());
}

bool Workspace::occupied_dilated(const Eigen::Vector2d& p) const {
  const auto c = cell_of(p);
  for (int dx = -1; dx <= 1; ++dx)
    for (int dy = -1; dy <= 1; ++dy)
      if (cell_set(c.x() + dx, c.y() + dy)) return true;
  return false;
}

Workspace Workspace::scaled(double s) const {
  std::vector<Eigen::Vector2d> pts;
  pts.reserve(points_.size());
  for (const auto& p : points_) pts.push_back(p * s);
  return Workspace(std::move(pts), origin_ * s, cell_size_ * s, occupancy_);
}

namespace {

double edge(const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& p) {
  return (b.x() - a.x()) * (p.y() - a.y()) - (b.y() - a.y()) * (p.x() - a.x());
}

void fill_triangle(Workspace::Occupancy& occ, const Eigen::Vector2d& origin, double cell,
                   const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& c) {
  const double twice_area = edge(a, b, c);
  if (twice_area == 0.0) return;
  const double sign = twice_area > 0 ? 1.0 : -1.0;
  const Eigen::Vector2d lo = a.cwiseMin(b).cwiseMin(c);
  const Eigen::Vector2d hi = a.cwiseMax(b).cwiseMax(c);
  const Eigen::Index x0 = std::max<Eigen::Index>(0, Eigen::Index(std::floor((lo.x() - origin.x()) / cell)));
  const Eigen::Index y0 = std::max<Eigen::Index>(0, Eigen::Index(std::floor((lo.y() - origin.y()) / cell)));
  const Eigen::Index x1 = std::min<Eigen::Index>(occ.rows() - 1, Eigen::Index(std::floor((hi.x() - origin.x()) / cell)));
  const Eigen::Index y1 = std::min<Eigen::Index>(occ.cols() - 1, Eigen::Index(std::floor((hi.y() - origin.y()) / cell)));
  for (Eigen::Index ix = x0; ix <= x1; ++ix) {
    for (Eigen::Index iy = y0; iy <= y1; ++iy) {
      const Eigen::Vector2d p = origin + cell * Eigen::Vector2d(ix + 0.5, iy + 0.5);
      if (sign * edge(a, b, p) >= 0 && sign * edge(b, c, p) >= 0 && sign * edge(c, a, p) >= 0)
        occ(ix, iy) = true;
    }
  }
}

}  // namespace

Workspace compute_workspace(const UnitLinkage& d, const PoseGrid& grid, const RasterOptions& raster) {
  const int n1 = grid.theta1_steps;
  const int n2 = grid.theta2_steps;
  std::vector<Eigen::Vector2d> lattice(std::size_t(n1) * n2);
  std::vector<char> ok(lattice.size(), 0);
  std::vector<Eigen::Vector2d> points;
  points.reserve(lattice.size());

  for (int i = 0; i < n1; ++i) {
    for (int j = 0; j < n2; ++j) {
      const auto pose = solve_pose(d, grid.at(i, j));
      if (!pose.ok()) continue;
      const std::size_t k = std::size_t(i) * n2 + j;
      lattice[k] = pose.end_effector;
      ok[k] = 1;
      points.push_back(pose.end_effector);
    }
  }
  if (points.empty()) throw EmptyWorkspace();

  Eigen::Vector2d lo = points.front(), hi = points.front();
  for (const auto& p : points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const double extent = std::max((hi - lo).maxCoeff(), 1e-12);
  const double cell = extent / raster.cells_per_axis;
  // One empty cell of padding on each side keeps dilation lookups in range.
  const Eigen::Vector2d origin = lo - Eigen::Vector2d::Constant(cell);
  const Eigen::Index nx = Eigen::Index(std::ceil((hi.x() - lo.x()) / cell)) + 3;
  const Eigen::Index ny = Eigen::Index(std::ceil((hi.y() - lo.y()) / cell)) + 3;
  Workspace::Occupancy occ = Workspace::Occupancy::Constant(nx, ny, false);

  for (int i = 0; i + 1 < n1; ++i) {
    for (int j = 0; j + 1 < n2; ++j) {
      const std::size_t k00 = std::size_t(i) * n2 + j, k01 = k00 + 1;
      const std::size_t k10 = k00 + n2, k11 = k10 + 1;
      if (!(ok[k00] && ok[k01] && ok[k10] && ok[k11])) continue;
      fill_triangle(occ, origin, cell, lattice[k00], lattice[k10], lattice[k11]);
      fill_triangle(occ, origin, cell, lattice[k00], lattice[k11], lattice[k01]);
    }
  }
  for (const auto& p : points) {
    const Eigen::Vector2d rel = (p - origin) / cell;
    const Eigen::Index ix = std::clamp<Eigen::Index>(Eigen::Index(std::floor(rel.x())), 0, nx - 1);
    const Eigen::Index iy = std::clamp<Eigen::Index>(Eigen::Index(std::floor(rel.y())), 0, ny - 1);
    occ(ix, iy) = true;
  }
  return Workspace(std::move(points), origin, cell, std::move(occ));
}

double kinematic_performance(double task_area, double workspace_area) {
  if (!(task_area > 0.0) || !(workspace_area > 0.0)) throw NonPositiveArea();
  return task_area / workspace_area;
}

}  // namespace qsm
