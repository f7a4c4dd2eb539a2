#include <algorithm>
#include <vector>

#include "qsm/geometry.hpp"
#include "qsm/random.hpp"

namespace qsm {
namespace {

TaskRegion from_two(const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  return {(a + b) / 2.0, (a - b).norm() / 2.0};
}

TaskRegion from_three(const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& c) {
  const Eigen::Vector2d ab = b - a, ac = c - a;
  const double det = 2.0 * (ab.x() * ac.y() - ab.y() * ac.x());
  const double scale = std::max({ab.squaredNorm(), ac.squaredNorm(), 1e-300});
  if (std::abs(det) <= 1e-14 * scale) {
    // Collinear: the farthest pair spans the circle.
    TaskRegion best = from_two(a, b);
    for (const auto& t : {from_two(a, c), from_two(b, c)})
      if (t.radius > best.radius) best = t;
    return best;
  }
  const double ab2 = ab.squaredNorm(), ac2 = ac.squaredNorm();
  const Eigen::Vector2d offset((ac.y() * ab2 - ab.y() * ac2) / det,
                               (ab.x() * ac2 - ac.x() * ab2) / det);
  return {a + offset, offset.norm()};
}

bool inside(const TaskRegion& c, const Eigen::Vector2d& p) {
  return (p - c.center).norm() <= c.radius * (1.0 + 1e-12) + 1e-15;
}

}  // namespace

TaskRegion min_enclosing_circle(std::span<const Eigen::Vector2d> input) {
  if (input.empty()) throw EmptyInput("min_enclosing_circle needs at least one point");
  std::vector<Eigen::Vector2d> pts(input.begin(), input.end());
  Rng rng(0x5eed);
  rng.shuffle(pts);

  TaskRegion c{pts[0], 0.0};
  for (std::size_t i = 1; i < pts.size(); ++i) {
    if (inside(c, pts[i])) continue;
    c = {pts[i], 0.0};
    for (std::size_t j = 0; j < i; ++j) {
      if (inside(c, pts[j])) continue;
      c = from_two(pts[i], pts[j]);
      for (std::size_t k = 0; k < j; ++k) {
        if (!inside(c, pts[k])) c = from_three(pts[i], pts[j], pts[k]);
      }
    }
  }
  return c;
}

}  // namespace qsm
