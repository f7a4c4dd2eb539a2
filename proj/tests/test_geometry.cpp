#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "qsm/geometry.hpp"

using namespace qsm;

namespace {

const UnitLinkage kReference{1.0, 0.35, 1.05, 0.45, 1.2, 0.45};

TaskRegion task_near_pose(const UnitLinkage& d, double theta1, double theta2, double radius) {
  return {end_effector_position(d, JointAngles<double>{theta1, theta2}), radius};
}

}  // namespace

TEST_CASE("reference design is a closed crank-rocker") {
  CHECK(is_crank_rocker(kReference));
  CHECK(is_feasible_over_range(kReference));
}

TEST_CASE("forward kinematics agrees with circle intersection") {
  Rng rng(11);
  int compared = 0;
  for (int n = 0; n < 200; ++n) {
    const auto d = oracle::random_feasible_design(rng, PoseGrid{16, 16, {}});
    const auto q = oracle::random_pose(rng, d);
    const auto expected = oracle::circle_intersection_end_effector(d, q);
    if (!expected) continue;
    const auto got = end_effector_position(d, q);
    CHECK((got - *expected).norm() < 1e-9);
    ++compared;
  }
  CHECK(compared > 190);
}

TEST_CASE("coupler diagonal and transmission angles") {
  const UnitLinkage d = kReference;
  SUBCASE("law of cosines") {
    const JointAngles<double> q{deg2rad(90.0), 0.0};
    CHECK(coupler_diagonal(d, q) == doctest::Approx(std::hypot(1.0, 0.35)).epsilon(1e-14));
  }
  SUBCASE("angles stay in [0, pi] along a path") {
    double prev_zeta = -1.0;
    for (int k = 0; k <= 500; ++k) {
      const JointAngles<double> q{deg2rad(120.0), deg2rad(-37.5) + deg2rad(157.5) * k / 500.0};
      const auto t = transmission_angles(d, coupler_diagonal(d, q));
      CHECK(t.zeta >= 0.0);
      CHECK(t.zeta <= kPi);
      CHECK(t.xi >= 0.0);
      CHECK(t.xi <= kPi);
      if (prev_zeta >= 0.0) CHECK(std::abs(t.zeta - prev_zeta) < 0.05);
      prev_zeta = t.zeta;
    }
  }
  SUBCASE("collinear pose is not a closure failure") {
    const JointAngles<double> q{deg2rad(100.0), deg2rad(100.0)};
    CHECK(solve_pose(d, q).ok());
  }
  SUBCASE("loop that cannot close") {
    const UnitLinkage bad{1.0, 0.2, 0.3, 0.3, 1.0, 0.3};
    CHECK_THROWS_AS(end_effector_position(bad, JointAngles<double>{deg2rad(90.0), 0.0}), ClosureInfeasible);
    CHECK_THROWS_AS(transmission_angles(bad, 0.0), DegeneratePose);
  }
}

TEST_CASE("end effector is homogeneous in the link lengths") {
  Rng rng(5);
  for (int n = 0; n < 50; ++n) {
    const auto d = oracle::random_feasible_design(rng, PoseGrid{16, 16, {}});
    const auto q = oracle::random_pose(rng, d);
    const double s = rng.uniform(0.01, 10.0);
    const Eigen::Vector2d a = end_effector_position(d.scaled(s), q);
    const Eigen::Vector2d b = s * end_effector_position(d, q);
    CHECK((a - b).norm() <= 1e-12 * s);
  }
}

TEST_CASE("turning both joints together rotates the pose about the origin") {
  // Includes the parallelogram case l2 == l4, l3 == l1.
  for (const UnitLinkage& d : {kReference, UnitLinkage{1.0, 0.4, 1.0, 0.4, 1.1, 0.3}}) {
    const JointAngles<double> q0{deg2rad(100.0), deg2rad(10.0)};
    const Eigen::Vector2d p0 = end_effector_position(d, q0);
    for (double delta : {-40.0, -5.0, 25.0, 70.0}) {
      const double r = deg2rad(delta);
      const Eigen::Vector2d p = end_effector_position(d, JointAngles<double>{q0.theta1 + r, q0.theta2 + r});
      CHECK((p - Eigen::Rotation2Dd(r) * p0).norm() < 1e-12);
      CHECK(p.norm() == doctest::Approx(p0.norm()).epsilon(1e-13));
    }
  }
}

TEST_CASE("minimum enclosing circle") {
  SUBCASE("diameter") {
    const std::vector<Eigen::Vector2d> pts{{0, 0}, {2, 0}};
    const auto c = min_enclosing_circle(pts);
    CHECK(c.center.x() == doctest::Approx(1.0));
    CHECK(c.center.y() == doctest::Approx(0.0));
    CHECK(c.radius == doctest::Approx(1.0));
  }
  SUBCASE("equilateral triangle") {
    const std::vector<Eigen::Vector2d> pts{{0, 0}, {1, 0}, {0.5, std::sqrt(3.0) / 2}};
    CHECK(min_enclosing_circle(pts).radius == doctest::Approx(1.0 / std::sqrt(3.0)).epsilon(1e-12));
  }
  SUBCASE("empty input") {
    const std::vector<Eigen::Vector2d> none;
    CHECK_THROWS_AS(min_enclosing_circle(none), EmptyInput);
  }
  SUBCASE("random sets against brute force") {
    Rng rng(3);
    for (int trial = 0; trial < 40; ++trial) {
      const std::size_t n = trial < 30 ? 1 + trial % 12 : 100;
      std::vector<Eigen::Vector2d> pts(n);
      for (auto& p : pts) p = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
      const auto got = min_enclosing_circle(pts);
      const auto want = oracle::brute_force_circle(pts);
      CHECK(std::abs(got.radius - want.radius) < 1e-9);
      for (const auto& p : pts) CHECK(got.contains(p, 1e-9));
    }
  }
}

TEST_CASE("workspace raster") {
  const auto ws = compute_workspace(kReference);
  CHECK(ws.area() > 0.0);
  CHECK(ws.points().size() == PoseGrid{}.size());
  for (const auto& p : ws.points()) CHECK(ws.occupied(p));

  SUBCASE("scaling about the origin") {
    const auto big = ws.scaled(2.5);
    CHECK(big.area() == doctest::Approx(6.25 * ws.area()).epsilon(1e-12));
    for (std::size_t k = 0; k < ws.points().size(); k += 97)
      CHECK((big.points()[k] - 2.5 * ws.points()[k]).norm() < 1e-12);
  }
  SUBCASE("grid density converges") {
    const auto fine = compute_workspace(kReference, PoseGrid{128, 128, {}});
    CHECK(std::abs(fine.area() - ws.area()) / fine.area() < 0.05);
  }
  SUBCASE("no closing pose") {
    const UnitLinkage bad{1.0, 0.2, 0.3, 0.3, 1.0, 0.3};
    CHECK_THROWS_AS(compute_workspace(bad), EmptyWorkspace);
  }
}

TEST_CASE("scale factor") {
  const auto ws = compute_workspace(kReference);
  const auto task = task_near_pose(kReference, deg2rad(110.0), deg2rad(40.0), 0.05);
  const double s = compute_scale_factor(ws, task);

  CHECK(covers(ws, task, s));
  CHECK_FALSE(covers(ws, task, 0.999 * s));
  CHECK(compute_scale_factor(ws, task, 1.05) == doctest::Approx(1.05 * s).epsilon(1e-15));

  SUBCASE("task scaled about the origin") {
    for (double k : {0.3, 4.0}) {
      const TaskRegion t{k * task.center, k * task.radius};
      CHECK(compute_scale_factor(ws, t) == doctest::Approx(k * s).epsilon(2e-4));
    }
  }
  SUBCASE("post-hoc containment on the scaled raster") {
    const auto scaled = ws.scaled(s);
    for (const auto& p : containment_samples(task, scaled.cell_size())) CHECK(scaled.occupied_dilated(p));
  }
  SUBCASE("task around the origin cannot be covered") {
    CHECK_THROWS_AS(compute_scale_factor(ws, TaskRegion{{0.0, 0.0}, 0.1}), Uncoverable);
  }
}

TEST_CASE("kinematic performance") {
  CHECK(kinematic_performance(0.5, 2.0) == doctest::Approx(0.25));
  CHECK(kinematic_performance(1.0, 1.0) == doctest::Approx(1.0));
  CHECK_THROWS_AS(kinematic_performance(0.0, 1.0), NonPositiveArea);
  CHECK_THROWS_AS(kinematic_performance(1.0, -1.0), NonPositiveArea);

  const auto ws = compute_workspace(kReference);
  const auto task = task_near_pose(kReference, deg2rad(110.0), deg2rad(40.0), 0.05);
  const double s = compute_scale_factor(ws, task);
  const double eta = kinematic_performance(task.area(), s * s * ws.area());
  CHECK(eta > 0.0);
  CHECK(eta <= 1.0);

  // Same design in millimetres.
  const TaskRegion mm{1000.0 * task.center, 1000.0 * task.radius};
  const double s_mm = compute_scale_factor(ws, mm, 1.0, ScaleSearch{10.0, 1e5});
  CHECK(kinematic_performance(mm.area(), s_mm * s_mm * ws.area()) == doctest::Approx(eta).epsilon(5e-4));

  // Past the minimal scale, eta only falls.
  double prev = eta;
  for (double f : {1.1, 1.5, 3.0}) {
    const double e = kinematic_performance(task.area(), f * f * s * s * ws.area());
    CHECK(e < prev);
    prev = e;
  }
}
