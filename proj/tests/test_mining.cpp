#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "qsm/mining.hpp"
#include "qsm/random.hpp"

using namespace qsm;

namespace {

const Eigen::VectorXd kLo = Eigen::VectorXd::Zero(6);
const Eigen::VectorXd kHi = Eigen::VectorXd::Ones(6);

SobolReport sobol_of(double (*f)(const Eigen::VectorXd&)) {
  const BatchFunction batch = [f](const Eigen::MatrixXd& x) {
    Eigen::MatrixXd y(x.rows(), 1);
    for (Eigen::Index i = 0; i < x.rows(); ++i) y(i, 0) = f(x.row(i).transpose());
    return y;
  };
  return sobol_indices(batch, kLo, kHi, 1024, 99);
}

double brute_force_sse(const Eigen::VectorXd& y, const std::vector<Eigen::Index>& idx) {
  if (idx.empty()) return 0.0;
  double mean = 0.0;
  for (auto i : idx) mean += y(i);
  mean /= double(idx.size());
  double sse = 0.0;
  for (auto i : idx) sse += (y(i) - mean) * (y(i) - mean);
  return sse;
}

}  // namespace

TEST_CASE("sobol indices of analytic functions") {
  SUBCASE("single variable") {
    const auto r = sobol_of([](const Eigen::VectorXd& x) { return 3.0 * x(0); });
    CHECK(r.evaluations == 14336);
    const auto& s = r.outputs.at(0);
    CHECK(std::abs(s.s1(0) - 1.0) < 0.02);
    CHECK(std::abs(s.st(0) - 1.0) < 0.02);
    for (int i = 1; i < 6; ++i) {
      CHECK(std::abs(s.s1(i)) < 0.02);
      CHECK(std::abs(s.st(i)) < 0.02);
    }
  }
  SUBCASE("additive") {
    const auto r = sobol_of([](const Eigen::VectorXd& x) { return x(1) + x(3); });
    const auto& s = r.outputs.at(0);
    CHECK(std::abs(s.s1(1) - 0.5) < 0.03);
    CHECK(std::abs(s.s1(3) - 0.5) < 0.03);
    CHECK(std::abs(s.st(1) - 0.5) < 0.03);
    CHECK(std::abs(s.st(3) - 0.5) < 0.03);
    CHECK(std::abs(s.s1.sum() - 1.0) < 0.05);
  }
  SUBCASE("pure interaction") {
    const auto r = sobol_of([](const Eigen::VectorXd& x) { return (x(0) - 0.5) * (x(2) - 0.5); });
    const auto& s = r.outputs.at(0);
    CHECK(std::abs(s.s1(0)) < 0.05);
    CHECK(std::abs(s.s1(2)) < 0.05);
    CHECK(std::abs(s.st(0) - 1.0) < 0.05);
    CHECK(std::abs(s.st(2) - 1.0) < 0.05);
  }
  SUBCASE("confidence intervals bracket the estimates") {
    const auto r = sobol_of([](const Eigen::VectorXd& x) { return x(1) + 2.0 * x(3) * x(3); });
    const auto& s = r.outputs.at(0);
    for (int i = 0; i < 6; ++i) {
      CHECK(s.st_lo(i) <= s.st_hi(i));
      CHECK(s.s1_lo(i) <= s.s1_hi(i));
    }
    CHECK(s.st_lo(3) <= s.st(3));
    CHECK(s.st(3) <= s.st_hi(3));
  }
  SUBCASE("seeded") {
    const auto f = [](const Eigen::VectorXd& x) { return x(0) * x(1) + x(5); };
    const auto a = sobol_of(f), b = sobol_of(f);
    CHECK(a.outputs[0].st == b.outputs[0].st);
    CHECK(a.outputs[0].s1_lo == b.outputs[0].s1_lo);
  }
}

TEST_CASE("regression tree") {
  SUBCASE("step function splits at the step") {
    Eigen::MatrixXd x(40, 2);
    Eigen::VectorXd y(40);
    for (int i = 0; i < 40; ++i) {
      x(i, 0) = i;
      x(i, 1) = (i * 7) % 40;
      y(i) = i < 17 ? 1.0 : 5.0;
    }
    const auto t = fit_tree(x, y, TreeOptions{3, 5}, {"a", "b"});
    CHECK(t.root().feature == 0);
    CHECK(t.root().threshold == doctest::Approx(16.5));
    CHECK(t.predict(Eigen::Vector2d(3, 0)) == doctest::Approx(1.0));
    CHECK(t.predict(Eigen::Vector2d(30, 0)) == doctest::Approx(5.0));
    CHECK(t.depth() == 1);
    CHECK(t.path_to(t.route(Eigen::Vector2d(3, 0))).find("a <= 16.5") != std::string::npos);
  }
  SUBCASE("constant target is one leaf") {
    const Eigen::MatrixXd x = Eigen::MatrixXd::Random(30, 3);
    const auto t = fit_tree(x, Eigen::VectorXd::Constant(30, 2.0));
    CHECK(t.nodes.size() == 1);
    CHECK(t.root().leaf());
    CHECK(t.root().value == 2.0);
  }
  SUBCASE("best stump matches exhaustive search") {
    Rng rng(4);
    Eigen::MatrixXd x(20, 3);
    Eigen::VectorXd y(20);
    for (int i = 0; i < 20; ++i) {
      for (int k = 0; k < 3; ++k) x(i, k) = rng.uniform();
      y(i) = std::sin(4 * x(i, 0)) + x(i, 2) * x(i, 1) + 0.1 * rng.uniform();
    }
    const auto t = fit_tree(x, y, TreeOptions{1, 1});
    double best = INFINITY;
    for (int k = 0; k < 3; ++k)
      for (int i = 0; i < 20; ++i) {
        std::vector<Eigen::Index> l, r;
        for (int j = 0; j < 20; ++j) (x(j, k) <= x(i, k) ? l : r).push_back(j);
        if (l.empty() || r.empty()) continue;
        best = std::min(best, brute_force_sse(y, l) + brute_force_sse(y, r));
      }
    std::vector<Eigen::Index> l, r;
    for (int j = 0; j < 20; ++j)
      (x(j, t.root().feature) <= t.root().threshold ? l : r).push_back(j);
    CHECK(brute_force_sse(y, l) + brute_force_sse(y, r) == doctest::Approx(best).epsilon(1e-12));
  }
  SUBCASE("leaves hold exact means and respect the options") {
    Rng rng(8);
    Eigen::MatrixXd x(200, 4);
    Eigen::VectorXd y(200);
    for (int i = 0; i < 200; ++i) {
      for (int k = 0; k < 4; ++k) x(i, k) = rng.uniform();
      y(i) = x(i, 1) * 3 + x(i, 3) * x(i, 0);
    }
    const auto t = fit_tree(x, y);
    CHECK(t.depth() <= 3);
    std::vector<double> sum(t.nodes.size(), 0.0);
    std::vector<std::size_t> count(t.nodes.size(), 0);
    for (int i = 0; i < 200; ++i) {
      const auto leaf = std::size_t(t.route(x.row(i).transpose()));
      sum[leaf] += y(i);
      ++count[leaf];
    }
    for (std::size_t k = 0; k < t.nodes.size(); ++k) {
      if (!t.nodes[k].leaf()) continue;
      CHECK(count[k] == t.nodes[k].samples);
      CHECK(count[k] >= 5);
      CHECK(t.nodes[k].value == doctest::Approx(sum[k] / double(count[k])).epsilon(1e-12));
    }

    const auto back = DecisionTree::from_json(t.to_json());
    CHECK(back == t);
    CHECK(t.to_dot("y").find("digraph") != std::string::npos);
    CHECK(!t.to_text().empty());
  }
}

TEST_CASE("correlations") {
  Rng rng(6);
  const int n = 200;
  Eigen::VectorXd x(n), noise(n);
  for (int i = 0; i < n; ++i) {
    x(i) = rng.uniform(-1, 1);
    noise(i) = rng.uniform(-1, 1);
  }

  CHECK(pearson(x, 2.0 * x) == doctest::Approx(1.0));
  CHECK(pearson(x, -x) == doctest::Approx(-1.0));
  CHECK(spearman(x, x.array().cube().matrix()) == doctest::Approx(1.0));
  CHECK(pearson(x, x.array().cube().matrix()) < 1.0);
  CHECK(spearman(x, noise) == doctest::Approx(spearman(x.array().exp().matrix(), noise)).epsilon(1e-12));
  CHECK(std::isnan(pearson(x, Eigen::VectorXd::Constant(n, 1.0))));

  CHECK(correlation_p_value(0.0, 50) == doctest::Approx(1.0));
  CHECK(correlation_p_value(0.99, 50) < 1e-10);
  // r = 0.5 with n = 11: t = 0.5 sqrt(9 / 0.75) = sqrt(3); two-sided p of t_9.
  CHECK(correlation_p_value(0.5, 11) == doctest::Approx(0.117331).epsilon(1e-4));

  Eigen::VectorXd v(5);
  v << 3, 1, 3, 2, 3;
  Eigen::VectorXd ranks(5);
  ranks << 4, 1, 4, 2, 4;
  CHECK(average_ranks(v) == ranks);

  SUBCASE("permutation null rejects at about the nominal rate") {
    int rejected = 0;
    Eigen::VectorXd y = x;
    std::vector<double> buf(y.data(), y.data() + n);
    for (int trial = 0; trial < 400; ++trial) {
      rng.shuffle(buf);
      const Eigen::VectorXd perm = Eigen::Map<Eigen::VectorXd>(buf.data(), n);
      if (correlation_p_value(pearson(x, perm), n) < 0.05) ++rejected;
    }
    CHECK(rejected > 5);
    CHECK(rejected < 40);
  }

  SUBCASE("report layout") {
    Eigen::MatrixXd xs(n, 6), ys(n, 3);
    for (int i = 0; i < n; ++i) {
      for (int k = 0; k < 6; ++k) xs(i, k) = rng.uniform();
      ys(i, 0) = -xs(i, 0);
      ys(i, 1) = xs(i, 4) + 0.01 * rng.uniform();
      ys(i, 2) = rng.uniform();
    }
    const auto r = correlations(xs, ys, 0.05);
    CHECK(r.pearson.rows() == 6);
    CHECK(r.pearson.cols() == 3);
    CHECK(r.pearson(0, 0) == doctest::Approx(-1.0));
    CHECK(r.pearson_significant(4, 1));
    CHECK(r.samples == std::size_t(n));
    CHECK_THROWS_AS(correlations(xs.topRows(2), ys.topRows(2), 0.05), TooFewRows);
  }
}

TEST_CASE("derivatives of eta") {
  KinematicPipeline kp;
  kp.task = TaskRegion{{-0.8, 0.2}, 0.05};
  kp.grid = PoseGrid{48, 48, {}};
  kp.raster = RasterOptions{512};
  const Linkage<double> d = UnitLinkage{1.0, 0.35, 1.05, 0.45, 1.2, 0.45}.scaled(0.5);
  const double eta = eta_of_lengths(d, kp);
  CHECK(eta_of_lengths(d.scaled(2.0), kp) == doctest::Approx(eta / 4.0).epsilon(1e-12));

  const auto stats = derivative_stats({d}, kp, 0.01, 2);
  REQUIRE(stats.skipped == 0);
  const Eigen::VectorXd g = stats.derivatives.row(0).transpose();
  // Homogeneous of degree -2, so sum x_i d eta / d x_i = -2 eta.
  CHECK(d.vector().dot(g) == doctest::Approx(-2.0 * eta).epsilon(0.05));

  const auto half = derivative_stats({d}, kp, 0.005, 2);
  const Eigen::VectorXd gh = half.derivatives.row(0).transpose();
  CHECK((gh - g).norm() / g.norm() < 0.15);

  CHECK(stats.ranking().size() == 6);
  const Linkage<double> bad{1.0, 0.2, 0.3, 0.3, 1.0, 0.3};
  CHECK(derivative_stats({bad}, kp, 0.01).skipped == 1);
  CHECK_THROWS_AS(derivative_stats({d}, kp, 0.0), ConfigError);
}

TEST_CASE("distribution summary") {
  const auto s = summarize({1, 2, 3, 4, 100});
  CHECK(s.median == 3.0);
  CHECK(s.q1 == 2.0);
  CHECK(s.q3 == 4.0);
  CHECK(s.whisker_hi == 4.0);
  CHECK(s.whisker_lo == 1.0);
  CHECK(s.mean == doctest::Approx(22.0));
}

TEST_CASE("neighborhood") {
  ParetoArchive a;
  auto ind = [](double v) {
    Individual i;
    i.x = Eigen::VectorXd::Constant(6, v);
    i.objectives = Eigen::Vector3d::Constant(v);
    return i;
  };
  for (int k = 0; k < 40; ++k) a.pareto.push_back(ind(k));
  for (int g = 0; g < 6; ++g) {
    a.history.emplace_back();
    for (int k = 0; k < 150; ++k) a.history.back().push_back(ind(1000 * g + k));
  }
  const auto n = extract_neighborhood(a, 100, 300, 5);
  CHECK(n.n_pareto == 40);
  CHECK(n.n_history == 300);
  CHECK(n.members.size() == 340);
  for (std::size_t i = n.n_pareto; i < n.members.size(); ++i) CHECK(n.source[i] >= 3);

  const auto again = extract_neighborhood(a, 10, 20, 5);
  const auto same = extract_neighborhood(a, 10, 20, 5);
  CHECK(again.n_pareto == 10);
  for (std::size_t i = 0; i < again.members.size(); ++i) CHECK(again.members[i].x == same.members[i].x);

  a.history.resize(2);
  CHECK_THROWS_AS(extract_neighborhood(a, 10, 20, 5), InsufficientHistory);
}
