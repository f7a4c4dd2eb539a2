#include <algorithm>
#include <cmath>
#include <numeric>

#include "qsm/mining.hpp"
#include "qsm/parallel.hpp"

namespace qsm {

double eta_of_lengths(const Linkage<double>& lengths, const KinematicPipeline& pipeline) {
  if (!(lengths.l1 > 0.0)) throw DegeneratePose();
  const UnitLinkage unit = lengths.scaled(1.0 / lengths.l1);
  if (!is_crank_rocker(unit) || !is_feasible_over_range(unit, pipeline.grid)) throw ClosureInfeasible();
  const Workspace ws = compute_workspace(unit, pipeline.grid, pipeline.raster);
  return kinematic_performance(pipeline.task.area(), ws.area() * lengths.l1 * lengths.l1);
}

DistributionSummary summarize(std::vector<double> v) {
  DistributionSummary s;
  s.n = v.size();
  if (v.empty()) return s;
  std::sort(v.begin(), v.end());
  auto quantile = [&](double q) {
    const double pos = q * double(v.size() - 1);
    const auto lo = std::size_t(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - double(lo)) * (v[hi] - v[lo]);
  };
  s.q1 = quantile(0.25);
  s.median = quantile(0.5);
  s.q3 = quantile(0.75);
  const double iqr = s.q3 - s.q1;
  // Whiskers reach the most extreme data points within 1.5 IQR of the box.
  s.whisker_lo = s.q1;
  s.whisker_hi = s.q3;
  for (double x : v) {
    if (x >= s.q1 - 1.5 * iqr) s.whisker_lo = std::min(s.whisker_lo, x);
    if (x <= s.q3 + 1.5 * iqr) s.whisker_hi = std::max(s.whisker_hi, x);
  }
  double sum = 0.0, sum_abs = 0.0;
  for (double x : v) {
    sum += x;
    sum_abs += std::abs(x);
  }
  s.mean = sum / double(v.size());
  s.mean_abs = sum_abs / double(v.size());
  return s;
}

std::vector<int> DerivativeStats::ranking() const {
  std::vector<int> order(variables.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return variables[std::size_t(a)].mean_abs > variables[std::size_t(b)].mean_abs;
  });
  return order;
}

DerivativeStats derivative_stats(const std::vector<Linkage<double>>& designs,
                                 const KinematicPipeline& pipeline, double relative_step,
                                 unsigned threads) {
  if (!(relative_step > 0.0 && relative_step < 0.5)) throw ConfigError("relative step must lie in (0, 0.5)");
  const std::size_t n = designs.size();
  std::vector<Eigen::Matrix<double, 6, 1>> grads(n);
  std::vector<char> ok(n, 0);
  parallel_for(
      n,
      [&](std::size_t k) {
        const auto x0 = designs[k].vector();
        Eigen::Matrix<double, 6, 1> g;
        try {
          for (int i = 0; i < 6; ++i) {
            const double h = relative_step * std::abs(x0(i));
            auto xp = x0, xm = x0;
            xp(i) += h;
            xm(i) -= h;
            const double ep = eta_of_lengths(Linkage<double>::from_vector(xp), pipeline);
            const double em = eta_of_lengths(Linkage<double>::from_vector(xm), pipeline);
            g(i) = (ep - em) / (2.0 * h);
          }
        } catch (const NumericalError&) {
          return;
        }
        grads[k] = g;
        ok[k] = 1;
      },
      threads);

  DerivativeStats out;
  out.relative_step = relative_step;
  const auto kept = std::size_t(std::count(ok.begin(), ok.end(), 1));
  out.skipped = n - kept;
  out.derivatives.resize(Eigen::Index(kept), 6);
  Eigen::Index r = 0;
  for (std::size_t k = 0; k < n; ++k)
    if (ok[k]) out.derivatives.row(r++) = grads[k].transpose();
  for (Eigen::Index i = 0; i < 6; ++i) {
    std::vector<double> col(out.derivatives.col(i).data(), out.derivatives.col(i).data() + kept);
    out.variables.push_back(summarize(std::move(col)));
  }
  return out;
}

}  // namespace qsm
