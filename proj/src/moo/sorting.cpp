#include <algorithm>
#include <limits>
#include <numeric>

#include "qsm/moo.hpp"

namespace qsm {

bool dominates(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  bool strictly = false;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (a(i) > b(i)) return false;
    if (a(i) < b(i)) strictly = true;
  }
  return strictly;
}

bool constraint_dominates(const Individual& a, const Individual& b) {
  const bool fa = a.feasible(), fb = b.feasible();
  if (fa && !fb) return true;
  if (!fa && fb) return false;
  if (!fa) return a.violation < b.violation;
  return dominates(a.objectives, b.objectives);
}

namespace {

template <typename Dominates>
Fronts fast_sort(std::size_t n, Dominates&& dom) {
  std::vector<std::vector<std::size_t>> dominated(n);
  std::vector<std::size_t> counter(n, 0);
  Fronts fronts(1);
  for (std::size_t p = 0; p < n; ++p) {
    for (std::size_t q = p + 1; q < n; ++q) {
      if (dom(p, q)) {
        dominated[p].push_back(q);
        ++counter[q];
      } else if (dom(q, p)) {
        dominated[q].push_back(p);
        ++counter[p];
      }
    }
  }
  for (std::size_t p = 0; p < n; ++p)
    if (counter[p] == 0) fronts[0].push_back(p);
  while (!fronts.back().empty()) {
    std::vector<std::size_t> next;
    for (std::size_t p : fronts.back())
      for (std::size_t q : dominated[p])
        if (--counter[q] == 0) next.push_back(q);
    std::sort(next.begin(), next.end());
    fronts.push_back(std::move(next));
  }
  fronts.pop_back();
  return fronts;
}

}  // namespace

Fronts non_dominated_sort(std::span<const Individual> pop) {
  return fast_sort(pop.size(),
                   [&](std::size_t a, std::size_t b) { return constraint_dominates(pop[a], pop[b]); });
}

Fronts non_dominated_sort(const Eigen::MatrixXd& objectives) {
  return fast_sort(std::size_t(objectives.rows()), [&](std::size_t a, std::size_t b) {
    return dominates(objectives.row(Eigen::Index(a)).transpose(),
                     objectives.row(Eigen::Index(b)).transpose());
  });
}

Eigen::VectorXd crowding_distance(const Eigen::MatrixXd& front) {
  const Eigen::Index n = front.rows();
  constexpr double inf = std::numeric_limits<double>::infinity();
  Eigen::VectorXd d = Eigen::VectorXd::Zero(n);
  if (n <= 2) return Eigen::VectorXd::Constant(n, inf);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (Eigen::Index m = 0; m < front.cols(); ++m) {
    std::iota(order.begin(), order.end(), Eigen::Index(0));
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return front(a, m) < front(b, m); });
    const double lo = front(order.front(), m), hi = front(order.back(), m);
    d(order.front()) = inf;
    d(order.back()) = inf;
    if (!(hi > lo)) continue;
    for (std::size_t k = 1; k + 1 < order.size(); ++k)
      d(order[k]) += (front(order[k + 1], m) - front(order[k - 1], m)) / (hi - lo);
  }
  return d;
}

}  // namespace qsm
