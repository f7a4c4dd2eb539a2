#include <algorithm>
#include <cmath>

#include "qsm/moo.hpp"

namespace qsm {

ConstraintStats ConstraintStats::from_rows(std::span<const LabeledDesign> rows, double z) {
  if (rows.empty()) throw EmptyInput("constraint statistics need at least one labeled row");
  Eigen::MatrixXd y(Eigen::Index(rows.size()), 3);
  for (std::size_t i = 0; i < rows.size(); ++i)
    y.row(Eigen::Index(i)) << rows[i].eta, rows[i].tau1, rows[i].tau2;
  ConstraintStats s;
  s.mean = y.colwise().mean().transpose();
  s.std = ((y.rowwise() - s.mean.transpose()).array().square().colwise().mean().sqrt()).transpose();
  s.z = z;
  if (!s.mean.allFinite() || !s.std.allFinite()) throw DataError("non-finite constraint statistics");
  return s;
}

Eigen::Matrix<double, 10, 1> evaluate_constraints(const Linkage<double>& x,
                                                  const Eigen::Vector3d& p,
                                                  const ConstraintStats& stats) {
  auto breach = [](double v) { return std::max(0.0, v); };
  Eigen::Matrix<double, 10, 1> g;
  g(0) = breach(-p(0));
  g(1) = breach(-p(1));
  g(2) = breach(-p(2));
  g(3) = breach(x.l2 + x.l3 - x.l1 - x.l4);
  for (int k = 0; k < 3; ++k) {
    const double lo = stats.mean(k) - stats.z * stats.std(k);
    const double hi = stats.mean(k) + stats.z * stats.std(k);
    g(4 + 2 * k) = breach(lo - p(k));
    g(5 + 2 * k) = breach(p(k) - hi);
  }
  return g;
}

MooProblem MooProblem::from_dataset(SurrogateModel model, std::span<const LabeledDesign> rows,
                                    double z) {
  if (rows.empty()) throw EmptyInput("optimization bounds need at least one labeled row");
  MooProblem mp;
  mp.surrogate = std::move(model);
  mp.lower = Eigen::VectorXd::Constant(6, std::numeric_limits<double>::infinity());
  mp.upper = Eigen::VectorXd::Constant(6, -std::numeric_limits<double>::infinity());
  for (const auto& r : rows) {
    const Eigen::VectorXd v = r.lengths_abs().vector();
    mp.lower = mp.lower.cwiseMin(v);
    mp.upper = mp.upper.cwiseMax(v);
  }
  for (Eigen::Index i = 0; i < 6; ++i)
    if (!(mp.lower(i) < mp.upper(i)))
      throw InvalidBounds(std::string("degenerate optimization range for ") + kLinkNames[i]);
  mp.stats = ConstraintStats::from_rows(rows, z);
  return mp;
}

Problem MooProblem::problem() const {
  Problem p;
  p.lower = lower;
  p.upper = upper;
  // Captures a copy so the problem outlives *this safely.
  p.evaluate = [self = *this](const Eigen::VectorXd& x) {
    const Eigen::Vector3d pred = self.surrogate.predict(x);
    const auto link = Linkage<double>::from_vector(x);
    Evaluation e;
    e.objectives = pred;
    e.violations = evaluate_constraints(link, pred, self.stats);
    return e;
  };
  return p;
}

}  // namespace qsm
