#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/special_functions/beta.hpp>

#include "qsm/mining.hpp"

namespace qsm {

Eigen::VectorXd average_ranks(const Eigen::VectorXd& v) {
  const auto n = std::size_t(v.size());
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return v(Eigen::Index(a)) < v(Eigen::Index(b)); });
  Eigen::VectorXd ranks(v.size());
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && v(Eigen::Index(order[j + 1])) == v(Eigen::Index(order[i]))) ++j;
    const double avg = 0.5 * double(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks(Eigen::Index(order[k])) = avg;
    i = j + 1;
  }
  return ranks;
}

double pearson(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size() || a.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  const Eigen::ArrayXd da = a.array() - a.mean();
  const Eigen::ArrayXd db = b.array() - b.mean();
  const double saa = (da * da).sum(), sbb = (db * db).sum();
  if (!(saa > 0.0) || !(sbb > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  return std::clamp((da * db).sum() / std::sqrt(saa * sbb), -1.0, 1.0);
}

double spearman(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return pearson(average_ranks(a), average_ranks(b));
}

double correlation_p_value(double r, std::size_t n) {
  if (std::isnan(r) || n < 3) return 1.0;
  const double df = double(n) - 2.0;
  const double r2 = r * r;
  if (r2 >= 1.0) return 0.0;
  // P(|T| > t) with t^2 = df r^2 / (1 - r^2) equals I_{df/(df+t^2)}(df/2, 1/2).
  const double x = df / (df + df * r2 / (1.0 - r2));
  return boost::math::ibeta(0.5 * df, 0.5, x);
}

CorrelationReport correlations(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, double alpha,
                               std::vector<std::string> variables, std::vector<std::string> objectives) {
  if (x.rows() != y.rows()) throw DataError("correlation inputs differ in length");
  if (x.rows() < 3) throw TooFewRows(std::size_t(x.rows()));
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("significance level must lie in (0, 1)");
  const auto n = std::size_t(x.rows());
  CorrelationReport rep;
  rep.alpha = alpha;
  rep.samples = n;
  rep.variables = std::move(variables);
  rep.objectives = std::move(objectives);
  if (rep.variables.empty())
    for (Eigen::Index i = 0; i < x.cols(); ++i) rep.variables.push_back("x" + std::to_string(i));
  if (rep.objectives.empty())
    for (Eigen::Index i = 0; i < y.cols(); ++i) rep.objectives.push_back("y" + std::to_string(i));

  const Eigen::Index p = x.cols(), q = y.cols();
  rep.pearson.resize(p, q);
  rep.spearman.resize(p, q);
  rep.pearson_p.resize(p, q);
  rep.spearman_p.resize(p, q);
  rep.pearson_significant.resize(p, q);
  rep.spearman_significant.resize(p, q);
  for (Eigen::Index i = 0; i < p; ++i) {
    const Eigen::VectorXd xi = x.col(i);
    const Eigen::VectorXd ri = average_ranks(xi);
    for (Eigen::Index j = 0; j < q; ++j) {
      const Eigen::VectorXd yj = y.col(j);
      const double r = pearson(xi, yj);
      const double rho = pearson(ri, average_ranks(yj));
      rep.pearson(i, j) = r;
      rep.spearman(i, j) = rho;
      rep.pearson_p(i, j) = correlation_p_value(r, n);
      rep.spearman_p(i, j) = correlation_p_value(rho, n);
      rep.pearson_significant(i, j) = !std::isnan(r) && rep.pearson_p(i, j) < alpha;
      rep.spearman_significant(i, j) = !std::isnan(rho) && rep.spearman_p(i, j) < alpha;
    }
  }
  return rep;
}

}  // namespace qsm
