#include <cmath>

#include "qsm/errors.hpp"
#include "qsm/surrogate.hpp"

namespace qsm {

RegressionMetrics regression_metrics(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& pred) {
  if (truth.rows() == 0 || truth.rows() != pred.rows() || truth.cols() != pred.cols())
    throw DataError("metrics need equally shaped, nonempty truth and prediction");
  const Eigen::Index m = truth.cols();
  RegressionMetrics out;
  out.r2.resize(m);
  out.mse.resize(m);
  out.rmse.resize(m);
  for (Eigen::Index k = 0; k < m; ++k) {
    const double ss_res = (truth.col(k) - pred.col(k)).squaredNorm();
    const double ss_tot = (truth.col(k).array() - truth.col(k).mean()).square().sum();
    out.mse(k) = ss_res / double(truth.rows());
    out.rmse(k) = std::sqrt(out.mse(k));
    out.r2(k) = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : (ss_res == 0.0 ? 1.0 : 0.0);
  }
  out.r2_all = out.r2.mean();
  out.mse_all = out.mse.mean();
  out.rmse_all = std::sqrt(out.mse_all);
  return out;
}

RegressionMetrics evaluate(const SurrogateModel& model, const RegressionData& test) {
  const Eigen::MatrixXd truth = model.normalize_targets(test.targets).transpose();
  const Eigen::MatrixXd pred = model.normalize_targets(model.predict(test.inputs)).transpose();
  return regression_metrics(truth, pred);
}

}  // namespace qsm
