#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "qsm/sampler.hpp"

namespace qsm {

struct MlpHyperparams {
  int hidden_layers = 1;
  int hidden_nodes = 100;
  double learning_rate = 1e-3;
  int max_epochs = 50000;
  /// Epochs without validation improvement before stopping; best weights restored.
  int patience = 500;
  double validation_fraction = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const;
};

/// y = W x + b, W is (out x in).
struct DenseLayer {
  Eigen::MatrixXd weights;
  Eigen::VectorXd bias;
};

struct TrainingInfo {
  std::uint64_t seed = 0;
  int epochs_run = 0;
  int best_epoch = 0;
  double final_train_loss = 0.0;
  double best_validation_loss = 0.0;
  /// Best-so-far monitored loss, sampled every 100 epochs.
  std::vector<double> best_loss_history;
};

/// Inputs and targets with one sample per row.
struct RegressionData {
  Eigen::MatrixXd inputs;
  Eigen::MatrixXd targets;

  Eigen::Index rows() const { return inputs.rows(); }
  RegressionData subset(std::span<const std::size_t> idx) const;
};

/// Six absolute lengths (m) -> (eta, tau1, tau2).
RegressionData to_regression_data(std::span<const LabeledDesign> rows);

/// ReLU MLP with min-max input scaling and z-scored targets.
struct SurrogateModel {
  std::vector<DenseLayer> layers;
  Eigen::VectorXd input_min, input_max;
  Eigen::VectorXd target_mean, target_std;
  TrainingInfo info;

  Eigen::Index input_dim() const { return input_min.size(); }
  Eigen::Index output_dim() const { return target_mean.size(); }

  /// Rows of x are samples; returns denormalized predictions, one row each.
  Eigen::MatrixXd predict(const Eigen::MatrixXd& x) const;
  Eigen::VectorXd predict(const Eigen::VectorXd& x) const;
  /// True when x leaves the per-feature box seen in training.
  bool extrapolates(const Eigen::VectorXd& x) const;

  /// Feature-major (dims x samples) normalized inputs.
  Eigen::MatrixXd normalize_inputs(const Eigen::MatrixXd& x) const;
  Eigen::MatrixXd normalize_targets(const Eigen::MatrixXd& y) const;
  Eigen::MatrixXd denormalize_targets(const Eigen::MatrixXd& yn) const;
};

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Seeded shuffle split; train gets round(ratio * n). Throws TooFewRows for n < 10.
SplitIndices split(std::size_t n, double ratio, std::uint64_t seed);

/// Full-batch Adam on mean squared error of normalized targets. Throws
/// NonFiniteLoss on divergence.
SurrogateModel fit(const RegressionData& train, const MlpHyperparams& hp, std::uint64_t seed);

inline Eigen::VectorXd predict(const SurrogateModel& model, const Eigen::VectorXd& x) {
  return model.predict(x);
}

struct RegressionMetrics {
  Eigen::VectorXd r2, mse, rmse;  ///< per target
  double r2_all = 0.0;            ///< mean over targets
  double mse_all = 0.0;
  double rmse_all = 0.0;
};

/// Metrics on the model's normalized target scale.
RegressionMetrics evaluate(const SurrogateModel& model, const RegressionData& test);
/// Metrics of predictions against truth, one sample per row.
RegressionMetrics regression_metrics(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& pred);

/// Network loss and its gradient, exposed for gradient checking. Inputs and
/// targets are feature-major and already normalized.
double mse_loss(const std::vector<DenseLayer>& layers, const Eigen::MatrixXd& xn,
                const Eigen::MatrixXd& yn);
std::vector<DenseLayer> mse_gradient(const std::vector<DenseLayer>& layers,
                                     const Eigen::MatrixXd& xn, const Eigen::MatrixXd& yn);

std::string model_to_json(const SurrogateModel& model);
SurrogateModel model_from_json(const std::string& text);
void save_model(const std::filesystem::path& path, const SurrogateModel& model);
SurrogateModel load_model(const std::filesystem::path& path);

}  // namespace qsm
