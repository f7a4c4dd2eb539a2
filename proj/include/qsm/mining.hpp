#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "qsm/geometry.hpp"
#include "qsm/moo.hpp"
#include "qsm/surrogate.hpp"

namespace qsm {

// ---------------------------------------------------------------- Sobol

/// Batch model: rows of the input are samples, rows of the output are the
/// corresponding outputs.
using BatchFunction = std::function<Eigen::MatrixXd(const Eigen::MatrixXd&)>;

struct SobolIndices {
  Eigen::VectorXd s1, st;
  /// 95% bootstrap percentile intervals.
  Eigen::VectorXd s1_lo, s1_hi, st_lo, st_hi;
  /// Set where a point estimate is negative (sampling noise).
  std::vector<bool> s1_negative, st_negative;
};

struct SobolReport {
  std::size_t base_n = 0;
  std::size_t evaluations = 0;  ///< base_n * (2 d + 2)
  int bootstrap = 0;
  std::vector<SobolIndices> outputs;  ///< one per model output
};

/// Saltelli design on a scrambled Sobol sequence (A, B, A with column i from
/// B, and B with column i from A). First-order indices use the Saltelli
/// estimator, total indices the Jansen estimator, each averaged over the two
/// symmetric designs.
SobolReport sobol_indices(const BatchFunction& f, const Eigen::VectorXd& lower,
                          const Eigen::VectorXd& upper, std::size_t base_n, std::uint64_t seed,
                          int bootstrap = 100);

SobolReport sobol_indices(const SurrogateModel& model, const Eigen::VectorXd& lower,
                          const Eigen::VectorXd& upper, std::size_t base_n, std::uint64_t seed,
                          int bootstrap = 100, unsigned threads = 0);

// ---------------------------------------------------------------- CART

struct TreeNode {
  int feature = -1;  ///< -1 for leaves
  double threshold = 0.0;  ///< go left when x[feature] <= threshold
  double value = 0.0;      ///< mean target of the rows routed here
  double impurity = 0.0;   ///< mean squared deviation
  std::size_t samples = 0;
  int depth = 0;
  int left = -1, right = -1;

  bool leaf() const { return feature < 0; }
  bool operator==(const TreeNode&) const = default;
};

struct TreeOptions {
  int max_depth = 3;
  std::size_t min_leaf = 5;
};

/// Regression tree stored as a flat node list; node 0 is the root.
struct DecisionTree {
  std::vector<TreeNode> nodes;
  std::vector<std::string> feature_names;

  const TreeNode& root() const { return nodes.front(); }
  /// Index of the leaf a sample lands in.
  int route(const Eigen::VectorXd& x) const;
  double predict(const Eigen::VectorXd& x) const { return nodes[std::size_t(route(x))].value; }
  int depth() const;
  /// Conjunction of split conditions leading to a node, e.g. "eex_m <= 0.66".
  std::string path_to(int node) const;

  std::string to_text() const;
  std::string to_dot(const std::string& target_name = "y") const;
  std::string to_json() const;
  static DecisionTree from_json(const std::string& text);

  bool operator==(const DecisionTree&) const = default;
};

/// Greedy CART on squared error. Thresholds are midpoints between adjacent
/// distinct sorted values. A constant target yields a single leaf.
DecisionTree fit_tree(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                      const TreeOptions& options = {},
                      std::vector<std::string> feature_names = {});

// ---------------------------------------------------------------- correlation

/// Ranks starting at 1; ties get the average of their positions.
Eigen::VectorXd average_ranks(const Eigen::VectorXd& v);
/// NaN when either input has zero variance.
double pearson(const Eigen::VectorXd& a, const Eigen::VectorXd& b);
double spearman(const Eigen::VectorXd& a, const Eigen::VectorXd& b);
/// Two-sided p-value of a correlation coefficient through the t distribution
/// with n - 2 degrees of freedom. NaN r gives 1.
double correlation_p_value(double r, std::size_t n);

struct CorrelationReport {
  std::vector<std::string> variables, objectives;
  double alpha = 0.05;
  std::size_t samples = 0;
  /// variables x objectives
  Eigen::MatrixXd pearson, spearman, pearson_p, spearman_p;
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> pearson_significant, spearman_significant;
};

/// Every column of x against every column of y. Throws TooFewRows below 3 rows.
CorrelationReport correlations(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, double alpha,
                               std::vector<std::string> variables = {},
                               std::vector<std::string> objectives = {});

// ---------------------------------------------------------------- derivatives

/// Everything needed to evaluate eta for a mechanism given in meters.
struct KinematicPipeline {
  TaskRegion task;
  PoseGrid grid;
  RasterOptions raster{1024};
};

/// eta of a mechanism with absolute lengths: task area over the area of its
/// own (unscaled) workspace. Throws like compute_workspace and on infeasible
/// designs.
double eta_of_lengths(const Linkage<double>& lengths, const KinematicPipeline& pipeline);

struct DistributionSummary {
  double q1 = 0, median = 0, q3 = 0;
  double whisker_lo = 0, whisker_hi = 0;  ///< Tukey 1.5 IQR, clipped to data
  double mean = 0, mean_abs = 0;
  std::size_t n = 0;
};

DistributionSummary summarize(std::vector<double> values);

struct DerivativeStats {
  std::vector<DistributionSummary> variables;  ///< in link-name order
  /// rows = evaluated designs, columns = d eta / d x_i (1/m)
  Eigen::MatrixXd derivatives;
  std::size_t skipped = 0;
  double relative_step = 0.0;

  /// Variable indices sorted by decreasing mean |derivative|.
  std::vector<int> ranking() const;
};

/// Central differences of eta_of_lengths per variable with step
/// relative_step * x_i. Designs whose perturbed variants fail (closure,
/// empty workspace) are skipped and counted.
DerivativeStats derivative_stats(const std::vector<Linkage<double>>& designs,
                                 const KinematicPipeline& pipeline, double relative_step = 0.01,
                                 unsigned threads = 0);

// ---------------------------------------------------------------- neighborhood

struct NeighborhoodSet {
  std::vector<Individual> members;
  /// -1 for Pareto members, otherwise the history generation.
  std::vector<int> source;
  std::size_t n_pareto = 0;
  std::size_t n_history = 0;
};

/// n_pareto members of the Pareto set (seeded, without replacement; all if
/// fewer) followed by n_history members of the union of the last three
/// generations (all if fewer). Throws InsufficientHistory.
NeighborhoodSet extract_neighborhood(const ParetoArchive& archive, std::size_t n_pareto,
                                     std::size_t n_history, std::uint64_t seed);

}  // namespace qsm
