#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "qsm/sampler.hpp"
#include "qsm/surrogate.hpp"

namespace qsm {

struct Evaluation {
  Eigen::VectorXd objectives;  ///< all minimized
  Eigen::VectorXd violations;  ///< >= 0 each; empty when unconstrained
};

/// Box-bounded problem. `evaluate` must be pure; it is called concurrently.
struct Problem {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  std::function<Evaluation(const Eigen::VectorXd&)> evaluate;

  Eigen::Index dim() const { return lower.size(); }
};

struct Individual {
  Eigen::VectorXd x;
  Eigen::VectorXd objectives;
  Eigen::VectorXd violations;
  double violation = 0.0;  ///< sum of violations
  int rank = 0;
  double crowding = 0.0;

  bool feasible() const { return violation <= 0.0; }
};

/// Per-target mean and (population) standard deviation over the dataset,
/// for (eta, tau1, tau2).
struct ConstraintStats {
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  Eigen::Vector3d std = Eigen::Vector3d::Ones();
  double z = 1.95;

  static ConstraintStats from_rows(std::span<const LabeledDesign> rows, double z = 1.95);
};

/// g1..g10 as non-negative breaches: positivity of the three predictions,
/// the crank-rocker condition on absolute lengths, and the mean +- z std band
/// of each prediction (lower then upper bound).
Eigen::Matrix<double, 10, 1> evaluate_constraints(const Linkage<double>& x,
                                                  const Eigen::Vector3d& predictions,
                                                  const ConstraintStats& stats);

/// Surrogate-driven design problem over absolute link lengths.
struct MooProblem {
  SurrogateModel surrogate;
  Eigen::VectorXd lower;  ///< per-variable min over the dataset (m)
  Eigen::VectorXd upper;  ///< per-variable max over the dataset (m)
  ConstraintStats stats;

  static MooProblem from_dataset(SurrogateModel model, std::span<const LabeledDesign> rows,
                                 double z = 1.95);
  Problem problem() const;
};

/// Pareto dominance for minimization.
bool dominates(const Eigen::VectorXd& a, const Eigen::VectorXd& b);
/// Feasible beats infeasible; among infeasible lower total violation wins;
/// among feasible, Pareto dominance.
bool constraint_dominates(const Individual& a, const Individual& b);

using Fronts = std::vector<std::vector<std::size_t>>;

/// Fronts under constraint-domination; each front lists indices ascending.
Fronts non_dominated_sort(std::span<const Individual> pop);
/// Plain Pareto fronts of the rows of `objectives`.
Fronts non_dominated_sort(const Eigen::MatrixXd& objectives);

/// Crowding distance of each row of a front; boundary rows get +inf.
Eigen::VectorXd crowding_distance(const Eigen::MatrixXd& front);

/// Exact hypervolume dominated by the rows of `points` and bounded by
/// `reference` (minimization). Rows not strictly better than the reference in
/// every objective contribute nothing.
double hypervolume(const Eigen::MatrixXd& points, const Eigen::VectorXd& reference);

struct Nsga2Settings {
  std::size_t pop_size = 100;
  int generations = 200;
  double crossover_prob = 0.9;
  double crossover_eta = 15.0;
  double mutation_eta = 20.0;
  double mutation_prob = -1.0;  ///< per variable; negative means 1 / dim
  unsigned threads = 0;

  void validate() const;
};

struct ParetoArchive {
  /// Feasible members of the final first front.
  std::vector<Individual> pareto;
  /// Population after initialisation (entry 0) and after every generation.
  std::vector<std::vector<Individual>> history;
  Nsga2Settings settings;
  std::uint64_t seed = 0;
};

/// Constrained NSGA-II (SBX crossover, polynomial mutation, binary tournament
/// on constraint-domination then crowding). Throws NoFeasibleIndividual.
ParetoArchive nsga2(const Problem& problem, const Nsga2Settings& settings, std::uint64_t seed);

/// Objective rows of the feasible, mutually non-dominated members of `pop`.
Eigen::MatrixXd feasible_front(std::span<const Individual> pop);

// Archive files: <dir>/pareto.csv, <dir>/history.csv, <dir>/archive.json.
using ExtraColumns = std::vector<std::pair<std::string, std::vector<double>>>;
void write_individuals_csv(const std::filesystem::path& path, std::span<const Individual> pop,
                           const ExtraColumns& extra = {}, int generation = -1);
void write_archive(const std::filesystem::path& dir, const ParetoArchive& archive,
                   const ExtraColumns& pareto_extra = {});
ParetoArchive read_archive(const std::filesystem::path& dir);

}  // namespace qsm
