#pragma once

#include <stdexcept>
#include <string>

namespace qsm {

/// Base of every error raised by the library. The category decides the CLI
/// exit code (config 2, data 3, numerical 4).
class Error : public std::runtime_error {
 public:
  enum class Category { config, data, numerical };

  Error(Category category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  Category category() const noexcept { return category_; }

 private:
  Category category_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(Category::config, what) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(Category::data, what) {}
};

class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what) : Error(Category::numerical, what) {}
};

// geometry
struct ClosureInfeasible : NumericalError {
  ClosureInfeasible() : NumericalError("four-bar loop cannot close at this pose") {}
};
struct DegeneratePose : NumericalError {
  DegeneratePose() : NumericalError("coupler diagonal is zero") {}
};
struct EmptyWorkspace : NumericalError {
  EmptyWorkspace() : NumericalError("no feasible pose in the operating range") {}
};
struct EmptyInput : DataError {
  explicit EmptyInput(const std::string& what = "empty input") : DataError(what) {}
};
struct Uncoverable : NumericalError {
  Uncoverable() : NumericalError("no scale in the search bracket covers the task region") {}
};
struct NonPositiveArea : NumericalError {
  NonPositiveArea() : NumericalError("area must be positive") {}
};
struct SingularPose : NumericalError {
  explicit SingularPose(double cond)
      : NumericalError("jacobian condition number " + std::to_string(cond) + " exceeds 1e8") {}
};

// sampler
struct InvalidBounds : ConfigError {
  explicit InvalidBounds(const std::string& what) : ConfigError(what) {}
};

// surrogate
struct TooFewRows : DataError {
  explicit TooFewRows(std::size_t n)
      : DataError("too few rows: " + std::to_string(n)) {}
};
struct NonFiniteLoss : NumericalError {
  explicit NonFiniteLoss(int epoch)
      : NumericalError("training loss became non-finite at epoch " + std::to_string(epoch)) {}
};

// moo / mining
struct NoFeasibleIndividual : NumericalError {
  NoFeasibleIndividual() : NumericalError("no feasible individual found") {}
};
struct InsufficientHistory : DataError {
  explicit InsufficientHistory(std::size_t generations)
      : DataError("need at least 3 generations of history, have " +
                  std::to_string(generations)) {}
};

}  // namespace qsm
