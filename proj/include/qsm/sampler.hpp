#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "qsm/dynamics.hpp"
#include "qsm/geometry.hpp"

namespace qsm {

/// Per-variable [lower, upper] box over the six link ratios.
struct DesignBounds {
  Eigen::Matrix<double, 6, 1> lower;
  Eigen::Matrix<double, 6, 1> upper;

  /// Link-ratio ranges of the reference study; l1 pinned to 1.
  static DesignBounds reference();
  /// Throws InvalidBounds unless l1 is fixed at 1 and every free variable
  /// has lower < upper.
  void validate() const;
};

struct SamplerConfig {
  std::size_t n_samples = 5000;
  DesignBounds bounds = DesignBounds::reference();
  std::uint64_t seed = 1;
  PoseGrid grid;
  RasterOptions raster;
  ScaleSearch scale_search;
  double safety = 1.0;
  unsigned threads = 0;
};

/// Latin hypercube over the free variables: one jittered sample per stratum,
/// independent random permutation per dimension.
std::vector<UnitLinkage> lhs_sample(const SamplerConfig& cfg);

/// Designs that satisfy the crank-rocker condition and close over the whole
/// operating range, in input order.
std::vector<UnitLinkage> filter_feasible(std::span<const UnitLinkage> designs,
                                         const PoseGrid& grid = {}, unsigned threads = 0);

/// One dataset row. Torques stay NaN until the dynamics stage has run.
struct LabeledDesign {
  std::size_t idx = 0;
  UnitLinkage unit;
  double scale = 0.0;       ///< meters
  double ws_area_m2 = 0.0;  ///< scaled workspace area
  double eta = 0.0;
  double tau1 = std::numeric_limits<double>::quiet_NaN();
  double tau2 = std::numeric_limits<double>::quiet_NaN();

  Linkage<double> lengths_abs() const { return unit.scaled(scale); }
  bool has_torques() const { return std::isfinite(tau1) && std::isfinite(tau2); }
  bool operator==(const LabeledDesign&) const = default;
};

struct Provenance {
  std::uint64_t seed = 0;
  std::size_t n_input = 0;
  std::size_t dropped_uncoverable = 0;
  std::size_t dropped_torque = 0;
  std::string config_snapshot;  ///< serialized pipeline config, if any
};

struct DesignDataset {
  std::vector<LabeledDesign> rows;
  Provenance provenance;
};

/// Scale factor, scaled workspace area and eta for each design; designs the
/// task cannot be covered by are dropped and counted. `idx` is the position in
/// `designs`.
DesignDataset label_kinematics(std::span<const UnitLinkage> designs, const TaskRegion& task,
                               const SamplerConfig& cfg);

/// Fills tau1/tau2 for every row; rows whose torque evaluation fails or is not
/// strictly positive are dropped and counted.
DesignDataset label_dynamics(DesignDataset dataset, const MassModel& mass,
                             const PoseGrid& grid = {}, unsigned threads = 0);

/// label_kinematics followed by label_dynamics.
DesignDataset build_dataset(std::span<const UnitLinkage> designs, const TaskRegion& task,
                            const MassModel& mass, const SamplerConfig& cfg);

// CSV: idx,l1..eey,scale_m,l1_abs..eey_abs,ws_area_m2,eta[,tau1_nm,tau2_nm]
void write_dataset_csv(const std::filesystem::path& path, std::span<const LabeledDesign> rows,
                       bool with_torques = true);
/// Throws DataError on missing columns or malformed values.
std::vector<LabeledDesign> read_dataset_csv(const std::filesystem::path& path);
void write_provenance_json(const std::filesystem::path& path, const Provenance& p);

/// Shortest round-trip decimal form of a double.
std::string format_double(double v);
/// Throws DataError on malformed input.
double parse_double(const std::string& s);

}  // namespace qsm
