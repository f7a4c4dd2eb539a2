#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "qsm/dynamics.hpp"
#include "qsm/geometry.hpp"
#include "qsm/mining.hpp"
#include "qsm/moo.hpp"
#include "qsm/sampler.hpp"
#include "qsm/surrogate.hpp"

namespace qsm {

/// Named seeds; each defaults to a value derived from the base seed.
struct Seeds {
  std::uint64_t base = 42;
  std::uint64_t sampling = 0, split = 0, training = 0, nsga = 0, mining = 0;
  /// Config keys of seeds given explicitly; these survive a change of base.
  std::set<std::string> pinned;

  /// Fill every seed not pinned from `base`.
  void derive();
};

/// Envelope used to pick printable designs in the report (mm).
struct Envelope {
  double width_mm = 600.0;
  double length_mm = 350.0;
  double height_mm = 350.0;
};

struct MiningSettings {
  std::size_t sobol_base_n = 1024;
  int sobol_bootstrap = 100;
  TreeOptions tree;
  double alpha = 0.05;
  std::size_t neighborhood_pareto = 100;
  std::size_t neighborhood_history = 300;
  std::size_t derivative_designs = 200;
  double derivative_relative_step = 0.01;
  int derivative_raster_cells = 1024;
};

struct PipelineConfig {
  int version = 1;
  std::vector<Eigen::Vector2d> task_points;     ///< reduced to their enclosing circle
  std::optional<TaskRegion> task_region;        ///< explicit disk instead of points
  SamplerConfig sampler;
  MassModel mass;
  double train_ratio = 0.8;
  MlpHyperparams mlp;
  Nsga2Settings nsga;
  double constraint_z = 1.95;
  MiningSettings mining;
  Envelope envelope;
  Seeds seeds;
  unsigned threads = 0;

  TaskRegion task() const;
  /// Replace the base seed and re-derive every unpinned named seed.
  void set_base_seed(std::uint64_t seed);
  /// Canonical JSON with every resolved value.
  std::string to_json() const;
};

/// Parses `key = value` lines; '#' starts a comment. Unknown keys, malformed
/// values and out-of-range settings raise ConfigError naming the key.
PipelineConfig parse_config(const std::string& text);
PipelineConfig load_config(const std::filesystem::path& path);
/// Every recognised key with a one-line description, for --help style output.
std::vector<std::pair<std::string, std::string>> config_keys();

/// Hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

/// manifest.json in the output directory: per stage, the files it wrote with
/// their hashes, and its wall time.
class RunManifest {
 public:
  struct Stage {
    std::map<std::string, std::string> files;  ///< file name -> sha256
    double seconds = 0.0;
  };

  static RunManifest load_or_empty(const std::filesystem::path& dir);
  void save() const;

  bool has_stage(const std::string& name) const { return stages_.count(name) != 0; }
  /// Throws DataError naming the stage when absent.
  const Stage& stage(const std::string& name) const;
  /// Path of a file recorded by `stage` after checking that it still hashes
  /// to the recorded value.
  std::filesystem::path input(const std::string& stage, const std::string& file) const;
  /// Records the given files (relative to the output directory).
  void record(const std::string& stage, const std::vector<std::string>& files, double seconds);
  void set_config(std::string json) { config_json_ = std::move(json); }

  const std::filesystem::path& dir() const { return dir_; }
  const std::map<std::string, Stage>& stages() const { return stages_; }

 private:
  std::filesystem::path dir_;
  std::map<std::string, Stage> stages_;
  std::string config_json_;
};

struct StageContext {
  PipelineConfig config;
  std::filesystem::path out_dir;
};

void cmd_generate(const StageContext& ctx);
void cmd_label(const StageContext& ctx);
void cmd_train(const StageContext& ctx);
void cmd_optimize(const StageContext& ctx);
void cmd_mine(const StageContext& ctx);
void cmd_report(const StageContext& ctx);

/// Markdown summary built only from files recorded in the manifest.
std::string build_report(const RunManifest& manifest, const PipelineConfig& config);

/// Re-evaluation of a design given in meters through the exact kinematic and
/// torque models.
struct TruthEvaluation {
  bool feasible = false;
  bool covers = false;
  double eta = std::numeric_limits<double>::quiet_NaN();
  double tau1 = std::numeric_limits<double>::quiet_NaN();
  double tau2 = std::numeric_limits<double>::quiet_NaN();
};

TruthEvaluation evaluate_truth(const Linkage<double>& lengths, const TaskRegion& task,
                               const SamplerConfig& sampler, const MassModel& mass);

}  // namespace qsm
