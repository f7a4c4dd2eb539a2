#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include <json.hpp>

#include "qsm/pipeline.hpp"

namespace qsm {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(trim(item));
  return out;
}

[[noreturn]] void bad(const std::string& key, const std::string& why) {
  throw ConfigError("config key '" + key + "': " + why);
}

double number(const std::string& key, const std::string& v) {
  double out = 0.0;
  const char* end = v.data() + v.size();
  const auto res = std::from_chars(v.data(), end, out);
  if (res.ec != std::errc() || res.ptr != end || !std::isfinite(out))
    bad(key, "expected a finite number, got '" + v + "'");
  return out;
}

std::uint64_t count(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const char* end = v.data() + v.size();
  const auto res = std::from_chars(v.data(), end, out);
  if (res.ec != std::errc() || res.ptr != end) bad(key, "expected a non-negative integer, got '" + v + "'");
  return out;
}

int small_int(const std::string& key, const std::string& v) {
  const auto c = count(key, v);
  if (c > 1'000'000'000ULL) bad(key, "value too large");
  return int(c);
}

std::pair<double, double> pair(const std::string& key, const std::string& v) {
  const auto parts = split(v, ',');
  if (parts.size() != 2) bad(key, "expected two comma-separated numbers");
  return {number(key, parts[0]), number(key, parts[1])};
}

double positive(const std::string& key, double v) {
  if (!(v > 0.0)) bad(key, "must be positive");
  return v;
}

using Setter = std::function<void(PipelineConfig&, const std::string& key, const std::string& value)>;

struct KeySpec {
  const char* key;
  const char* help;
  Setter set;
};

const std::vector<KeySpec>& registry() {
  static const std::vector<KeySpec> keys = [] {
    std::vector<KeySpec> k;
    k.push_back({"config_version", "format version, must be 1", [](PipelineConfig& c, auto& key, auto& v) {
                   c.version = small_int(key, v);
                   if (c.version != 1) bad(key, "unsupported version " + v);
                 }});
    k.push_back({"task_points_m", "task points 'x,y; x,y; ...' in meters (reduced to their enclosing circle)",
                 [](PipelineConfig& c, auto& key, auto& v) {
                   c.task_points.clear();
                   for (const auto& p : split(v, ';')) {
                     if (p.empty()) continue;
                     const auto [x, y] = pair(key, p);
                     c.task_points.emplace_back(x, y);
                   }
                   if (c.task_points.empty()) bad(key, "needs at least one point");
                 }});
    k.push_back({"task_center_m", "explicit task disk center 'x,y' in meters", [](PipelineConfig& c, auto& key, auto& v) {
                   const auto [x, y] = pair(key, v);
                   if (!c.task_region) c.task_region = TaskRegion{};
                   c.task_region->center = {x, y};
                 }});
    k.push_back({"task_radius_m", "explicit task disk radius in meters", [](PipelineConfig& c, auto& key, auto& v) {
                   if (!c.task_region) c.task_region = TaskRegion{};
                   c.task_region->radius = positive(key, number(key, v));
                 }});
    k.push_back({"n_samples", "Latin hypercube sample count", [](PipelineConfig& c, auto& key, auto& v) {
                   c.sampler.n_samples = count(key, v);
                   if (c.sampler.n_samples < 1) bad(key, "must be at least 1");
                 }});
    const char* ratio_keys[5] = {"bound_l2_ratio", "bound_l3_ratio", "bound_l4_ratio", "bound_eex_ratio",
                                 "bound_eey_ratio"};
    for (int i = 0; i < 5; ++i) {
      k.push_back({ratio_keys[i], "'min, max' of the link ratio to l1", [i](PipelineConfig& c, auto& key, auto& v) {
                     const auto [lo, hi] = pair(key, v);
                     if (!(lo > 0.0 && lo < hi)) bad(key, "needs 0 < min < max");
                     c.sampler.bounds.lower(i + 1) = lo;
                     c.sampler.bounds.upper(i + 1) = hi;
                   }});
    }
    k.push_back({"grid_theta1_steps", "frame-angle grid resolution", [](PipelineConfig& c, auto& key, auto& v) {
                   c.sampler.grid.theta1_steps = small_int(key, v);
                   if (c.sampler.grid.theta1_steps < 2) bad(key, "must be at least 2");
                 }});
    k.push_back({"grid_theta2_steps", "crank-angle grid resolution", [](PipelineConfig& c, auto& key, auto& v) {
                   c.sampler.grid.theta2_steps = small_int(key, v);
                   if (c.sampler.grid.theta2_steps < 2) bad(key, "must be at least 2");
                 }});
    k.push_back({"theta1_min_deg", "frame-angle lower limit", [](PipelineConfig& c, auto& key, auto& v) {
                   c.sampler.grid.range.theta1_min = deg2rad(number(key, v));
                 }});
    k.push_back({"theta1_max_deg", "frame-angle upper limit", [](PipelineConfig& c, auto& key, auto& v) {
                   c.sampler.grid.range.theta1_max = deg2rad(number(key, v));
                 }});
    k.push_back({"theta2_min_deg", "crank-angle lower limit (upper limit is theta1)",
                 [](PipelineConfig& c, auto& key, auto& v) {
                   c.sampler.grid.range.theta2_min = deg2rad(number(key, v));
                 }});
    k.push_back({"raster_cells", "workspace raster cells along the longer side", [](PipelineConfig& c, auto& key, auto& v) {
                   c.sampler.raster.cells_per_axis = small_int(key, v);
                   if (c.sampler.raster.cells_per_axis < 8) bad(key, "must be at least 8");
                 }});
    k.push_back({"scale_min_m", "smallest l1 considered when fitting the task", [](PipelineConfig& c, auto& key, auto& v) {
                   c.sampler.scale_search.min_scale = positive(key, number(key, v));
                 }});
    k.push_back({"scale_max_m", "largest l1 considered when fitting the task", [](PipelineConfig& c, auto& key, auto& v) {
                   c.sampler.scale_search.max_scale = positive(key, number(key, v));
                 }});
    k.push_back({"scale_rel_tol", "relative tolerance of the scale bisection", [](PipelineConfig& c, auto& key, auto& v) {
                   c.sampler.scale_search.rel_tol = positive(key, number(key, v));
                 }});
    k.push_back({"safety_factor", "multiplier on the minimal covering scale", [](PipelineConfig& c, auto& key, auto& v) {
                   c.sampler.safety = number(key, v);
                   if (!(c.sampler.safety >= 1.0)) bad(key, "must be at least 1");
                 }});
    k.push_back({"payload_kg", "end-effector payload", [](PipelineConfig& c, auto& key, auto& v) {
                   c.mass.payload = number(key, v);
                   if (c.mass.payload < 0.0) bad(key, "must be non-negative");
                 }});
    k.push_back({"link_density_kg_m3", "link material density", [](PipelineConfig& c, auto& key, auto& v) {
                   c.mass.density = number(key, v);
                   if (c.mass.density < 0.0) bad(key, "must be non-negative");
                 }});
    k.push_back({"link_section_area_m2", "link cross-section area", [](PipelineConfig& c, auto& key, auto& v) {
                   c.mass.section_area = number(key, v);
                   if (c.mass.section_area < 0.0) bad(key, "must be non-negative");
                 }});
    k.push_back({"gravity_m_s2", "gravitational acceleration (acts along -y)", [](PipelineConfig& c, auto& key, auto& v) {
                   c.mass.gravity = number(key, v);
                 }});
    k.push_back({"train_ratio", "fraction of labeled rows used for training", [](PipelineConfig& c, auto& key, auto& v) {
                   c.train_ratio = number(key, v);
                   if (!(c.train_ratio > 0.0 && c.train_ratio < 1.0)) bad(key, "must lie in (0, 1)");
                 }});
    k.push_back({"mlp_hidden_nodes", "hidden layer width", [](PipelineConfig& c, auto& key, auto& v) {
                   c.mlp.hidden_nodes = small_int(key, v);
                 }});
    k.push_back({"mlp_hidden_layers", "number of hidden layers", [](PipelineConfig& c, auto& key, auto& v) {
                   c.mlp.hidden_layers = small_int(key, v);
                 }});
    k.push_back({"mlp_learning_rate", "Adam step size", [](PipelineConfig& c, auto& key, auto& v) {
                   c.mlp.learning_rate = positive(key, number(key, v));
                 }});
    k.push_back({"mlp_max_epochs", "epoch cap", [](PipelineConfig& c, auto& key, auto& v) {
                   c.mlp.max_epochs = small_int(key, v);
                 }});
    k.push_back({"mlp_patience_epochs", "early-stopping patience", [](PipelineConfig& c, auto& key, auto& v) {
                   c.mlp.patience = small_int(key, v);
                 }});
    k.push_back({"mlp_validation_fraction", "share of the training rows held out for early stopping",
                 [](PipelineConfig& c, auto& key, auto& v) { c.mlp.validation_fraction = number(key, v); }});
    k.push_back({"nsga_pop_size", "population size (even)", [](PipelineConfig& c, auto& key, auto& v) {
                   c.nsga.pop_size = count(key, v);
                 }});
    k.push_back({"nsga_generations", "generation count", [](PipelineConfig& c, auto& key, auto& v) {
                   c.nsga.generations = small_int(key, v);
                 }});
    k.push_back({"nsga_crossover_prob", "SBX probability per pair", [](PipelineConfig& c, auto& key, auto& v) {
                   c.nsga.crossover_prob = number(key, v);
                 }});
    k.push_back({"nsga_crossover_eta", "SBX distribution index", [](PipelineConfig& c, auto& key, auto& v) {
                   c.nsga.crossover_eta = number(key, v);
                 }});
    k.push_back({"nsga_mutation_eta", "polynomial mutation distribution index", [](PipelineConfig& c, auto& key, auto& v) {
                   c.nsga.mutation_eta = number(key, v);
                 }});
    k.push_back({"nsga_mutation_prob", "per-variable mutation probability", [](PipelineConfig& c, auto& key, auto& v) {
                   c.nsga.mutation_prob = number(key, v);
                   if (!(c.nsga.mutation_prob >= 0.0)) bad(key, "must be non-negative");
                 }});
    k.push_back({"constraint_z", "half-width of the prediction bands in dataset standard deviations",
                 [](PipelineConfig& c, auto& key, auto& v) { c.constraint_z = positive(key, number(key, v)); }});
    k.push_back({"sobol_base_n", "Sobol base sample count (power of two)", [](PipelineConfig& c, auto& key, auto& v) {
                   c.mining.sobol_base_n = count(key, v);
                   const auto n = c.mining.sobol_base_n;
                   if (n < 2 || (n & (n - 1)) != 0) bad(key, "must be a power of two");
                 }});
    k.push_back({"sobol_bootstrap", "bootstrap resamples for Sobol intervals", [](PipelineConfig& c, auto& key, auto& v) {
                   c.mining.sobol_bootstrap = small_int(key, v);
                 }});
    k.push_back({"tree_max_depth", "decision tree depth limit", [](PipelineConfig& c, auto& key, auto& v) {
                   c.mining.tree.max_depth = small_int(key, v);
                   if (c.mining.tree.max_depth < 1) bad(key, "must be at least 1");
                 }});
    k.push_back({"tree_min_leaf", "minimum rows per leaf", [](PipelineConfig& c, auto& key, auto& v) {
                   c.mining.tree.min_leaf = count(key, v);
                   if (c.mining.tree.min_leaf < 1) bad(key, "must be at least 1");
                 }});
    k.push_back({"correlation_alpha", "significance level", [](PipelineConfig& c, auto& key, auto& v) {
                   c.mining.alpha = number(key, v);
                   if (!(c.mining.alpha > 0.0 && c.mining.alpha < 1.0)) bad(key, "must lie in (0, 1)");
                 }});
    k.push_back({"neighborhood_pareto", "Pareto members in the mining set", [](PipelineConfig& c, auto& key, auto& v) {
                   c.mining.neighborhood_pareto = count(key, v);
                 }});
    k.push_back({"neighborhood_history", "members of the last three generations in the mining set",
                 [](PipelineConfig& c, auto& key, auto& v) { c.mining.neighborhood_history = count(key, v); }});
    k.push_back({"derivative_designs", "dataset designs used for eta derivatives", [](PipelineConfig& c, auto& key, auto& v) {
                   c.mining.derivative_designs = count(key, v);
                 }});
    k.push_back({"derivative_rel_step", "central-difference step relative to each length",
                 [](PipelineConfig& c, auto& key, auto& v) {
                   c.mining.derivative_relative_step = number(key, v);
                   if (!(c.mining.derivative_relative_step > 0.0 && c.mining.derivative_relative_step < 0.5))
                     bad(key, "must lie in (0, 0.5)");
                 }});
    k.push_back({"derivative_raster_cells", "workspace raster resolution for derivatives",
                 [](PipelineConfig& c, auto& key, auto& v) {
                   c.mining.derivative_raster_cells = small_int(key, v);
                   if (c.mining.derivative_raster_cells < 8) bad(key, "must be at least 8");
                 }});
    k.push_back({"envelope_w_mm", "report size filter: width", [](PipelineConfig& c, auto& key, auto& v) {
                   c.envelope.width_mm = positive(key, number(key, v));
                 }});
    k.push_back({"envelope_l_mm", "report size filter: length", [](PipelineConfig& c, auto& key, auto& v) {
                   c.envelope.length_mm = positive(key, number(key, v));
                 }});
    k.push_back({"envelope_h_mm", "report size filter: height", [](PipelineConfig& c, auto& key, auto& v) {
                   c.envelope.height_mm = positive(key, number(key, v));
                 }});
    k.push_back({"seed", "base seed for every named seed", [](PipelineConfig& c, auto& key, auto& v) {
                   c.seeds.base = count(key, v);
                 }});
    k.push_back({"seed_sampling", "Latin hypercube seed", [](PipelineConfig& c, auto& key, auto& v) {
                   c.seeds.sampling = count(key, v);
                 }});
    k.push_back({"seed_split", "train/test split seed", [](PipelineConfig& c, auto& key, auto& v) {
                   c.seeds.split = count(key, v);
                 }});
    k.push_back({"seed_training", "network initialisation seed", [](PipelineConfig& c, auto& key, auto& v) {
                   c.seeds.training = count(key, v);
                 }});
    k.push_back({"seed_nsga", "optimizer seed", [](PipelineConfig& c, auto& key, auto& v) {
                   c.seeds.nsga = count(key, v);
                 }});
    k.push_back({"seed_mining", "Sobol shift, bootstrap and subset seed", [](PipelineConfig& c, auto& key, auto& v) {
                   c.seeds.mining = count(key, v);
                 }});
    k.push_back({"threads", "worker threads, 0 for all cores (results do not depend on it)",
                 [](PipelineConfig& c, auto& key, auto& v) { c.threads = unsigned(small_int(key, v)); }});
    return k;
  }();
  return keys;
}

// Illustrative task: six points on a 75 mm circle left of the base, reachable
// by most crank-rocker designs in the reference ranges.
std::vector<Eigen::Vector2d> default_task_points() {
  return {{-0.825, 0.25}, {-0.8625, 0.315}, {-0.9375, 0.315},
          {-0.975, 0.25}, {-0.9375, 0.185}, {-0.8625, 0.185}};
}

}  // namespace

void Seeds::derive() {
  auto pick = [&](const char* name, std::uint64_t& slot, std::uint64_t salt) {
    if (pinned.count(name)) return;
    slot = splitmix64(base ^ splitmix64(salt));
  };
  pick("seed_sampling", sampling, 1);
  pick("seed_split", split, 2);
  pick("seed_training", training, 3);
  pick("seed_nsga", nsga, 4);
  pick("seed_mining", mining, 5);
}

void PipelineConfig::set_base_seed(std::uint64_t seed) {
  seeds.base = seed;
  seeds.derive();
  sampler.seed = seeds.sampling;
}

TaskRegion PipelineConfig::task() const {
  if (task_region) return *task_region;
  return min_enclosing_circle(task_points);
}

PipelineConfig parse_config(const std::string& text) {
  PipelineConfig c;
  std::map<std::string, bool> seen;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const KeySpec* spec = nullptr;
    for (const auto& k : registry())
      if (key == k.key) spec = &k;
    if (!spec) throw ConfigError("unknown config key '" + key + "' (line " + std::to_string(lineno) + ")");
    if (seen[key]) throw ConfigError("config key '" + key + "' given twice");
    seen[key] = true;
    if (value.empty()) bad(key, "missing value");
    spec->set(c, key, value);
  }
  if (!seen["config_version"]) throw ConfigError("config key 'config_version' is required");

  const bool has_points = seen["task_points_m"];
  const bool has_disk = seen["task_center_m"] || seen["task_radius_m"];
  if (has_points && has_disk) bad("task_points_m", "give either task points or an explicit disk, not both");
  if (has_disk && !(seen["task_center_m"] && seen["task_radius_m"]))
    bad(seen["task_center_m"] ? "task_radius_m" : "task_center_m", "required together with the other disk key");
  if (!has_points && !has_disk) c.task_points = default_task_points();

  const auto& r = c.sampler.grid.range;
  if (!(r.theta1_min < r.theta1_max)) bad("theta1_max_deg", "must exceed theta1_min_deg");
  if (!(r.theta2_min < r.theta1_min)) bad("theta2_min_deg", "must lie below theta1_min_deg");
  if (!(c.sampler.scale_search.min_scale < c.sampler.scale_search.max_scale))
    bad("scale_max_m", "must exceed scale_min_m");
  try {
    c.mlp.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("mlp settings: ") + e.what());
  }
  try {
    c.nsga.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("nsga settings: ") + e.what());
  }
  c.sampler.bounds.validate();
  c.mass.validate();

  for (const char* name : {"seed_sampling", "seed_split", "seed_training", "seed_nsga", "seed_mining"})
    if (seen[name]) c.seeds.pinned.insert(name);
  c.set_base_seed(c.seeds.base);
  c.sampler.threads = c.threads;
  c.nsga.threads = c.threads;
  return c;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::vector<std::pair<std::string, std::string>> config_keys() {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& k : registry()) out.emplace_back(k.key, k.help);
  return out;
}

std::string PipelineConfig::to_json() const {
  nlohmann::ordered_json j;
  j["config_version"] = version;
  const TaskRegion t = task();
  if (!task_points.empty()) {
    auto pts = nlohmann::ordered_json::array();
    for (const auto& p : task_points) pts.push_back({p.x(), p.y()});
    j["task_points_m"] = pts;
  }
  j["task_center_m"] = {t.center.x(), t.center.y()};
  j["task_radius_m"] = t.radius;
  j["n_samples"] = sampler.n_samples;
  auto bounds = nlohmann::ordered_json::object();
  for (int i = 0; i < 6; ++i) bounds[kLinkNames[i]] = {sampler.bounds.lower(i), sampler.bounds.upper(i)};
  j["bounds_ratio"] = bounds;
  j["grid_theta1_steps"] = sampler.grid.theta1_steps;
  j["grid_theta2_steps"] = sampler.grid.theta2_steps;
  j["theta1_min_deg"] = rad2deg(sampler.grid.range.theta1_min);
  j["theta1_max_deg"] = rad2deg(sampler.grid.range.theta1_max);
  j["theta2_min_deg"] = rad2deg(sampler.grid.range.theta2_min);
  j["raster_cells"] = sampler.raster.cells_per_axis;
  j["scale_min_m"] = sampler.scale_search.min_scale;
  j["scale_max_m"] = sampler.scale_search.max_scale;
  j["scale_rel_tol"] = sampler.scale_search.rel_tol;
  j["safety_factor"] = sampler.safety;
  j["payload_kg"] = mass.payload;
  j["link_density_kg_m3"] = mass.density;
  j["link_section_area_m2"] = mass.section_area;
  j["gravity_m_s2"] = mass.gravity;
  j["train_ratio"] = train_ratio;
  j["mlp_hidden_layers"] = mlp.hidden_layers;
  j["mlp_hidden_nodes"] = mlp.hidden_nodes;
  j["mlp_learning_rate"] = mlp.learning_rate;
  j["mlp_max_epochs"] = mlp.max_epochs;
  j["mlp_patience_epochs"] = mlp.patience;
  j["mlp_validation_fraction"] = mlp.validation_fraction;
  j["nsga_pop_size"] = nsga.pop_size;
  j["nsga_generations"] = nsga.generations;
  j["nsga_crossover_prob"] = nsga.crossover_prob;
  j["nsga_crossover_eta"] = nsga.crossover_eta;
  j["nsga_mutation_eta"] = nsga.mutation_eta;
  j["nsga_mutation_prob"] = nsga.mutation_prob;
  j["constraint_z"] = constraint_z;
  j["sobol_base_n"] = mining.sobol_base_n;
  j["sobol_bootstrap"] = mining.sobol_bootstrap;
  j["tree_max_depth"] = mining.tree.max_depth;
  j["tree_min_leaf"] = mining.tree.min_leaf;
  j["correlation_alpha"] = mining.alpha;
  j["neighborhood_pareto"] = mining.neighborhood_pareto;
  j["neighborhood_history"] = mining.neighborhood_history;
  j["derivative_designs"] = mining.derivative_designs;
  j["derivative_rel_step"] = mining.derivative_relative_step;
  j["derivative_raster_cells"] = mining.derivative_raster_cells;
  j["envelope_mm"] = {envelope.width_mm, envelope.length_mm, envelope.height_mm};
  j["seeds"] = {{"base", seeds.base},         {"sampling", seeds.sampling}, {"split", seeds.split},
                {"training", seeds.training}, {"nsga", seeds.nsga},         {"mining", seeds.mining}};
  return j.dump(2);
}

}  // namespace qsm
