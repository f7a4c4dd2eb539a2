#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "qsm/pipeline.hpp"

using namespace qsm;
namespace fs = std::filesystem;

namespace {

// Small sizes; the task is a 0.3 m disk left of the base.
const char* kSmoke = R"(config_version = 1
task_center_m = -0.8, 0.2
task_radius_m = 0.3
n_samples = 800
grid_theta1_steps = 24
grid_theta2_steps = 24
raster_cells = 96
mlp_hidden_nodes = 16
mlp_max_epochs = 400
mlp_patience_epochs = 50
nsga_pop_size = 20
nsga_generations = 6
sobol_base_n = 64
sobol_bootstrap = 20
neighborhood_pareto = 10
neighborhood_history = 20
derivative_designs = 5
derivative_raster_cells = 128
seed = 7
)";

const char* kStages[] = {"generate", "label", "train", "optimize", "mine", "report"};

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("qsm_pipeline_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path write_file(const fs::path& path, const std::string& text) {
  std::ofstream(path, std::ios::binary) << text;
  return path;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

struct Run {
  int code;
  std::string err;
};

Run cli(const std::string& args, const fs::path& err_file) {
  const std::string cmd = std::string(QSM_CLI_PATH) + " " + args + " > /dev/null 2> " + err_file.string();
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, read_file(err_file)};
}

void run_all(const fs::path& config, const fs::path& out, const fs::path& scratch_dir) {
  for (const char* s : kStages) {
    const auto r = cli(std::string(s) + " --config " + config.string() + " --out " + out.string(),
                       scratch_dir / "err.txt");
    INFO("stage ", s, ": ", r.err);
    REQUIRE(r.code == 0);
  }
}

/// Every recorded file must have the same bytes in both runs.
void check_identical(const fs::path& a, const fs::path& b) {
  const auto ma = RunManifest::load_or_empty(a);
  const auto mb = RunManifest::load_or_empty(b);
  REQUIRE(ma.stages().size() == 6);
  REQUIRE(mb.stages().size() == 6);
  for (const auto& [stage, st] : ma.stages()) {
    const auto& other = mb.stage(stage);
    for (const auto& [file, hash] : st.files) {
      INFO(file);
      CHECK(other.files.at(file) == hash);
    }
  }
}

}  // namespace

TEST_CASE("config parsing") {
  SUBCASE("defaults") {
    const auto c = parse_config("config_version = 1\n");
    CHECK(c.sampler.n_samples == 5000);
    CHECK(c.mass.payload == 5.0);
    CHECK(c.nsga.pop_size == 100);
    CHECK(c.constraint_z == 1.95);
    CHECK(c.task().radius > 0.0);
  }
  SUBCASE("values and comments") {
    const auto c = parse_config("# run\nconfig_version = 1\npayload_kg = 2.5  # lighter\nn_samples = 100\n"
                                "task_points_m = 0,0; 2,0\n");
    CHECK(c.mass.payload == 2.5);
    CHECK(c.sampler.n_samples == 100);
    CHECK(c.task().center.isApprox(Eigen::Vector2d(1, 0)));
    CHECK(c.task().radius == doctest::Approx(1.0));
  }
  SUBCASE("errors name the key") {
    const auto message = [](const std::string& text) {
      try {
        parse_config(text);
      } catch (const ConfigError& e) {
        return std::string(e.what());
      }
      return std::string();
    };
    CHECK(message("config_version = 1\npayload_lb = 3\n").find("payload_lb") != std::string::npos);
    CHECK(message("config_version = 1\nn_samples = 5\nn_samples = 6\n").find("n_samples") != std::string::npos);
    CHECK(message("config_version = 1\nn_samples = many\n").find("n_samples") != std::string::npos);
    CHECK(message("config_version = 1\ntrain_ratio = 1.5\n").find("train_ratio") != std::string::npos);
    CHECK(message("n_samples = 5\n").find("config_version") != std::string::npos);
    CHECK(message("config_version = 1\ntask_center_m = 0,0\ntask_radius_m = 1\ntask_points_m = 1,1\n") != "");
    CHECK(message("config_version = 1\njust words\n") != "");
  }
  SUBCASE("named seeds") {
    auto c = parse_config("config_version = 1\nseed = 5\nseed_training = 77\n");
    CHECK(c.seeds.training == 77);
    const auto sampling = c.seeds.sampling;
    CHECK(sampling != c.seeds.split);
    c.set_base_seed(6);
    CHECK(c.seeds.training == 77);
    CHECK(c.seeds.sampling != sampling);
    c.set_base_seed(5);
    CHECK(c.seeds.sampling == sampling);
  }
  SUBCASE("canonical json is stable") {
    const auto a = parse_config("config_version = 1\nn_samples = 10\npayload_kg = 3\n");
    const auto b = parse_config("config_version = 1\npayload_kg = 3\nn_samples = 10\n");
    CHECK(a.to_json() == b.to_json());
    CHECK(nlohmann::json::parse(a.to_json())["payload_kg"] == 3.0);
  }
  SUBCASE("shipped config parses") {
    CHECK_NOTHROW(load_config(QSM_DEFAULT_CONFIG));
  }
}

TEST_CASE("manifest") {
  const auto dir = scratch("manifest");
  write_file(dir / "a.txt", "abc");
  write_file(dir / "b.txt", "def");
  auto m = RunManifest::load_or_empty(dir);
  m.record("generate", {"a.txt"}, 0.5);
  m.record("label", {"b.txt"}, 0.5);
  m.save();

  auto back = RunManifest::load_or_empty(dir);
  CHECK(back.stage("generate").files.at("a.txt") ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(back.input("label", "b.txt") == dir / "b.txt");

  back.record("generate", {"a.txt"}, 0.1);
  CHECK_FALSE(back.has_stage("label"));

  write_file(dir / "a.txt", "changed");
  CHECK_THROWS_AS(back.input("generate", "a.txt"), DataError);
  try {
    back.stage("train");
    FAIL("expected a missing-stage error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("'train'") != std::string::npos);
  }
}

TEST_CASE("command line") {
  const auto dir = scratch("cli");
  const auto err = dir / "err.txt";

  SUBCASE("unknown key exits 2 and names it") {
    const auto cfg = write_file(dir / "bad.conf", "config_version = 1\nmystery_knob = 3\n");
    const auto r = cli("generate --config " + cfg.string() + " --out " + (dir / "o").string(), err);
    CHECK(r.code == 2);
    CHECK(r.err.find("mystery_knob") != std::string::npos);
  }
  SUBCASE("missing config file exits 2") {
    CHECK(cli("generate --config " + (dir / "nope.conf").string(), err).code == 2);
  }
  SUBCASE("missing upstream stage exits 3 and names it") {
    const auto cfg = write_file(dir / "smoke.conf", kSmoke);
    const auto r = cli("train --config " + cfg.string() + " --out " + (dir / "empty").string(), err);
    CHECK(r.code == 3);
    CHECK(r.err.find("'label'") != std::string::npos);
  }
  SUBCASE("uncoverable task exits 4") {
    const auto cfg = write_file(dir / "far.conf", std::string(kSmoke) + "task_radius_m = 40\n");
    // Duplicate key: config error first.
    CHECK(cli("generate --config " + cfg.string() + " --out " + (dir / "f").string(), err).code == 2);
    std::string text = kSmoke;
    text.replace(text.find("task_radius_m = 0.3"), 19, "task_radius_m = 40");
    write_file(cfg, text);
    CHECK(cli("generate --config " + cfg.string() + " --out " + (dir / "f").string(), err).code == 4);
  }
}

TEST_CASE("smoke pipeline") {
  const auto dir = scratch("smoke");
  const auto cfg = write_file(dir / "smoke.conf", kSmoke);
  run_all(cfg, dir / "a", dir);

  const auto m = RunManifest::load_or_empty(dir / "a");
  for (const char* s : kStages) CHECK(m.has_stage(s));
  for (const char* f : {"dataset.csv", "labeled.csv", "model.json", "pareto.csv", "history.csv", "sobol.json",
                        "tree_tau1.dot", "tree_eta.json", "correlations.csv", "derivatives.json", "report.md"})
    CHECK(fs::exists(dir / "a" / f));

  const auto rows = read_dataset_csv(dir / "a" / "labeled.csv");
  CHECK(rows.size() >= 10);
  for (const auto& r : rows) CHECK(r.has_torques());

  const auto sobol = nlohmann::json::parse(read_file(dir / "a" / "sobol.json"));
  CHECK(sobol["evaluations"] == 64 * 14);

  const auto tree = DecisionTree::from_json(read_file(dir / "a" / "tree_tau1.json"));
  CHECK(DecisionTree::from_json(tree.to_json()) == tree);

  const auto report = read_file(dir / "a" / "report.md");
  CHECK(report.find("## Surrogate") != std::string::npos);
  CHECK(report.find("## Design rules") != std::string::npos);

  SUBCASE("single-threaded rerun is byte-identical") {
    const auto serial = write_file(dir / "serial.conf", std::string(kSmoke) + "threads = 1\n");
    // Files embedding the config snapshot differ by the threads key; compare the rest.
    run_all(serial, dir / "b", dir);
    for (const char* f : {"dataset.csv", "labeled.csv", "model.json", "metrics.csv", "pareto.csv", "history.csv",
                          "sobol.csv", "tree_eta.txt", "tree_tau2.dot", "correlations.csv", "derivatives.csv",
                          "neighborhood.csv"}) {
      INFO(f);
      CHECK(read_file(dir / "a" / f) == read_file(dir / "b" / f));
    }
  }
  SUBCASE("same config twice is byte-identical") {
    run_all(cfg, dir / "c", dir);
    check_identical(dir / "a", dir / "c");
  }
  SUBCASE("report is rebuilt deterministically") {
    const auto config = load_config(cfg);
    const auto manifest = RunManifest::load_or_empty(dir / "a");
    CHECK(build_report(manifest, config) == report);
  }
  SUBCASE("seed override changes the sample") {
    const auto r = cli("generate --config " + cfg.string() + " --out " + (dir / "d").string() + " --seed 8",
                       dir / "err.txt");
    REQUIRE(r.code == 0);
    CHECK(read_file(dir / "d" / "dataset.csv") != read_file(dir / "a" / "dataset.csv"));
  }
  SUBCASE("tampered input is refused") {
    write_file(dir / "a" / "labeled.csv", read_file(dir / "a" / "labeled.csv") + "\n");
    const auto r = cli("train --config " + cfg.string() + " --out " + (dir / "a").string(), dir / "err.txt");
    CHECK(r.code == 3);
    CHECK(r.err.find("labeled.csv") != std::string::npos);
  }
}

TEST_CASE("truth evaluation") {
  SamplerConfig s;
  s.grid = PoseGrid{24, 24, {}};
  s.raster = RasterOptions{96};
  const TaskRegion task{{-0.8, 0.2}, 0.3};
  const auto bad = evaluate_truth(Linkage<double>{1.0, 0.2, 0.3, 0.3, 1.0, 0.3}, task, s, MassModel{});
  CHECK_FALSE(bad.feasible);
  const auto good = evaluate_truth(UnitLinkage{1.0, 0.35, 1.05, 0.45, 1.2, 0.45}.scaled(0.8), task, s, MassModel{});
  CHECK(good.feasible);
  CHECK(good.tau1 > 0.0);
  CHECK(good.eta > 0.0);
}
