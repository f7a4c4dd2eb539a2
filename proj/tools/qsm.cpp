// Command-line driver for the generate -> label -> train -> optimize -> mine
// -> report pipeline. Exit codes: 0 ok, 2 config, 3 data, 4 numerical.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "qsm/pipeline.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;

int exit_code(const qsm::Error& e) {
  switch (e.category()) {
    case qsm::Error::Category::config: return kExitConfig;
    case qsm::Error::Category::data: return kExitData;
    case qsm::Error::Category::numerical: return kExitNumerical;
  }
  return 1;
}

struct Options {
  std::string config;
  std::string out = "run";
  std::optional<std::uint64_t> seed;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Generative design of quasi-serial manipulators"};
  app.require_subcommand(1);
  std::string keys_footer = "\nConfig keys:\n";
  for (const auto& [key, help] : qsm::config_keys()) keys_footer += "  " + key + "  " + help + "\n";
  app.footer(keys_footer);

  Options opt;
  using Stage = std::function<void(const qsm::StageContext&)>;
  const std::pair<const char*, std::pair<const char*, Stage>> stages[] = {
      {"generate", {"sample designs, filter, fit the task, write dataset.csv", qsm::cmd_generate}},
      {"label", {"add required joint torques, write labeled.csv", qsm::cmd_label}},
      {"train", {"fit the MLP surrogate, write model.json and metrics", qsm::cmd_train}},
      {"optimize", {"run constrained NSGA-II on the surrogate, write the archive", qsm::cmd_optimize}},
      {"mine", {"Sobol, trees, correlations and derivative statistics", qsm::cmd_mine}},
      {"report", {"write report.md from the manifest", qsm::cmd_report}},
  };
  Stage chosen;
  for (const auto& [name, info] : stages) {
    auto* sub = app.add_subcommand(name, info.first);
    sub->add_option("--config", opt.config, "pipeline config file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", opt.out, "output directory (holds manifest.json)")->capture_default_str();
    sub->add_option("--seed", opt.seed, "override the base seed");
    const Stage fn = info.second;
    sub->callback([&chosen, fn] { chosen = fn; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    qsm::StageContext ctx{qsm::load_config(opt.config), opt.out};
    if (opt.seed) ctx.config.set_base_seed(*opt.seed);
    chosen(ctx);
  } catch (const qsm::Error& e) {
    std::cerr << "qsm: " << e.what() << '\n';
    return exit_code(e);
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "qsm: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "qsm: unexpected failure: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
