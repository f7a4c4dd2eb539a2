#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "qsm/csv.hpp"
#include "qsm/pipeline.hpp"

namespace qsm {

namespace {

using json = nlohmann::json;

json load(const RunManifest& m, const std::string& stage, const std::string& file) {
  std::ifstream in(m.input(stage, file), std::ios::binary);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw DataError("malformed " + file + ": " + e.what());
  }
}

std::string fixed(double v, int digits) {
  if (!std::isfinite(v)) return "n/a";
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

std::string sci(double v) {
  if (!std::isfinite(v)) return "n/a";
  std::ostringstream os;
  os << std::scientific << std::setprecision(2) << v;
  return os.str();
}

struct Candidate {
  std::size_t member;
  Eigen::Matrix<double, 6, 1> mm;
  double eta, tau1, tau2;
  double eta_true, tau1_true, tau2_true;
  bool covers;
};

/// Links must fit the envelope width; the upper-arm plate (ee_x by ee_y) must
/// fit the width-by-length footprint in either orientation.
bool fits(const Eigen::Matrix<double, 6, 1>& mm, const Envelope& e) {
  if (mm.maxCoeff() > e.width_mm) return false;
  const double a = std::max(mm(4), mm(5)), b = std::min(mm(4), mm(5));
  return a <= std::max(e.width_mm, e.length_mm) && b <= std::min(e.width_mm, e.length_mm);
}

}  // namespace

std::string build_report(const RunManifest& manifest, const PipelineConfig& config) {
  for (const char* s : {"generate", "label", "train", "optimize", "mine"}) manifest.stage(s);
  const json gen = load(manifest, "generate", "generate.json");
  const json lab = load(manifest, "label", "label.json");
  const json met = load(manifest, "train", "metrics.json");
  const json opt = load(manifest, "optimize", "optimize.json");
  const json sob = load(manifest, "mine", "sobol.json");
  const json trees = load(manifest, "mine", "trees.json");
  const json rules = load(manifest, "mine", "rules.json");
  const json der = load(manifest, "mine", "derivatives.json");
  const CsvTable pareto = read_csv(manifest.input("optimize", "pareto.csv"));

  const char* targets[3] = {"eta", "tau1", "tau2"};
  std::ostringstream md;
  md << "# Quasi-serial manipulator design run\n\n";

  md << "## Task and sampling\n\n";
  md << "- Task disk: center (" << fixed(gen["task_center_m"][0].get<double>(), 4) << ", "
     << fixed(gen["task_center_m"][1].get<double>(), 4) << ") m, radius "
     << fixed(gen["task_radius_m"].get<double>(), 4) << " m\n";
  md << "- Latin hypercube samples: " << gen["n_samples"].get<std::size_t>() << " (seed "
     << config.seeds.sampling << ")\n";
  md << "- Crank-rocker and closed over the operating range: " << gen["n_feasible"].get<std::size_t>() << " ("
     << fixed(100.0 * gen["feasible_fraction"].get<double>(), 2) << "%)\n";
  md << "- Able to cover the task: " << gen["n_covering"].get<std::size_t>() << " (dropped "
     << gen["dropped_uncoverable"].get<std::size_t>() << ")\n";
  md << "- Torque-labeled at " << fixed(lab["payload_kg"].get<double>(), 2)
     << " kg payload: " << lab["n_labeled"].get<std::size_t>() << " (dropped "
     << lab["dropped_torque"].get<std::size_t>() << ")\n\n";

  md << "## Surrogate\n\n";
  md << "Rows: " << met["n_train"].get<std::size_t>() << " train / " << met["n_test"].get<std::size_t>()
     << " test; stopped after " << met["epochs_run"].get<int>() << " epochs (best "
     << met["best_epoch"].get<int>() << "). Metrics on standardized targets.\n\n";
  md << "| split | R2 | MSE | RMSE | R2 eta | R2 tau1 | R2 tau2 |\n|---|---|---|---|---|---|---|\n";
  for (const char* s : {"train", "test"}) {
    const auto& m = met[s];
    md << "| " << s << " | " << fixed(m["r2"].get<double>(), 5) << " | " << fixed(m["mse"].get<double>(), 5)
       << " | " << fixed(m["rmse"].get<double>(), 5);
    for (const char* t : targets) md << " | " << fixed(m["per_target"][t]["r2"].get<double>(), 5);
    md << " |\n";
  }
  md << "\n";

  md << "## Optimization\n\n";
  md << "- Pareto designs: " << opt["pareto_size"].get<std::size_t>() << " after "
     << opt["generations"].get<std::size_t>() << " generations (seed " << opt["seed"].get<std::uint64_t>()
     << ")\n";
  md << "- Exact re-evaluation: " << opt["truth_feasible"].get<std::size_t>() << " close over the range, "
     << opt["truth_covers_task"].get<std::size_t>() << " cover the task\n";
  md << "- Median relative surrogate gap: eta " << fixed(100.0 * opt["median_relative_gap"]["eta"].get<double>(), 2)
     << "%, tau1 " << fixed(100.0 * opt["median_relative_gap"]["tau1"].get<double>(), 2) << "%, tau2 "
     << fixed(100.0 * opt["median_relative_gap"]["tau2"].get<double>(), 2) << "%\n\n";

  // Designs that fit the build envelope, lowest predicted tau1 first.
  std::vector<Candidate> cands;
  const char* lcols[6] = {"l1_m", "l2_m", "l3_m", "l4_m", "eex_m", "eey_m"};
  for (std::size_t r = 0; r < pareto.rows.size(); ++r) {
    Candidate c;
    c.member = r;
    for (int i = 0; i < 6; ++i) c.mm(i) = 1000.0 * pareto.number(r, pareto.column(lcols[i]));
    c.eta = pareto.number(r, pareto.column("eta_pred"));
    c.tau1 = pareto.number(r, pareto.column("tau1_pred_nm"));
    c.tau2 = pareto.number(r, pareto.column("tau2_pred_nm"));
    c.eta_true = pareto.number(r, pareto.column("eta_true"));
    c.tau1_true = pareto.number(r, pareto.column("tau1_true_nm"));
    c.tau2_true = pareto.number(r, pareto.column("tau2_true_nm"));
    c.covers = pareto.number(r, pareto.column("covers_task")) > 0.5;
    if (fits(c.mm, config.envelope)) cands.push_back(c);
  }
  std::stable_sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) { return a.tau1 < b.tau1; });
  md << "### Designs within " << fixed(config.envelope.width_mm, 0) << " x " << fixed(config.envelope.length_mm, 0)
     << " x " << fixed(config.envelope.height_mm, 0) << " mm\n\n";
  md << cands.size() << " of " << pareto.rows.size() << " Pareto designs fit.";
  if (cands.empty()) {
    md << "\n\n";
  } else {
    md << " Up to ten with the lowest predicted tau1 (lengths in mm, torques in N m; predicted / exact):\n\n";
    md << "| # | l1 | l2 | l3 | l4 | ee_x | ee_y | eta | tau1 | tau2 | covers |\n"
          "|---|---|---|---|---|---|---|---|---|---|---|\n";
    for (std::size_t k = 0; k < std::min<std::size_t>(10, cands.size()); ++k) {
      const auto& c = cands[k];
      md << "| " << c.member;
      for (int i = 0; i < 6; ++i) md << " | " << fixed(c.mm(i), 1);
      md << " | " << fixed(c.eta, 4) << " / " << fixed(c.eta_true, 4) << " | " << fixed(c.tau1, 2) << " / "
         << fixed(c.tau1_true, 2) << " | " << fixed(c.tau2, 2) << " / " << fixed(c.tau2_true, 2) << " | "
         << (c.covers ? "yes" : "no") << " |\n";
    }
    md << "\n";
  }

  md << "## Design rules\n\n";
  md << "### Total Sobol indices (" << sob["evaluations"].get<std::size_t>() << " surrogate evaluations)\n\n";
  md << "| variable | eta | tau1 | tau2 |\n|---|---|---|---|\n";
  const auto vars = sob["variables"].get<std::vector<std::string>>();
  for (std::size_t i = 0; i < vars.size(); ++i) {
    md << "| " << vars[i];
    for (const char* t : targets) md << " | " << fixed(sob["objectives"][t]["st"][i].get<double>(), 3);
    md << " |\n";
  }
  md << "\n### Decision trees on the Pareto neighborhood\n\n";
  for (const char* t : targets) {
    const auto& tr = trees[t];
    md << "- " << t << ": root split " << tr["root_feature"].get<std::string>() << " <= "
       << fixed(tr["root_threshold_mm"].get<double>(), 3) << " mm; lowest leaf "
       << sci(tr["lowest_leaf"]["value"].get<double>()) << " when " << tr["lowest_leaf"]["rule"].get<std::string>()
       << "; highest leaf " << sci(tr["highest_leaf"]["value"].get<double>()) << " when "
       << tr["highest_leaf"]["rule"].get<std::string>() << "\n";
  }
  md << "\neta is minimized by the optimizer; the highest-leaf rule is listed for readers who treat a larger "
        "eta as preferable.\n\n";

  md << "### Correlations and derivatives\n\n";
  md << "- Pearson(tau1', tau2') on the neighborhood: " << fixed(rules["pearson_tau1_tau2"].get<double>(), 3) << "\n";
  md << "- Pearson(ee_x, eta'): " << fixed(rules["pearson_eex_eta"]["r"].get<double>(), 3) << " (p = "
     << sci(rules["pearson_eex_eta"]["p"].get<double>()) << ")\n";
  md << "- Pearson(l1, eta'): " << fixed(rules["pearson_l1_eta"]["r"].get<double>(), 3) << " (p = "
     << sci(rules["pearson_l1_eta"]["p"].get<double>()) << ")\n";
  md << "- Largest total Sobol index:";
  for (const char* t : targets)
    md << " " << t << " -> " << rules["largest_total_sobol"][t]["variable"].get<std::string>();
  md << "\n- Mean |d eta / d x| ranking (" << der["designs"].get<std::size_t>() << " designs, "
     << der["skipped"].get<std::size_t>() << " skipped):";
  for (const auto& v : der["ranking_by_mean_abs"]) md << " " << v.get<std::string>();
  md << "\n";
  return md.str();
}

}  // namespace qsm
