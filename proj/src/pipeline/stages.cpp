#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "qsm/parallel.hpp"
#include "qsm/pipeline.hpp"
#include "qsm/random.hpp"

namespace qsm {

using ojson = nlohmann::ordered_json;

namespace {

constexpr const char* kTargets[3] = {"eta", "tau1", "tau2"};

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("write failed: " + path.string());
}

void write_json(const std::filesystem::path& path, const ojson& j) { write_text(path, j.dump(2) + "\n"); }

RunManifest open_manifest(const StageContext& ctx) {
  std::filesystem::create_directories(ctx.out_dir);
  auto m = RunManifest::load_or_empty(ctx.out_dir);
  m.set_config(ctx.config.to_json());
  return m;
}

ojson vec_json(const Eigen::VectorXd& v) {
  auto a = ojson::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

ojson metrics_json(const RegressionMetrics& m) {
  ojson j;
  j["r2"] = m.r2_all;
  j["mse"] = m.mse_all;
  j["rmse"] = m.rmse_all;
  for (int k = 0; k < 3; ++k)
    j["per_target"][kTargets[k]] = {{"r2", m.r2(k)}, {"mse", m.mse(k)}, {"rmse", m.rmse(k)}};
  return j;
}

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::vector<std::string> length_names(const char* suffix) {
  std::vector<std::string> out;
  for (const char* n : kLinkNames) out.push_back(std::string(n) + suffix);
  return out;
}

}  // namespace

TruthEvaluation evaluate_truth(const Linkage<double>& lengths, const TaskRegion& task,
                               const SamplerConfig& sampler, const MassModel& mass) {
  TruthEvaluation t;
  if (!(lengths.l1 > 0.0)) return t;
  const UnitLinkage unit = lengths.scaled(1.0 / lengths.l1);
  if (!is_crank_rocker(unit) || !is_feasible_over_range(unit, sampler.grid)) return t;
  t.feasible = true;
  try {
    const Workspace ws = compute_workspace(unit, sampler.grid, sampler.raster);
    t.covers = covers(ws, task, lengths.l1, sampler.scale_search.boundary_points);
    t.eta = kinematic_performance(task.area(), ws.area() * lengths.l1 * lengths.l1);
    const TorqueLabel tau = required_torques(lengths, mass, sampler.grid);
    t.tau1 = tau.tau1;
    t.tau2 = tau.tau2;
  } catch (const NumericalError&) {
    t.feasible = false;
  }
  return t;
}

void cmd_generate(const StageContext& ctx) {
  const Stopwatch clock;
  const auto& cfg = ctx.config;
  auto manifest = open_manifest(ctx);
  const TaskRegion task = cfg.task();

  const auto designs = lhs_sample(cfg.sampler);
  const auto feasible = filter_feasible(designs, cfg.sampler.grid, cfg.threads);
  if (feasible.empty()) throw NumericalError("no sampled design satisfies the crank-rocker and closure filter");
  DesignDataset ds = label_kinematics(feasible, task, cfg.sampler);
  if (double(ds.rows.size()) < 0.01 * double(feasible.size()))
    throw NumericalError("task region is uncoverable: " + std::to_string(ds.provenance.dropped_uncoverable) +
                         " of " + std::to_string(feasible.size()) + " feasible designs cannot reach it");

  write_dataset_csv(ctx.out_dir / "dataset.csv", ds.rows, false);
  ojson j;
  j["seed"] = cfg.seeds.sampling;
  j["n_samples"] = designs.size();
  j["n_feasible"] = feasible.size();
  j["feasible_fraction"] = double(feasible.size()) / double(designs.size());
  j["n_covering"] = ds.rows.size();
  j["dropped_uncoverable"] = ds.provenance.dropped_uncoverable;
  j["task_center_m"] = {task.center.x(), task.center.y()};
  j["task_radius_m"] = task.radius;
  j["task_area_m2"] = task.area();
  write_json(ctx.out_dir / "generate.json", j);

  manifest.record("generate", {"dataset.csv", "generate.json"}, clock.seconds());
  manifest.save();
}

void cmd_label(const StageContext& ctx) {
  const Stopwatch clock;
  const auto& cfg = ctx.config;
  auto manifest = open_manifest(ctx);
  DesignDataset ds;
  ds.rows = read_dataset_csv(manifest.input("generate", "dataset.csv"));
  if (ds.rows.empty()) throw EmptyInput("dataset.csv has no rows");
  const std::size_t n_in = ds.rows.size();
  ds = label_dynamics(std::move(ds), cfg.mass, cfg.sampler.grid, cfg.threads);

  write_dataset_csv(ctx.out_dir / "labeled.csv", ds.rows, true);
  ojson j;
  j["n_input"] = n_in;
  j["n_labeled"] = ds.rows.size();
  j["dropped_torque"] = ds.provenance.dropped_torque;
  j["payload_kg"] = cfg.mass.payload;
  write_json(ctx.out_dir / "label.json", j);

  manifest.record("label", {"labeled.csv", "label.json"}, clock.seconds());
  manifest.save();
}

void cmd_train(const StageContext& ctx) {
  const Stopwatch clock;
  const auto& cfg = ctx.config;
  auto manifest = open_manifest(ctx);
  const auto rows = read_dataset_csv(manifest.input("label", "labeled.csv"));
  for (const auto& r : rows)
    if (!r.has_torques()) throw DataError("labeled.csv has rows without torque labels");

  const RegressionData data = to_regression_data(rows);
  const SplitIndices sp = split(std::size_t(data.rows()), cfg.train_ratio, cfg.seeds.split);
  const RegressionData train = data.subset(sp.train);
  const RegressionData test = data.subset(sp.test);
  const SurrogateModel model = fit(train, cfg.mlp, cfg.seeds.training);
  save_model(ctx.out_dir / "model.json", model);

  const RegressionMetrics m_train = evaluate(model, train);
  const RegressionMetrics m_test = evaluate(model, test);
  write_text(ctx.out_dir / "metrics.csv", "split,r2,mse,rmse\ntrain," + format_double(m_train.r2_all) + "," +
                                              format_double(m_train.mse_all) + "," +
                                              format_double(m_train.rmse_all) + "\ntest," +
                                              format_double(m_test.r2_all) + "," + format_double(m_test.mse_all) +
                                              "," + format_double(m_test.rmse_all) + "\n");
  ojson j;
  j["n_train"] = sp.train.size();
  j["n_test"] = sp.test.size();
  j["split_seed"] = cfg.seeds.split;
  j["training_seed"] = cfg.seeds.training;
  j["epochs_run"] = model.info.epochs_run;
  j["best_epoch"] = model.info.best_epoch;
  j["train"] = metrics_json(m_train);
  j["test"] = metrics_json(m_test);
  auto& test_idx = j["test_rows"] = ojson::array();
  for (std::size_t i : sp.test) test_idx.push_back(i);
  write_json(ctx.out_dir / "metrics.json", j);

  manifest.record("train", {"model.json", "metrics.csv", "metrics.json"}, clock.seconds());
  manifest.save();
}

void cmd_optimize(const StageContext& ctx) {
  const Stopwatch clock;
  const auto& cfg = ctx.config;
  auto manifest = open_manifest(ctx);
  SurrogateModel model = load_model(manifest.input("train", "model.json"));
  const auto rows = read_dataset_csv(manifest.input("label", "labeled.csv"));
  const MooProblem mp = MooProblem::from_dataset(std::move(model), rows, cfg.constraint_z);
  const ParetoArchive archive = nsga2(mp.problem(), cfg.nsga, cfg.seeds.nsga);

  // Surrogate gap: every Pareto design through the exact pipeline.
  const TaskRegion task = cfg.task();
  std::vector<TruthEvaluation> truth(archive.pareto.size());
  parallel_for(
      truth.size(),
      [&](std::size_t i) {
        truth[i] = evaluate_truth(Linkage<double>::from_vector(archive.pareto[i].x), task, cfg.sampler, cfg.mass);
      },
      cfg.threads);
  ExtraColumns extra = {{"truth_feasible", {}}, {"covers_task", {}}, {"eta_true", {}},
                        {"tau1_true_nm", {}},   {"tau2_true_nm", {}}};
  std::vector<double> gaps[3];
  std::size_t n_feasible = 0, n_covers = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const auto& t = truth[i];
    extra[0].second.push_back(t.feasible ? 1.0 : 0.0);
    extra[1].second.push_back(t.covers ? 1.0 : 0.0);
    extra[2].second.push_back(t.eta);
    extra[3].second.push_back(t.tau1);
    extra[4].second.push_back(t.tau2);
    n_feasible += t.feasible;
    n_covers += t.covers;
    const double tv[3] = {t.eta, t.tau1, t.tau2};
    for (int k = 0; k < 3; ++k)
      if (std::isfinite(tv[k]) && tv[k] != 0.0)
        gaps[k].push_back(std::abs(archive.pareto[i].objectives(k) - tv[k]) / std::abs(tv[k]));
  }
  write_archive(ctx.out_dir, archive, extra);

  ojson j;
  j["seed"] = cfg.seeds.nsga;
  j["pareto_size"] = archive.pareto.size();
  j["generations"] = archive.history.size() - 1;
  j["bounds_m"] = {{"lower", vec_json(mp.lower)}, {"upper", vec_json(mp.upper)}};
  j["constraint_stats"] = {{"mean", vec_json(mp.stats.mean)}, {"std", vec_json(mp.stats.std)}, {"z", mp.stats.z}};
  j["truth_feasible"] = n_feasible;
  j["truth_covers_task"] = n_covers;
  for (int k = 0; k < 3; ++k) {
    j["median_relative_gap"][kTargets[k]] = median(gaps[k]);
  }
  j["config"] = ojson::parse(cfg.to_json());
  write_json(ctx.out_dir / "optimize.json", j);

  manifest.record("optimize", {"pareto.csv", "history.csv", "archive.json", "optimize.json"}, clock.seconds());
  manifest.save();
}

void cmd_mine(const StageContext& ctx) {
  const Stopwatch clock;
  const auto& cfg = ctx.config;
  const auto& ms = cfg.mining;
  auto manifest = open_manifest(ctx);
  SurrogateModel model = load_model(manifest.input("train", "model.json"));
  const auto rows = read_dataset_csv(manifest.input("label", "labeled.csv"));
  manifest.input("optimize", "pareto.csv");
  manifest.input("optimize", "history.csv");
  manifest.input("optimize", "archive.json");
  const ParetoArchive archive = read_archive(ctx.out_dir);
  const MooProblem mp = MooProblem::from_dataset(model, rows, cfg.constraint_z);
  const auto names_m = length_names("_m");
  std::vector<std::string> files;

  // Sobol on the surrogate over the optimization box.
  const SobolReport sobol =
      sobol_indices(model, mp.lower, mp.upper, ms.sobol_base_n, cfg.seeds.mining, ms.sobol_bootstrap, cfg.threads);
  {
    ojson j;
    j["base_n"] = sobol.base_n;
    j["evaluations"] = sobol.evaluations;
    j["bootstrap"] = sobol.bootstrap;
    j["variables"] = names_m;
    for (int k = 0; k < 3; ++k) {
      const auto& s = sobol.outputs[std::size_t(k)];
      ojson o;
      o["s1"] = vec_json(s.s1);
      o["s1_ci95"] = {vec_json(s.s1_lo), vec_json(s.s1_hi)};
      o["st"] = vec_json(s.st);
      o["st_ci95"] = {vec_json(s.st_lo), vec_json(s.st_hi)};
      o["s1_negative"] = s.s1_negative;
      o["st_negative"] = s.st_negative;
      j["objectives"][kTargets[k]] = o;
    }
    write_json(ctx.out_dir / "sobol.json", j);
    std::string csv = "objective,variable,s1,s1_lo,s1_hi,st,st_lo,st_hi\n";
    for (int k = 0; k < 3; ++k) {
      const auto& s = sobol.outputs[std::size_t(k)];
      for (int i = 0; i < 6; ++i)
        csv += std::string(kTargets[k]) + "," + names_m[std::size_t(i)] + "," + format_double(s.s1(i)) + "," +
               format_double(s.s1_lo(i)) + "," + format_double(s.s1_hi(i)) + "," + format_double(s.st(i)) + "," +
               format_double(s.st_lo(i)) + "," + format_double(s.st_hi(i)) + "\n";
    }
    write_text(ctx.out_dir / "sobol.csv", csv);
    files.insert(files.end(), {"sobol.json", "sobol.csv"});
  }

  // Neighborhood of the Pareto set.
  const NeighborhoodSet hood =
      extract_neighborhood(archive, ms.neighborhood_pareto, ms.neighborhood_history, cfg.seeds.mining);
  {
    std::vector<double> src(hood.source.begin(), hood.source.end());
    write_individuals_csv(ctx.out_dir / "neighborhood.csv", hood.members, {{"source_generation", src}});
    files.push_back("neighborhood.csv");
  }
  const auto n = Eigen::Index(hood.members.size());
  Eigen::MatrixXd x(n, 6), y(n, 3);
  for (Eigen::Index r = 0; r < n; ++r) {
    x.row(r) = hood.members[std::size_t(r)].x.transpose();
    y.row(r) = hood.members[std::size_t(r)].objectives.transpose();
  }

  // Trees on millimetres, matching how printable part sizes are quoted.
  ojson trees;
  const auto names_mm = length_names("_mm");
  for (int k = 0; k < 3; ++k) {
    const DecisionTree tree = fit_tree(x * 1000.0, y.col(k), ms.tree, names_mm);
    const std::string stem = std::string("tree_") + kTargets[k];
    write_text(ctx.out_dir / (stem + ".txt"), tree.to_text());
    write_text(ctx.out_dir / (stem + ".dot"), tree.to_dot(std::string(kTargets[k]) + "_pred"));
    write_text(ctx.out_dir / (stem + ".json"), tree.to_json() + "\n");
    files.insert(files.end(), {stem + ".txt", stem + ".dot", stem + ".json"});

    int lo = -1, hi = -1;
    for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
      if (!tree.nodes[i].leaf()) continue;
      if (lo < 0 || tree.nodes[i].value < tree.nodes[std::size_t(lo)].value) lo = int(i);
      if (hi < 0 || tree.nodes[i].value > tree.nodes[std::size_t(hi)].value) hi = int(i);
    }
    ojson t;
    t["root_feature"] = tree.root().leaf() ? "" : names_mm[std::size_t(tree.root().feature)];
    t["root_threshold_mm"] = tree.root().threshold;
    t["depth"] = tree.depth();
    // Both directions are reported: the optimizer minimizes every objective,
    // while design rules for eta are often read as "larger is better".
    t["lowest_leaf"] = {{"value", tree.nodes[std::size_t(lo)].value}, {"rule", tree.path_to(lo)}};
    t["highest_leaf"] = {{"value", tree.nodes[std::size_t(hi)].value}, {"rule", tree.path_to(hi)}};
    trees[kTargets[k]] = t;
  }
  write_json(ctx.out_dir / "trees.json", trees);
  files.push_back("trees.json");

  // Correlations of design variables with objectives, and among objectives.
  const CorrelationReport corr =
      correlations(x, y, ms.alpha, names_m, {"eta_pred", "tau1_pred_nm", "tau2_pred_nm"});
  const CorrelationReport corr_obj =
      correlations(y, y, ms.alpha, {"eta_pred", "tau1_pred_nm", "tau2_pred_nm"},
                   {"eta_pred", "tau1_pred_nm", "tau2_pred_nm"});
  {
    auto table = [](const CorrelationReport& c) {
      ojson rows_j = ojson::array();
      for (std::size_t i = 0; i < c.variables.size(); ++i)
        for (std::size_t o = 0; o < c.objectives.size(); ++o) {
          const auto a = Eigen::Index(i), b = Eigen::Index(o);
          rows_j.push_back({{"variable", c.variables[i]},
                            {"objective", c.objectives[o]},
                            {"pearson", c.pearson(a, b)},
                            {"pearson_p", c.pearson_p(a, b)},
                            {"pearson_significant", bool(c.pearson_significant(a, b))},
                            {"spearman", c.spearman(a, b)},
                            {"spearman_p", c.spearman_p(a, b)},
                            {"spearman_significant", bool(c.spearman_significant(a, b))}});
        }
      return rows_j;
    };
    ojson j;
    j["samples"] = corr.samples;
    j["alpha"] = corr.alpha;
    j["variables_vs_objectives"] = table(corr);
    j["objectives_vs_objectives"] = table(corr_obj);
    write_json(ctx.out_dir / "correlations.json", j);
    std::string csv = "variable,objective,pearson,pearson_p,spearman,spearman_p\n";
    for (const auto* c : {&corr, &corr_obj})
      for (std::size_t i = 0; i < c->variables.size(); ++i)
        for (std::size_t o = 0; o < c->objectives.size(); ++o) {
          const auto a = Eigen::Index(i), b = Eigen::Index(o);
          csv += c->variables[i] + "," + c->objectives[o] + "," + format_double(c->pearson(a, b)) + "," +
                 format_double(c->pearson_p(a, b)) + "," + format_double(c->spearman(a, b)) + "," +
                 format_double(c->spearman_p(a, b)) + "\n";
        }
    write_text(ctx.out_dir / "correlations.csv", csv);
    files.insert(files.end(), {"correlations.json", "correlations.csv"});
  }

  // eta derivatives of the exact kinematic model on a seeded dataset subset.
  Rng rng(cfg.seeds.mining ^ 0xd1ffULL);
  auto pick = rng.permutation(rows.size());
  pick.resize(std::min(pick.size(), ms.derivative_designs));
  std::sort(pick.begin(), pick.end());
  std::vector<Linkage<double>> subset;
  for (std::size_t i : pick) subset.push_back(rows[i].lengths_abs());
  KinematicPipeline kp{cfg.task(), cfg.sampler.grid, RasterOptions{ms.derivative_raster_cells}};
  const DerivativeStats ds = derivative_stats(subset, kp, ms.derivative_relative_step, cfg.threads);
  {
    ojson j;
    j["designs"] = subset.size();
    j["skipped"] = ds.skipped;
    j["relative_step"] = ds.relative_step;
    j["units"] = "1/m";
    for (int i = 0; i < 6; ++i) {
      const auto& s = ds.variables[std::size_t(i)];
      j["variables"][names_m[std::size_t(i)]] = {{"q1", s.q1},         {"median", s.median},
                                                 {"q3", s.q3},         {"whisker_lo", s.whisker_lo},
                                                 {"whisker_hi", s.whisker_hi}, {"mean", s.mean},
                                                 {"mean_abs", s.mean_abs}, {"n", s.n}};
    }
    auto rank = ojson::array();
    for (int i : ds.ranking()) rank.push_back(names_m[std::size_t(i)]);
    j["ranking_by_mean_abs"] = rank;
    write_json(ctx.out_dir / "derivatives.json", j);
    std::string csv;
    for (int i = 0; i < 6; ++i) csv += (i ? "," : "") + std::string("d_eta_d_") + names_m[std::size_t(i)];
    csv += "\n";
    for (Eigen::Index r = 0; r < ds.derivatives.rows(); ++r) {
      for (Eigen::Index i = 0; i < 6; ++i) csv += (i ? "," : "") + format_double(ds.derivatives(r, i));
      csv += "\n";
    }
    write_text(ctx.out_dir / "derivatives.csv", csv);
    files.insert(files.end(), {"derivatives.json", "derivatives.csv"});
  }

  // Dataset scatter colored by scale factor.
  {
    std::string csv = "idx,scale_m";
    for (const auto& nm : names_m) csv += "," + nm;
    csv += ",eta,tau1_nm,tau2_nm\n";
    for (const auto& r : rows) {
      csv += std::to_string(r.idx) + "," + format_double(r.scale);
      const auto v = r.lengths_abs().vector();
      for (int i = 0; i < 6; ++i) csv += "," + format_double(v(i));
      csv += "," + format_double(r.eta) + "," + format_double(r.tau1) + "," + format_double(r.tau2) + "\n";
    }
    write_text(ctx.out_dir / "scatter_scale.csv", csv);
    files.push_back("scatter_scale.csv");
  }

  // Design-rule checks with the computed values behind them.
  {
    ojson j;
    auto& sob = j["largest_total_sobol"];
    for (int k = 0; k < 3; ++k) {
      Eigen::Index arg;
      sobol.outputs[std::size_t(k)].st.maxCoeff(&arg);
      sob[kTargets[k]] = {{"variable", names_m[std::size_t(arg)]}, {"st", sobol.outputs[std::size_t(k)].st(arg)}};
    }
    for (int k = 0; k < 3; ++k) j["tree_root"][kTargets[k]] = trees[kTargets[k]]["root_feature"];
    j["pearson_tau1_tau2"] = corr_obj.pearson(1, 2);
    j["pearson_eex_eta"] = {{"r", corr.pearson(4, 0)}, {"p", corr.pearson_p(4, 0)}};
    j["pearson_l1_eta"] = {{"r", corr.pearson(0, 0)}, {"p", corr.pearson_p(0, 0)}};
    j["alpha"] = ms.alpha;
    auto rank = ojson::array();
    for (int i : ds.ranking()) rank.push_back(names_m[std::size_t(i)]);
    j["derivative_ranking"] = rank;
    write_json(ctx.out_dir / "rules.json", j);
    files.push_back("rules.json");
  }

  manifest.record("mine", files, clock.seconds());
  manifest.save();
}

void cmd_report(const StageContext& ctx) {
  const Stopwatch clock;
  auto manifest = open_manifest(ctx);
  write_text(ctx.out_dir / "report.md", build_report(manifest, ctx.config));
  manifest.record("report", {"report.md"}, clock.seconds());
  manifest.save();
}

}  // namespace qsm
