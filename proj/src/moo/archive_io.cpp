#include <cctype>
#include <fstream>

#include <json.hpp>

#include "qsm/csv.hpp"
#include "qsm/moo.hpp"

namespace qsm {

namespace {

constexpr const char* kObjectiveNames[3] = {"eta_pred", "tau1_pred_nm", "tau2_pred_nm"};

std::string x_column(int k) { return std::string(kLinkNames[k]) + "_m"; }

void write_rows(std::ostream& out, std::span<const Individual> pop, const ExtraColumns& extra,
                int generation, bool header) {
  for (const auto& [name, values] : extra)
    if (values.size() != pop.size()) throw DataError("extra column '" + name + "' has wrong length");
  if (header) {
    const Eigen::Index nx = pop.empty() ? 6 : pop.front().x.size();
    const Eigen::Index no = pop.empty() ? 3 : pop.front().objectives.size();
    const Eigen::Index ng = pop.empty() ? 10 : pop.front().violations.size();
    if (generation >= 0) out << "generation,";
    out << "member";
    for (Eigen::Index k = 0; k < nx; ++k) out << ',' << (k < 6 ? x_column(int(k)) : "x" + std::to_string(k) + "_m");
    for (Eigen::Index k = 0; k < no; ++k) out << ',' << (k < 3 ? kObjectiveNames[k] : "f" + std::to_string(k) + "_pred");
    for (Eigen::Index k = 0; k < ng; ++k) out << ",g" << k + 1;
    out << ",violation,rank,crowding";
    for (const auto& col : extra) out << ',' << col.first;
    out << '\n';
  }
  for (std::size_t i = 0; i < pop.size(); ++i) {
    const auto& ind = pop[i];
    if (generation >= 0) out << generation << ',';
    out << i;
    for (Eigen::Index k = 0; k < ind.x.size(); ++k) out << ',' << format_double(ind.x(k));
    for (Eigen::Index k = 0; k < ind.objectives.size(); ++k) out << ',' << format_double(ind.objectives(k));
    for (Eigen::Index k = 0; k < ind.violations.size(); ++k) out << ',' << format_double(ind.violations(k));
    out << ',' << format_double(ind.violation) << ',' << ind.rank << ',' << format_double(ind.crowding);
    for (const auto& col : extra) out << ',' << format_double(col.second[i]);
    out << '\n';
  }
}

}  // namespace

void write_individuals_csv(const std::filesystem::path& path, std::span<const Individual> pop,
                           const ExtraColumns& extra, int generation) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  write_rows(out, pop, extra, generation, true);
  if (!out) throw DataError("write failed: " + path.string());
}

namespace {

// Columns are located by name prefix so files from other problem sizes load too.
std::vector<Individual> parse_individuals(const CsvTable& t, std::vector<int>* generations) {
  std::vector<std::size_t> xs, fs, gs;
  for (std::size_t k = 0; k < t.header.size(); ++k) {
    const auto& h = t.header[k];
    if (h.size() > 2 && h.compare(h.size() - 2, 2, "_m") == 0) xs.push_back(k);
    else if (h.find("_pred") != std::string::npos) fs.push_back(k);
    else if (h.size() >= 2 && h[0] == 'g' && std::isdigit(static_cast<unsigned char>(h[1]))) gs.push_back(k);
  }
  if (xs.empty() || fs.empty()) throw DataError("archive file lacks design or objective columns");
  const std::size_t cv = t.column("violation"), rk = t.column("rank"), cd = t.column("crowding");
  const std::size_t gen = generations ? t.column("generation") : 0;

  std::vector<Individual> out;
  out.reserve(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    Individual ind;
    ind.x.resize(Eigen::Index(xs.size()));
    ind.objectives.resize(Eigen::Index(fs.size()));
    ind.violations.resize(Eigen::Index(gs.size()));
    for (std::size_t k = 0; k < xs.size(); ++k) ind.x(Eigen::Index(k)) = t.number(r, xs[k]);
    for (std::size_t k = 0; k < fs.size(); ++k) ind.objectives(Eigen::Index(k)) = t.number(r, fs[k]);
    for (std::size_t k = 0; k < gs.size(); ++k) ind.violations(Eigen::Index(k)) = t.number(r, gs[k]);
    ind.violation = t.number(r, cv);
    ind.rank = int(t.number(r, rk));
    ind.crowding = t.number(r, cd);
    if (generations) generations->push_back(int(t.number(r, gen)));
    out.push_back(std::move(ind));
  }
  return out;
}

}  // namespace

void write_archive(const std::filesystem::path& dir, const ParetoArchive& archive,
                   const ExtraColumns& pareto_extra) {
  std::filesystem::create_directories(dir);
  write_individuals_csv(dir / "pareto.csv", archive.pareto, pareto_extra);

  const auto hist_path = dir / "history.csv";
  std::ofstream hist(hist_path, std::ios::binary);
  if (!hist) throw DataError("cannot write " + hist_path.string());
  for (std::size_t g = 0; g < archive.history.size(); ++g)
    write_rows(hist, archive.history[g], {}, int(g), g == 0);
  if (!hist) throw DataError("write failed: " + hist_path.string());

  nlohmann::ordered_json j;
  j["format"] = "qsm-archive";
  j["seed"] = archive.seed;
  j["pop_size"] = archive.settings.pop_size;
  j["generations"] = archive.settings.generations;
  j["crossover_prob"] = archive.settings.crossover_prob;
  j["crossover_eta"] = archive.settings.crossover_eta;
  j["mutation_eta"] = archive.settings.mutation_eta;
  j["mutation_prob"] = archive.settings.mutation_prob;
  j["pareto_size"] = archive.pareto.size();
  j["history_generations"] = archive.history.size();
  std::ofstream js(dir / "archive.json", std::ios::binary);
  if (!js) throw DataError("cannot write " + (dir / "archive.json").string());
  js << j.dump(2) << '\n';
}

ParetoArchive read_archive(const std::filesystem::path& dir) {
  ParetoArchive a;
  std::ifstream js(dir / "archive.json", std::ios::binary);
  if (!js) throw DataError("cannot read " + (dir / "archive.json").string());
  try {
    const auto j = nlohmann::json::parse(js);
    if (j.at("format") != "qsm-archive") throw DataError("not an archive descriptor");
    a.seed = j.at("seed").get<std::uint64_t>();
    a.settings.pop_size = j.at("pop_size").get<std::size_t>();
    a.settings.generations = j.at("generations").get<int>();
    a.settings.crossover_prob = j.at("crossover_prob").get<double>();
    a.settings.crossover_eta = j.at("crossover_eta").get<double>();
    a.settings.mutation_eta = j.at("mutation_eta").get<double>();
    a.settings.mutation_prob = j.at("mutation_prob").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed archive.json: ") + e.what());
  }

  a.pareto = parse_individuals(read_csv(dir / "pareto.csv"), nullptr);
  std::vector<int> gens;
  auto members = parse_individuals(read_csv(dir / "history.csv"), &gens);
  for (std::size_t i = 0; i < members.size(); ++i) {
    if (gens[i] < 0) throw DataError("negative generation index in history");
    const std::size_t g = std::size_t(gens[i]);
    if (g >= a.history.size()) a.history.resize(g + 1);
    a.history[g].push_back(std::move(members[i]));
  }
  return a;
}

}  // namespace qsm
