#include <charconv>
#include <fstream>
#include <cmath>

#include <json.hpp>

#include "qsm/csv.hpp"
#include "qsm/errors.hpp"
#include "qsm/sampler.hpp"

namespace qsm {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return INFINITY;
  if (s == "-inf") return -INFINITY;
  double v = 0.0;
  const char* end = s.data() + s.size();
  const auto res = std::from_chars(s.data(), end, v);
  if (res.ec != std::errc() || res.ptr != end) throw DataError("malformed number '" + s + "'");
  return v;
}

namespace {

const std::vector<std::string>& kinematic_columns() {
  static const std::vector<std::string> cols = {
      "idx",    "l1",     "l2",     "l3",      "l4",      "eex",        "eey", "scale_m",
      "l1_abs", "l2_abs", "l3_abs", "l4_abs",  "eex_abs", "eey_abs", "ws_area_m2", "eta"};
  return cols;
}

}  // namespace

void write_dataset_csv(const std::filesystem::path& path, std::span<const LabeledDesign> rows,
                       bool with_torques) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  const auto& cols = kinematic_columns();
  for (std::size_t k = 0; k < cols.size(); ++k) out << (k ? "," : "") << cols[k];
  if (with_torques) out << ",tau1_nm,tau2_nm";
  out << '\n';
  for (const auto& r : rows) {
    const auto unit = r.unit.vector();
    const auto abs = r.lengths_abs().vector();
    out << r.idx;
    for (int k = 0; k < 6; ++k) out << ',' << format_double(unit(k));
    out << ',' << format_double(r.scale);
    for (int k = 0; k < 6; ++k) out << ',' << format_double(abs(k));
    out << ',' << format_double(r.ws_area_m2) << ',' << format_double(r.eta);
    if (with_torques) out << ',' << format_double(r.tau1) << ',' << format_double(r.tau2);
    out << '\n';
  }
  if (!out) throw DataError("write failed: " + path.string());
}

std::vector<LabeledDesign> read_dataset_csv(const std::filesystem::path& path) {
  const CsvTable t = read_csv(path);
  for (const auto& name : kinematic_columns())
    if (!t.has_column(name)) throw DataError("dataset " + path.string() + " lacks column '" + name + "'");
  const bool torques = t.has_column("tau1_nm") && t.has_column("tau2_nm");

  std::vector<LabeledDesign> rows;
  rows.reserve(t.rows.size());
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    auto get = [&](const char* name) { return t.number(i, t.column(name)); };
    LabeledDesign r;
    const double idx = get("idx");
    if (!(idx >= 0.0) || idx != std::floor(idx)) throw DataError("malformed idx in " + path.string());
    r.idx = std::size_t(idx);
    Eigen::Matrix<double, 6, 1> v;
    for (int k = 0; k < 6; ++k) v(k) = get(kLinkNames[k]);
    r.unit = UnitLinkage::from_vector(v);
    r.scale = get("scale_m");
    r.ws_area_m2 = get("ws_area_m2");
    r.eta = get("eta");
    if (torques) {
      r.tau1 = get("tau1_nm");
      r.tau2 = get("tau2_nm");
    }
    rows.push_back(r);
  }
  return rows;
}

void write_provenance_json(const std::filesystem::path& path, const Provenance& p) {
  nlohmann::ordered_json j;
  j["seed"] = p.seed;
  j["n_input"] = p.n_input;
  j["dropped_uncoverable"] = p.dropped_uncoverable;
  j["dropped_torque"] = p.dropped_torque;
  if (!p.config_snapshot.empty()) j["config"] = nlohmann::ordered_json::parse(p.config_snapshot);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace qsm
