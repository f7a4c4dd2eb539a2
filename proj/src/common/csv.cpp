#include <fstream>
#include <sstream>

#include "qsm/csv.hpp"
#include "qsm/errors.hpp"
#include "qsm/sampler.hpp"

namespace qsm {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t k = 0; k < header.size(); ++k)
    if (header[k] == name) return k;
  throw DataError("missing column '" + name + "'");
}

bool CsvTable::has_column(const std::string& name) const {
  for (const auto& h : header)
    if (h == name) return true;
  return false;
}

double CsvTable::number(std::size_t row, std::size_t col) const {
  return parse_double(rows.at(row).at(col));
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty file " + path.string());
  t.header = split_csv_line(line);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto cells = split_csv_line(line);
    if (cells.size() != t.header.size())
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                      std::to_string(t.header.size()) + " fields");
    t.rows.push_back(std::move(cells));
  }
  return t;
}

}  // namespace qsm
