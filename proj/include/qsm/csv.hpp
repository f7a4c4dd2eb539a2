#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace qsm {

/// Plain comma-separated table (no quoting) with a header row.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Column index by name; throws DataError naming the column when absent.
  std::size_t column(const std::string& name) const;
  bool has_column(const std::string& name) const;
  double number(std::size_t row, std::size_t col) const;
};

std::vector<std::string> split_csv_line(const std::string& line);
/// Throws DataError on unreadable files or ragged rows.
CsvTable read_csv(const std::filesystem::path& path);

}  // namespace qsm
