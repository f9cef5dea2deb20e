#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace llp::csv {

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;  // rectangular, rows[i].size() == columns.size()

  std::size_t num_rows() const { return rows.size(); }
  std::size_t num_cols() const { return columns.size(); }
  // Index of a named column; throws std::runtime_error if absent.
  std::size_t col_index(const std::string& name) const;
  bool has_column(const std::string& name) const;
};

// Reads a numeric CSV with a header row. Throws std::runtime_error on I/O
// failure, non-numeric cells (message names row and column) or ragged rows.
Table read_numeric(const std::string& path);

// Writes a numeric CSV with a header row. precision is the number of
// significant digits (%.Ng); 17 round-trips doubles exactly.
void write_numeric(const std::string& path, const std::vector<std::string>& columns,
                   const std::vector<std::vector<double>>& rows, int precision = 17);

std::string format_double(double v, int precision = 17);

}  // namespace llp::csv
