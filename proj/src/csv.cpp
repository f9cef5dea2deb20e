#include "llp/csv.hpp"

#include <cerrno>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace llp::csv {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t");
  return s.substr(a, b - a + 1);
}

}  // namespace

std::size_t Table::col_index(const std::string& name) const {
  for (std::size_t i = 0; i < columns.size(); ++i)
    if (columns[i] == name) return i;
  throw std::runtime_error("csv: no column named '" + name + "'");
}

bool Table::has_column(const std::string& name) const {
  for (const auto& c : columns)
    if (c == name) return true;
  return false;
}

Table read_numeric(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("csv: cannot open '" + path + "'");

  Table t;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("csv: '" + path + "' is empty");
  for (auto& name : split_line(line)) t.columns.push_back(trim(name));
  if (t.columns.empty()) throw std::runtime_error("csv: '" + path + "' has no header columns");

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto cells = split_line(line);
    if (cells.size() != t.columns.size()) {
      std::ostringstream msg;
      msg << "csv: " << path << ": row " << line_no << " has " << cells.size()
          << " fields, expected " << t.columns.size();
      throw std::runtime_error(msg.str());
    }
    std::vector<double> row(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const std::string cell = trim(cells[c]);
      const char* b = cell.data();
      const char* e = b + cell.size();
      double v = 0.0;
      auto [p, ec] = std::from_chars(b, e, v);
      if (ec != std::errc() || p != e) {
        std::ostringstream msg;
        msg << "csv: " << path << ": row " << line_no << ", column '" << t.columns[c]
            << "': cannot parse '" << cell << "' as a number";
        throw std::runtime_error(msg.str());
      }
      row[c] = v;
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

std::string format_double(double v, int precision) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", precision, v);
  return buf;
}

void write_numeric(const std::string& path, const std::vector<std::string>& columns,
                   const std::vector<std::vector<double>>& rows, int precision) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("csv: cannot write '" + path + "'");
  for (std::size_t c = 0; c < columns.size(); ++c) {
    if (c) out << ',';
    out << columns[c];
  }
  out << '\n';
  for (const auto& row : rows) {
    if (row.size() != columns.size())
      throw std::runtime_error("csv: row width does not match header while writing '" + path + "'");
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out << ',';
      out << format_double(row[c], precision);
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("csv: write failed for '" + path + "'");
}

}  // namespace llp::csv
