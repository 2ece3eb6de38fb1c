#include "gpcon/csv.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace gpcon {

std::string format_double(double v) {
  char buf[40];
  // try increasing precision until the value round-trips
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    double back = 0.0;
    std::sscanf(buf, "%lf", &back);
    if (back == v || (v != v && back != back)) return buf;
  }
  return buf;
}

void write_csv_row(std::ostream& os, const std::vector<std::string>& fields) {
  for (size_t i = 0; i < fields.size(); ++i) {
    if (i) os << ',';
    os << fields[i];
  }
  os << '\n';
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path + ": cannot open");
  CsvTable table;
  std::string line;
  int lineno = 0;
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    if (lineno == 1) {
      while (std::getline(ss, field, ',')) table.header.push_back(field);
      if (table.header.empty())
        throw std::runtime_error(path + ":1: empty header row");
      continue;
    }
    std::vector<double> row;
    while (std::getline(ss, field, ',')) {
      try {
        size_t used = 0;
        row.push_back(std::stod(field, &used));
        if (used != field.size()) throw std::invalid_argument(field);
      } catch (const std::exception&) {
        throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                 ": not a number: '" + field + "'");
      }
    }
    if (row.size() != table.header.size())
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": expected " +
                               std::to_string(table.header.size()) +
                               " fields, got " + std::to_string(row.size()));
    rows.push_back(std::move(row));
  }
  table.values.resize(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(table.header.size()));
  for (size_t r = 0; r < rows.size(); ++r)
    for (size_t c = 0; c < rows[r].size(); ++c)
      table.values(static_cast<Eigen::Index>(r),
                   static_cast<Eigen::Index>(c)) = rows[r][c];
  return table;
}

}  // namespace gpcon
