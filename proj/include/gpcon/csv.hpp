#pragma once

#include <Eigen/Core>
#include <ostream>
#include <string>
#include <vector>

// Minimal CSV support: comma-separated, UTF-8, one header row, doubles
// formatted so they round-trip exactly through decimal.

namespace gpcon {

/// Shortest decimal string that round-trips the value ("%.17g" fallback).
std::string format_double(double v);

void write_csv_row(std::ostream& os, const std::vector<std::string>& fields);

struct CsvTable {
  std::vector<std::string> header;
  Eigen::MatrixXd values;  // rows x columns, all numeric
};

/// Reads a numeric CSV with a header row. Malformed content is reported
/// with the file name and 1-based line number.
CsvTable read_csv(const std::string& path);

}  // namespace gpcon
