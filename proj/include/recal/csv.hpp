#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace recal {

// Shortest decimal form that round-trips to the same double.
std::string format_double(double x);

/// Minimal numeric CSV writer; rows are written in call order.
class CsvWriter {
public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header);

  // Appends one row; fields are written verbatim.
  void row(const std::vector<std::string>& fields);
  void row(const std::vector<double>& values);

private:
  std::ofstream out_;
  std::size_t columns_;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  // Index of a header column; throws ContractViolation when absent.
  std::size_t column(const std::string& name) const;
};

// Reads a header line followed by all-numeric rows.
CsvTable read_csv(const std::filesystem::path& path);

} // namespace recal
