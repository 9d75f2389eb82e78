#include "recal/csv.hpp"

#include <charconv>
#include <sstream>

#include "recal/error.hpp"

namespace recal {

std::string format_double(double x) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
  if (ec != std::errc()) throw ContractViolation("format_double: conversion failed");
  return {buf, end};
}

CsvWriter::CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header)
    : out_(path), columns_(header.size()) {
  if (!out_) throw ConfigError("cannot open " + path.string() + " for writing");
  row(header);
}

void CsvWriter::row(const std::vector<std::string>& fields) {
  if (fields.size() != columns_) throw ContractViolation("CsvWriter: wrong field count");
  for (std::size_t k = 0; k < fields.size(); ++k) {
    if (k) out_ << ',';
    out_ << fields[k];
  }
  out_ << '\n';
}

void CsvWriter::row(const std::vector<double>& values) {
  std::vector<std::string> fields;
  fields.reserve(values.size());
  for (double v : values) fields.push_back(format_double(v));
  row(fields);
}

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t k = 0; k < header.size(); ++k)
    if (header[k] == name) return k;
  throw ContractViolation("CSV has no column '" + name + "'");
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw ConfigError(path.string() + ": empty CSV");
  {
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) table.header.push_back(field);
  }
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<double> values;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) {
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
      if (ec != std::errc() || ptr != field.data() + field.size())
        throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": bad number '" + field + "'");
      values.push_back(v);
    }
    if (values.size() != table.header.size())
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": wrong column count");
    table.rows.push_back(std::move(values));
  }
  return table;
}

} // namespace recal
