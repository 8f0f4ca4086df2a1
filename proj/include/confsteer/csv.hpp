#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace confsteer {

/// Minimal CSV table: header row plus string cells. Fields never contain
/// commas or quotes in the formats this project writes.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::optional<std::size_t> column(std::string_view name) const;
  std::size_t require_column(std::string_view name) const;
};

CsvTable read_csv(const std::filesystem::path &path);
void write_csv(const std::filesystem::path &path, const CsvTable &table);

double parse_double_cell(const std::string &cell, std::string_view what);

} // namespace confsteer
