#include "confsteer/csv.hpp"

#include "confsteer/types.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace confsteer {

namespace {

std::vector<std::string> split_line(const std::string &line) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cell += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cell += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.push_back(std::move(cell));
      cell.clear();
    } else if (c != '\r') {
      cell += c;
    }
  }
  cells.push_back(std::move(cell));
  return cells;
}

} // namespace

std::optional<std::size_t> CsvTable::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name)
      return i;
  return std::nullopt;
}

std::size_t CsvTable::require_column(std::string_view name) const {
  if (auto c = column(name))
    return *c;
  throw ValidationError("CSV is missing column '" + std::string(name) + "'");
}

CsvTable read_csv(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in)
    throw IoError("cannot open CSV '" + path.string() + "'");
  CsvTable table;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos)
      continue;
    auto cells = split_line(line);
    if (first) {
      table.header = std::move(cells);
      first = false;
      continue;
    }
    if (cells.size() != table.header.size())
      throw ValidationError("CSV '" + path.string() + "' row " +
                            std::to_string(table.rows.size() + 1) + " has " +
                            std::to_string(cells.size()) + " cells, header has " +
                            std::to_string(table.header.size()));
    table.rows.push_back(std::move(cells));
  }
  if (first)
    throw ValidationError("CSV '" + path.string() + "' is empty");
  return table;
}

void write_csv(const std::filesystem::path &path, const CsvTable &table) {
  std::ofstream out(path);
  if (!out)
    throw IoError("cannot write CSV '" + path.string() + "'");
  auto emit = [&](const std::vector<std::string> &cells) {
    for (std::size_t i = 0; i < cells.size(); ++i)
      out << (i ? "," : "") << cells[i];
    out << "\n";
  };
  emit(table.header);
  for (const auto &r : table.rows)
    emit(r);
  if (!out)
    throw IoError("write failed for '" + path.string() + "'");
}

double parse_double_cell(const std::string &cell, std::string_view what) {
  double v = 0;
  const char *begin = cell.data();
  const char *end = cell.data() + cell.size();
  while (begin < end && *begin == ' ')
    ++begin;
  const auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc{} || ptr != end)
    throw ValidationError("cannot parse " + std::string(what) + " value '" +
                          cell + "'");
  return v;
}

} // namespace confsteer
