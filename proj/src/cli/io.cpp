#include "evimix/cli/io.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <unordered_map>

#include "evimix/error.hpp"

namespace evimix::cli {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out(1);
  for (char ch : line) {
    if (ch == ',') out.emplace_back();
    else out.back() += ch;
  }
  for (auto& cell : out) {
    const auto b = cell.find_first_not_of(" \t");
    const auto e = cell.find_last_not_of(" \t");
    cell = b == std::string::npos ? std::string() : cell.substr(b, e - b + 1);
  }
  return out;
}

// Reads lines, stripping CR and a UTF-8 BOM; skips blank lines. Yields
// (line number, cells).
std::vector<std::pair<std::size_t, std::vector<std::string>>> read_rows(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ParseError(path, 0, "cannot open file");
  std::vector<std::pair<std::size_t, std::vector<std::string>>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (lineno == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    rows.emplace_back(lineno, split_csv_line(line));
  }
  if (rows.empty()) throw ParseError(path, 0, "empty file");
  return rows;
}

double parse_number(const std::string& cell, const std::string& path, std::size_t line) {
  if (cell.empty()) throw ParseError(path, line, "empty numeric field");
  char* end = nullptr;
  const double x = std::strtod(cell.c_str(), &end);
  if (end == cell.c_str() || *end != '\0')
    throw ParseError(path, line, "not a number: '" + cell + "'");
  if (!std::isfinite(x)) throw ParseError(path, line, "non-finite value '" + cell + "'");
  return x;
}

}  // namespace

Observations parse_observations(const std::string& path) {
  const auto rows = read_rows(path);
  const auto& header = rows.front().second;
  const bool panel_format = header == std::vector<std::string>{"area_id", "date", "value"};
  if (!panel_format && header != std::vector<std::string>{"area_id", "value"})
    throw ParseError(path, rows.front().first,
                     "expected header 'area_id,value' or 'area_id,date,value'");
  const std::size_t width = header.size();

  std::vector<std::string> order;
  std::unordered_map<std::string, std::size_t> index;
  auto area_index = [&](const std::string& id) {
    auto [it, inserted] = index.try_emplace(id, order.size());
    if (inserted) order.push_back(id);
    return it->second;
  };

  if (!panel_format) {
    std::vector<std::vector<double>> values;
    for (std::size_t r = 1; r < rows.size(); ++r) {
      const auto& [line, cells] = rows[r];
      if (cells.size() != width)
        throw ParseError(path, line, "expected " + std::to_string(width) + " fields");
      if (cells[0].empty()) throw ParseError(path, line, "empty area_id");
      const double y = parse_number(cells[1], path, line);
      if (!(y > 0.0))
        throw Error(ErrorKind::DomainError,
                    path + ":" + std::to_string(line) + ": observation must be positive");
      const auto j = area_index(cells[0]);
      if (j == values.size()) values.emplace_back();
      values[j].push_back(y);
    }
    std::vector<AreaSeries> areas;
    for (std::size_t j = 0; j < order.size(); ++j)
      areas.push_back({order[j], std::move(values[j]), std::nullopt, std::nullopt});
    if (areas.empty()) throw ParseError(path, 0, "no observations");
    return {Dataset(std::move(areas)), std::nullopt};
  }

  // Panel: (area, date) -> value, dates in first-appearance order.
  std::vector<std::string> dates;
  std::unordered_map<std::string, std::size_t> date_index;
  std::vector<std::map<std::size_t, double>> cells_by_area;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& [line, cells] = rows[r];
    if (cells.size() != width)
      throw ParseError(path, line, "expected " + std::to_string(width) + " fields");
    if (cells[0].empty()) throw ParseError(path, line, "empty area_id");
    if (cells[1].empty()) throw ParseError(path, line, "empty date");
    double y = std::numeric_limits<double>::quiet_NaN();
    if (!cells[2].empty() && cells[2] != "NA") {
      y = parse_number(cells[2], path, line);
      if (y < 0.0)
        throw Error(ErrorKind::DomainError,
                    path + ":" + std::to_string(line) + ": observation must be nonnegative");
    }
    const auto j = area_index(cells[0]);
    if (j == cells_by_area.size()) cells_by_area.emplace_back();
    auto [dit, new_date] = date_index.try_emplace(cells[1], dates.size());
    if (new_date) dates.push_back(cells[1]);
    if (!cells_by_area[j].emplace(dit->second, y).second)
      throw Error(ErrorKind::DuplicateKey, path + ":" + std::to_string(line) +
                                               ": duplicate (area_id, date) = (" + cells[0] +
                                               ", " + cells[1] + ")");
  }
  if (order.empty()) throw ParseError(path, 0, "no observations");

  Panel panel;
  panel.area_ids = order;
  panel.dates = dates;
  panel.columns.assign(order.size(),
                       std::vector<double>(dates.size(), std::numeric_limits<double>::quiet_NaN()));
  for (std::size_t j = 0; j < order.size(); ++j)
    for (const auto& [i, y] : cells_by_area[j]) panel.columns[j][i] = y;
  Dataset data = panel.to_dataset();
  return {std::move(data), std::move(panel)};
}

std::vector<Station> parse_stations(const std::string& path) {
  const auto rows = read_rows(path);
  if (rows.front().second != std::vector<std::string>{"area_id", "lon", "lat"})
    throw ParseError(path, rows.front().first, "expected header 'area_id,lon,lat'");
  std::vector<Station> out;
  std::unordered_map<std::string, std::size_t> seen;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& [line, cells] = rows[r];
    if (cells.size() != 3) throw ParseError(path, line, "expected 3 fields");
    if (cells[0].empty()) throw ParseError(path, line, "empty area_id");
    if (!seen.emplace(cells[0], r).second)
      throw Error(ErrorKind::DuplicateKey,
                  path + ":" + std::to_string(line) + ": duplicate area_id '" + cells[0] + "'");
    out.push_back({cells[0], parse_number(cells[1], path, line), parse_number(cells[2], path, line)});
  }
  return out;
}

Dataset join_stations(const Dataset& data, const std::vector<Station>& stations) {
  std::unordered_map<std::string, const Station*> by_id;
  for (const auto& s : stations) by_id.emplace(s.area_id, &s);
  std::vector<AreaSeries> areas = data.areas();
  std::string missing;
  for (auto& a : areas) {
    auto it = by_id.find(a.area_id);
    if (it == by_id.end()) {
      missing += (missing.empty() ? "" : ", ") + a.area_id;
      continue;
    }
    a.lon = it->second->lon;
    a.lat = it->second->lat;
  }
  if (!missing.empty())
    throw Error(ErrorKind::MissingCoordinates, "no station coordinates for area(s): " + missing);
  return Dataset(std::move(areas));
}

std::size_t Table::column(const std::string& name, const std::string& path) const {
  for (std::size_t c = 0; c < header.size(); ++c)
    if (header[c] == name) return c;
  throw ParseError(path, 1, "missing column '" + name + "'");
}

Table read_table(const std::string& path) {
  auto rows = read_rows(path);
  Table t;
  t.header = std::move(rows.front().second);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].second.size() != t.header.size())
      throw ParseError(path, rows[r].first,
                       "expected " + std::to_string(t.header.size()) + " fields");
    t.rows.push_back(std::move(rows[r].second));
  }
  return t;
}

}  // namespace evimix::cli
