#ifndef EVIMIX_CLI_IO_HPP
#define EVIMIX_CLI_IO_HPP

#include <optional>
#include <string>
#include <vector>

#include "evimix/tail.hpp"

namespace evimix::cli {

/// Observation file contents. Long format (`area_id,value`) fills `data`
/// only; panel format (`area_id,date,value`) fills both, `data` holding the
/// non-missing values of each area.
struct Observations {
  Dataset data;
  std::optional<Panel> panel;
};

/// Parses either CSV layout, chosen by the header. Panel cells that are
/// empty or `NA` are missing. Long-format values must be positive, panel
/// values nonnegative.
Observations parse_observations(const std::string& path);

struct Station {
  std::string area_id;
  double lon = 0.0;
  double lat = 0.0;
};

/// CSV with header `area_id,lon,lat`.
std::vector<Station> parse_stations(const std::string& path);

/// Copies coordinates onto the dataset's areas. Throws MissingCoordinates
/// naming every area without a station row.
Dataset join_stations(const Dataset& data, const std::vector<Station>& stations);

/// A parsed CSV with a header row; used for per-area result files.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Column index or ParseError naming the column.
  std::size_t column(const std::string& name, const std::string& path) const;
};

Table read_table(const std::string& path);

}  // namespace evimix::cli

#endif  // EVIMIX_CLI_IO_HPP
