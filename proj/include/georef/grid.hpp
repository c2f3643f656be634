#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include <json.hpp>

#include "georef/geo.hpp"

namespace georef {

/// Lat/lon extent of a map excerpt. Never crosses the antimeridian.
using MapExtent = GeoBox;

class GridError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kMaxGridCols = 702;  // A..ZZ
inline constexpr int kMaxGridRows = 99;

/// Square grid laid over an extent. Cells are square in Web Mercator space;
/// `cell_km` is the geodesic width of one cell along the extent's central parallel.
struct GridSpec {
  int cols = 0;
  int rows = 0;
  double cell_km = 0.0;
  std::string labeling = "spreadsheet";

  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

/// 1-based column (from west) and row (from north).
struct CellIndex {
  int x = 1;
  int y = 1;

  friend bool operator==(const CellIndex&, const CellIndex&) = default;
  friend auto operator<=>(const CellIndex&, const CellIndex&) = default;
};

struct MapGeoreference {
  MapExtent extent;
  GridSpec grid;
  int image_width_px = 0;
  int image_height_px = 0;
  std::string projection = "web-mercator";

  friend bool operator==(const MapGeoreference&, const MapGeoreference&) = default;
};

/// Throws GridError when min >= max on an axis, coordinates are out of range,
/// or the extent wraps the antimeridian.
void validate_extent(const MapExtent& extent);
void validate_grid(const GridSpec& grid);

struct GridLayout {
  MapExtent extent;  // expanded so cols x rows cells tile it exactly
  GridSpec grid;
};

/// Picks square cells of roughly `target_cell_km`, capped at `max_cells_per_axis`
/// per axis, and grows the extent east/south to a whole number of cells.
GridLayout make_grid(const MapExtent& extent, double target_cell_km, int max_cells_per_axis = 12);

/// Side length of one cell in projected metres.
double cell_side_m(const MapExtent& extent, const GridSpec& grid);

/// Geodesic width of a projected span `side_m` along the parallel `lat`.
double geodesic_width_km(double lat, double side_m);

bool in_grid(const GridSpec& grid, const CellIndex& cell);

/// Spreadsheet scheme: columns A..Z, AA..ZZ; rows 1..rows. (27,3) -> "AA3".
std::string label_for_index(const GridSpec& grid, const CellIndex& cell);
CellIndex index_for_label(const GridSpec& grid, std::string_view label);
/// Parses a label without bounds checks. Empty on malformed text.
std::optional<CellIndex> parse_label(std::string_view label);
std::string column_letters(int column);

/// Cell containing `p`. Points on an interior gridline go to the east/south cell.
CellIndex point_to_cell(const MapGeoreference& georef, const GeoPoint& p);
GeoPoint cell_centroid(const MapGeoreference& georef, const CellIndex& cell);
MapExtent cell_extent(const MapGeoreference& georef, const CellIndex& cell);

/// Pixel position of a lat/lon point on the excerpt image (origin top-left).
Eigen::Vector2d to_pixel(const MapGeoreference& georef, const GeoPoint& p);

void to_json(nlohmann::json& j, const GeoPoint& p);
void from_json(const nlohmann::json& j, GeoPoint& p);
void to_json(nlohmann::json& j, const GeoBox& b);
void from_json(const nlohmann::json& j, GeoBox& b);
void to_json(nlohmann::json& j, const GridSpec& g);
void from_json(const nlohmann::json& j, GridSpec& g);
void to_json(nlohmann::json& j, const MapGeoreference& g);
void from_json(const nlohmann::json& j, MapGeoreference& g);

}  // namespace georef
