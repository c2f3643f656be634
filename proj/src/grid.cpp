#include "georef/grid.hpp"

#include <cctype>
#include <cmath>

namespace georef {

namespace {

constexpr double kSnapEps = 1e-9;

double snap(double v) {
  const double r = std::round(v);
  return std::abs(v - r) < kSnapEps ? r : v;
}

int whole_cells(double span, double side) {
  return std::max(1, static_cast<int>(std::ceil(span / side - kSnapEps)));
}

}  // namespace

void validate_extent(const MapExtent& e) {
  if (!std::isfinite(e.min_lat) || !std::isfinite(e.max_lat) || !std::isfinite(e.min_lon) ||
      !std::isfinite(e.max_lon))
    throw GridError("extent has non-finite bounds");
  if (!(e.min_lat < e.max_lat) || !(e.min_lon < e.max_lon))
    throw GridError("extent must satisfy min < max on both axes");
  if (e.min_lon < -180.0 || e.max_lon > 180.0)
    throw GridError("extent crosses the antimeridian");
  if (e.min_lat < -kMaxMercatorLat || e.max_lat > kMaxMercatorLat)
    throw GridError("extent outside the Web Mercator latitude range");
}

void validate_grid(const GridSpec& g) {
  if (g.cols < 1 || g.cols > kMaxGridCols) throw GridError("grid cols must be in 1..702");
  if (g.rows < 1 || g.rows > kMaxGridRows) throw GridError("grid rows must be in 1..99");
  if (!(g.cell_km > 0.0)) throw GridError("grid cell_km must be positive");
  if (g.labeling != "spreadsheet") throw GridError("unknown labeling scheme '" + g.labeling + "'");
}

double geodesic_width_km(double lat, double side_m) {
  return haversine_km<double>(lat, 0.0, lat, rad2deg(side_m / kMercatorRadiusM));
}

GridLayout make_grid(const MapExtent& extent, double target_cell_km, int max_cells_per_axis) {
  validate_extent(extent);
  if (!(target_cell_km > 0.0)) throw GridError("target cell size must be positive");
  if (max_cells_per_axis < 1 || max_cells_per_axis > kMaxGridRows)
    throw GridError("max cells per axis must be in 1..99");

  const Eigen::AlignedBox2d box = project(extent);
  const Eigen::Vector2d span = box.sizes();
  const double lat_c = extent.center().lat;

  // inverse of geodesic_width_km at the extent centre
  const double half = std::sin(target_cell_km / (2.0 * kEarthRadiusKm)) / std::cos(deg2rad(lat_c));
  if (!(half < 1.0)) throw GridError("target cell size too large for this latitude");
  double side = kMercatorRadiusM * 2.0 * std::asin(half);
  int cols = whole_cells(span.x(), side);
  int rows = whole_cells(span.y(), side);
  if (cols > max_cells_per_axis || rows > max_cells_per_axis) {
    side = span.maxCoeff() / max_cells_per_axis;
    cols = whole_cells(span.x(), side);
    rows = whole_cells(span.y(), side);
  }

  const Eigen::Vector2d lo(box.min().x(), box.max().y() - rows * side);
  const Eigen::Vector2d hi(box.min().x() + cols * side, box.max().y());
  GridLayout out;
  out.extent = unproject(Eigen::AlignedBox2d(lo, hi));
  // keep the north-west corner bit-identical to the input
  out.extent.max_lat = extent.max_lat;
  out.extent.min_lon = extent.min_lon;
  out.extent.min_lat = std::min(out.extent.min_lat, extent.min_lat);
  out.extent.max_lon = std::max(out.extent.max_lon, extent.max_lon);
  validate_extent(out.extent);

  out.grid.cols = cols;
  out.grid.rows = rows;
  out.grid.cell_km = geodesic_width_km(out.extent.center().lat, side);
  if (out.grid.cell_km < 0.01) throw GridError("degenerate extent: cell size below 10 m");
  return out;
}

double cell_side_m(const MapExtent& extent, const GridSpec& grid) {
  return project(extent).sizes().x() / grid.cols;
}

bool in_grid(const GridSpec& grid, const CellIndex& c) {
  return c.x >= 1 && c.x <= grid.cols && c.y >= 1 && c.y <= grid.rows;
}

std::string column_letters(int column) {
  if (column < 1) throw GridError("column index must be positive");
  std::string out;
  // bijective base-26
  while (column > 0) {
    const int rem = (column - 1) % 26;
    out.insert(out.begin(), static_cast<char>('A' + rem));
    column = (column - 1) / 26;
  }
  return out;
}

std::string label_for_index(const GridSpec& grid, const CellIndex& cell) {
  if (!in_grid(grid, cell))
    throw GridError("cell (" + std::to_string(cell.x) + "," + std::to_string(cell.y) + ") outside grid");
  return column_letters(cell.x) + std::to_string(cell.y);
}

std::optional<CellIndex> parse_label(std::string_view label) {
  std::size_t i = 0;
  long col = 0;
  while (i < label.size() && label[i] >= 'A' && label[i] <= 'Z') {
    col = col * 26 + (label[i] - 'A' + 1);
    if (col > 1'000'000) return std::nullopt;
    ++i;
  }
  if (i == 0 || i == label.size() || label[i] == '0') return std::nullopt;
  long row = 0;
  for (; i < label.size(); ++i) {
    if (!std::isdigit(static_cast<unsigned char>(label[i]))) return std::nullopt;
    row = row * 10 + (label[i] - '0');
    if (row > 1'000'000) return std::nullopt;
  }
  return CellIndex{static_cast<int>(col), static_cast<int>(row)};
}

CellIndex index_for_label(const GridSpec& grid, std::string_view label) {
  const auto cell = parse_label(label);
  if (!cell) throw GridError("malformed label '" + std::string(label) + "'");
  if (!in_grid(grid, *cell)) throw GridError("label outside grid: '" + std::string(label) + "'");
  return *cell;
}

CellIndex point_to_cell(const MapGeoreference& georef, const GeoPoint& p) {
  const MapExtent& e = georef.extent;
  if (!e.contains(p)) throw GridError("point " + to_string(p) + " outside extent");
  const Eigen::AlignedBox2d box = project(e);
  const double side = box.sizes().x() / georef.grid.cols;
  const Eigen::Vector2d xy = project(p);
  const double fx = snap((xy.x() - box.min().x()) / side);
  const double fy = snap((box.max().y() - xy.y()) / side);
  CellIndex c{static_cast<int>(std::floor(fx)) + 1, static_cast<int>(std::floor(fy)) + 1};
  // the closed outer edges belong to the last row/column
  c.x = std::clamp(c.x, 1, georef.grid.cols);
  c.y = std::clamp(c.y, 1, georef.grid.rows);
  return c;
}

MapExtent cell_extent(const MapGeoreference& georef, const CellIndex& cell) {
  if (!in_grid(georef.grid, cell)) throw GridError("cell outside grid");
  const Eigen::AlignedBox2d box = project(georef.extent);
  const double side = box.sizes().x() / georef.grid.cols;
  const Eigen::Vector2d lo(box.min().x() + (cell.x - 1) * side, box.max().y() - cell.y * side);
  return unproject(Eigen::AlignedBox2d(lo, lo + Eigen::Vector2d::Constant(side)));
}

GeoPoint cell_centroid(const MapGeoreference& georef, const CellIndex& cell) {
  if (!in_grid(georef.grid, cell)) throw GridError("cell outside grid");
  const Eigen::AlignedBox2d box = project(georef.extent);
  const double side = box.sizes().x() / georef.grid.cols;
  const Eigen::Vector2d centre(box.min().x() + (cell.x - 0.5) * side,
                               box.max().y() - (cell.y - 0.5) * side);
  return unproject(centre);
}

Eigen::Vector2d to_pixel(const MapGeoreference& georef, const GeoPoint& p) {
  const Eigen::AlignedBox2d box = project(georef.extent);
  const Eigen::Vector2d xy = project(p);
  const Eigen::Vector2d span = box.sizes();
  return {(xy.x() - box.min().x()) / span.x() * georef.image_width_px,
          (box.max().y() - xy.y()) / span.y() * georef.image_height_px};
}

void to_json(nlohmann::json& j, const GeoPoint& p) { j = {{"lat", p.lat}, {"lon", p.lon}}; }
void from_json(const nlohmann::json& j, GeoPoint& p) {
  j.at("lat").get_to(p.lat);
  j.at("lon").get_to(p.lon);
}

void to_json(nlohmann::json& j, const GeoBox& b) {
  j = {{"min_lat", b.min_lat}, {"min_lon", b.min_lon}, {"max_lat", b.max_lat}, {"max_lon", b.max_lon}};
}
void from_json(const nlohmann::json& j, GeoBox& b) {
  j.at("min_lat").get_to(b.min_lat);
  j.at("min_lon").get_to(b.min_lon);
  j.at("max_lat").get_to(b.max_lat);
  j.at("max_lon").get_to(b.max_lon);
}

void to_json(nlohmann::json& j, const GridSpec& g) {
  j = {{"cols", g.cols}, {"rows", g.rows}, {"cell_km", g.cell_km}, {"labeling", g.labeling}};
}
void from_json(const nlohmann::json& j, GridSpec& g) {
  j.at("cols").get_to(g.cols);
  j.at("rows").get_to(g.rows);
  j.at("cell_km").get_to(g.cell_km);
  g.labeling = j.value("labeling", std::string("spreadsheet"));
}

void to_json(nlohmann::json& j, const MapGeoreference& g) {
  j = {{"extent", g.extent},
       {"grid", g.grid},
       {"image_width_px", g.image_width_px},
       {"image_height_px", g.image_height_px},
       {"projection", g.projection}};
}
void from_json(const nlohmann::json& j, MapGeoreference& g) {
  j.at("extent").get_to(g.extent);
  j.at("grid").get_to(g.grid);
  j.at("image_width_px").get_to(g.image_width_px);
  j.at("image_height_px").get_to(g.image_height_px);
  g.projection = j.value("projection", std::string("web-mercator"));
}

}  // namespace georef
