#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "georef/grid.hpp"
#include "georef/util.hpp"

namespace test {

inline std::filesystem::path fixtures() { return std::filesystem::path(GEOREF_TEST_DIR) / "fixtures"; }
inline std::filesystem::path golden() { return std::filesystem::path(GEOREF_TEST_DIR) / "golden"; }
inline std::filesystem::path data_dir() { return std::filesystem::path(GEOREF_DATA_DIR); }

/// Fresh scratch directory under the build tree.
inline std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::path(GEOREF_SCRATCH_DIR) / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// Extent of exactly cols x rows square cells of `side_m` projected metres, NW corner at `nw`.
inline georef::MapGeoreference square_grid(georef::GeoPoint nw, int cols, int rows, double side_m) {
  const Eigen::Vector2d c = georef::project(nw);
  georef::MapGeoreference g;
  g.extent = georef::unproject(Eigen::AlignedBox2d(Eigen::Vector2d(c.x(), c.y() - rows * side_m),
                                                   Eigen::Vector2d(c.x() + cols * side_m, c.y())));
  g.grid.cols = cols;
  g.grid.rows = rows;
  g.grid.cell_km = georef::geodesic_width_km(g.extent.center().lat, side_m);
  g.image_width_px = cols * 50;
  g.image_height_px = rows * 50;
  return g;
}

}  // namespace test
