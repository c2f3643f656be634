#pragma once

#include <array>
#include <atomic>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "georef/gazetteer.hpp"
#include "georef/grid.hpp"
#include "georef/util.hpp"

namespace georef {

class MapStyleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Rgb {
  int r = 0, g = 0, b = 0;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

struct KindStyle {
  Rgb stroke;
  int stroke_width = 2;
  Rgb fill;
  double fill_alpha = 0.0;
  double label_scale = 0.5;  // Hershey font scale
};

struct MapStyle {
  KindStyle polygon{{200, 30, 30}, 3, {230, 80, 80}, 0.25, 0.55};
  KindStyle line{{20, 60, 220}, 4, {0, 0, 0}, 0.0, 0.5};
  KindStyle point{{200, 20, 140}, 2, {240, 60, 180}, 1.0, 0.55};
  Rgb background{242, 239, 233};
  Rgb grid{40, 40, 40};
  int grid_width = 1;
  double grid_label_scale = 0.45;
  Rgb label_text{20, 20, 20};
  Rgb label_halo{255, 255, 255};
  int marker_radius = 6;
  int line_label_spacing_px = 260;
};

/// Style file: {"polygon": {"stroke": [r,g,b], "stroke_width", "fill", "fill_alpha", "label_scale"},
/// "line": {...}, "point": {...}, "background", "grid", "grid_width", "grid_label_scale",
/// "label_text", "label_halo", "marker_radius", "line_label_spacing_px"}. Missing keys keep defaults.
MapStyle load_style(const std::filesystem::path& path);
MapStyle parse_style(const nlohmann::json& j);

class TileSource {
 public:
  virtual ~TileSource() = default;
  /// PNG/JPEG bytes for a slippy-map tile; throws on failure.
  virtual std::string tile(int z, int x, int y) = 0;
};

struct TileServerConfig {
  std::string url_template = "https://tile.openstreetmap.org/{z}/{x}/{y}.png";
  std::string user_agent = "georef/1.0";
  double requests_per_second = 1.0;
  std::filesystem::path cache_dir;  // empty disables caching
  int timeout_s = 30;
};

/// Slippy-map tiles over HTTP with an on-disk cache keyed by (server, z, x, y).
class HttpTileSource final : public TileSource {
 public:
  explicit HttpTileSource(TileServerConfig config);
  std::string tile(int z, int x, int y) override;
  std::string url_for(int z, int x, int y) const;
  std::filesystem::path cache_path(int z, int x, int y) const;
  int network_calls() const { return calls_.load(); }

 private:
  TileServerConfig config_;
  RateLimiter limiter_;
  std::atomic<int> calls_{0};
};

struct MapExcerpt {
  std::string png;
  MapGeoreference georef;
  std::vector<std::string> features_drawn;
  std::vector<std::string> unresolved_names;
  std::vector<std::string> cell_labels;  // in drawing order
  bool no_basemap = false;
};

struct RenderOptions {
  int target_width_px = 1024;
  TileSource* tiles = nullptr;  // null renders the blank basemap
};

/// Zoom whose tiles give at least `width_px` across the extent.
int zoom_for(const MapExtent& extent, int width_px);

/// Composites basemap, features (drawn in order: polygons, lines, points) and the
/// labelled grid. Tile failures fall back to the blank basemap with `no_basemap` set.
MapExcerpt render_map(const GridLayout& layout, const std::vector<GazetteerFeature>& features,
                      const std::vector<std::string>& unresolved, const MapStyle& style = {},
                      const RenderOptions& options = {});

/// SHA-256 of the decoded BGR pixel buffer (independent of PNG encoder settings).
std::string pixel_hash(const std::string& png);

/// Writes `<stem>.png` and `<stem>.json` (the MapGeoreference sidecar plus drawn/unresolved lists).
void save_excerpt(const MapExcerpt& excerpt, const std::filesystem::path& png_path);
nlohmann::json excerpt_sidecar(const MapExcerpt& excerpt);

}  // namespace georef
