#include "georef/render.hpp"

#include <cmath>
#include <numbers>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "georef/http.hpp"

namespace georef {

// ---------------------------------------------------------------------------
// style

namespace {

Rgb rgb_from(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 3) throw MapStyleError("colour must be [r, g, b]");
  Rgb c{j[0].get<int>(), j[1].get<int>(), j[2].get<int>()};
  for (int v : {c.r, c.g, c.b})
    if (v < 0 || v > 255) throw MapStyleError("colour component out of range");
  return c;
}

void kind_from(const nlohmann::json& j, KindStyle& k) {
  if (j.contains("stroke")) k.stroke = rgb_from(j.at("stroke"));
  if (j.contains("stroke_width")) k.stroke_width = j.at("stroke_width").get<int>();
  if (j.contains("fill")) k.fill = rgb_from(j.at("fill"));
  if (j.contains("fill_alpha")) k.fill_alpha = j.at("fill_alpha").get<double>();
  if (j.contains("label_scale")) k.label_scale = j.at("label_scale").get<double>();
  if (k.stroke_width < 1 || k.fill_alpha < 0.0 || k.fill_alpha > 1.0 || !(k.label_scale > 0.0))
    throw MapStyleError("style values out of range");
}

cv::Scalar bgr(const Rgb& c) { return {double(c.b), double(c.g), double(c.r)}; }

}  // namespace

MapStyle parse_style(const nlohmann::json& j) {
  MapStyle s;
  try {
    if (j.contains("polygon")) kind_from(j.at("polygon"), s.polygon);
    if (j.contains("line")) kind_from(j.at("line"), s.line);
    if (j.contains("point")) kind_from(j.at("point"), s.point);
    if (j.contains("background")) s.background = rgb_from(j.at("background"));
    if (j.contains("grid")) s.grid = rgb_from(j.at("grid"));
    if (j.contains("grid_width")) s.grid_width = j.at("grid_width").get<int>();
    if (j.contains("grid_label_scale")) s.grid_label_scale = j.at("grid_label_scale").get<double>();
    if (j.contains("label_text")) s.label_text = rgb_from(j.at("label_text"));
    if (j.contains("label_halo")) s.label_halo = rgb_from(j.at("label_halo"));
    if (j.contains("marker_radius")) s.marker_radius = j.at("marker_radius").get<int>();
    if (j.contains("line_label_spacing_px")) s.line_label_spacing_px = j.at("line_label_spacing_px").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw MapStyleError(std::string("style: ") + e.what());
  }
  if (s.grid_width < 1 || s.marker_radius < 1 || s.line_label_spacing_px < 20 || !(s.grid_label_scale > 0.0))
    throw MapStyleError("style values out of range");
  return s;
}

MapStyle load_style(const std::filesystem::path& path) {
  try {
    return parse_style(nlohmann::json::parse(read_file(path)));
  } catch (const nlohmann::json::exception& e) {
    throw MapStyleError(path.string() + ": " + e.what());
  } catch (const MapStyleError& e) {
    throw MapStyleError(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// tiles

HttpTileSource::HttpTileSource(TileServerConfig config)
    : config_(std::move(config)), limiter_(config_.requests_per_second) {}

std::string HttpTileSource::url_for(int z, int x, int y) const {
  std::string url = config_.url_template;
  const auto put = [&](const std::string& key, int v) {
    const auto pos = url.find(key);
    if (pos != std::string::npos) url.replace(pos, key.size(), std::to_string(v));
  };
  put("{z}", z);
  put("{x}", x);
  put("{y}", y);
  return url;
}

std::filesystem::path HttpTileSource::cache_path(int z, int x, int y) const {
  return config_.cache_dir / "tiles" / sha256_hex(config_.url_template).substr(0, 16) / std::to_string(z) /
         std::to_string(x) / (std::to_string(y) + ".tile");
}

std::string HttpTileSource::tile(int z, int x, int y) {
  const bool cached = !config_.cache_dir.empty();
  if (cached) {
    std::error_code ec;
    const auto path = cache_path(z, x, y);
    if (std::filesystem::exists(path, ec)) return read_file(path);
  }
  limiter_.acquire();
  ++calls_;
  const HttpResponse res = http_get(url_for(z, x, y), {{"User-Agent", config_.user_agent}}, config_.timeout_s);
  if (res.status != 200) throw std::runtime_error("tile " + url_for(z, x, y) + ": HTTP " + std::to_string(res.status));
  if (cached) write_file_atomic(cache_path(z, x, y), res.body);
  return res.body;
}

// ---------------------------------------------------------------------------
// rendering

int zoom_for(const MapExtent& extent, int width_px) {
  const double world = 2.0 * std::numbers::pi * kMercatorRadiusM;
  const double fraction = project(extent).sizes().x() / world;
  const double z = std::ceil(std::log2(width_px / (256.0 * fraction)));
  return std::clamp(static_cast<int>(z), 0, 19);
}

namespace {

constexpr int kFont = cv::FONT_HERSHEY_SIMPLEX;
constexpr int kShift = 3;  // sub-pixel bits for polygon/line drawing
constexpr double kSub = 1 << kShift;

cv::Mat basemap(const MapGeoreference& g, TileSource& tiles) {
  const int z = zoom_for(g.extent, g.image_width_px);
  const double world = 2.0 * std::numbers::pi * kMercatorRadiusM;
  const double scale = 256.0 * std::pow(2.0, z) / world;
  const Eigen::AlignedBox2d p = project(g.extent);
  // world pixel coordinates, y down
  const double X0 = (p.min().x() + world / 2.0) * scale, X1 = (p.max().x() + world / 2.0) * scale;
  const double Y0 = (world / 2.0 - p.max().y()) * scale, Y1 = (world / 2.0 - p.min().y()) * scale;
  const int n = 1 << z;
  const int tx0 = std::max(0, static_cast<int>(std::floor(X0 / 256.0)));
  const int tx1 = std::min(n - 1, static_cast<int>(std::floor((X1 - 1e-9) / 256.0)));
  const int ty0 = std::max(0, static_cast<int>(std::floor(Y0 / 256.0)));
  const int ty1 = std::min(n - 1, static_cast<int>(std::floor((Y1 - 1e-9) / 256.0)));

  cv::Mat mosaic((ty1 - ty0 + 1) * 256, (tx1 - tx0 + 1) * 256, CV_8UC3);
  for (int ty = ty0; ty <= ty1; ++ty)
    for (int tx = tx0; tx <= tx1; ++tx) {
      const std::string bytes = tiles.tile(z, tx, ty);
      const cv::Mat raw(1, static_cast<int>(bytes.size()), CV_8UC1, const_cast<char*>(bytes.data()));
      cv::Mat img = cv::imdecode(raw, cv::IMREAD_COLOR);
      if (img.empty()) throw std::runtime_error("undecodable tile");
      if (img.cols != 256 || img.rows != 256) cv::resize(img, img, {256, 256}, 0, 0, cv::INTER_AREA);
      img.copyTo(mosaic(cv::Rect((tx - tx0) * 256, (ty - ty0) * 256, 256, 256)));
    }
  // output pixel -> mosaic pixel
  const double sx = (X1 - X0) / g.image_width_px, sy = (Y1 - Y0) / g.image_height_px;
  cv::Mat m = (cv::Mat_<double>(2, 3) << sx, 0, X0 - tx0 * 256.0, 0, sy, Y0 - ty0 * 256.0);
  cv::Mat out;
  cv::warpAffine(mosaic, out, m, {g.image_width_px, g.image_height_px}, cv::INTER_LINEAR | cv::WARP_INVERSE_MAP,
                 cv::BORDER_REPLICATE);
  return out;
}

void halo_text(cv::Mat& img, const std::string& text, cv::Point origin, double scale, const MapStyle& s) {
  cv::putText(img, text, origin, kFont, scale, bgr(s.label_halo), 4, cv::LINE_AA);
  cv::putText(img, text, origin, kFont, scale, bgr(s.label_text), 1, cv::LINE_AA);
}

void centered_text(cv::Mat& img, const std::string& text, cv::Point2d at, double scale, const MapStyle& s) {
  int base = 0;
  const cv::Size size = cv::getTextSize(text, kFont, scale, 1, &base);
  halo_text(img, text, {static_cast<int>(std::lround(at.x - size.width / 2.0)),
                        static_cast<int>(std::lround(at.y + size.height / 2.0))}, scale, s);
}

class Painter {
 public:
  Painter(cv::Mat& img, const MapGeoreference& g, const MapStyle& s) : img_(img), g_(g), s_(s) {}

  std::vector<cv::Point> fixed(const std::vector<GeoPoint>& path) const {
    std::vector<cv::Point> out;
    for (const auto& p : path) {
      const Eigen::Vector2d px = to_pixel(g_, p);
      out.emplace_back(static_cast<int>(std::lround(px.x() * kSub)), static_cast<int>(std::lround(px.y() * kSub)));
    }
    return out;
  }

  cv::Point2d pixel(const GeoPoint& p) const {
    const Eigen::Vector2d px = to_pixel(g_, p);
    return {px.x(), px.y()};
  }

  void polygon(const Geometry& poly, const std::string& label) {
    std::vector<std::vector<cv::Point>> rings;
    for (const auto& r : poly.rings) rings.push_back(fixed(r));
    if (s_.polygon.fill_alpha > 0.0) {
      cv::Mat overlay = img_.clone();
      cv::fillPoly(overlay, rings, bgr(s_.polygon.fill), cv::LINE_AA, kShift);
      cv::addWeighted(overlay, s_.polygon.fill_alpha, img_, 1.0 - s_.polygon.fill_alpha, 0.0, img_);
    }
    cv::polylines(img_, rings, true, bgr(s_.polygon.stroke), s_.polygon.stroke_width, cv::LINE_AA, kShift);
    if (!label.empty()) centered_text(img_, label, pixel(representative_point(poly)), s_.polygon.label_scale, s_);
  }

  void line(const Geometry& l, const std::string& label) {
    const auto pts = fixed(l.vertices);
    cv::polylines(img_, pts, false, bgr(s_.line.stroke), s_.line.stroke_width, cv::LINE_AA, kShift);
    if (label.empty() || l.vertices.size() < 2) return;
    // labels at regular intervals along the path
    std::vector<cv::Point2d> px;
    for (const auto& p : l.vertices) px.push_back(pixel(p));
    double total = 0.0;
    for (std::size_t i = 1; i < px.size(); ++i) total += cv::norm(px[i] - px[i - 1]);
    const double spacing = s_.line_label_spacing_px;
    std::vector<double> stops;
    if (total < spacing) stops.push_back(total / 2.0);
    for (double d = spacing / 2.0; d < total; d += spacing) stops.push_back(d);
    std::size_t seg = 1;
    double walked = 0.0;
    for (double stop : stops) {
      while (seg < px.size() && walked + cv::norm(px[seg] - px[seg - 1]) < stop) walked += cv::norm(px[seg] - px[seg - 1]), ++seg;
      if (seg >= px.size()) break;
      const double len = cv::norm(px[seg] - px[seg - 1]);
      const double t = len > 0.0 ? (stop - walked) / len : 0.0;
      const cv::Point2d at = px[seg - 1] + t * (px[seg] - px[seg - 1]);
      if (at.x >= 0 && at.y >= 0 && at.x < img_.cols && at.y < img_.rows)
        centered_text(img_, label, at + cv::Point2d(0, -12), s_.line.label_scale, s_);
    }
  }

  void point(const GeoPoint& p, const std::string& label) {
    const cv::Point2d at = pixel(p);
    const cv::Point c(static_cast<int>(std::lround(at.x * kSub)), static_cast<int>(std::lround(at.y * kSub)));
    const int r = s_.marker_radius * static_cast<int>(kSub);
    cv::circle(img_, c, r, bgr(s_.point.fill), cv::FILLED, cv::LINE_AA, kShift);
    cv::circle(img_, c, r, bgr(s_.point.stroke), s_.point.stroke_width, cv::LINE_AA, kShift);
    if (!label.empty())
      halo_text(img_, label,
                {static_cast<int>(std::lround(at.x)) + s_.marker_radius + 4,
                 static_cast<int>(std::lround(at.y)) + s_.marker_radius / 2},
                s_.point.label_scale, s_);
  }

  void draw(const Geometry& g, GeometryKind pass, const std::string& label) {
    if (g.kind == GeometryKind::multi) {
      for (const auto& p : g.parts) draw(p, pass, label);
      return;
    }
    if (g.kind != pass || g.empty()) return;
    if (pass == GeometryKind::polygon) polygon(g, label);
    else if (pass == GeometryKind::line) line(g, label);
    else point(g.vertices[0], label);
  }

 private:
  cv::Mat& img_;
  const MapGeoreference& g_;
  const MapStyle& s_;
};

void draw_grid(cv::Mat& img, const MapGeoreference& g, const MapStyle& s, std::vector<std::string>& labels) {
  const double cw = static_cast<double>(g.image_width_px) / g.grid.cols;
  const double ch = static_cast<double>(g.image_height_px) / g.grid.rows;
  for (int i = 0; i <= g.grid.cols; ++i) {
    const int x = std::min(g.image_width_px - 1, static_cast<int>(std::lround(i * cw)));
    cv::line(img, {x, 0}, {x, g.image_height_px - 1}, bgr(s.grid), s.grid_width, cv::LINE_8);
  }
  for (int j = 0; j <= g.grid.rows; ++j) {
    const int y = std::min(g.image_height_px - 1, static_cast<int>(std::lround(j * ch)));
    cv::line(img, {0, y}, {g.image_width_px - 1, y}, bgr(s.grid), s.grid_width, cv::LINE_8);
  }
  for (int y = 1; y <= g.grid.rows; ++y)
    for (int x = 1; x <= g.grid.cols; ++x) {
      const std::string label = label_for_index(g.grid, {x, y});
      int base = 0;
      const cv::Size size = cv::getTextSize(label, kFont, s.grid_label_scale, 1, &base);
      const cv::Point origin(static_cast<int>(std::lround((x - 1) * cw)) + 4,
                             static_cast<int>(std::lround((y - 1) * ch)) + 4 + size.height);
      halo_text(img, label, origin, s.grid_label_scale, s);
      labels.push_back(label);
    }
}

}  // namespace

MapExcerpt render_map(const GridLayout& layout, const std::vector<GazetteerFeature>& features,
                      const std::vector<std::string>& unresolved, const MapStyle& style,
                      const RenderOptions& options) {
  validate_extent(layout.extent);
  validate_grid(layout.grid);
  if (options.target_width_px < layout.grid.cols) throw MapStyleError("image narrower than the grid");

  MapExcerpt out;
  out.unresolved_names = unresolved;
  MapGeoreference& g = out.georef;
  g.extent = layout.extent;
  g.grid = layout.grid;
  // whole-pixel square cells
  const int cell_px = std::max(1, static_cast<int>(std::lround(double(options.target_width_px) / layout.grid.cols)));
  g.image_width_px = cell_px * layout.grid.cols;
  g.image_height_px = cell_px * layout.grid.rows;

  cv::Mat img;
  if (options.tiles) {
    try {
      img = basemap(g, *options.tiles);
    } catch (const std::exception&) {
      out.no_basemap = true;
    }
  }
  if (img.empty()) img = cv::Mat(g.image_height_px, g.image_width_px, CV_8UC3, bgr(style.background));

  Painter painter(img, g, style);
  for (const auto& f : features)
    if (!f.geometry.empty() && f.geometry.bbox().intersects(g.extent)) out.features_drawn.push_back(f.name);
  for (GeometryKind pass : {GeometryKind::polygon, GeometryKind::line, GeometryKind::point})
    for (const auto& f : features)
      if (f.geometry.bbox().intersects(g.extent)) painter.draw(f.geometry, pass, ascii_label(f.name));
  draw_grid(img, g, style, out.cell_labels);

  std::vector<uchar> buf;
  cv::imencode(".png", img, buf, {cv::IMWRITE_PNG_COMPRESSION, 6});
  out.png.assign(buf.begin(), buf.end());
  return out;
}

std::string pixel_hash(const std::string& png) {
  const cv::Mat raw(1, static_cast<int>(png.size()), CV_8UC1, const_cast<char*>(png.data()));
  const cv::Mat img = cv::imdecode(raw, cv::IMREAD_UNCHANGED);
  if (img.empty()) throw std::runtime_error("not a decodable image");
  const cv::Mat flat = img.isContinuous() ? img : img.clone();
  const std::string header = std::to_string(img.cols) + "x" + std::to_string(img.rows) + "x" +
                             std::to_string(img.channels()) + "\n";
  return sha256_hex(header + std::string(reinterpret_cast<const char*>(flat.data), flat.total() * flat.elemSize()));
}

nlohmann::json excerpt_sidecar(const MapExcerpt& e) {
  return {{"schema_version", 1},
          {"georeference", e.georef},
          {"features_drawn", e.features_drawn},
          {"unresolved_names", e.unresolved_names},
          {"no_basemap", e.no_basemap}};
}

void save_excerpt(const MapExcerpt& excerpt, const std::filesystem::path& png_path) {
  write_file_atomic(png_path, excerpt.png);
  auto sidecar = png_path;
  sidecar.replace_extension(".json");
  write_file_atomic(sidecar, excerpt_sidecar(excerpt).dump(2) + "\n");
}

}  // namespace georef
