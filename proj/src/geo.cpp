#include "georef/geo.hpp"

#include <cstdio>

namespace georef {

namespace {
constexpr double kKmPerDegreeLat = kEarthRadiusKm * std::numbers::pi / 180.0;

double km_per_degree_lon(double lat) {
  return std::max(1e-9, kKmPerDegreeLat * std::cos(deg2rad(lat)));
}
}  // namespace

GeoBox buffered(const GeoBox& box, double km) {
  if (box.empty() || km <= 0.0) return box;
  const double dlat = km / kKmPerDegreeLat;
  // widest parallel of the box gives the smallest degree step, so use the pole-ward edge
  const double edge_lat = std::max(std::abs(box.min_lat), std::abs(box.max_lat));
  const double dlon = km / km_per_degree_lon(edge_lat);
  GeoBox out{box.min_lat - dlat, box.min_lon - dlon, box.max_lat + dlat, box.max_lon + dlon};
  out.min_lat = std::max(out.min_lat, -kMaxMercatorLat);
  out.max_lat = std::min(out.max_lat, kMaxMercatorLat);
  return out;
}

GeoBox with_min_size(const GeoBox& box, double min_km) {
  if (box.empty()) return box;
  GeoBox out = box;
  const GeoPoint c = box.center();
  if (box.height_km() < min_km) {
    const double half = min_km / 2.0 / kKmPerDegreeLat;
    out.min_lat = c.lat - half;
    out.max_lat = c.lat + half;
  }
  if (out.width_km() < min_km) {
    const double half = min_km / 2.0 / km_per_degree_lon(c.lat);
    out.min_lon = c.lon - half;
    out.max_lon = c.lon + half;
  }
  return out;
}

GeoBox intersection(const GeoBox& a, const GeoBox& b) {
  GeoBox out{std::max(a.min_lat, b.min_lat), std::max(a.min_lon, b.min_lon),
             std::min(a.max_lat, b.max_lat), std::min(a.max_lon, b.max_lon)};
  return out.empty() ? GeoBox{} : out;
}

std::string to_string(const GeoPoint& p) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "(%.6f, %.6f)", p.lat, p.lon);
  return buf;
}

}  // namespace georef
