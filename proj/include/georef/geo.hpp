#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include <Eigen/Dense>
#include <Eigen/Geometry>

namespace georef {

/// Mean earth radius (IUGG) used for every geodesic distance in the project.
inline constexpr double kEarthRadiusKm = 6371.0088;
/// Sphere radius of the EPSG:3857 projection.
inline constexpr double kMercatorRadiusM = 6378137.0;
inline constexpr double kMaxMercatorLat = 85.051128779806589;

template <typename Scalar>
constexpr Scalar deg2rad(Scalar deg) { return deg * std::numbers::pi_v<Scalar> / Scalar(180); }
template <typename Scalar>
constexpr Scalar rad2deg(Scalar rad) { return rad * Scalar(180) / std::numbers::pi_v<Scalar>; }

struct GeoPoint {
  double lat = 0.0;
  double lon = 0.0;

  friend bool operator==(const GeoPoint&, const GeoPoint&) = default;
};

inline bool is_valid(const GeoPoint& p) {
  return std::isfinite(p.lat) && std::isfinite(p.lon) && p.lat >= -90.0 && p.lat <= 90.0 &&
         p.lon >= -180.0 && p.lon <= 180.0;
}

/// Great-circle distance on the mean-radius sphere, in kilometres.
template <typename Scalar>
Scalar haversine_km(Scalar lat1, Scalar lon1, Scalar lat2, Scalar lon2) {
  using std::asin;
  using std::cos;
  using std::min;
  using std::sin;
  using std::sqrt;
  const Scalar dlat = deg2rad(lat2 - lat1);
  const Scalar dlon = deg2rad(lon2 - lon1);
  const Scalar s1 = sin(dlat / Scalar(2));
  const Scalar s2 = sin(dlon / Scalar(2));
  const Scalar h = s1 * s1 + cos(deg2rad(lat1)) * cos(deg2rad(lat2)) * s2 * s2;
  return Scalar(2) * Scalar(kEarthRadiusKm) * asin(min(Scalar(1), sqrt(h)));
}

inline double haversine_km(const GeoPoint& a, const GeoPoint& b) {
  return haversine_km<double>(a.lat, a.lon, b.lat, b.lon);
}

/// Spherical Web Mercator, metres. x grows east, y grows north.
inline Eigen::Vector2d project(const GeoPoint& p) {
  const double lat = std::clamp(p.lat, -kMaxMercatorLat, kMaxMercatorLat);
  const double x = kMercatorRadiusM * deg2rad(p.lon);
  const double y = kMercatorRadiusM * std::log(std::tan(std::numbers::pi / 4.0 + deg2rad(lat) / 2.0));
  return {x, y};
}

inline GeoPoint unproject(const Eigen::Vector2d& xy) {
  const double lon = rad2deg(xy.x() / kMercatorRadiusM);
  const double lat = rad2deg(2.0 * std::atan(std::exp(xy.y() / kMercatorRadiusM)) - std::numbers::pi / 2.0);
  return {lat, lon};
}

/// Latitude/longitude aligned bounding box. Default-constructed boxes are empty.
struct GeoBox {
  double min_lat = std::numeric_limits<double>::infinity();
  double min_lon = std::numeric_limits<double>::infinity();
  double max_lat = -std::numeric_limits<double>::infinity();
  double max_lon = -std::numeric_limits<double>::infinity();

  static GeoBox of(const GeoPoint& p) { return {p.lat, p.lon, p.lat, p.lon}; }

  bool empty() const { return !(min_lat <= max_lat && min_lon <= max_lon); }

  GeoBox& extend(const GeoPoint& p) {
    min_lat = std::min(min_lat, p.lat);
    min_lon = std::min(min_lon, p.lon);
    max_lat = std::max(max_lat, p.lat);
    max_lon = std::max(max_lon, p.lon);
    return *this;
  }
  GeoBox& extend(const GeoBox& b) {
    if (b.empty()) return *this;
    extend(GeoPoint{b.min_lat, b.min_lon});
    return extend(GeoPoint{b.max_lat, b.max_lon});
  }

  bool contains(const GeoPoint& p) const {
    return p.lat >= min_lat && p.lat <= max_lat && p.lon >= min_lon && p.lon <= max_lon;
  }
  bool contains(const GeoBox& b) const {
    return !b.empty() && b.min_lat >= min_lat && b.max_lat <= max_lat && b.min_lon >= min_lon &&
           b.max_lon <= max_lon;
  }
  bool intersects(const GeoBox& b) const {
    return !empty() && !b.empty() && b.min_lat <= max_lat && b.max_lat >= min_lat &&
           b.min_lon <= max_lon && b.max_lon >= min_lon;
  }

  GeoPoint center() const { return {(min_lat + max_lat) / 2.0, (min_lon + max_lon) / 2.0}; }

  /// East-west extent measured along the central parallel.
  double width_km() const {
    const double lat = (min_lat + max_lat) / 2.0;
    return haversine_km<double>(lat, min_lon, lat, max_lon);
  }
  double height_km() const { return haversine_km<double>(min_lat, min_lon, max_lat, min_lon); }
  double area_km2() const { return empty() ? 0.0 : width_km() * height_km(); }

  friend bool operator==(const GeoBox&, const GeoBox&) = default;
};

/// Grows a box by `km` on every side (flat-earth step sizes at the box's latitude).
GeoBox buffered(const GeoBox& box, double km);

/// Grows each axis to at least `min_km`, keeping the centre.
GeoBox with_min_size(const GeoBox& box, double min_km);

GeoBox intersection(const GeoBox& a, const GeoBox& b);

/// Projected counterpart of a lat/lon box.
inline Eigen::AlignedBox2d project(const GeoBox& b) {
  return {project(GeoPoint{b.min_lat, b.min_lon}), project(GeoPoint{b.max_lat, b.max_lon})};
}

inline GeoBox unproject(const Eigen::AlignedBox2d& b) {
  const GeoPoint lo = unproject(Eigen::Vector2d(b.min()));
  const GeoPoint hi = unproject(Eigen::Vector2d(b.max()));
  return {lo.lat, lo.lon, hi.lat, hi.lon};
}

std::string to_string(const GeoPoint& p);

}  // namespace georef
