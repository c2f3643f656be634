#pragma once

#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "georef/geo.hpp"

namespace georef {

class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class GeometryKind { point, line, polygon, multi };

/// Closed ring: first vertex repeated at the end.
using Ring = std::vector<GeoPoint>;

/// WGS84 geometry following GeoJSON structure. `multi` holds its members in
/// `parts` (MultiPoint, MultiLineString, MultiPolygon, GeometryCollection).
struct Geometry {
  GeometryKind kind = GeometryKind::point;
  std::vector<GeoPoint> vertices;  // point: one vertex; line: the path
  std::vector<Ring> rings;         // polygon: outer ring, then holes
  std::vector<Geometry> parts;     // multi

  static Geometry point(const GeoPoint& p);
  static Geometry line(std::vector<GeoPoint> path);
  /// Closes open rings.
  static Geometry polygon(std::vector<Ring> rings);
  static Geometry multi(std::vector<Geometry> parts);

  GeoBox bbox() const;
  bool empty() const;
  friend bool operator==(const Geometry&, const Geometry&) = default;
};

/// point < line < polygon; a multi-geometry ranks as its most complex member.
int complexity(const Geometry& g);
/// Kind of the most complex member (the kind itself for simple geometries).
GeometryKind effective_kind(const Geometry& g);
std::string_view to_string(GeometryKind k);

/// Even-odd test against polygon members (holes excluded). False for points and lines.
bool covers(const Geometry& g, const GeoPoint& p);
bool point_in_ring(const Ring& ring, const GeoPoint& p);

/// Point for a geometry: the point itself; the middle vertex of a line; the
/// area centroid of a polygon, or its pole of inaccessibility when the
/// centroid falls outside. Throws GeometryError on geometry without vertices.
GeoPoint representative_point(const Geometry& g);

/// Pole of inaccessibility of a polygon (outer ring + holes), in lon/lat degrees.
GeoPoint pole_of_inaccessibility(const std::vector<Ring>& rings, double precision_deg = 1e-6);

/// Portions of a polyline inside a box, one path per contiguous piece.
std::vector<std::vector<GeoPoint>> clip_polyline(const std::vector<GeoPoint>& path, const GeoBox& box);
/// Smallest haversine distance from `box` to any vertex of the line members of `g`.
double distance_to_box_km(const Geometry& g, const GeoBox& box);

Geometry geometry_from_geojson(const nlohmann::json& j);
nlohmann::json geometry_to_geojson(const Geometry& g);

}  // namespace georef
