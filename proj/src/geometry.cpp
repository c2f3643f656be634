#include "georef/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

namespace georef {

Geometry Geometry::point(const GeoPoint& p) {
  Geometry g;
  g.kind = GeometryKind::point;
  g.vertices = {p};
  return g;
}

Geometry Geometry::line(std::vector<GeoPoint> path) {
  Geometry g;
  g.kind = GeometryKind::line;
  g.vertices = std::move(path);
  return g;
}

Geometry Geometry::polygon(std::vector<Ring> rings) {
  Geometry g;
  g.kind = GeometryKind::polygon;
  for (auto& r : rings)
    if (!r.empty() && r.front() != r.back()) r.push_back(r.front());
  g.rings = std::move(rings);
  return g;
}

Geometry Geometry::multi(std::vector<Geometry> parts) {
  Geometry g;
  g.kind = GeometryKind::multi;
  g.parts = std::move(parts);
  return g;
}

GeoBox Geometry::bbox() const {
  GeoBox b;
  for (const auto& p : vertices) b.extend(p);
  for (const auto& r : rings)
    for (const auto& p : r) b.extend(p);
  for (const auto& part : parts) b.extend(part.bbox());
  return b;
}

bool Geometry::empty() const { return bbox().empty(); }

int complexity(const Geometry& g) {
  switch (g.kind) {
    case GeometryKind::point: return 1;
    case GeometryKind::line: return 2;
    case GeometryKind::polygon: return 3;
    case GeometryKind::multi: break;
  }
  int best = 0;
  for (const auto& p : g.parts) best = std::max(best, complexity(p));
  return best;
}

GeometryKind effective_kind(const Geometry& g) {
  switch (complexity(g)) {
    case 3: return GeometryKind::polygon;
    case 2: return GeometryKind::line;
    default: return GeometryKind::point;
  }
}

std::string_view to_string(GeometryKind k) {
  switch (k) {
    case GeometryKind::point: return "point";
    case GeometryKind::line: return "line";
    case GeometryKind::polygon: return "polygon";
    case GeometryKind::multi: return "multi";
  }
  return "?";
}

bool point_in_ring(const Ring& ring, const GeoPoint& p) {
  bool inside = false;
  for (std::size_t i = 0, j = ring.size() - 1; i < ring.size(); j = i++) {
    const GeoPoint& a = ring[i];
    const GeoPoint& b = ring[j];
    if ((a.lat > p.lat) != (b.lat > p.lat) &&
        p.lon < (b.lon - a.lon) * (p.lat - a.lat) / (b.lat - a.lat) + a.lon)
      inside = !inside;
  }
  return inside;
}

namespace {

bool in_polygon(const std::vector<Ring>& rings, const GeoPoint& p) {
  if (rings.empty() || !point_in_ring(rings[0], p)) return false;
  for (std::size_t i = 1; i < rings.size(); ++i)
    if (point_in_ring(rings[i], p)) return false;
  return true;
}

double segment_distance_sq(const GeoPoint& p, const GeoPoint& a, const GeoPoint& b) {
  double x = a.lon, y = a.lat;
  double dx = b.lon - x, dy = b.lat - y;
  if (dx != 0.0 || dy != 0.0) {
    const double t = ((p.lon - x) * dx + (p.lat - y) * dy) / (dx * dx + dy * dy);
    if (t > 1) {
      x = b.lon;
      y = b.lat;
    } else if (t > 0) {
      x += dx * t;
      y += dy * t;
    }
  }
  dx = p.lon - x;
  dy = p.lat - y;
  return dx * dx + dy * dy;
}

/// Signed distance to the polygon outline, positive inside.
double signed_distance(const std::vector<Ring>& rings, const GeoPoint& p) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& r : rings)
    for (std::size_t i = 0, j = r.size() - 1; i < r.size(); j = i++)
      best = std::min(best, segment_distance_sq(p, r[i], r[j]));
  return (in_polygon(rings, p) ? 1.0 : -1.0) * std::sqrt(best);
}

// Area-weighted centroid of polygons in lon/lat space; holes subtract.
struct Moments {
  double area = 0.0, cx = 0.0, cy = 0.0;
  void add_ring(const Ring& r, double sign) {
    for (std::size_t i = 0; i + 1 < r.size(); ++i) {
      const double cross = r[i].lon * r[i + 1].lat - r[i + 1].lon * r[i].lat;
      area += sign * cross / 2.0;
      cx += sign * (r[i].lon + r[i + 1].lon) * cross / 6.0;
      cy += sign * (r[i].lat + r[i + 1].lat) * cross / 6.0;
    }
  }
};

double ring_signed_area(const Ring& r) {
  Moments m;
  m.add_ring(r, 1.0);
  return m.area;
}

void collect(const Geometry& g, GeometryKind kind, std::vector<const Geometry*>& out) {
  if (g.kind == GeometryKind::multi) {
    for (const auto& p : g.parts) collect(p, kind, out);
  } else if (g.kind == kind) {
    out.push_back(&g);
  }
}

double path_length_km(const std::vector<GeoPoint>& path) {
  double len = 0.0;
  for (std::size_t i = 1; i < path.size(); ++i) len += haversine_km(path[i - 1], path[i]);
  return len;
}

}  // namespace

bool covers(const Geometry& g, const GeoPoint& p) {
  std::vector<const Geometry*> polys;
  collect(g, GeometryKind::polygon, polys);
  return std::any_of(polys.begin(), polys.end(), [&](const Geometry* q) { return in_polygon(q->rings, p); });
}

GeoPoint pole_of_inaccessibility(const std::vector<Ring>& rings, double precision) {
  if (rings.empty() || rings[0].size() < 3) throw GeometryError("polygon needs a ring of at least 3 vertices");
  GeoBox box;
  for (const auto& p : rings[0]) box.extend(p);
  const double w = box.max_lon - box.min_lon;
  const double h = box.max_lat - box.min_lat;
  const double size = std::min(w, h);
  if (!(size > 0.0)) return box.center();

  struct Cell {
    GeoPoint c;
    double half, d, max;
  };
  const auto make = [&](double lat, double lon, double half) {
    const GeoPoint c{lat, lon};
    const double d = signed_distance(rings, c);
    return Cell{c, half, d, d + half * std::sqrt(2.0)};
  };
  const auto cmp = [](const Cell& a, const Cell& b) { return a.max < b.max; };
  std::priority_queue<Cell, std::vector<Cell>, decltype(cmp)> queue(cmp);

  const double half = size / 2.0;
  for (double lon = box.min_lon; lon < box.max_lon; lon += size)
    for (double lat = box.min_lat; lat < box.max_lat; lat += size) queue.push(make(lat + half, lon + half, half));

  Moments m;
  m.add_ring(rings[0], 1.0);
  Cell best = make(box.center().lat, box.center().lon, 0.0);
  if (m.area != 0.0) {
    const Cell centroid = make(m.cy / m.area, m.cx / m.area, 0.0);
    if (centroid.d > best.d) best = centroid;
  }
  while (!queue.empty()) {
    const Cell cell = queue.top();
    queue.pop();
    if (cell.d > best.d) best = cell;
    if (cell.max - best.d <= precision) continue;
    const double h2 = cell.half / 2.0;
    queue.push(make(cell.c.lat - h2, cell.c.lon - h2, h2));
    queue.push(make(cell.c.lat - h2, cell.c.lon + h2, h2));
    queue.push(make(cell.c.lat + h2, cell.c.lon - h2, h2));
    queue.push(make(cell.c.lat + h2, cell.c.lon + h2, h2));
  }
  return best.c;
}

GeoPoint representative_point(const Geometry& g) {
  if (g.empty()) throw GeometryError("geometry has no vertices");
  switch (effective_kind(g)) {
    case GeometryKind::polygon: {
      std::vector<const Geometry*> polys;
      collect(g, GeometryKind::polygon, polys);
      Moments m;
      for (const Geometry* p : polys) {
        if (p->rings.empty()) continue;
        // orient so the outer ring counts positive and holes negative
        const double outer = ring_signed_area(p->rings[0]) >= 0 ? 1.0 : -1.0;
        m.add_ring(p->rings[0], outer);
        for (std::size_t i = 1; i < p->rings.size(); ++i)
          m.add_ring(p->rings[i], ring_signed_area(p->rings[i]) >= 0 ? -1.0 : 1.0);
      }
      if (m.area > 0.0) {
        const GeoPoint c{m.cy / m.area, m.cx / m.area};
        if (covers(g, c)) return c;
      }
      const Geometry* largest = polys.front();
      for (const Geometry* p : polys)
        if (std::abs(ring_signed_area(p->rings[0])) > std::abs(ring_signed_area(largest->rings[0]))) largest = p;
      if (largest->rings.empty() || largest->rings[0].size() < 4) return g.bbox().center();
      return pole_of_inaccessibility(largest->rings);
    }
    case GeometryKind::line: {
      std::vector<const Geometry*> lines;
      collect(g, GeometryKind::line, lines);
      const Geometry* longest = nullptr;
      for (const Geometry* l : lines)
        if (!l->vertices.empty() && (!longest || path_length_km(l->vertices) > path_length_km(longest->vertices)))
          longest = l;
      return longest->vertices[(longest->vertices.size() - 1) / 2];
    }
    default: {
      std::vector<const Geometry*> points;
      collect(g, GeometryKind::point, points);
      if (points.size() == 1) return points[0]->vertices.at(0);
      double lat = 0.0, lon = 0.0;
      for (const Geometry* p : points) {
        lat += p->vertices.at(0).lat;
        lon += p->vertices.at(0).lon;
      }
      return {lat / static_cast<double>(points.size()), lon / static_cast<double>(points.size())};
    }
  }
}

std::vector<std::vector<GeoPoint>> clip_polyline(const std::vector<GeoPoint>& path, const GeoBox& box) {
  std::vector<std::vector<GeoPoint>> out;
  if (box.empty()) return out;
  if (path.size() == 1) {
    if (box.contains(path[0])) out.push_back(path);
    return out;
  }
  std::vector<GeoPoint> current;
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    const GeoPoint a = path[i], b = path[i + 1];
    // Liang-Barsky with x = lon, y = lat
    double t0 = 0.0, t1 = 1.0;
    const double dx = b.lon - a.lon, dy = b.lat - a.lat;
    const double p[4] = {-dx, dx, -dy, dy};
    const double q[4] = {a.lon - box.min_lon, box.max_lon - a.lon, a.lat - box.min_lat, box.max_lat - a.lat};
    bool visible = true;
    for (int k = 0; k < 4 && visible; ++k) {
      if (p[k] == 0.0) {
        if (q[k] < 0.0) visible = false;
      } else {
        const double r = q[k] / p[k];
        if (p[k] < 0.0) t0 = std::max(t0, r);
        else t1 = std::min(t1, r);
        if (t0 > t1) visible = false;
      }
    }
    if (!visible) {
      if (!current.empty()) out.push_back(std::move(current));
      current.clear();
      continue;
    }
    const GeoPoint s = t0 == 0.0 ? a : GeoPoint{a.lat + t0 * dy, a.lon + t0 * dx};
    const GeoPoint e = t1 == 1.0 ? b : GeoPoint{a.lat + t1 * dy, a.lon + t1 * dx};
    if (current.empty() || current.back() != s) {
      if (!current.empty()) out.push_back(std::move(current));
      current = {s};
    }
    current.push_back(e);
    if (t1 < 1.0) {
      out.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) out.push_back(std::move(current));
  return out;
}

double distance_to_box_km(const Geometry& g, const GeoBox& box) {
  double best = std::numeric_limits<double>::infinity();
  const auto visit = [&](const GeoPoint& p) {
    const GeoPoint q{std::clamp(p.lat, box.min_lat, box.max_lat), std::clamp(p.lon, box.min_lon, box.max_lon)};
    best = std::min(best, haversine_km(p, q));
  };
  std::vector<const Geometry*> lines;
  collect(g, GeometryKind::line, lines);
  for (const Geometry* l : lines)
    for (std::size_t i = 0; i < l->vertices.size(); ++i) {
      visit(l->vertices[i]);
      // sample long segments so a line passing near the box is not missed between vertices
      if (i + 1 < l->vertices.size()) {
        const GeoPoint a = l->vertices[i], b = l->vertices[i + 1];
        const int steps = std::min(1000, static_cast<int>(haversine_km(a, b) / 0.05));
        for (int s = 1; s < steps; ++s) {
          const double t = static_cast<double>(s) / steps;
          visit({a.lat + t * (b.lat - a.lat), a.lon + t * (b.lon - a.lon)});
        }
      }
    }
  return best;
}

// ---------------------------------------------------------------------------
// GeoJSON

namespace {

GeoPoint position(const nlohmann::json& j) {
  if (!j.is_array() || j.size() < 2 || !j[0].is_number() || !j[1].is_number())
    throw GeometryError("GeoJSON position must be [lon, lat]");
  const GeoPoint p{j[1].get<double>(), j[0].get<double>()};
  if (!is_valid(p)) throw GeometryError("GeoJSON position out of range");
  return p;
}

std::vector<GeoPoint> positions(const nlohmann::json& j) {
  if (!j.is_array()) throw GeometryError("GeoJSON coordinates must be an array");
  std::vector<GeoPoint> out;
  for (const auto& p : j) out.push_back(position(p));
  return out;
}

Geometry polygon_from(const nlohmann::json& j) {
  if (!j.is_array() || j.empty()) throw GeometryError("GeoJSON polygon needs at least one ring");
  std::vector<Ring> rings;
  for (const auto& r : j) {
    Ring ring = positions(r);
    if (ring.size() < 3) throw GeometryError("GeoJSON ring needs at least 3 positions");
    rings.push_back(std::move(ring));
  }
  return Geometry::polygon(std::move(rings));
}

nlohmann::json pos(const GeoPoint& p) { return nlohmann::json::array({p.lon, p.lat}); }

nlohmann::json path_json(const std::vector<GeoPoint>& path) {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& p : path) a.push_back(pos(p));
  return a;
}

nlohmann::json rings_json(const std::vector<Ring>& rings) {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& r : rings) a.push_back(path_json(r));
  return a;
}

}  // namespace

Geometry geometry_from_geojson(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("type")) throw GeometryError("GeoJSON geometry needs a type");
  const std::string type = j.at("type").get<std::string>();
  if (type == "GeometryCollection") {
    std::vector<Geometry> parts;
    for (const auto& g : j.at("geometries")) parts.push_back(geometry_from_geojson(g));
    return Geometry::multi(std::move(parts));
  }
  if (!j.contains("coordinates")) throw GeometryError("GeoJSON geometry needs coordinates");
  const auto& c = j.at("coordinates");
  if (type == "Point") return Geometry::point(position(c));
  if (type == "LineString") return Geometry::line(positions(c));
  if (type == "Polygon") return polygon_from(c);
  std::vector<Geometry> parts;
  if (type == "MultiPoint") {
    for (const auto& p : c) parts.push_back(Geometry::point(position(p)));
  } else if (type == "MultiLineString") {
    for (const auto& l : c) parts.push_back(Geometry::line(positions(l)));
  } else if (type == "MultiPolygon") {
    for (const auto& p : c) parts.push_back(polygon_from(p));
  } else {
    throw GeometryError("unsupported GeoJSON geometry type '" + type + "'");
  }
  return Geometry::multi(std::move(parts));
}

nlohmann::json geometry_to_geojson(const Geometry& g) {
  switch (g.kind) {
    case GeometryKind::point: return {{"type", "Point"}, {"coordinates", pos(g.vertices.at(0))}};
    case GeometryKind::line: return {{"type", "LineString"}, {"coordinates", path_json(g.vertices)}};
    case GeometryKind::polygon: return {{"type", "Polygon"}, {"coordinates", rings_json(g.rings)}};
    case GeometryKind::multi: break;
  }
  nlohmann::json parts = nlohmann::json::array();
  for (const auto& p : g.parts) parts.push_back(geometry_to_geojson(p));
  return {{"type", "GeometryCollection"}, {"geometries", parts}};
}

}  // namespace georef
