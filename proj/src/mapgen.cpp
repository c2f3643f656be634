#include "georef/mapgen.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace georef {

MapExtent pad_to_aspect(const GeoBox& box, double fraction, double aspect) {
  Eigen::AlignedBox2d p = project(box);
  Eigen::Vector2d size = p.sizes();
  const Eigen::Vector2d center = p.center();
  size *= 1.0 + 2.0 * fraction;
  if (size.x() < size.y() * aspect) size.x() = size.y() * aspect;
  else size.y() = size.x() / aspect;
  p = Eigen::AlignedBox2d(center - size / 2.0, center + size / 2.0);
  GeoBox out = unproject(p);
  out.min_lat = std::max(out.min_lat, -kMaxMercatorLat);
  out.max_lat = std::min(out.max_lat, kMaxMercatorLat);
  return out;
}

namespace {

Geometry clip_geometry(const Geometry& g, const GeoBox& window) {
  switch (g.kind) {
    case GeometryKind::line: {
      std::vector<Geometry> pieces;
      for (auto& path : clip_polyline(g.vertices, window))
        if (path.size() >= 2) pieces.push_back(Geometry::line(std::move(path)));
      if (pieces.size() == 1) return pieces.front();
      return Geometry::multi(std::move(pieces));
    }
    case GeometryKind::multi: {
      std::vector<Geometry> parts;
      for (const auto& p : g.parts) {
        Geometry c = clip_geometry(p, window);
        if (!c.empty()) parts.push_back(std::move(c));
      }
      return Geometry::multi(std::move(parts));
    }
    default:
      return window.intersects(g.bbox()) ? g : Geometry::multi({});
  }
}

bool is_linear(const GazetteerFeature& f) { return effective_kind(f.geometry) == GeometryKind::line; }

}  // namespace

FeatureMap clip_linear_features(const FeatureMap& features, const GeoBox& window) {
  FeatureMap out = features;
  for (auto& [name, f] : out) {
    if (!is_linear(f)) continue;
    GeoBox w = window;
    Geometry clipped = clip_geometry(f.geometry, w);
    if (clipped.empty()) {
      // keep a section of the line: reach out to it
      const double gap = distance_to_box_km(f.geometry, window);
      if (!std::isfinite(gap)) continue;
      w = buffered(window, 1.1 * gap + 1e-6);
      clipped = clip_geometry(f.geometry, w);
    }
    if (!clipped.empty()) f.geometry = std::move(clipped);
  }
  return out;
}

ExtentPlan plan_extent(const FeatureMap& features, const std::vector<RelationTriple>& triples,
                       const std::vector<ContainmentPair>& containment, const ExtentOptions& options) {
  if (features.empty()) throw MapgenError("nothing to map");
  if (!(options.buffer_factor >= 0.0) || !(options.min_extent_km > 0.0) || !(options.aspect > 0.0))
    throw MapgenError("invalid extent options");

  ExtentPlan plan;
  // rule 1: a parent of another resolved feature is not drawn to full extent
  std::set<std::string> parents;
  for (const auto& c : containment) {
    const std::string& p = canonical_name(c.parent);
    const std::string& ch = canonical_name(c.child);
    if (p != ch && features.contains(p) && features.contains(ch)) parents.insert(p);
  }
  for (const auto& [name, f] : features) {
    if (parents.contains(name)) plan.dropped_parents.push_back(name);
    else plan.features.emplace(name, f);
  }
  if (plan.features.empty()) throw MapgenError("nothing to map");

  // rule 3: buffer each relatum by its largest distance
  std::map<std::string, double> buffer_km;
  for (const auto& t : triples) {
    if (!t.distance_km || !resolvable(t.relatum)) continue;
    const std::string& name = canonical_name(t.relatum);
    if (!plan.features.contains(name)) continue;
    buffer_km[name] = std::max(buffer_km[name], *t.distance_km * options.buffer_factor);
  }
  const auto coverage = [&](const std::string& name, const GazetteerFeature& f) {
    const auto it = buffer_km.find(name);
    return it == buffer_km.end() ? f.geometry.bbox() : buffered(f.geometry.bbox(), it->second);
  };

  GeoBox nonlinear;
  for (const auto& [name, f] : plan.features)
    if (!is_linear(f)) nonlinear.extend(coverage(name, f));

  std::set<std::string> clipped;
  if (options.clip_lines && !nonlinear.empty()) {
    const GeoBox window = with_min_size(nonlinear, options.min_extent_km);
    FeatureMap long_lines;
    for (const auto& [name, f] : plan.features)
      if (is_linear(f) && f.geometry.bbox().area_km2() > options.line_area_ratio * window.area_km2())
        long_lines.emplace(name, f);
    for (auto& [name, f] : clip_linear_features(long_lines, window)) {
      plan.features[name] = std::move(f);
      clipped.insert(name);
      plan.clipped.push_back(name);
    }
  }

  // rule 2: union of all remaining features
  GeoBox box;
  for (const auto& [name, f] : plan.features)
    box.extend(clipped.contains(name) ? f.geometry.bbox() : coverage(name, f));
  box = with_min_size(box, options.min_extent_km);
  plan.extent = pad_to_aspect(box, options.padding, options.aspect);
  validate_extent(plan.extent);
  return plan;
}

GridLayout grid_for_extent(const MapExtent& extent, const GridOptions& options) {
  if (options.max_cells_per_axis <= 0 || !(options.cells_across > 0.0)) throw MapgenError("invalid grid options");
  const double target = options.target_cell_km.value_or(std::max(extent.width_km(), extent.height_km()) /
                                                        options.cells_across);
  return make_grid(extent, target, options.max_cells_per_axis);
}

}  // namespace georef
