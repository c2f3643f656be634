#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "georef/gazetteer.hpp"
#include "georef/grid.hpp"
#include "georef/parser.hpp"

namespace georef {

class MapgenError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExtentOptions {
  double buffer_factor = 1.5;   // relatum buffer = distance x factor
  double min_extent_km = 1.0;   // floor per side for point-like extents
  double padding = 0.10;        // fraction of the projected span added per side
  double aspect = 1.0;          // target width / height in projected space
  bool clip_lines = true;
  double line_area_ratio = 4.0; // lines whose bbox exceeds this x the non-linear area get clipped
};

/// Features keyed by the mention name they resolve.
using FeatureMap = std::map<std::string, GazetteerFeature>;

struct ExtentPlan {
  MapExtent extent;
  FeatureMap features;                    // survivors, long lines clipped
  std::vector<std::string> dropped_parents;
  std::vector<std::string> clipped;
};

/// Drops containment parents, buffers relata by distance x factor, clips long
/// lines to the window of the non-linear features, pads and matches the aspect.
/// Throws MapgenError("nothing to map") without features.
ExtentPlan plan_extent(const FeatureMap& features, const std::vector<RelationTriple>& triples,
                       const std::vector<ContainmentPair>& containment, const ExtentOptions& options = {});

inline MapExtent compute_extent(const FeatureMap& features, const std::vector<RelationTriple>& triples,
                                const std::vector<ContainmentPair>& containment, const ExtentOptions& options = {}) {
  return plan_extent(features, triples, containment, options).extent;
}

/// Line members of each feature clipped to `window`. A line missing the window
/// keeps the part within a window grown to reach it (1.1 x the gap).
FeatureMap clip_linear_features(const FeatureMap& features, const GeoBox& window);

/// Pads by `fraction` of the projected span per side and grows the shorter axis to `aspect`.
MapExtent pad_to_aspect(const GeoBox& box, double fraction, double aspect);

struct GridOptions {
  int max_cells_per_axis = 12;
  double cells_across = 10.0;  // target_cell_km = extent width / cells_across
  std::optional<double> target_cell_km;
};

GridLayout grid_for_extent(const MapExtent& extent, const GridOptions& options = {});

}  // namespace georef
