#pragma once

#include <cmath>
#include <cstdlib>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "georef/geo.hpp"
#include "georef/grid.hpp"

namespace georef {

// Grid-cell distance metrics. Cells are unit squares scaled by `scale_km`.

template <typename Scalar>
Scalar centroid_distance(const CellIndex& a, const CellIndex& b, Scalar scale_km) {
  const Scalar dx = Scalar(std::abs(b.x - a.x));
  const Scalar dy = Scalar(std::abs(b.y - a.y));
  using std::sqrt;
  return sqrt(dx * dx + dy * dy) * scale_km;
}

/// Distance between the two furthest corners of the cells.
template <typename Scalar>
Scalar max_distance(const CellIndex& a, const CellIndex& b, Scalar scale_km) {
  const Scalar dx = Scalar(std::abs(b.x - a.x) + 1);
  const Scalar dy = Scalar(std::abs(b.y - a.y) + 1);
  using std::sqrt;
  return sqrt(dx * dx + dy * dy) * scale_km;
}

/// Distance between the closest points of the cells; zero for same or adjacent cells.
template <typename Scalar>
Scalar min_distance(const CellIndex& a, const CellIndex& b, Scalar scale_km) {
  const int adx = std::abs(b.x - a.x);
  const int ady = std::abs(b.y - a.y);
  const Scalar dx = Scalar(std::min(std::abs(adx - 1), adx));
  const Scalar dy = Scalar(std::min(std::abs(ady - 1), ady));
  using std::sqrt;
  return sqrt(dx * dx + dy * dy) * scale_km;
}

/// Simple accuracy error: great-circle distance in km.
inline double sae(const GeoPoint& pred, const GeoPoint& truth) { return haversine_km(pred, truth); }

/// Percentage of scores strictly below the radius. Empty when there is nothing to score.
std::optional<double> acc_at(std::span<const double> scores_km, double radius_km);
/// Per-item radius variant (acc@scale).
std::optional<double> acc_at(std::span<const double> scores_km, std::span<const double> radius_km);

struct ItemScore {
  std::string item_id;
  std::optional<double> centroid_km;
  std::optional<double> max_km;
  std::optional<double> min_km;
  std::optional<double> sae_km;
  double scale_km = 0.0;
};

struct MetricReport {
  std::string method;
  std::optional<double> average_km;
  std::optional<double> acc_1km;
  std::optional<double> acc_3km;
  std::optional<double> acc_10km;
  std::optional<double> acc_scale;
  int n_items = 0;
  int n_unparseable = 0;
};

class EvalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// What to do with items whose prediction is empty.
enum class Imputation {
  exclude,     // counted in n_unparseable, left out of averages and accuracies
  worst_case,  // scored as the largest value of the metric over every cell of the grid
};

/// Ground truth needed to score one item.
struct ScoringTarget {
  std::string item_id;
  GeoPoint location;
  std::string label;
  double scale_km = 0.0;
  GridSpec grid;
};

/// Scores grid-cell predictions (first cell only) and returns the min, max and
/// centroid rows in that order. `predicted` maps item id to the predicted label;
/// an absent optional means the response was unparseable.
std::vector<MetricReport> aggregate_grid_report(
    const std::vector<ScoringTarget>& targets,
    const std::map<std::string, std::optional<std::string>>& predicted, const std::string& method,
    Imputation imputation = Imputation::exclude, std::vector<ItemScore>* scores = nullptr);

/// Scores coordinate predictions with SAE. Returns one row.
MetricReport aggregate_coordinate_report(
    const std::vector<ScoringTarget>& targets,
    const std::map<std::string, std::optional<GeoPoint>>& predicted, const std::string& method,
    std::vector<ItemScore>* scores = nullptr);

/// Table-shaped CSV: method,average_km,acc@1,acc@3,acc@10,acc@scale,n,n_unparseable.
/// Values rounded to two decimals; absent values are empty cells.
std::string report_csv(const std::vector<MetricReport>& rows);
/// Full-precision JSON; absent values are null.
nlohmann::json report_json(const std::vector<MetricReport>& rows);

}  // namespace georef
