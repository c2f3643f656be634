#include "georef/eval.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <functional>
#include <numeric>
#include <set>
#include <sstream>

namespace georef {

std::optional<double> acc_at(std::span<const double> scores, double radius_km) {
  if (!(radius_km > 0.0)) throw EvalError("acc@r radius must be positive");
  if (scores.empty()) return std::nullopt;
  const auto hits = std::count_if(scores.begin(), scores.end(), [&](double s) { return s < radius_km; });
  return 100.0 * static_cast<double>(hits) / static_cast<double>(scores.size());
}

std::optional<double> acc_at(std::span<const double> scores, std::span<const double> radius) {
  if (scores.size() != radius.size()) throw EvalError("acc@r needs one radius per score");
  if (scores.empty()) return std::nullopt;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!(radius[i] > 0.0)) throw EvalError("acc@r radius must be positive");
    if (scores[i] < radius[i]) ++hits;
  }
  return 100.0 * static_cast<double>(hits) / static_cast<double>(scores.size());
}

namespace {

using CellMetric = std::function<double(const CellIndex&, const CellIndex&, double)>;

MetricReport summarise(const std::string& method, const std::vector<double>& values,
                       const std::vector<double>& scales, int n_items, int n_unparseable) {
  MetricReport r;
  r.method = method;
  r.n_items = n_items;
  r.n_unparseable = n_unparseable;
  if (!values.empty()) {
    r.average_km = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    r.acc_1km = acc_at(values, 1.0);
    r.acc_3km = acc_at(values, 3.0);
    r.acc_10km = acc_at(values, 10.0);
    r.acc_scale = acc_at(values, scales);
  }
  return r;
}

void check_alignment(const std::vector<ScoringTarget>& targets, const auto& predicted) {
  std::set<std::string> ids;
  for (const auto& t : targets) {
    if (!ids.insert(t.item_id).second) throw EvalError("duplicate item id '" + t.item_id + "'");
    if (!predicted.contains(t.item_id)) throw EvalError("no prediction for item '" + t.item_id + "'");
  }
  for (const auto& [id, _] : predicted)
    if (!ids.contains(id)) throw EvalError("prediction for unknown item '" + id + "'");
}

double worst_over_grid(const CellMetric& metric, const CellIndex& truth, const GridSpec& grid, double scale) {
  double worst = 0.0;
  // every metric grows with |dx|,|dy|, so a corner cell is the worst case
  for (int x : {1, grid.cols})
    for (int y : {1, grid.rows}) worst = std::max(worst, metric(truth, CellIndex{x, y}, scale));
  return worst;
}

}  // namespace

std::vector<MetricReport> aggregate_grid_report(
    const std::vector<ScoringTarget>& targets,
    const std::map<std::string, std::optional<std::string>>& predicted, const std::string& method,
    Imputation imputation, std::vector<ItemScore>* scores) {
  check_alignment(targets, predicted);

  const std::array<std::pair<const char*, CellMetric>, 3> metrics{{
      {"min", [](const CellIndex& a, const CellIndex& b, double s) { return min_distance(a, b, s); }},
      {"max", [](const CellIndex& a, const CellIndex& b, double s) { return max_distance(a, b, s); }},
      {"centroid", [](const CellIndex& a, const CellIndex& b, double s) { return centroid_distance(a, b, s); }},
  }};

  std::array<std::vector<double>, 3> values;
  std::vector<double> scales;
  int unparseable = 0;
  if (scores) scores->clear();

  for (const auto& t : targets) {
    if (!(t.scale_km > 0.0)) throw EvalError("item '" + t.item_id + "' has non-positive scale");
    const CellIndex truth = index_for_label(t.grid, t.label);
    const auto& pred = predicted.at(t.item_id);
    std::optional<CellIndex> cell;
    if (pred) {
      if (auto parsed = parse_label(*pred); parsed && in_grid(t.grid, *parsed)) cell = parsed;
    }

    ItemScore score{t.item_id, {}, {}, {}, {}, t.scale_km};
    if (!cell) {
      ++unparseable;
      if (imputation == Imputation::exclude) {
        if (scores) scores->push_back(score);
        continue;
      }
    }
    std::array<double, 3> v{};
    for (std::size_t m = 0; m < metrics.size(); ++m)
      v[m] = cell ? metrics[m].second(truth, *cell, t.scale_km)
                  : worst_over_grid(metrics[m].second, truth, t.grid, t.scale_km);
    for (std::size_t m = 0; m < metrics.size(); ++m) values[m].push_back(v[m]);
    scales.push_back(t.scale_km);
    score.min_km = v[0];
    score.max_km = v[1];
    score.centroid_km = v[2];
    if (scores) scores->push_back(score);
  }

  std::vector<MetricReport> out;
  for (std::size_t m = 0; m < metrics.size(); ++m)
    out.push_back(summarise(method + "/" + metrics[m].first, values[m], scales,
                            static_cast<int>(targets.size()), unparseable));
  return out;
}

MetricReport aggregate_coordinate_report(const std::vector<ScoringTarget>& targets,
                                         const std::map<std::string, std::optional<GeoPoint>>& predicted,
                                         const std::string& method, std::vector<ItemScore>* scores) {
  check_alignment(targets, predicted);
  std::vector<double> values;
  std::vector<double> scales;
  int unparseable = 0;
  if (scores) scores->clear();
  for (const auto& t : targets) {
    const auto& pred = predicted.at(t.item_id);
    ItemScore score{t.item_id, {}, {}, {}, {}, t.scale_km};
    if (!pred || !is_valid(*pred)) {
      ++unparseable;
    } else {
      score.sae_km = sae(*pred, t.location);
      values.push_back(*score.sae_km);
      scales.push_back(t.scale_km);
    }
    if (scores) scores->push_back(score);
  }
  MetricReport r = summarise(method, values, scales, static_cast<int>(targets.size()), unparseable);
  if (std::any_of(scales.begin(), scales.end(), [](double s) { return !(s > 0.0); })) r.acc_scale.reset();
  return r;
}

namespace {
std::string fixed2(const std::optional<double>& v) {
  if (!v) return "";
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.2f", *v);
  return buf;
}
nlohmann::json opt(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }
}  // namespace

std::string report_csv(const std::vector<MetricReport>& rows) {
  std::ostringstream os;
  os << "method,average_km,acc@1,acc@3,acc@10,acc@scale,n,n_unparseable\n";
  for (const auto& r : rows)
    os << r.method << ',' << fixed2(r.average_km) << ',' << fixed2(r.acc_1km) << ',' << fixed2(r.acc_3km)
       << ',' << fixed2(r.acc_10km) << ',' << fixed2(r.acc_scale) << ',' << r.n_items << ','
       << r.n_unparseable << '\n';
  return os.str();
}

nlohmann::json report_json(const std::vector<MetricReport>& rows) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : rows)
    arr.push_back({{"method", r.method},
                   {"average_km", opt(r.average_km)},
                   {"acc@1", opt(r.acc_1km)},
                   {"acc@3", opt(r.acc_3km)},
                   {"acc@10", opt(r.acc_10km)},
                   {"acc@scale", opt(r.acc_scale)},
                   {"n", r.n_items},
                   {"n_unparseable", r.n_unparseable}});
  return {{"schema_version", 1}, {"rows", arr}};
}

}  // namespace georef
