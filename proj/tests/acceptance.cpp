// Acceptance checks. Prints one PASS/FAIL/SKIP line per criterion.
// Usage: georef_acceptance [criterion ...]   (exit 77 when every selected criterion skipped)

#include <chrono>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <mutex>
#include <random>
#include <set>
#include <sstream>

#include "georef/eval.hpp"
#include "georef/georeferencer.hpp"
#include "georef/http.hpp"
#include "georef/mapgen.hpp"
#include "georef/pipeline.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace georef;

namespace {

enum class Outcome { pass, fail, skip };

struct Result {
  Outcome outcome;
  std::string detail;
};

Result pass(std::string d) { return {Outcome::pass, std::move(d)}; }
Result fail(std::string d) { return {Outcome::fail, std::move(d)}; }

template <typename... T>
std::string str(const T&... parts) {
  std::ostringstream os;
  (os << ... << parts);
  return os.str();
}

// 1 -------------------------------------------------------------------------
Result metric_oracles() {
  const auto t0 = std::chrono::steady_clock::now();
  long checked = 0, bad = 0;
  for (double s : {0.45, 0.7, 1.25, 1.88})
    for (int dx = -10; dx <= 10; ++dx)
      for (int dy = -10; dy <= 10; ++dy) {
        const CellIndex a{11, 11}, b{11 + dx, 11 + dy};
        ++checked;
        if (max_distance(a, b, s) != oracle::corner_max(a.x, a.y, b.x, b.y, s)) ++bad;
        if (std::abs(min_distance(a, b, s) - oracle::rect_min(a.x, a.y, b.x, b.y, s)) > 1e-6 * s) ++bad;
      }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (bad || secs >= 5.0) return fail(str(bad, " mismatches over ", checked, " pairs in ", secs, " s"));
  return pass(str(checked, " pairs x 2 metrics agree with corner/rectangle oracles in ", secs, " s"));
}

// 2 -------------------------------------------------------------------------
Result same_cell_prose() {
  int bad = 0;
  for (double s : {0.45, 0.7, 1.25, 1.88}) {
    if (max_distance<double>({4, 7}, {4, 7}, s) != std::sqrt(2.0) * s) ++bad;
    for (int dx = -1; dx <= 1; ++dx)
      for (int dy = -1; dy <= 1; ++dy)
        if (min_distance<double>({4, 7}, {4 + dx, 7 + dy}, s) != 0.0) ++bad;
  }
  return bad ? fail(str(bad, " exact-equality failures")) : pass("same cell max = sqrt(2) scale; same/adjacent min = 0");
}

// 3 -------------------------------------------------------------------------
Result acc_scale_consistency() {
  std::mt19937 rng(2024);
  std::uniform_real_distribution<double> scale(0.3, 3.0);
  std::uniform_int_distribution<int> cell(1, 12), step(-3, 3);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 25;
    const int exact = trial == 0 ? 8 : static_cast<int>(rng() % (n + 1));
    std::vector<ScoringTarget> targets;
    std::map<std::string, std::optional<std::string>> pred;
    for (int i = 0; i < n; ++i) {
      GridSpec g{12, 12, scale(rng)};
      const CellIndex truth{cell(rng), cell(rng)};
      CellIndex p = truth;
      if (i >= exact)
        do p = {std::clamp(truth.x + step(rng), 1, 12), std::clamp(truth.y + step(rng), 1, 12)};
        while (p == truth);
      const std::string id = "r" + std::to_string(i);
      targets.push_back({id, {}, label_for_index(g, truth), g.cell_km, g});
      pred[id] = label_for_index(g, p);
    }
    const auto rows = aggregate_grid_report(targets, pred, "m");
    const double rate = 100.0 * exact / n;
    if (*rows[2].acc_scale != rate) return fail(str("centroid acc@scale ", *rows[2].acc_scale, " vs exact-cell rate ", rate));
    if (*rows[1].acc_scale != 0.0) return fail(str("max acc@scale ", *rows[1].acc_scale));
    if (trial == 0 && rate != 32.0) return fail("synthetic rate is not 32");
  }
  return pass("centroid acc@scale equals exact-cell rate (32.0 case included), max acc@scale = 0, 200 synthetic sets");
}

// 4 -------------------------------------------------------------------------
Result grid_bijection() {
  std::mt19937 rng(99);
  int bad = 0;
  for (int i = 0; i < 10000; ++i) {
    const GridSpec g{1 + static_cast<int>(rng() % kMaxGridCols), 1 + static_cast<int>(rng() % kMaxGridRows), 1.0};
    const CellIndex c{1 + static_cast<int>(rng() % g.cols), 1 + static_cast<int>(rng() % g.rows)};
    const std::string label = label_for_index(g, c);
    if (index_for_label(g, label) != c || label_for_index(g, index_for_label(g, label)) != label) ++bad;
  }
  // distinct cells give distinct labels on the largest grid
  std::set<std::string> seen;
  const GridSpec big{kMaxGridCols, kMaxGridRows, 1.0};
  for (int x = 1; x <= big.cols; ++x)
    for (int y = 1; y <= big.rows; ++y) seen.insert(label_for_index(big, {x, y}));
  if (seen.size() != static_cast<std::size_t>(big.cols * big.rows)) ++bad;

  const auto g = test::square_grid({-41.05, 175.10}, 12, 12, 700.0);
  for (int x = 1; x <= 12; ++x)
    for (int y = 1; y <= 12; ++y)
      if (point_to_cell(g, cell_centroid(g, {x, y})) != CellIndex{x, y}) ++bad;
  return bad ? fail(str(bad, " failures")) : pass("10000 random label round trips, 69498 distinct labels, 144 centroid round trips");
}

// 5 -------------------------------------------------------------------------
Result published_dataset() {
  const char* path = std::getenv("GEOREF_PUBLISHED_DATASET");
  if (!path || !*path) return {Outcome::skip, "set GEOREF_PUBLISHED_DATASET to the converted 25-item dataset.json"};
  const Dataset ds = load_dataset(path);
  int bad = 0;
  std::string first;
  for (const auto& item : ds.items) {
    std::vector<std::string> why = validate_item(item, ds.base_dir);
    const MapGeoreference& m = item.map_meta;
    const double recomputed = geodesic_width_km(m.extent.center().lat, cell_side_m(m.extent, m.grid));
    if (std::abs(recomputed - item.scale_km) > 0.05 * item.scale_km)
      why.push_back(str("scale ", recomputed, " vs recorded ", item.scale_km));
    if (!why.empty()) {
      ++bad;
      if (first.empty()) first = item.record.id + ": " + why.front();
    }
  }
  if (bad) return fail(str(bad, " of ", ds.items.size(), " items invalid; ", first));
  return pass(str(ds.items.size(), " items: labels and scales consistent"));
}

// 6 -------------------------------------------------------------------------
FeatureMap fixture_features(std::initializer_list<const char*> names, const std::string& region) {
  const auto gz = LocalGazetteer::load(test::fixtures() / "nz_gazetteer.geojson", "fixture");
  FeatureMap out;
  for (const char* n : names)
    for (const auto& f : gz.features())
      if (f.name == n && (!f.region || f.region->empty() || region.empty() || *f.region == region) && !out.contains(n))
        out.emplace(n, f);
  return out;
}

Result extent_rules() {
  std::vector<std::string> problems;
  std::string detail;
  {
    const auto fm = fixture_features({"North Island", "Bay of Islands County", "Puketi"}, "Northland");
    const std::string text = "North Island, Bay of Islands County, Ca 2km north of Puketi";
    const ParseResult p = parse_locality(text, HeuristicExtractor());
    const MapExtent e = compute_extent(fm, p.triples, p.containment);
    const GeoBox county = fm.at("Bay of Islands County").geometry.bbox();
    const double excluded = 1.0 - intersection(e, county).area_km2() / county.area_km2();
    const bool holds = e.contains(buffered(fm.at("Puketi").geometry.bbox(), 2.0 * 1.5));
    if (excluded < 0.9 || !holds) problems.push_back(str("(a) excluded ", excluded, " contains ", holds));
    detail += str("(a) county excluded ", 100 * excluded, "% ");
  }
  {
    const auto fm = fixture_features({"Fiordland", "Mount George", "Elizabeth Burn"}, "Southland");
    const std::string text = "Fiordland, Mount George, south slope above Elizabeth Burn, 2km north of peak";
    const ParseResult p = parse_locality(text, HeuristicExtractor());
    const MapExtent e = compute_extent(fm, p.triples, p.containment);
    if (!e.contains(fm.at("Mount George").geometry.bbox()) || !e.contains(fm.at("Elizabeth Burn").geometry.bbox()))
      problems.push_back("(b) sibling bbox not contained");
    detail += "(b) both siblings contained ";
  }
  {
    const auto fm = fixture_features({"Blythe River", "Napenape Scenic Reserve"}, "Canterbury");
    const std::string text = "Napenape Scenic Reserve, 3km south of mouth of Blythe River, coastal forest remnant";
    const ParseResult p = parse_locality(text, HeuristicExtractor());
    const double fine = grid_for_extent(compute_extent(fm, p.triples, p.containment)).grid.cell_km;
    ExtentOptions o;
    o.clip_lines = false;
    const double coarse = grid_for_extent(compute_extent(fm, p.triples, p.containment, o)).grid.cell_km;
    if (!(fine <= 0.5) || !(coarse >= 1.0)) problems.push_back(str("(c) clipped ", fine, " unclipped ", coarse));
    detail += str("(c) cell ", fine, " km clipped vs ", coarse, " km unclipped");
  }
  if (!problems.empty()) {
    std::string all;
    for (const auto& p : problems) all += p + "; ";
    return fail(all);
  }
  return pass(detail);
}

// 7 -------------------------------------------------------------------------
class OracleProvider final : public Provider {
 public:
  explicit OracleProvider(std::filesystem::path dataset) : dataset_(std::move(dataset)) {}
  const std::string& id() const override { return id_; }
  const std::string& model_id() const override { return id_; }
  std::string complete(const LmmRequest& r) override {
    std::lock_guard guard(mutex_);
    if (labels_.empty())
      for (const auto& item : load_dataset(dataset_).items) labels_[item.record.id] = item.label;
    const auto it = labels_.find(r.item_id);
    return it == labels_.end() ? "unknown" : "Cell " + it->second + ".";
  }

 private:
  std::string id_ = "oracle";
  std::filesystem::path dataset_;
  std::mutex mutex_;
  std::map<std::string, std::string> labels_;
};

Result end_to_end_offline() {
  const auto dir = test::scratch("acceptance_e2e");
  PipelineConfig config = load_config(test::fixtures() / "config.json");
  config.cache_dir = dir / "cache";
  const RunLayout layout{dir / "run"};
  RunOptions o;
  o.offline = true;
  o.provider_override = std::make_shared<OracleProvider>(layout.dataset());
  const long before = http_request_count();
  const StageStatus s = cmd_run(test::fixtures() / "records.csv", layout, config, o);
  const long calls = http_request_count() - before;

  const auto preds = nlohmann::json::parse(read_file(layout.predictions()));
  int artifacts = 0;
  for (const auto& p : preds["items"]) {
    const std::string id = p["id"];
    if (std::filesystem::exists(layout.maps() / (id + ".png")) && std::filesystem::exists(layout.maps() / (id + ".json")))
      ++artifacts;
  }
  const auto report = nlohmann::json::parse(read_file(layout.report_json()));
  nlohmann::json centroid;
  for (const auto& row : report["rows"])
    if (row["method"] == "logical_cot_grid/centroid") centroid = row;
  const bool ok = calls == 0 && artifacts >= 3 && artifacts == static_cast<int>(preds["items"].size()) &&
                  centroid["average_km"] == 0.0 && centroid["acc@1"] == 100.0 && centroid["n"] == artifacts;
  const std::string d = str(s.completed.size(), " items completed, ", s.failed.size(), " failed as expected, ", calls,
                            " network calls, ", artifacts, " PNG+sidecar+prediction, centroid avg ",
                            centroid["average_km"].dump(), " acc@1 ", centroid["acc@1"].dump());
  return ok ? pass(d) : fail(d);
}

// 8 -------------------------------------------------------------------------
Result archived_audit() {
  const auto archive = test::golden() / "archive";
  const Dataset ds = load_dataset(archive / "dataset.json");
  const auto rows = rescore_audit_log(archive / "audit.jsonl", ds);
  const std::string csv = report_csv(rows);
  const std::string json = report_json(rows).dump(2) + "\n";
  const bool ok = csv == read_file(archive / "report.csv") && json == read_file(archive / "report.json");
  return ok ? pass(str("re-scored ", ds.items.size(), " items; report.csv and report.json byte-identical; "
                       "live-provider comparison is informational and not run here"))
            : fail("re-scored report differs from the archived report");
}

// 9 -------------------------------------------------------------------------
Result prompt_fidelity() {
  const std::string d = "J.K. Donald Wildlife Reserve, NE shore of L. Wairarapa - about 400m from lake";
  int bad = 0;
  for (PromptTemplate t : kAllTemplates) {
    std::string golden = read_file(test::golden() / "prompts" / (std::string(to_string(t)) + ".txt"));
    if (!golden.empty() && golden.back() == '\n') golden.pop_back();
    if (build_prompt(t, d, 1.88, std::string("Wellington"), std::string("New Zealand")) != golden) ++bad;
    const bool needs_cot = t == PromptTemplate::logical_cot_grid || t == PromptTemplate::persona_logical_cot_grid;
    if (needs_cot && golden.find("Think step by step. Identify the locations mentioned.") == std::string::npos) ++bad;
    if (!is_gridded(t) && golden.find("You are a language and geography expert.") == std::string::npos) ++bad;
  }
  return bad ? fail(str(bad, " template mismatches")) : pass("7 templates match golden texts");
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<int, std::function<Result()>>> all{
      {1, metric_oracles},   {2, same_cell_prose},    {3, acc_scale_consistency},
      {4, grid_bijection},   {5, published_dataset},  {6, extent_rules},
      {7, end_to_end_offline}, {8, archived_audit},   {9, prompt_fidelity}};
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

  int failed = 0, passed = 0;
  for (const auto& [n, check] : all) {
    if (!wanted.empty() && !wanted.contains(n)) continue;
    Result r;
    try {
      r = check();
    } catch (const std::exception& e) {
      r = fail(std::string("exception: ") + e.what());
    }
    const char* tag = r.outcome == Outcome::pass ? "PASS" : r.outcome == Outcome::fail ? "FAIL" : "SKIP";
    std::cout << "criterion " << n << ": " << tag << ": " << r.detail << "\n";
    if (r.outcome == Outcome::fail) ++failed;
    if (r.outcome == Outcome::pass) ++passed;
  }
  if (failed) return 1;
  return passed == 0 ? 77 : 0;
}
