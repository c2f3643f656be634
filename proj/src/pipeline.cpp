#include "georef/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <functional>
#include <fstream>
#include <set>
#include <thread>

namespace georef {

using nlohmann::json;

// ---------------------------------------------------------------------------
// config

namespace {

std::filesystem::path resolve_path(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_relative() ? base / path : path;
}

std::filesystem::path existing(const std::filesystem::path& base, const json& j, const char* key) {
  if (!j.is_string()) throw ConfigError(std::string(key) + ": expected a path string");
  auto path = resolve_path(base, j.get<std::string>());
  std::error_code ec;
  if (!std::filesystem::exists(path, ec)) throw ConfigError(std::string(key) + ": " + path.string() + " does not exist");
  return path;
}

template <typename T>
T positive(const json& j, const char* key) {
  const T v = j.get<T>();
  if (!(v > T(0))) throw ConfigError(std::string(key) + " must be positive");
  return v;
}

void only_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [k, _] : j.items())
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return k == a; }))
      throw ConfigError(where + ": unknown key '" + k + "'");
}

}  // namespace

PipelineConfig parse_config(const json& j, const std::filesystem::path& base) {
  PipelineConfig c;
  try {
    only_keys(j,
              {"schema_version", "cache_dir", "style", "lexicon", "tile_server", "sources", "grid", "image_width_px",
               "buffer_factor", "min_extent_km", "padding", "clip_lines", "min_length", "providers", "provider",
               "template", "max_retries", "workers", "annotations_dir", "imputation"},
              "config");
    if (j.contains("cache_dir")) c.cache_dir = resolve_path(base, j.at("cache_dir").get<std::string>());
    else c.cache_dir = base / ".georef-cache";
    if (j.contains("style")) c.style = existing(base, j.at("style"), "style");
    if (j.contains("lexicon")) c.lexicon = existing(base, j.at("lexicon"), "lexicon");
    if (j.contains("tile_server") && !j.at("tile_server").is_null()) {
      const auto& t = j.at("tile_server");
      only_keys(t, {"url_template", "user_agent", "requests_per_second", "timeout_s"}, "tile_server");
      TileServerConfig ts;
      ts.url_template = t.value("url_template", ts.url_template);
      ts.user_agent = t.value("user_agent", ts.user_agent);
      if (t.contains("requests_per_second")) ts.requests_per_second = positive<double>(t.at("requests_per_second"), "tile_server.requests_per_second");
      if (t.contains("timeout_s")) ts.timeout_s = positive<int>(t.at("timeout_s"), "tile_server.timeout_s");
      c.tile_server = ts;
    }
    const json sources = j.value("sources", json::array());
    for (const auto& s : sources) {
      SourceConfig sc;
      sc.kind = s.at("kind").get<std::string>();
      sc.id = s.at("id").get<std::string>();
      sc.authority_rank = s.value("authority_rank", 0);
      if (sc.authority_rank < 0) throw ConfigError("source " + sc.id + ": authority_rank must be >= 0");
      if (sc.kind == "local") {
        only_keys(s, {"kind", "id", "authority_rank", "path"}, "source " + sc.id);
        sc.path = existing(base, s.at("path"), "source path");
      } else if (sc.kind == "http") {
        only_keys(s, {"kind", "id", "authority_rank", "endpoint", "query_template", "requests_per_second", "user_agent",
                      "timeout_s"},
                  "source " + sc.id);
        sc.http.id = sc.id;
        sc.http.authority_rank = sc.authority_rank;
        sc.http.endpoint = s.at("endpoint").get<std::string>();
        sc.http.query_template = s.value("query_template", sc.http.query_template);
        sc.http.user_agent = s.value("user_agent", sc.http.user_agent);
        if (s.contains("requests_per_second"))
          sc.http.requests_per_second = positive<double>(s.at("requests_per_second"), "requests_per_second");
        if (s.contains("timeout_s")) sc.http.timeout_s = positive<int>(s.at("timeout_s"), "timeout_s");
      } else {
        throw ConfigError("source " + sc.id + ": unknown kind '" + sc.kind + "'");
      }
      c.sources.push_back(std::move(sc));
    }
    if (j.contains("grid")) {
      const auto& g = j.at("grid");
      only_keys(g, {"max_cells_per_axis", "cells_across", "target_cell_km"}, "grid");
      if (g.contains("max_cells_per_axis")) c.grid.max_cells_per_axis = positive<int>(g.at("max_cells_per_axis"), "grid.max_cells_per_axis");
      if (g.contains("cells_across")) c.grid.cells_across = positive<double>(g.at("cells_across"), "grid.cells_across");
      if (g.contains("target_cell_km") && !g.at("target_cell_km").is_null())
        c.grid.target_cell_km = positive<double>(g.at("target_cell_km"), "grid.target_cell_km");
    }
    if (j.contains("image_width_px")) c.image_width_px = positive<int>(j.at("image_width_px"), "image_width_px");
    if (j.contains("buffer_factor")) c.extent.buffer_factor = positive<double>(j.at("buffer_factor"), "buffer_factor");
    if (j.contains("min_extent_km")) c.extent.min_extent_km = positive<double>(j.at("min_extent_km"), "min_extent_km");
    if (j.contains("padding")) {
      c.extent.padding = j.at("padding").get<double>();
      if (c.extent.padding < 0.0) throw ConfigError("padding must be non-negative");
    }
    if (j.contains("clip_lines")) c.extent.clip_lines = j.at("clip_lines").get<bool>();
    if (j.contains("min_length")) c.min_length = j.at("min_length").get<std::size_t>();
    const json providers = j.value("providers", json::object());
    for (const auto& [name, p] : providers.items()) {
      ProviderEntry e;
      e.kind = p.at("kind").get<std::string>();
      if (e.kind == "mock") {
        only_keys(p, {"kind", "fixtures"}, "provider " + name);
        e.fixtures = existing(base, p.at("fixtures"), "provider fixtures");
      } else if (e.kind == "chat-completions") {
        only_keys(p, {"kind", "endpoint", "api_key_env", "model_id", "temperature", "max_output_tokens",
                      "requests_per_second", "timeout_s"},
                  "provider " + name);
        e.remote.id = name;
        e.remote.endpoint = p.value("endpoint", e.remote.endpoint);
        e.remote.api_key_env = p.value("api_key_env", e.remote.api_key_env);
        e.remote.model_id = p.value("model_id", e.remote.model_id);
        e.remote.temperature = p.value("temperature", e.remote.temperature);
        if (e.remote.temperature < 0.0) throw ConfigError("provider " + name + ": temperature must be >= 0");
        if (p.contains("max_output_tokens")) e.remote.max_output_tokens = positive<int>(p.at("max_output_tokens"), "max_output_tokens");
        if (p.contains("requests_per_second")) e.remote.requests_per_second = positive<double>(p.at("requests_per_second"), "requests_per_second");
        if (p.contains("timeout_s")) e.remote.timeout_s = positive<int>(p.at("timeout_s"), "timeout_s");
      } else {
        throw ConfigError("provider " + name + ": unknown kind '" + e.kind + "'");
      }
      c.providers.emplace(name, std::move(e));
    }
    c.default_provider = j.value("provider", c.providers.size() == 1 ? c.providers.begin()->first : std::string());
    if (!c.default_provider.empty() && !c.providers.contains(c.default_provider))
      throw ConfigError("provider '" + c.default_provider + "' is not configured");
    c.default_template = j.value("template", c.default_template);
    if (!template_from_string(c.default_template)) throw ConfigError("unknown template '" + c.default_template + "'");
    if (j.contains("max_retries")) {
      c.max_retries = j.at("max_retries").get<int>();
      if (c.max_retries < 0) throw ConfigError("max_retries must be >= 0");
    }
    if (j.contains("workers")) c.workers = positive<int>(j.at("workers"), "workers");
    if (j.contains("annotations_dir")) c.annotations_dir = existing(base, j.at("annotations_dir"), "annotations_dir");
    const std::string imp = j.value("imputation", std::string("exclude"));
    if (imp == "exclude") c.imputation = Imputation::exclude;
    else if (imp == "worst_case") c.imputation = Imputation::worst_case;
    else throw ConfigError("imputation must be 'exclude' or 'worst_case'");
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return c;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const std::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_config(j, std::filesystem::absolute(path).parent_path());
}

// ---------------------------------------------------------------------------
// helpers

int StageStatus::exit_code() const {
  if (failed.empty()) return 0;
  return completed.empty() ? 3 : 2;
}

json StageStatus::manifest() const {
  json f = json::array();
  for (const auto& [id, err] : failed) f.push_back({{"id", id}, {"error", err}});
  return {{"completed", completed}, {"failed", f}};
}

namespace {

json read_artifact(const std::filesystem::path& path, const std::string& stage) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const std::exception& e) {
    throw ConfigError("cannot read " + stage + " artifact " + path.string() + ": " + e.what());
  }
  if (j.value("stage", std::string()) != stage || j.value("schema_version", 0) != 1)
    throw ConfigError(path.string() + ": not a " + stage + " artifact (schema_version 1)");
  return j;
}

void write_artifact(const std::filesystem::path& path, const std::string& stage, json items,
                    const StageStatus& status, json extra = json::object()) {
  json doc = {{"schema_version", 1}, {"stage", stage}, {"items", std::move(items)}, {"manifest", status.manifest()}};
  for (auto& [k, v] : extra.items()) doc[k] = v;
  write_file_atomic(path, doc.dump(2) + "\n");
}

/// Runs fn(i) for i in [0, n) on up to `workers` threads.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
  const std::size_t threads = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, workers)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  for (auto& th : pool) th.join();
}

std::string file_stem_for(const std::string& id) {
  std::string out;
  for (char c : id) out.push_back(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.' ? c : '_');
  if (out.empty() || out == "." || out == "..") out = "_" + out;
  return out;
}

std::optional<std::string> non_empty(const std::string& s) {
  return s.empty() ? std::nullopt : std::optional<std::string>(s);
}

int worker_count(const PipelineConfig& c, const RunOptions& o) { return o.workers.value_or(c.workers); }

/// One entry per item, filled in parallel and collected in input order.
struct Slot {
  std::optional<json> item;
  std::optional<std::string> error;
};

StageStatus collect(const std::vector<std::string>& ids, std::vector<Slot>& slots, json& items) {
  StageStatus status;
  items = json::array();
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (slots[i].error) {
      status.failed.emplace_back(ids[i], *slots[i].error);
    } else if (slots[i].item) {
      status.completed.push_back(ids[i]);
      items.push_back(std::move(*slots[i].item));
    }
  }
  return status;
}

std::vector<json> completed_items(const json& artifact) {
  std::vector<json> out;
  for (const auto& it : artifact.at("items")) out.push_back(it);
  return out;
}

}  // namespace

std::vector<CollectionRecord> load_records(const std::filesystem::path& path) {
  if (path.extension() == ".csv") return load_records_csv(path);
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const std::exception& e) {
    throw DatasetError(path.string() + ": " + e.what());
  }
  const json& arr = j.is_array() ? j : j.at("records");
  std::vector<CollectionRecord> out;
  std::set<std::string> ids;
  for (const auto& r : arr) {
    CollectionRecord rec;
    try {
      rec = r.get<CollectionRecord>();
    } catch (const json::exception& e) {
      throw DatasetError(path.string() + ": " + e.what());
    }
    if (rec.id.empty()) throw DatasetError(path.string() + ": record with empty id");
    if (!ids.insert(rec.id).second) throw DatasetError(path.string() + ": duplicate record id '" + rec.id + "'");
    out.push_back(std::move(rec));
  }
  return out;
}

// ---------------------------------------------------------------------------
// parse

StageStatus cmd_parse(const std::filesystem::path& records_path, const RunLayout& out, const PipelineConfig& config,
                      const RunOptions& options) {
  const auto all = load_records(records_path);
  const std::size_t min_length = options.min_length.value_or(config.min_length);
  const auto records = filter_records(all, min_length);
  json filtered_out = json::array();
  {
    std::set<std::string> kept;
    for (const auto& r : records) kept.insert(r.id);
    for (const auto& r : all)
      if (!kept.contains(r.id)) filtered_out.push_back(r.id);
  }
  const IndicatorLexicon lexicon = config.lexicon ? IndicatorLexicon::load(*config.lexicon) : IndicatorLexicon::builtin();

  std::vector<Slot> slots(records.size());
  std::vector<std::string> ids;
  for (const auto& r : records) ids.push_back(r.id);
  parallel_for(records.size(), worker_count(config, options), [&](std::size_t i) {
    const auto& rec = records[i];
    try {
      ParseResult result;
      bool annotated = false;
      const auto sidecar = config.annotations_dir ? *config.annotations_dir / (file_stem_for(rec.id) + ".json")
                                                  : std::filesystem::path();
      std::error_code ec;
      if (!sidecar.empty() && std::filesystem::exists(sidecar, ec)) {
        const json a = json::parse(read_file(sidecar));
        result.mentions = extract_place_names(rec.text, a.at("mentions").get<std::vector<PlaceMention>>());
        result.triples = a.contains("triples") ? a.at("triples").get<std::vector<RelationTriple>>()
                                               : extract_relations(rec.text, result.mentions, lexicon);
        if (a.contains("containment")) {
          result.containment = a.get<ParseResult>().containment;
        } else if (!result.mentions.empty()) {
          result.containment = detect_containment(rec.text, result.mentions);
        }
        annotated = true;
      } else {
        result = parse_locality(rec.text, HeuristicExtractor(), lexicon);
      }
      const auto problems = check_parse_result(rec.text, result);
      if (!problems.empty()) throw ParseError(problems.front());
      slots[i].item = json{{"record", rec}, {"parse", result}, {"annotated", annotated}};
    } catch (const std::exception& e) {
      slots[i].error = e.what();
    }
  });
  json items;
  StageStatus status = collect(ids, slots, items);
  std::filesystem::create_directories(out.dir);
  write_artifact(out.parse(), "parse", std::move(items), status,
                 {{"min_length", min_length}, {"filtered_out", filtered_out}, {"lexicon_version", lexicon.version()}});
  return status;
}

// ---------------------------------------------------------------------------
// resolve

namespace {

std::vector<std::shared_ptr<FeatureSource>> build_sources(const PipelineConfig& config, const RunOptions& options) {
  if (!options.sources_override.empty()) return options.sources_override;
  std::vector<std::shared_ptr<FeatureSource>> out;
  for (const auto& s : config.sources) {
    if (s.kind == "local") {
      out.push_back(std::make_shared<LocalGazetteer>(LocalGazetteer::load(s.path, s.id, s.authority_rank)));
    } else if (!options.offline) {
      out.push_back(std::make_shared<HttpFeatureSource>(s.http));
    }
  }
  if (out.empty()) throw ConfigError(options.offline ? "no local gazetteer source configured for offline use"
                                                     : "no gazetteer source configured");
  return out;
}

std::string pair_key(const std::string& a, const std::string& b) { return a + "\x1f" + b; }

}  // namespace

StageStatus cmd_resolve(const RunLayout& run, const PipelineConfig& config, const RunOptions& options) {
  const json parsed = read_artifact(run.parse(), "parse");
  const auto owned = build_sources(config, options);
  std::vector<FeatureSource*> sources;
  for (const auto& s : owned) sources.push_back(s.get());
  FeatureCache cache(config.cache_dir / "features");
  const QueryOptions query{&cache, options.refresh_cache};

  const auto inputs = completed_items(parsed);
  std::vector<Slot> slots(inputs.size());
  std::vector<std::string> ids;
  for (const auto& it : inputs) ids.push_back(it.at("record").at("id").get<std::string>());
  parallel_for(inputs.size(), worker_count(config, options), [&](std::size_t i) {
    try {
      const auto rec = inputs[i].at("record").get<CollectionRecord>();
      const auto result = inputs[i].at("parse").get<ParseResult>();
      std::vector<std::string> queryable;
      std::vector<std::string> unresolved;
      const auto add_once = [](std::vector<std::string>& v, const std::string& s) {
        if (std::find(v.begin(), v.end(), s) == v.end()) v.push_back(s);
      };
      for (const auto& m : result.mentions) {
        if (resolvable(m)) add_once(queryable, canonical_name(m));
        else add_once(unresolved, m.surface);
      }

      Resolution res = resolve_names(queryable, rec.country, rec.region, sources, query);
      unresolved.insert(unresolved.end(), res.unresolved.begin(), res.unresolved.end());

      // containment: text order, corrected by geometry where both ends resolved
      std::vector<PlaceMention> resolved_mentions;
      std::vector<std::optional<Footprint>> footprints;
      for (const auto& [name, f] : res.features) {
        PlaceMention m;
        m.surface = name;
        m.end = name.size();
        resolved_mentions.push_back(m);
        const Geometry geom = f.geometry;
        footprints.push_back(Footprint{geom.bbox(), representative_point(f),
                                       effective_kind(geom) == GeometryKind::polygon,
                                       [geom](const GeoPoint& p) { return covers(geom, p); }});
      }
      std::set<std::string> geometric;
      json containment = json::array();
      std::set<std::string> emitted;
      const auto emit = [&](const std::string& parent, const std::string& child, const char* basis) {
        if (parent == child || !emitted.insert(pair_key(parent, child)).second) return;
        containment.push_back({{"parent", parent}, {"child", child}, {"basis", basis}});
      };
      if (!resolved_mentions.empty()) {
        for (const auto& p : detect_containment(std::string(), resolved_mentions, &footprints)) {
          geometric.insert(pair_key(p.parent.surface, p.child.surface));
          emit(p.parent.surface, p.child.surface, "geometry");
        }
      }
      for (const auto& p : result.containment) {
        const std::string& parent = canonical_name(p.parent);
        const std::string& child = canonical_name(p.child);
        if (geometric.contains(pair_key(child, parent))) continue;  // geometry says the opposite
        emit(parent, child, "text");
      }

      json features = json::object();
      for (const auto& [name, f] : res.features) features[name] = feature_to_geojson(f);
      slots[i].item = json{{"id", rec.id},
                           {"features", features},
                           {"unresolved", unresolved},
                           {"containment", containment},
                           {"warnings", res.warnings}};
    } catch (const std::exception& e) {
      slots[i].error = e.what();
    }
  });
  json items;
  StageStatus status = collect(ids, slots, items);
  write_artifact(run.resolved(), "resolve", std::move(items), status);
  return status;
}

// ---------------------------------------------------------------------------
// mapgen

StageStatus cmd_mapgen(const RunLayout& run, const PipelineConfig& config, const RunOptions& options) {
  const json parsed = read_artifact(run.parse(), "parse");
  const json resolved = read_artifact(run.resolved(), "resolve");
  std::map<std::string, json> parse_by_id;
  for (const auto& it : parsed.at("items")) parse_by_id[it.at("record").at("id").get<std::string>()] = it;

  const MapStyle style = config.style ? load_style(*config.style) : MapStyle{};
  std::shared_ptr<TileSource> tiles = options.tiles_override;
  if (!tiles && config.tile_server && !options.offline) {
    TileServerConfig ts = *config.tile_server;
    ts.cache_dir = config.cache_dir;
    tiles = std::make_shared<HttpTileSource>(ts);
  }
  ExtentOptions extent_options = config.extent;
  if (options.buffer_factor) extent_options.buffer_factor = *options.buffer_factor;
  std::filesystem::create_directories(run.maps());

  const auto inputs = completed_items(resolved);
  std::vector<Slot> slots(inputs.size());
  std::vector<std::optional<DatasetItem>> dataset(inputs.size());
  std::vector<std::string> ids;
  for (const auto& it : inputs) ids.push_back(it.at("id").get<std::string>());
  parallel_for(inputs.size(), worker_count(config, options), [&](std::size_t i) {
    try {
      const json& item = inputs[i];
      const auto pit = parse_by_id.find(ids[i]);
      if (pit == parse_by_id.end()) throw ConfigError("item missing from parse artifact");
      const auto rec = pit->second.at("record").get<CollectionRecord>();
      const auto result = pit->second.at("parse").get<ParseResult>();

      FeatureMap features;
      for (const auto& [name, f] : item.at("features").items())
        features.emplace(name, feature_from_geojson(f, "", 0));
      std::vector<ContainmentPair> containment;
      for (const auto& c : item.at("containment")) {
        ContainmentPair p;
        p.parent.surface = c.at("parent").get<std::string>();
        p.child.surface = c.at("child").get<std::string>();
        containment.push_back(p);
      }
      const ExtentPlan plan = plan_extent(features, result.triples, containment, extent_options);
      const GridLayout layout = grid_for_extent(plan.extent, config.grid);
      std::vector<GazetteerFeature> drawn;
      for (const auto& [_, f] : plan.features) drawn.push_back(f);
      RenderOptions ro;
      ro.target_width_px = config.image_width_px;
      ro.tiles = tiles.get();
      const MapExcerpt excerpt =
          render_map(layout, drawn, item.at("unresolved").get<std::vector<std::string>>(), style, ro);

      const std::string rel = "maps/" + file_stem_for(rec.id) + ".png";
      save_excerpt(excerpt, run.dir / rel);

      json out = {{"id", rec.id},
                  {"map_path", rel},
                  {"georeference", excerpt.georef},
                  {"features_drawn", excerpt.features_drawn},
                  {"unresolved_names", excerpt.unresolved_names},
                  {"dropped_parents", plan.dropped_parents},
                  {"clipped", plan.clipped},
                  {"no_basemap", excerpt.no_basemap}};
      if (rec.ground_truth && excerpt.georef.extent.contains(*rec.ground_truth)) {
        DatasetItem d;
        d.record = rec;
        d.map_path = rel;
        d.map_meta = excerpt.georef;
        d.label = label_for_index(layout.grid, point_to_cell(excerpt.georef, *rec.ground_truth));
        d.scale_km = layout.grid.cell_km;
        out["label"] = d.label;
        dataset[i] = std::move(d);
      } else {
        out["label"] = nullptr;
        out["note"] = rec.ground_truth ? "ground truth outside the excerpt" : "no ground truth";
      }
      slots[i].item = std::move(out);
    } catch (const std::exception& e) {
      slots[i].error = e.what();
    }
  });
  json items;
  StageStatus status = collect(ids, slots, items);
  std::vector<DatasetItem> ds;
  for (auto& d : dataset)
    if (d) ds.push_back(std::move(*d));
  save_dataset(run.dataset(), ds);
  write_artifact(run.mapgen(), "mapgen", std::move(items), status);
  return status;
}

// ---------------------------------------------------------------------------
// georef

namespace {

std::shared_ptr<Provider> build_provider(const PipelineConfig& config, const RunOptions& options) {
  if (options.provider_override) return options.provider_override;
  const std::string name = options.provider.value_or(config.default_provider);
  if (name.empty()) throw ConfigError("no provider selected");
  const auto it = config.providers.find(name);
  if (it == config.providers.end()) throw ConfigError("provider '" + name + "' is not configured");
  if (it->second.kind == "mock") return MockProvider::load(it->second.fixtures);
  if (options.offline) throw ConfigError("provider '" + name + "' needs the network; --offline given");
  return std::make_shared<ChatCompletionsProvider>(it->second.remote);
}

}  // namespace

StageStatus cmd_georef(const RunLayout& run, const PipelineConfig& config, const RunOptions& options) {
  const std::string template_id = options.template_id.value_or(config.default_template);
  const auto t = template_from_string(template_id);
  if (!t) throw ConfigError("unknown template '" + template_id + "'");
  auto provider = build_provider(config, options);
  const json parsed = read_artifact(run.parse(), "parse");

  ResponseCache cache(config.cache_dir / "responses");
  std::filesystem::create_directories(run.dir);
  std::filesystem::remove(run.audit());
  AuditLog audit(run.audit());
  CallOptions call;
  call.cache = &cache;
  call.refresh_cache = options.refresh_cache;
  call.audit = &audit;
  call.max_retries = config.max_retries;
  if (const auto pit = config.providers.find(options.provider.value_or(config.default_provider));
      pit != config.providers.end() && pit->second.kind == "chat-completions") {
    call.temperature = pit->second.remote.temperature;
    call.max_output_tokens = pit->second.remote.max_output_tokens;
  }

  std::map<std::string, CollectionRecord> records;
  for (const auto& it : parsed.at("items")) {
    auto rec = it.at("record").get<CollectionRecord>();
    records.emplace(rec.id, std::move(rec));
  }
  std::vector<json> inputs;
  if (is_gridded(*t)) {
    inputs = completed_items(read_artifact(run.mapgen(), "mapgen"));
  } else {
    for (const auto& [id, _] : records) inputs.push_back({{"id", id}});
  }

  std::vector<Slot> slots(inputs.size());
  std::vector<std::string> ids;
  for (const auto& it : inputs) ids.push_back(it.at("id").get<std::string>());
  parallel_for(inputs.size(), worker_count(config, options), [&](std::size_t i) {
    try {
      const auto rit = records.find(ids[i]);
      if (rit == records.end()) throw ConfigError("item missing from parse artifact");
      const CollectionRecord& rec = rit->second;
      if (is_gridded(*t)) {
        const auto meta = inputs[i].at("georeference").get<MapGeoreference>();
        const std::string png = read_file(run.dir / inputs[i].at("map_path").get<std::string>());
        const Prediction p = georeference(rec.id, rec.text, png, meta.grid, *provider, *t, call);
        slots[i].item = json{{"id", rec.id},
                             {"cells", p.cells},
                             {"primary", p.primary ? json(*p.primary) : json(nullptr)},
                             {"unparseable", p.unparseable},
                             {"request_fingerprint", p.request_fingerprint}};
      } else {
        const CoordinatePrediction p =
            text_only_georeference(rec.id, rec.text, *provider, *t, non_empty(rec.region), non_empty(rec.country), call);
        slots[i].item = json{{"id", rec.id},
                             {"point", p.point ? json(*p.point) : json(nullptr)},
                             {"unparseable", p.unparseable},
                             {"request_fingerprint", p.request_fingerprint}};
      }
    } catch (const std::exception& e) {
      slots[i].error = e.what();
    }
  });
  json items;
  StageStatus status = collect(ids, slots, items);
  write_artifact(run.predictions(), "georef", std::move(items), status,
                 {{"template", template_id},
                  {"kind", is_gridded(*t) ? "grid" : "coordinates"},
                  {"provider", provider->id()},
                  {"model_id", provider->model_id()}});
  return status;
}

// ---------------------------------------------------------------------------
// eval

namespace {

std::vector<ScoringTarget> targets_of(const std::vector<DatasetItem>& items) {
  std::vector<ScoringTarget> out;
  for (const auto& d : items) out.push_back({d.record.id, *d.record.ground_truth, d.label, d.scale_km, d.map_meta.grid});
  return out;
}

void write_reports(const RunLayout& run, const std::vector<MetricReport>& rows) {
  write_file_atomic(run.report_csv(), report_csv(rows));
  write_file_atomic(run.report_json(), report_json(rows).dump(2) + "\n");
}

}  // namespace

std::vector<MetricReport> rescore_audit_log(const std::filesystem::path& audit_log, const Dataset& dataset,
                                            Imputation imputation) {
  std::ifstream in(audit_log);
  if (!in) throw ConfigError("cannot read audit log " + audit_log.string());
  std::map<std::string, json> last;
  std::string line;
  std::string template_id;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    json e = json::parse(line);
    const std::string tid = e.at("template").get<std::string>();
    if (template_id.empty()) template_id = tid;
    if (tid != template_id) throw ConfigError("audit log mixes templates '" + template_id + "' and '" + tid + "'");
    const std::string id = e.at("item_id").get<std::string>();
    last[id] = std::move(e);
  }
  if (template_id.empty()) throw ConfigError("audit log is empty");
  const auto t = template_from_string(template_id);
  if (!t) throw ConfigError("unknown template '" + template_id + "' in audit log");

  const auto items = dataset.valid_items();
  const auto targets = targets_of(items);
  if (is_gridded(*t)) {
    std::map<std::string, std::optional<std::string>> predicted;
    for (const auto& d : items) {
      std::optional<std::string> first;
      if (const auto it = last.find(d.record.id); it != last.end()) {
        const auto cells = parse_cells(it->second.at("response").get<std::string>(), d.map_meta.grid);
        if (!cells.empty()) first = cells.front();
      }
      predicted[d.record.id] = first;
    }
    return aggregate_grid_report(targets, predicted, template_id, imputation);
  }
  std::map<std::string, std::optional<GeoPoint>> predicted;
  for (const auto& d : items) {
    const auto it = last.find(d.record.id);
    predicted[d.record.id] =
        it == last.end() ? std::nullopt : parse_coordinates(it->second.at("response").get<std::string>());
  }
  return {aggregate_coordinate_report(targets, predicted, template_id)};
}

StageStatus cmd_eval(const RunLayout& run, const PipelineConfig& config,
                     const std::optional<std::filesystem::path>& audit_log,
                     const std::optional<std::filesystem::path>& dataset_path) {
  const Dataset dataset = load_dataset(dataset_path.value_or(run.dataset()));
  StageStatus status;
  for (const auto& issue : dataset.issues) {
    std::string msg;
    for (const auto& v : issue.violations) msg += (msg.empty() ? "" : "; ") + v;
    status.failed.emplace_back(issue.item_id, "invalid dataset item: " + msg);
  }
  const auto items = dataset.valid_items();
  for (const auto& d : items) status.completed.push_back(d.record.id);

  std::vector<MetricReport> rows;
  if (audit_log) {
    rows = rescore_audit_log(*audit_log, dataset, config.imputation);
  } else {
    const json preds = read_artifact(run.predictions(), "georef");
    const std::string method = preds.at("template").get<std::string>();
    std::map<std::string, json> by_id;
    for (const auto& p : preds.at("items")) by_id[p.at("id").get<std::string>()] = p;
    const auto targets = targets_of(items);
    if (preds.at("kind") == "grid") {
      std::map<std::string, std::optional<std::string>> predicted;
      for (const auto& d : items) {
        const auto it = by_id.find(d.record.id);
        predicted[d.record.id] = it == by_id.end() || it->second.at("primary").is_null()
                                     ? std::nullopt
                                     : std::optional(it->second.at("primary").get<std::string>());
      }
      rows = aggregate_grid_report(targets, predicted, method, config.imputation);
    } else {
      std::map<std::string, std::optional<GeoPoint>> predicted;
      for (const auto& d : items) {
        const auto it = by_id.find(d.record.id);
        predicted[d.record.id] = it == by_id.end() || it->second.at("point").is_null()
                                     ? std::nullopt
                                     : std::optional(it->second.at("point").get<GeoPoint>());
      }
      rows = {aggregate_coordinate_report(targets, predicted, method)};
    }
  }
  write_reports(run, rows);
  return status;
}

StageStatus cmd_run(const std::filesystem::path& records, const RunLayout& out, const PipelineConfig& config,
                    const RunOptions& options) {
  StageStatus overall;
  const auto merge = [&](const StageStatus& s) {
    for (const auto& f : s.failed)
      if (std::none_of(overall.failed.begin(), overall.failed.end(), [&](const auto& g) { return g.first == f.first; }))
        overall.failed.push_back(f);
    overall.completed = s.completed;
    return !s.completed.empty();
  };
  if (!merge(cmd_parse(records, out, config, options))) return overall;
  if (!merge(cmd_resolve(out, config, options))) return overall;
  if (!merge(cmd_mapgen(out, config, options))) return overall;
  if (!merge(cmd_georef(out, config, options))) return overall;
  const StageStatus e = cmd_eval(out, config);
  for (const auto& f : e.failed) overall.failed.push_back(f);
  return overall;
}

}  // namespace georef
