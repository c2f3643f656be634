#include "georef/gazetteer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "georef/http.hpp"

namespace georef {

// ---------------------------------------------------------------------------
// GeoJSON features

nlohmann::json feature_to_geojson(const GazetteerFeature& f) {
  nlohmann::json props = {{"name", f.name},
                          {"source", f.source},
                          {"authority_rank", f.authority_rank},
                          {"category", f.category}};
  props["country"] = f.country ? nlohmann::json(*f.country) : nlohmann::json(nullptr);
  props["region"] = f.region ? nlohmann::json(*f.region) : nlohmann::json(nullptr);
  return {{"type", "Feature"}, {"geometry", geometry_to_geojson(f.geometry)}, {"properties", props}};
}

namespace {

std::optional<std::string> string_prop(const nlohmann::json& props, std::initializer_list<const char*> keys) {
  for (const char* k : keys) {
    if (props.contains(k) && props.at(k).is_string() && !props.at(k).get<std::string>().empty())
      return props.at(k).get<std::string>();
  }
  if (props.contains("address") && props.at("address").is_object())
    return string_prop(props.at("address"), keys);
  return std::nullopt;
}

}  // namespace

GazetteerFeature feature_from_geojson(const nlohmann::json& j, const std::string& default_source, int default_rank) {
  if (!j.is_object() || j.value("type", std::string()) != "Feature") throw GazetteerError("expected a GeoJSON Feature");
  if (!j.contains("geometry") || j.at("geometry").is_null()) throw GazetteerError("feature without geometry");
  const nlohmann::json props = j.contains("properties") && j.at("properties").is_object() ? j.at("properties")
                                                                                          : nlohmann::json::object();
  GazetteerFeature f;
  try {
    f.geometry = geometry_from_geojson(j.at("geometry"));
  } catch (const GeometryError& e) {
    throw GazetteerError(std::string("bad feature geometry: ") + e.what());
  }
  if (auto n = string_prop(props, {"name"})) {
    f.name = *n;
  } else if (auto d = string_prop(props, {"display_name"})) {
    f.name = d->substr(0, d->find(','));
  }
  if (f.name.empty()) throw GazetteerError("feature without a name");
  f.source = props.value("source", default_source);
  f.authority_rank = props.contains("authority_rank") && props.at("authority_rank").is_number_integer()
                         ? props.at("authority_rank").get<int>()
                         : default_rank;
  if (f.authority_rank < 0) throw GazetteerError("feature '" + f.name + "' has negative authority_rank");
  f.category = string_prop(props, {"category", "type"}).value_or("");
  f.country = string_prop(props, {"country"});
  f.region = string_prop(props, {"region", "state", "county"});
  return f;
}

std::vector<GazetteerFeature> features_from_geojson(const nlohmann::json& collection, const std::string& source,
                                                    int authority_rank) {
  if (!collection.is_object() || collection.value("type", std::string()) != "FeatureCollection" ||
      !collection.contains("features") || !collection.at("features").is_array())
    throw GazetteerError("expected a GeoJSON FeatureCollection");
  std::vector<GazetteerFeature> out;
  for (const auto& f : collection.at("features")) out.push_back(feature_from_geojson(f, source, authority_rank));
  return out;
}

// ---------------------------------------------------------------------------
// sources

LocalGazetteer::LocalGazetteer(std::string id, std::vector<GazetteerFeature> features, int authority_rank)
    : id_(std::move(id)), rank_(authority_rank), features_(std::move(features)) {
  for (auto& f : features_) f.source = id_;
}

LocalGazetteer LocalGazetteer::parse(const nlohmann::json& collection, std::string id, int authority_rank) {
  auto features = features_from_geojson(collection, id, authority_rank);
  return LocalGazetteer(std::move(id), std::move(features), authority_rank);
}

LocalGazetteer LocalGazetteer::load(const std::filesystem::path& path, std::string id, int authority_rank) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw GazetteerError(path.string() + ": " + e.what());
  }
  try {
    return parse(doc, std::move(id), authority_rank);
  } catch (const GazetteerError& e) {
    throw GazetteerError(path.string() + ": " + e.what());
  }
}

std::vector<GazetteerFeature> LocalGazetteer::query(const std::string& name, const std::string&,
                                                    const std::string&) {
  const std::string key = fold_name(trim(name));
  std::vector<GazetteerFeature> out;
  for (const auto& f : features_)
    if (fold_name(f.name) == key) out.push_back(f);
  return out;
}

HttpFeatureSource::HttpFeatureSource(HttpSourceConfig config)
    : config_(std::move(config)), limiter_(config_.requests_per_second) {}

std::string HttpFeatureSource::request_target(const std::string& name, const std::string& country,
                                              const std::string& region) const {
  std::string q = config_.query_template;
  const auto substitute = [&](const std::string& placeholder, const std::string& value) {
    for (auto pos = q.find(placeholder); pos != std::string::npos; pos = q.find(placeholder, pos)) {
      const std::string enc = url_encode(value);
      q.replace(pos, placeholder.size(), enc);
      pos += enc.size();
    }
  };
  substitute("{name}", name);
  substitute("{country}", country);
  substitute("{region}", region);
  return config_.endpoint + (config_.endpoint.find('?') == std::string::npos ? "?" : "&") + q;
}

std::vector<GazetteerFeature> HttpFeatureSource::query(const std::string& name, const std::string& country,
                                                       const std::string& region) {
  const std::string url = request_target(name, country, region);
  limiter_.acquire();
  HttpResponse res;
  try {
    res = http_get(url, {{"User-Agent", config_.user_agent}, {"Accept", "application/geo+json, application/json"}},
                   config_.timeout_s);
  } catch (const std::exception& e) {
    throw SourceError(e.what());
  }
  if (res.status != 200) throw SourceError(config_.id + ": HTTP " + std::to_string(res.status));
  try {
    return features_from_geojson(nlohmann::json::parse(res.body), config_.id, config_.authority_rank);
  } catch (const std::exception& e) {
    throw SourceError(config_.id + ": unreadable response: " + e.what());
  }
}

// ---------------------------------------------------------------------------
// cache

std::filesystem::path FeatureCache::path_for(const std::string& source, const std::string& name,
                                             const std::string& country) const {
  return dir_ / (sha256_hex(source + "\n" + name + "\n" + country) + ".json");
}

std::optional<std::vector<GazetteerFeature>> FeatureCache::get(const std::string& source, const std::string& name,
                                                               const std::string& country) const {
  const auto path = path_for(source, name, country);
  std::error_code ec;
  if (!std::filesystem::exists(path, ec)) return std::nullopt;
  try {
    const auto doc = nlohmann::json::parse(read_file(path));
    if (doc.at("source") != source || doc.at("name") != name || doc.at("country") != country) return std::nullopt;
    std::vector<GazetteerFeature> out;
    for (const auto& f : doc.at("features")) out.push_back(feature_from_geojson(f, source, 0));
    return out;
  } catch (const std::exception&) {
    return std::nullopt;  // corrupt entries are refetched
  }
}

void FeatureCache::put(const std::string& source, const std::string& name, const std::string& country,
                       const std::vector<GazetteerFeature>& features) {
  const auto path = path_for(source, name, country);
  std::shared_ptr<std::mutex> lock;
  {
    std::lock_guard guard(mutex_);
    auto& slot = key_locks_[path.string()];
    if (!slot) slot = std::make_shared<std::mutex>();
    lock = slot;
  }
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& f : features) arr.push_back(feature_to_geojson(f));
  const nlohmann::json doc = {
      {"schema_version", 1}, {"source", source}, {"name", name}, {"country", country}, {"features", arr}};
  std::lock_guard guard(*lock);
  write_file_atomic(path, doc.dump(1) + "\n");
}

// ---------------------------------------------------------------------------

CandidateSet query_sources(const std::string& name, const std::string& country, const std::string& region,
                           const std::vector<FeatureSource*>& sources, const QueryOptions& options) {
  if (trim(name).empty()) throw GazetteerError("query name must be non-empty");
  if (sources.empty()) throw GazetteerError("no gazetteer sources configured");
  CandidateSet out;
  out.query_name = name;
  std::vector<std::string> failures;
  for (FeatureSource* src : sources) {
    std::optional<std::vector<GazetteerFeature>> found;
    if (options.cache && !options.refresh) found = options.cache->get(src->id(), name, country);
    if (!found) {
      try {
        found = src->query(name, country, region);
      } catch (const std::exception& e) {
        failures.push_back(src->id() + ": " + e.what());
        continue;
      }
      if (options.cache) options.cache->put(src->id(), name, country, *found);
    }
    for (auto& f : *found) {
      f.source = src->id();
      out.candidates.push_back(std::move(f));
    }
  }
  if (failures.size() == sources.size()) {
    std::string msg = "all gazetteer sources failed for '" + name + "':";
    for (const auto& f : failures) msg += "\n  " + f;
    throw GazetteerError(msg);
  }
  out.warnings = std::move(failures);
  return out;
}

CandidateSet filter_by_region(const CandidateSet& set, const std::string& country, const std::string& region) {
  const std::string c = fold_name(trim(country));
  const std::string r = fold_name(trim(region));
  const auto matches = [](const std::optional<std::string>& field, const std::string& want) {
    return !want.empty() && field && fold_name(trim(*field)) == want;
  };
  CandidateSet out = set;
  out.candidates.clear();
  for (const auto& f : set.candidates)
    if (matches(f.country, c) && matches(f.region, r)) out.candidates.push_back(f);
  if (out.candidates.empty())
    for (const auto& f : set.candidates)
      if (matches(f.country, c)) out.candidates.push_back(f);
  if (out.candidates.empty()) {
    out.candidates = set.candidates;
    out.unfiltered = true;
  }
  return out;
}

GeoPoint representative_point(const GazetteerFeature& feature) {
  try {
    return representative_point(feature.geometry);
  } catch (const GeometryError& e) {
    throw GazetteerError("feature '" + feature.name + "': " + e.what());
  }
}

namespace {

/// Keeps the `keep` candidates nearest to `anchor`, preserving their order.
std::vector<std::size_t> nearest(const std::vector<GeoPoint>& points, const GeoPoint& anchor, std::size_t keep) {
  std::vector<std::size_t> idx(points.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return haversine_km(points[a], anchor) < haversine_km(points[b], anchor);
  });
  idx.resize(std::min(keep, idx.size()));
  std::sort(idx.begin(), idx.end());
  return idx;
}

double product(const std::vector<std::vector<std::size_t>>& pools) {
  double p = 1.0;
  for (const auto& v : pools) p *= static_cast<double>(v.size());
  return p;
}

}  // namespace

std::map<std::string, GazetteerFeature> disambiguate(const std::vector<CandidateSet>& sets) {
  std::set<std::string> names;
  for (const auto& s : sets) {
    if (s.candidates.empty()) throw GazetteerError("candidate set for '" + s.query_name + "' is empty");
    if (!names.insert(s.query_name).second) throw GazetteerError("duplicate query name '" + s.query_name + "'");
  }
  const std::size_t n = sets.size();
  std::vector<std::vector<GeoPoint>> reps(n);
  for (std::size_t i = 0; i < n; ++i)
    for (const auto& f : sets[i].candidates) reps[i].push_back(representative_point(f));

  std::vector<std::vector<std::size_t>> pools(n);
  for (std::size_t i = 0; i < n; ++i) {
    pools[i].resize(sets[i].candidates.size());
    std::iota(pools[i].begin(), pools[i].end(), 0);
  }
  if (product(pools) > static_cast<double>(kMaxCombinations)) {
    // anchor on names that are already unambiguous, else on all candidates
    std::vector<GeoPoint> anchors;
    for (std::size_t i = 0; i < n; ++i)
      if (reps[i].size() == 1) anchors.push_back(reps[i][0]);
    if (anchors.empty())
      for (const auto& r : reps) anchors.insert(anchors.end(), r.begin(), r.end());
    GeoPoint anchor{0.0, 0.0};
    for (const auto& a : anchors) {
      anchor.lat += a.lat / static_cast<double>(anchors.size());
      anchor.lon += a.lon / static_cast<double>(anchors.size());
    }
    std::size_t keep = 10;
    for (;;) {
      for (std::size_t i = 0; i < n; ++i) pools[i] = nearest(reps[i], anchor, keep);
      // many names can still exceed any budget at 10 each; shrink until the search stays bounded
      if (product(pools) <= 100.0 * kMaxCombinations || keep == 1) break;
      --keep;
    }
  }

  // pairwise distances between pooled candidates
  std::vector<std::vector<std::vector<std::vector<double>>>> dist(n, std::vector<std::vector<std::vector<double>>>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      dist[i][j].assign(pools[i].size(), std::vector<double>(pools[j].size()));
      for (std::size_t a = 0; a < pools[i].size(); ++a)
        for (std::size_t b = 0; b < pools[j].size(); ++b)
          dist[i][j][a][b] = haversine_km(reps[i][pools[i][a]], reps[j][pools[j][b]]);
    }

  constexpr double kTolerance = 1e-9;
  std::vector<std::size_t> choice(n, 0), best;
  double best_total = std::numeric_limits<double>::infinity();
  long best_rank = 0;
  std::vector<std::string> best_sources;
  // combinations visited in lexicographic order, so the first of equals is kept
  for (bool done = false; !done;) {
    double total = 0.0;
    long rank = 0;
    std::vector<std::string> sources;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) total += dist[i][j][choice[i]][choice[j]];
      const auto& f = sets[i].candidates[pools[i][choice[i]]];
      rank += f.authority_rank;
      sources.push_back(f.source);
    }
    bool better = best.empty() || total < best_total - kTolerance;
    if (!better && std::abs(total - best_total) <= kTolerance)
      better = rank != best_rank ? rank < best_rank : sources < best_sources;
    if (better) {
      best = choice;
      best_total = total;
      best_rank = rank;
      best_sources = std::move(sources);
    }
    for (std::size_t k = n;;) {
      if (k == 0) {
        done = true;
        break;
      }
      --k;
      if (++choice[k] < pools[k].size()) break;
      choice[k] = 0;
    }
  }

  std::map<std::string, GazetteerFeature> out;
  for (std::size_t i = 0; i < n; ++i) out.emplace(sets[i].query_name, sets[i].candidates[pools[i][best[i]]]);
  return out;
}

GazetteerFeature conflate(const std::vector<GazetteerFeature>& per_source) {
  if (per_source.empty()) throw GazetteerError("conflate needs at least one feature");
  const auto better = [](const GazetteerFeature& a, const GazetteerFeature& b) {
    const int ca = complexity(a.geometry), cb = complexity(b.geometry);
    if (ca != cb) return ca > cb;
    if (a.authority_rank != b.authority_rank) return a.authority_rank < b.authority_rank;
    return a.geometry.bbox().area_km2() > b.geometry.bbox().area_km2();
  };
  const GazetteerFeature* best = &per_source.front();
  for (const auto& f : per_source)
    if (better(f, *best)) best = &f;
  return *best;
}

Resolution resolve_names(const std::vector<std::string>& names, const std::string& country, const std::string& region,
                         const std::vector<FeatureSource*>& sources, const QueryOptions& options) {
  Resolution out;
  std::vector<CandidateSet> sets;
  std::set<std::string> seen;
  for (const auto& name : names) {
    if (trim(name).empty() || !seen.insert(name).second) continue;
    CandidateSet found = query_sources(name, country, region, sources, options);
    for (const auto& w : found.warnings) out.warnings.push_back(w);
    if (found.candidates.empty()) {
      out.unresolved.push_back(name);
      continue;
    }
    CandidateSet filtered = filter_by_region(found, country, region);
    if (filtered.unfiltered)
      out.warnings.push_back("'" + name + "': no candidate in " + region + ", " + country + "; using all candidates");
    sets.push_back(std::move(filtered));
  }
  if (sets.empty()) return out;

  const auto chosen = disambiguate(sets);
  for (const auto& set : sets) {
    const GazetteerFeature& pick = chosen.at(set.query_name);
    const GeoPoint anchor = representative_point(pick);
    const GeoBox near = buffered(pick.geometry.bbox(), 1.0);
    // the same place as other sources describe it
    std::vector<GazetteerFeature> same{pick};
    std::map<std::string, const GazetteerFeature*> per_source;
    for (const auto& f : set.candidates) {
      if (f.source == pick.source || !f.geometry.bbox().intersects(near)) continue;
      auto& slot = per_source[f.source];
      if (!slot || haversine_km(representative_point(f), anchor) < haversine_km(representative_point(*slot), anchor))
        slot = &f;
    }
    for (const auto& [_, f] : per_source) same.push_back(*f);
    out.features.emplace(set.query_name, conflate(same));
  }
  return out;
}

}  // namespace georef
