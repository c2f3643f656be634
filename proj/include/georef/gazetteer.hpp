#pragma once

#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "georef/geometry.hpp"
#include "georef/util.hpp"

namespace georef {

class GazetteerError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised by a source that could not answer (network, HTTP status, bad payload).
class SourceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GazetteerFeature {
  std::string name;
  std::string source;
  int authority_rank = 0;  // lower is more authoritative
  Geometry geometry;
  std::string category;
  std::optional<std::string> country;
  std::optional<std::string> region;

  friend bool operator==(const GazetteerFeature&, const GazetteerFeature&) = default;
};

struct CandidateSet {
  std::string query_name;
  std::vector<GazetteerFeature> candidates;
  bool unfiltered = false;            // region/country filter matched nothing
  std::vector<std::string> warnings;  // per-source failures that were skipped
};

class FeatureSource {
 public:
  virtual ~FeatureSource() = default;
  virtual const std::string& id() const = 0;
  virtual int authority_rank() const = 0;
  /// Local sources return true; the query layer counts calls to the others.
  virtual bool remote() const { return true; }
  virtual std::vector<GazetteerFeature> query(const std::string& name, const std::string& country,
                                              const std::string& region) = 0;
};

/// GeoJSON FeatureCollection with properties name, category, country, region,
/// authority_rank. Names match after case and diacritic folding.
class LocalGazetteer final : public FeatureSource {
 public:
  LocalGazetteer(std::string id, std::vector<GazetteerFeature> features, int authority_rank = 0);
  static LocalGazetteer load(const std::filesystem::path& path, std::string id, int authority_rank = 0);
  static LocalGazetteer parse(const nlohmann::json& collection, std::string id, int authority_rank = 0);

  const std::string& id() const override { return id_; }
  int authority_rank() const override { return rank_; }
  bool remote() const override { return false; }
  std::vector<GazetteerFeature> query(const std::string& name, const std::string& country,
                                      const std::string& region) override;
  const std::vector<GazetteerFeature>& features() const { return features_; }

 private:
  std::string id_;
  int rank_;
  std::vector<GazetteerFeature> features_;
};

struct HttpSourceConfig {
  std::string id;
  std::string endpoint;  // e.g. https://nominatim.openstreetmap.org/search
  /// Query string with {name}, {country}, {region} placeholders (URL-encoded on substitution).
  std::string query_template = "q={name}&format=geojson&polygon_geojson=1&addressdetails=1&limit=10";
  int authority_rank = 1;
  double requests_per_second = 1.0;
  std::string user_agent = "georef/1.0";
  int timeout_s = 30;
};

/// GeoJSON-returning geocoding service (Nominatim-style).
class HttpFeatureSource final : public FeatureSource {
 public:
  explicit HttpFeatureSource(HttpSourceConfig config);
  const std::string& id() const override { return config_.id; }
  int authority_rank() const override { return config_.authority_rank; }
  std::vector<GazetteerFeature> query(const std::string& name, const std::string& country,
                                      const std::string& region) override;
  /// Request target (path + query) for a lookup.
  std::string request_target(const std::string& name, const std::string& country, const std::string& region) const;

 private:
  HttpSourceConfig config_;
  RateLimiter limiter_;
};

/// Features from a GeoJSON FeatureCollection body as served by geocoders.
std::vector<GazetteerFeature> features_from_geojson(const nlohmann::json& collection, const std::string& source,
                                                    int authority_rank);

/// Content-addressed JSON cache of source answers, keyed by (source, name, country).
class FeatureCache {
 public:
  explicit FeatureCache(std::filesystem::path dir) : dir_(std::move(dir)) {}
  std::optional<std::vector<GazetteerFeature>> get(const std::string& source, const std::string& name,
                                                   const std::string& country) const;
  void put(const std::string& source, const std::string& name, const std::string& country,
           const std::vector<GazetteerFeature>& features);
  std::filesystem::path path_for(const std::string& source, const std::string& name,
                                 const std::string& country) const;

 private:
  std::filesystem::path dir_;
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<std::mutex>> key_locks_;
};

struct QueryOptions {
  FeatureCache* cache = nullptr;
  bool refresh = false;  // bypass cache reads, still write
};

/// Union of all sources' candidates. One failing source becomes a warning;
/// all failing raises GazetteerError listing each cause.
CandidateSet query_sources(const std::string& name, const std::string& country, const std::string& region,
                           const std::vector<FeatureSource*>& sources, const QueryOptions& options = {});

/// Region+country match, then country only, else the input flagged unfiltered.
CandidateSet filter_by_region(const CandidateSet& set, const std::string& country, const std::string& region);

inline constexpr std::size_t kMaxCombinations = 10000;

/// Spatial minimality: one candidate per name minimising the summed pairwise
/// haversine distance between representative points.
std::map<std::string, GazetteerFeature> disambiguate(const std::vector<CandidateSet>& sets);

/// Prefers polygon > line > point, then lower authority rank, then larger bbox.
GazetteerFeature conflate(const std::vector<GazetteerFeature>& per_source);

GeoPoint representative_point(const GazetteerFeature& feature);

struct Resolution {
  std::map<std::string, GazetteerFeature> features;  // keyed by query name
  std::vector<std::string> unresolved;
  std::vector<std::string> warnings;
};

/// Query, filter, disambiguate per source, then conflate across sources.
Resolution resolve_names(const std::vector<std::string>& names, const std::string& country, const std::string& region,
                         const std::vector<FeatureSource*>& sources, const QueryOptions& options = {});

nlohmann::json feature_to_geojson(const GazetteerFeature& f);
GazetteerFeature feature_from_geojson(const nlohmann::json& j, const std::string& default_source,
                                      int default_rank);

}  // namespace georef
