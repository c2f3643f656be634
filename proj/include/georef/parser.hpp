#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "georef/geo.hpp"

namespace georef {

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class MentionKind {
  name,     // a named place as written
  anaphor,  // a bare feature noun ("lake") referring back to a named place
};

/// A place mention. `start`/`end` are UTF-8 byte offsets into the description.
struct PlaceMention {
  std::string surface;
  std::size_t start = 0;
  std::size_t end = 0;
  std::optional<std::string> normalized;  // expanded abbreviation or coreference target
  MentionKind kind = MentionKind::name;
  std::string category;  // feature type from cue words ("lake", "peak", ...); empty when unknown

  friend bool operator==(const PlaceMention&, const PlaceMention&) = default;
};

/// Name used to look the mention up: the normalized form when present.
const std::string& canonical_name(const PlaceMention& m);
/// Anaphors without an antecedent cannot be resolved to a feature.
inline bool resolvable(const PlaceMention& m) { return m.kind == MentionKind::name || m.normalized.has_value(); }

enum class Compass { N, NE, E, SE, S, SW, W, NW };
enum class Precision { exact, approximate };

std::string_view to_string(Compass c);
std::optional<Compass> compass_from_string(std::string_view word);

struct RelationTriple {
  std::optional<PlaceMention> locatum;  // absent: degenerate, the locatum is the described location
  std::string indicator;
  PlaceMention relatum;
  std::optional<double> distance_km;
  std::optional<Compass> bearing;
  Precision precision = Precision::exact;

  bool degenerate() const { return !locatum.has_value(); }
  friend bool operator==(const RelationTriple&, const RelationTriple&) = default;
};

struct ContainmentPair {
  PlaceMention parent;
  PlaceMention child;

  friend bool operator==(const ContainmentPair&, const ContainmentPair&) = default;
};

struct ParseResult {
  std::vector<PlaceMention> mentions;
  std::vector<RelationTriple> triples;
  std::vector<ContainmentPair> containment;

  friend bool operator==(const ParseResult&, const ParseResult&) = default;
};

struct DistancePhrase {
  double km = 0.0;
  Precision precision = Precision::exact;
};

/// Spatial-indicator patterns, one per line. Tokens are literal words (upper-case
/// tokens such as "NE" match case-sensitively, others case-insensitively);
/// `{distance}` / `{distance?}` as the first token marks a required / optional
/// distance phrase in front of the indicator.
class IndicatorLexicon {
 public:
  struct Pattern {
    std::vector<std::string> tokens;
    enum class Distance { none, optional, required } distance = Distance::none;
  };

  static IndicatorLexicon parse(std::string_view text);
  static IndicatorLexicon load(const std::filesystem::path& path);
  /// Seed lexicon compiled into the library (same content as data/spatial_indicators.txt).
  static const IndicatorLexicon& builtin();

  const std::vector<Pattern>& patterns() const { return patterns_; }
  int version() const { return version_; }

 private:
  std::vector<Pattern> patterns_;
  int version_ = 0;
};

/// Place-name extraction strategy.
class PlaceExtractor {
 public:
  virtual ~PlaceExtractor() = default;
  virtual std::vector<PlaceMention> extract(std::string_view text) const = 0;
};

/// Capitalised multi-word phrases plus feature-type cue words.
class HeuristicExtractor final : public PlaceExtractor {
 public:
  std::vector<PlaceMention> extract(std::string_view text) const override;
};

/// Returns manually annotated mentions after checking their spans.
class ManualAnnotationExtractor final : public PlaceExtractor {
 public:
  explicit ManualAnnotationExtractor(std::vector<PlaceMention> mentions) : mentions_(std::move(mentions)) {}
  std::vector<PlaceMention> extract(std::string_view text) const override;

 private:
  std::vector<PlaceMention> mentions_;
};

/// Throws ParseError naming the first mention whose span does not index its surface.
void validate_mentions(std::string_view text, const std::vector<PlaceMention>& mentions);

std::vector<PlaceMention> extract_place_names(std::string_view text,
                                              const std::optional<std::vector<PlaceMention>>& override = std::nullopt);

std::vector<RelationTriple> extract_relations(std::string_view text, const std::vector<PlaceMention>& mentions,
                                              const IndicatorLexicon& lexicon = IndicatorLexicon::builtin());

/// "Ca 2km" -> (2.0, approximate). Empty when the phrase carries no number + unit.
std::optional<DistancePhrase> parse_distance_phrase(std::string_view phrase);

/// Geometry summary used for containment tests.
struct Footprint {
  GeoBox bbox;
  GeoPoint representative;
  bool areal = false;                              // only areal footprints can contain others
  std::function<bool(const GeoPoint&)> covers;     // point-in-footprint test
};

/// Parent/child containment, ordered by child position. With footprints
/// (aligned with `mentions`, empty entries allowed) the test is geometric and
/// transitively reduced; otherwise the leading comma-separated names form a
/// coarse-to-fine hierarchy.
std::vector<ContainmentPair> detect_containment(std::string_view text, const std::vector<PlaceMention>& mentions,
                                                const std::vector<std::optional<Footprint>>* footprints = nullptr);

/// Names, relations and heuristic containment in one pass.
ParseResult parse_locality(std::string_view text, const PlaceExtractor& extractor,
                           const IndicatorLexicon& lexicon = IndicatorLexicon::builtin());

/// Invariant check: spans, relata present in mentions, acyclic containment.
/// Returns the list of violations.
std::vector<std::string> check_parse_result(std::string_view text, const ParseResult& result);

void to_json(nlohmann::json& j, const PlaceMention& m);
void from_json(const nlohmann::json& j, PlaceMention& m);
void to_json(nlohmann::json& j, const RelationTriple& t);
void from_json(const nlohmann::json& j, RelationTriple& t);
void to_json(nlohmann::json& j, const ParseResult& r);
void from_json(const nlohmann::json& j, ParseResult& r);

}  // namespace georef
