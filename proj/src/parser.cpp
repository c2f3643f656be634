#include "georef/parser.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>
#include <sstream>
#include <unordered_set>

#include "georef/util.hpp"

namespace georef {

namespace {

// ---------------------------------------------------------------------------
// tokenizer

struct Token {
  std::string_view text;
  std::size_t start = 0;
  std::size_t end = 0;
  int clause = 0;
};

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

/// Lower-cased token without a trailing period.
std::string key(std::string_view tok) {
  if (!tok.empty() && tok.back() == '.') tok.remove_suffix(1);
  return lower(tok);
}

bool is_word_byte(char c) {
  const auto u = static_cast<unsigned char>(c);
  return std::isalnum(u) || u >= 0x80 || c == '\'';
}

bool is_letter(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }

const std::unordered_set<std::string>& abbreviations() {
  static const std::unordered_set<std::string> s{"ca", "c", "approx", "appr", "mt", "mts", "pt", "st", "nr",
                                                 "is", "rd", "hwy", "jct", "l", "r", "ck", "str"};
  return s;
}

std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> out;
  int clause = 0;
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    const char c = text[i];
    if (is_word_byte(c)) {
      const std::size_t start = i;
      std::size_t seg_start = i;
      while (i < n) {
        if (is_word_byte(text[i])) {
          ++i;
        } else if (text[i] == '-' && i + 1 < n && is_word_byte(text[i + 1]) && i > start &&
                   is_letter(text[i - 1])) {
          ++i;
          seg_start = i;
        } else if (text[i] == '.' && i + 1 < n && i > start && std::isdigit(static_cast<unsigned char>(text[i - 1])) &&
                   std::isdigit(static_cast<unsigned char>(text[i + 1]))) {
          ++i;
        } else if (text[i] == '.' && i + 1 < n && is_letter(text[i + 1]) && i - seg_start == 1 &&
                   is_letter(text[seg_start])) {
          // initials such as "J.K."
          ++i;
          seg_start = i;
        } else {
          break;
        }
      }
      std::string_view word = text.substr(start, i - start);
      if (i < n && text[i] == '.') {
        const bool initials = word.size() >= 3 && word[word.size() - 2] == '.';
        if (initials || abbreviations().contains(lower(word))) {
          ++i;
          word = text.substr(start, i - start);
        }
      }
      out.push_back({word, start, i, clause});
      continue;
    }
    if (c == '~') {
      out.push_back({text.substr(i, 1), i, i + 1, clause});
      ++i;
      continue;
    }
    switch (c) {
      case ',': case ';': case ':': case '.': case '(': case ')': case '[': case ']': case '\n': case '!': case '?':
        ++clause;
        break;
      case '-':
        if ((i == 0 || std::isspace(static_cast<unsigned char>(text[i - 1]))) &&
            (i + 1 >= n || std::isspace(static_cast<unsigned char>(text[i + 1]))))
          ++clause;
        break;
      default:
        // en/em dash
        if (static_cast<unsigned char>(c) == 0xE2 && i + 2 < n && static_cast<unsigned char>(text[i + 1]) == 0x80 &&
            (static_cast<unsigned char>(text[i + 2]) == 0x93 || static_cast<unsigned char>(text[i + 2]) == 0x94)) {
          ++clause;
          i += 2;
        }
        break;
    }
    ++i;
  }
  return out;
}

int clause_at(const std::vector<Token>& tokens, std::size_t offset) {
  int clause = 0;
  for (const auto& t : tokens) {
    if (t.start > offset) break;
    clause = t.clause;
  }
  return clause;
}

bool only_space(std::string_view text, std::size_t from, std::size_t to) {
  if (from > to) return false;
  for (std::size_t i = from; i < to; ++i)
    if (!std::isspace(static_cast<unsigned char>(text[i]))) return false;
  return true;
}

// ---------------------------------------------------------------------------
// word classes

const std::map<std::string, Compass>& compass_words() {
  static const std::map<std::string, Compass> m{
      {"north", Compass::N},     {"south", Compass::S},     {"east", Compass::E},      {"west", Compass::W},
      {"northeast", Compass::NE}, {"northwest", Compass::NW}, {"southeast", Compass::SE}, {"southwest", Compass::SW},
      {"north-east", Compass::NE}, {"north-west", Compass::NW}, {"south-east", Compass::SE},
      {"south-west", Compass::SW}, {"northern", Compass::N}, {"southern", Compass::S}, {"eastern", Compass::E},
      {"western", Compass::W},   {"n", Compass::N},         {"s", Compass::S},         {"e", Compass::E},
      {"w", Compass::W},         {"ne", Compass::NE},       {"nw", Compass::NW},       {"se", Compass::SE},
      {"sw", Compass::SW},       {"nne", Compass::NE},      {"ene", Compass::NE},      {"ese", Compass::SE},
      {"sse", Compass::SE},      {"ssw", Compass::SW},      {"wsw", Compass::SW},      {"wnw", Compass::NW},
      {"nnw", Compass::NW}};
  return m;
}

bool is_direction(std::string_view tok) { return compass_words().contains(key(tok)); }

const std::unordered_set<std::string>& qualifiers() {
  static const std::unordered_set<std::string> s{
      "ca", "c", "circa", "about", "approx", "appr", "approximately", "around", "roughly", "near", "nr",
      "between", "along", "from", "at", "on", "in", "by", "to", "the", "a", "an", "above", "below", "beside",
      "behind", "off", "opposite", "towards", "toward", "via", "just", "roadside", "cliffs", "cliff", "track",
      "tracks", "edge", "side", "top", "base", "foot", "summit", "slopes", "slope", "upper", "lower", "head",
      "mouth", "shore", "shores", "bank", "banks", "end", "junction", "coll", "collected", "locality", "loc",
      "and", "or", "of", "up", "upstream", "downstream", "inland", "under", "over", "within", "open", "damp",
      "wet", "dry", "growing", "common", "rare", "scrub", "swamp", "bush", "grassland", "coast", "beach",
      "valley", "gully", "ridge", "saddle", "plateau", "terrace", "flat", "flats", "road", "sh", "state",
      "highway", "site", "area", "vicinity", "hills", "rocks", "rock", "bluff", "bluffs", "near"};
  return s;
}

const std::unordered_set<std::string>& connectors() {
  static const std::unordered_set<std::string> s{"of", "the", "de", "la", "du", "des", "le", "von", "van", "del"};
  return s;
}

/// Feature-type cue words and the category they introduce.
const std::map<std::string, std::string>& cue_categories() {
  static const std::map<std::string, std::string> m{
      {"lake", "lake"},      {"lakes", "lake"},      {"l.", "lake"},        {"mount", "peak"},
      {"mt", "peak"},        {"mt.", "peak"},        {"peak", "peak"},      {"mountain", "peak"},
      {"hill", "peak"},      {"river", "river"},     {"stream", "river"},   {"burn", "river"},
      {"creek", "river"},    {"brook", "river"},     {"reserve", "reserve"}, {"park", "reserve"},
      {"sanctuary", "reserve"}, {"forest", "forest"}, {"point", "point"},    {"pt", "point"},
      {"pt.", "point"},      {"cape", "point"},      {"bay", "bay"},        {"harbour", "bay"},
      {"inlet", "bay"},      {"county", "county"},   {"district", "county"}, {"region", "county"},
      {"island", "island"},  {"islands", "island"},  {"is.", "island"},     {"range", "range"},
      {"ranges", "range"}};
  return m;
}

/// Lower-case anaphoric nouns and their category.
const std::map<std::string, std::string>& anaphor_nouns() {
  static const std::map<std::string, std::string> m{
      {"lake", "lake"},     {"river", "river"},   {"stream", "river"}, {"burn", "river"},   {"creek", "river"},
      {"peak", "peak"},     {"mount", "peak"},    {"mountain", "peak"}, {"summit", "peak"}, {"reserve", "reserve"},
      {"park", "reserve"},  {"bay", "bay"},       {"point", "point"},  {"island", "island"}, {"forest", "forest"},
      {"range", "range"}};
  return m;
}

const std::map<std::string, std::string>& expansions() {
  static const std::map<std::string, std::string> m{
      {"l.", "Lake"}, {"mt", "Mount"}, {"mt.", "Mount"}, {"pt", "Point"}, {"pt.", "Point"}, {"is.", "Island"}};
  return m;
}

bool starts_upper(std::string_view tok) {
  if (tok.empty()) return false;
  const auto b = static_cast<unsigned char>(tok[0]);
  if (b < 0x80) return std::isupper(b) != 0;
  if (tok.size() < 2) return false;
  const auto b1 = static_cast<unsigned char>(tok[1]);
  const char32_t cp = (b >> 5) == 0x6 ? (char32_t((b & 0x1F)) << 6) | (b1 & 0x3F) : 0;
  if (cp >= 0xC0 && cp <= 0xDE && cp != 0xD7) return true;
  return cp >= 0x100 && cp <= 0x17F && cp % 2 == 0;
}

std::string slice(std::string_view text, std::size_t a, std::size_t b) { return std::string(text.substr(a, b - a)); }

PlaceMention make_mention(std::string_view text, const std::vector<Token>& tokens, std::size_t first, std::size_t last) {
  PlaceMention m;
  m.start = tokens[first].start;
  m.end = tokens[last].end;
  m.surface = slice(text, m.start, m.end);
  bool expanded = false;
  std::string normalized;
  for (std::size_t k = first; k <= last; ++k) {
    const std::string low = lower(tokens[k].text);
    if (auto it = cue_categories().find(low); it != cue_categories().end()) m.category = it->second;
    if (!normalized.empty()) normalized += ' ';
    if (auto it = expansions().find(low); it != expansions().end()) {
      normalized += it->second;
      expanded = true;
    } else {
      normalized += tokens[k].text;
    }
  }
  if (expanded) m.normalized = normalized;
  return m;
}

// ---------------------------------------------------------------------------
// distance phrases

struct DistanceMatch {
  std::size_t end_token = 0;  // one past the last token
  DistancePhrase value;
};

std::optional<double> unit_factor_km(std::string_view unit) {
  static const std::map<std::string, double> units{
      {"km", 1.0},         {"kms", 1.0},          {"kilometre", 1.0}, {"kilometres", 1.0}, {"kilometer", 1.0},
      {"kilometers", 1.0}, {"m", 1e-3},           {"metre", 1e-3},    {"metres", 1e-3},    {"meter", 1e-3},
      {"meters", 1e-3},    {"mi", 1.609344},      {"mile", 1.609344}, {"miles", 1.609344}};
  const auto it = units.find(lower(unit));
  if (it == units.end()) return std::nullopt;
  return it->second;
}

/// Splits "2.5km" into number and unit. The number part must be the whole numeric prefix.
std::optional<std::pair<double, std::string>> number_unit(std::string_view tok) {
  std::size_t i = 0;
  while (i < tok.size() && (std::isdigit(static_cast<unsigned char>(tok[i])) || tok[i] == '.')) ++i;
  if (i == 0 || !std::isdigit(static_cast<unsigned char>(tok[0]))) return std::nullopt;
  const std::string num(tok.substr(0, i));
  if (std::count(num.begin(), num.end(), '.') > 1 || num.back() == '.') return std::nullopt;
  return std::pair{std::stod(num), std::string(tok.substr(i))};
}

// metres divide exactly so "500 m" and "0.5 km" agree
double to_km(double value, double factor) { return factor == 1e-3 ? value / 1000.0 : value * factor; }

bool is_distance_qualifier(std::string_view tok) {
  static const std::unordered_set<std::string> q{"ca", "c", "circa", "about", "approx", "appr", "approximately",
                                                 "~", "around", "roughly", "some"};
  return q.contains(key(tok));
}

std::optional<DistanceMatch> match_distance_at(const std::vector<Token>& tokens, std::size_t i) {
  if (i >= tokens.size()) return std::nullopt;
  DistanceMatch m;
  std::size_t j = i;
  if (is_distance_qualifier(tokens[j].text)) {
    m.value.precision = Precision::approximate;
    ++j;
  }
  if (j >= tokens.size() || tokens[j].clause != tokens[i].clause) return std::nullopt;
  const auto nu = number_unit(tokens[j].text);
  if (!nu) return std::nullopt;
  if (!nu->second.empty()) {
    const auto f = unit_factor_km(nu->second);
    if (!f) return std::nullopt;
    m.value.km = to_km(nu->first, *f);
    m.end_token = j + 1;
  } else {
    if (j + 1 >= tokens.size() || tokens[j + 1].clause != tokens[i].clause) return std::nullopt;
    const auto f = unit_factor_km(key(tokens[j + 1].text));
    if (!f) return std::nullopt;
    m.value.km = to_km(nu->first, *f);
    m.end_token = j + 2;
  }
  if (!(m.value.km > 0.0)) return std::nullopt;
  return m;
}

// ---------------------------------------------------------------------------
// anaphors

std::vector<PlaceMention> find_anaphors(std::string_view text, const std::vector<Token>& tokens,
                                        const std::vector<PlaceMention>& names) {
  std::vector<PlaceMention> out;
  for (const auto& t : tokens) {
    if (starts_upper(t.text)) continue;
    const auto it = anaphor_nouns().find(std::string(t.text));
    if (it == anaphor_nouns().end()) continue;
    const bool inside = std::any_of(names.begin(), names.end(),
                                    [&](const PlaceMention& m) { return t.start < m.end && m.start < t.end; });
    if (inside) continue;
    PlaceMention a;
    a.surface = slice(text, t.start, t.end);
    a.start = t.start;
    a.end = t.end;
    a.kind = MentionKind::anaphor;
    a.category = it->second;
    std::set<std::string> antecedents;
    for (const auto& m : names)
      if (m.kind == MentionKind::name && m.end <= t.start && m.category == a.category)
        antecedents.insert(canonical_name(m));
    if (antecedents.size() == 1) a.normalized = *antecedents.begin();
    out.push_back(std::move(a));
  }
  return out;
}

bool token_matches(std::string_view pattern, std::string_view tok) {
  const bool all_caps = std::all_of(pattern.begin(), pattern.end(), [](char c) {
    return std::isupper(static_cast<unsigned char>(c)) || !std::isalpha(static_cast<unsigned char>(c));
  }) && std::any_of(pattern.begin(), pattern.end(), [](char c) { return std::isalpha(static_cast<unsigned char>(c)); });
  if (all_caps) return pattern == tok;
  return lower(pattern) == lower(tok);
}

std::optional<Compass> bearing_of(const std::vector<std::string_view>& words) {
  std::vector<Compass> dirs;
  for (auto w : words)
    if (auto c = compass_from_string(w)) dirs.push_back(*c);
  if (dirs.empty()) return std::nullopt;
  if (dirs.size() == 1) return dirs[0];
  // "north east of" -> NE
  const auto has = [&](Compass c) { return std::find(dirs.begin(), dirs.end(), c) != dirs.end(); };
  if (has(Compass::N) && has(Compass::E)) return Compass::NE;
  if (has(Compass::N) && has(Compass::W)) return Compass::NW;
  if (has(Compass::S) && has(Compass::E)) return Compass::SE;
  if (has(Compass::S) && has(Compass::W)) return Compass::SW;
  return dirs[0];
}

}  // namespace

// ---------------------------------------------------------------------------

const std::string& canonical_name(const PlaceMention& m) { return m.normalized ? *m.normalized : m.surface; }

std::string_view to_string(Compass c) {
  static constexpr std::string_view names[] = {"N", "NE", "E", "SE", "S", "SW", "W", "NW"};
  return names[static_cast<int>(c)];
}

std::optional<Compass> compass_from_string(std::string_view word) {
  const auto& m = compass_words();
  if (auto it = m.find(key(word)); it != m.end()) return it->second;
  return std::nullopt;
}

IndicatorLexicon IndicatorLexicon::parse(std::string_view text) {
  IndicatorLexicon lex;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string_view t = trim(line);
    if (t.empty()) continue;
    if (t.front() == '#') {
      const std::string_view body = trim(t.substr(1));
      if (body.starts_with("version:")) lex.version_ = std::stoi(std::string(trim(body.substr(8))));
      continue;
    }
    Pattern p;
    std::istringstream words{std::string(t)};
    std::string w;
    while (words >> w) {
      if (w == "{distance}" || w == "{distance?}") {
        if (!p.tokens.empty() || p.distance != Pattern::Distance::none)
          throw ParseError("lexicon line " + std::to_string(lineno) + ": distance slot must come first");
        p.distance = w == "{distance}" ? Pattern::Distance::required : Pattern::Distance::optional;
      } else if (w.front() == '{') {
        throw ParseError("lexicon line " + std::to_string(lineno) + ": unknown placeholder " + w);
      } else {
        p.tokens.push_back(w);
      }
    }
    if (p.tokens.empty()) throw ParseError("lexicon line " + std::to_string(lineno) + ": no indicator words");
    lex.patterns_.push_back(std::move(p));
  }
  return lex;
}

IndicatorLexicon IndicatorLexicon::load(const std::filesystem::path& path) { return parse(read_file(path)); }

const IndicatorLexicon& IndicatorLexicon::builtin() {
  static const IndicatorLexicon lex = parse(
#include "lexicon_data.inc"
  );
  return lex;
}

void validate_mentions(std::string_view text, const std::vector<PlaceMention>& mentions) {
  for (const auto& m : mentions) {
    const std::string name = "'" + m.surface + "' [" + std::to_string(m.start) + "," + std::to_string(m.end) + ")";
    if (!(m.start < m.end) || m.end > text.size()) throw ParseError("mention " + name + ": span out of bounds");
    if (text.substr(m.start, m.end - m.start) != m.surface)
      throw ParseError("mention " + name + ": surface does not match text at span");
  }
}

std::vector<PlaceMention> ManualAnnotationExtractor::extract(std::string_view text) const {
  validate_mentions(text, mentions_);
  return mentions_;
}

std::vector<PlaceMention> HeuristicExtractor::extract(std::string_view text) const {
  const auto tokens = tokenize(text);
  std::vector<PlaceMention> out;

  const auto stop_only = [&](std::size_t a, std::size_t b) {
    for (std::size_t k = a; k <= b; ++k) {
      const std::string w = key(tokens[k].text);
      if (!is_direction(tokens[k].text) && !qualifiers().contains(w)) return false;
    }
    return true;
  };

  std::size_t i = 0;
  while (i < tokens.size()) {
    if (!starts_upper(tokens[i].text)) {
      ++i;
      continue;
    }
    std::size_t first = i;
    std::size_t last = i;
    std::size_t j = i + 1;
    while (j < tokens.size() && tokens[j].clause == tokens[first].clause) {
      if (starts_upper(tokens[j].text)) {
        last = j++;
      } else if (connectors().contains(std::string(tokens[j].text)) && j + 1 < tokens.size() &&
                 tokens[j + 1].clause == tokens[first].clause && starts_upper(tokens[j + 1].text) &&
                 !stop_only(first, last)) {
        last = j + 1;
        j += 2;
      } else {
        break;
      }
    }
    i = j;

    // leading qualifiers ("Ca", "Near") are not part of the name
    while (first <= last && qualifiers().contains(key(tokens[first].text)) && !is_direction(tokens[first].text))
      ++first;
    if (first > last || stop_only(first, last)) continue;
    bool all_cues = true;
    for (std::size_t k = first; k <= last; ++k)
      if (!cue_categories().contains(lower(tokens[k].text))) all_cues = false;
    if (all_cues) continue;
    if (first == last && tokens[first].text.size() == 1) continue;
    out.push_back(make_mention(text, tokens, first, last));
  }
  return out;
}

std::vector<PlaceMention> extract_place_names(std::string_view text,
                                              const std::optional<std::vector<PlaceMention>>& override) {
  if (trim(text).empty()) throw ParseError("locality description is empty");
  if (override) return ManualAnnotationExtractor(*override).extract(text);
  return HeuristicExtractor().extract(text);
}

std::optional<DistancePhrase> parse_distance_phrase(std::string_view phrase) {
  const auto tokens = tokenize(phrase);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (auto m = match_distance_at(tokens, i)) return m->value;
  }
  return std::nullopt;
}

std::vector<RelationTriple> extract_relations(std::string_view text, const std::vector<PlaceMention>& mentions,
                                              const IndicatorLexicon& lexicon) {
  validate_mentions(text, mentions);
  const auto tokens = tokenize(text);
  std::vector<PlaceMention> names;
  for (const auto& m : mentions)
    if (m.kind == MentionKind::name) names.push_back(m);
  std::sort(names.begin(), names.end(), [](const auto& a, const auto& b) { return a.start < b.start; });

  std::vector<PlaceMention> candidates = names;
  for (auto& a : find_anaphors(text, tokens, names)) candidates.push_back(std::move(a));
  for (const auto& m : mentions)
    if (m.kind == MentionKind::anaphor &&
        std::none_of(candidates.begin(), candidates.end(), [&](const auto& c) { return c.start == m.start; }))
      candidates.push_back(m);
  std::sort(candidates.begin(), candidates.end(), [](const auto& a, const auto& b) { return a.start < b.start; });

  const auto inside_name = [&](std::size_t a, std::size_t b) {
    return std::any_of(names.begin(), names.end(), [&](const auto& m) { return a < m.end && m.start < b; });
  };
  const auto next_candidate = [&](std::size_t from, int clause) -> const PlaceMention* {
    for (const auto& c : candidates)
      if (c.start >= from) return clause_at(tokens, c.start) == clause ? &c : nullptr;
    return nullptr;
  };

  std::vector<RelationTriple> out;
  std::size_t i = 0;
  while (i < tokens.size()) {
    struct Best {
      std::size_t lit_first = 0, end_token = 0, length = 0;
      std::optional<DistanceMatch> distance;
    };
    std::optional<Best> best;
    for (const auto& p : lexicon.patterns()) {
      std::size_t j = i;
      std::optional<DistanceMatch> dist;
      if (p.distance != IndicatorLexicon::Pattern::Distance::none) {
        dist = match_distance_at(tokens, i);
        if (dist) j = dist->end_token;
        else if (p.distance == IndicatorLexicon::Pattern::Distance::required) continue;
      }
      const std::size_t lit_first = j;
      bool ok = true;
      for (const auto& w : p.tokens) {
        if (j >= tokens.size() || tokens[j].clause != tokens[i].clause || !token_matches(w, tokens[j].text)) {
          ok = false;
          break;
        }
        ++j;
      }
      if (!ok || inside_name(tokens[lit_first].start, tokens[j - 1].end)) continue;
      const std::size_t length = tokens[j - 1].end - tokens[i].start;
      if (!best || length > best->length) best = Best{lit_first, j, length, dist};
    }
    if (!best) {
      ++i;
      continue;
    }

    const Token& lit0 = tokens[best->lit_first];
    const Token& litN = tokens[best->end_token - 1];
    RelationTriple t;
    t.indicator = slice(text, lit0.start, litN.end);
    std::vector<std::string_view> words;
    for (std::size_t k = best->lit_first; k < best->end_token; ++k) words.push_back(tokens[k].text);
    t.bearing = bearing_of(words);
    if (best->distance) {
      t.distance_km = best->distance->value.km;
      t.precision = best->distance->value.precision;
    }
    const std::size_t phrase_start = tokens[i].start;
    for (const auto& m : names)
      if (m.end <= phrase_start && only_space(text, m.end, phrase_start)) t.locatum = m;

    const PlaceMention* rel = next_candidate(litN.end, lit0.clause);
    if (rel) {
      t.relatum = *rel;
      out.push_back(t);
      if (key(t.indicator) == "between") {
        // "between A and B": companion triple for B
        std::size_t k = best->end_token;
        while (k < tokens.size() && tokens[k].start < rel->end) ++k;
        if (k < tokens.size() && lower(tokens[k].text) == "and" && only_space(text, rel->end, tokens[k].start)) {
          const PlaceMention* second = next_candidate(tokens[k].end, lit0.clause);
          if (second && only_space(text, tokens[k].end, second->start)) {
            RelationTriple companion = t;
            companion.relatum = *second;
            out.push_back(companion);
          }
        }
      }
    }
    i = best->end_token;
  }
  return out;
}

std::vector<ContainmentPair> detect_containment(std::string_view text, const std::vector<PlaceMention>& mentions,
                                                const std::vector<std::optional<Footprint>>* footprints) {
  if (mentions.empty()) throw ParseError("containment needs at least one mention");
  if (footprints && footprints->size() != mentions.size())
    throw ParseError("footprints must align with mentions");

  // one node per distinct resolvable name, in order of first appearance
  std::vector<std::size_t> nodes;
  std::set<std::string> seen;
  for (std::size_t i = 0; i < mentions.size(); ++i) {
    if (mentions[i].kind != MentionKind::name) continue;
    if (seen.insert(fold_name(canonical_name(mentions[i]))).second) nodes.push_back(i);
  }
  std::sort(nodes.begin(), nodes.end(), [&](std::size_t a, std::size_t b) { return mentions[a].start < mentions[b].start; });

  std::vector<ContainmentPair> out;
  if (footprints) {
    std::vector<std::size_t> with_fp;
    for (std::size_t i : nodes)
      if ((*footprints)[i]) with_fp.push_back(i);
    const auto contains = [&](std::size_t p, std::size_t c) {
      const Footprint& P = *(*footprints)[p];
      const Footprint& C = *(*footprints)[c];
      if (!P.areal || !(P.bbox.area_km2() > C.bbox.area_km2())) return false;
      return P.covers ? P.covers(C.representative) : P.bbox.contains(C.representative);
    };
    for (std::size_t c : with_fp) {
      std::vector<std::size_t> parents;
      for (std::size_t p : with_fp)
        if (p != c && contains(p, c)) parents.push_back(p);
      for (std::size_t p : parents) {
        const bool indirect = std::any_of(parents.begin(), parents.end(),
                                          [&](std::size_t q) { return q != p && contains(p, q); });
        if (!indirect) out.push_back({mentions[p], mentions[c]});
      }
    }
    return out;
  }

  // heuristic: leading clauses that hold exactly one bare name are the hierarchy
  const auto tokens = tokenize(text);
  std::set<std::size_t> leading;
  for (int clause = 0;; ++clause) {
    std::vector<const Token*> in_clause;
    for (const auto& t : tokens)
      if (t.clause == clause) in_clause.push_back(&t);
    if (in_clause.empty()) {
      if (std::any_of(tokens.begin(), tokens.end(), [&](const Token& t) { return t.clause > clause; })) continue;
      break;
    }
    std::vector<std::size_t> here;
    for (std::size_t i : nodes)
      if (clause_at(tokens, mentions[i].start) == clause) here.push_back(i);
    if (here.size() != 1) break;
    const PlaceMention& m = mentions[here[0]];
    const bool bare = std::all_of(in_clause.begin(), in_clause.end(),
                                  [&](const Token* t) { return t->start >= m.start && t->end <= m.end; });
    if (!bare) break;
    leading.insert(here[0]);
  }

  const auto rank = [&](std::size_t i) {
    const std::string& c = mentions[i].category;
    if (c == "island") return 4;
    if (c == "county") return 3;
    if (c.empty()) return leading.contains(i) ? 3 : 0;
    if (c == "reserve" || c == "forest" || c == "range") return 2;
    return 1;
  };

  for (std::size_t k = 0; k < nodes.size(); ++k) {
    const std::size_t c = nodes[k];
    for (std::size_t q = k; q-- > 0;) {
      const std::size_t p = nodes[q];
      if (leading.contains(p) && rank(p) >= 3 && rank(p) > rank(c)) {
        out.push_back({mentions[p], mentions[c]});
        break;
      }
    }
  }
  return out;
}

ParseResult parse_locality(std::string_view text, const PlaceExtractor& extractor, const IndicatorLexicon& lexicon) {
  if (trim(text).empty()) throw ParseError("locality description is empty");
  ParseResult r;
  r.mentions = extractor.extract(text);
  r.triples = extract_relations(text, r.mentions, lexicon);
  for (const auto& t : r.triples) {
    const bool known = std::any_of(r.mentions.begin(), r.mentions.end(),
                                   [&](const auto& m) { return m.start == t.relatum.start && m.end == t.relatum.end; });
    if (!known) r.mentions.push_back(t.relatum);
  }
  std::stable_sort(r.mentions.begin(), r.mentions.end(), [](const auto& a, const auto& b) { return a.start < b.start; });
  if (std::any_of(r.mentions.begin(), r.mentions.end(), [](const auto& m) { return m.kind == MentionKind::name; }))
    r.containment = detect_containment(text, r.mentions);
  return r;
}

std::vector<std::string> check_parse_result(std::string_view text, const ParseResult& r) {
  std::vector<std::string> out;
  try {
    validate_mentions(text, r.mentions);
  } catch (const ParseError& e) {
    out.emplace_back(e.what());
  }
  for (const auto& t : r.triples) {
    if (t.indicator.empty()) out.emplace_back("triple with empty indicator");
    if (t.distance_km && !(*t.distance_km > 0.0)) out.emplace_back("triple with non-positive distance");
    if (std::find(r.mentions.begin(), r.mentions.end(), t.relatum) == r.mentions.end())
      out.emplace_back("relatum '" + t.relatum.surface + "' missing from mentions");
  }
  std::map<std::string, std::vector<std::string>> graph;
  for (const auto& c : r.containment) graph[canonical_name(c.parent)].push_back(canonical_name(c.child));
  std::map<std::string, int> state;  // 1 = on stack, 2 = done
  std::function<bool(const std::string&)> cyclic = [&](const std::string& n) {
    state[n] = 1;
    for (const auto& m : graph[n]) {
      if (state[m] == 1 || (state[m] == 0 && cyclic(m))) return true;
    }
    state[n] = 2;
    return false;
  };
  for (const auto& [n, _] : graph)
    if (state[n] == 0 && cyclic(n)) {
      out.emplace_back("containment has a cycle through '" + n + "'");
      break;
    }
  return out;
}

// ---------------------------------------------------------------------------
// JSON

void to_json(nlohmann::json& j, const PlaceMention& m) {
  j = {{"surface", m.surface},
       {"start", m.start},
       {"end", m.end},
       {"kind", m.kind == MentionKind::name ? "name" : "anaphor"},
       {"category", m.category}};
  j["normalized"] = m.normalized ? nlohmann::json(*m.normalized) : nlohmann::json(nullptr);
}

void from_json(const nlohmann::json& j, PlaceMention& m) {
  j.at("surface").get_to(m.surface);
  j.at("start").get_to(m.start);
  j.at("end").get_to(m.end);
  m.normalized.reset();
  if (j.contains("normalized") && !j.at("normalized").is_null()) m.normalized = j.at("normalized").get<std::string>();
  m.kind = j.value("kind", std::string("name")) == "anaphor" ? MentionKind::anaphor : MentionKind::name;
  m.category = j.value("category", std::string());
}

void to_json(nlohmann::json& j, const RelationTriple& t) {
  j = {{"indicator", t.indicator},
       {"relatum", t.relatum},
       {"precision", t.precision == Precision::exact ? "exact" : "approximate"}};
  j["locatum"] = t.locatum ? nlohmann::json(*t.locatum) : nlohmann::json(nullptr);
  j["distance_km"] = t.distance_km ? nlohmann::json(*t.distance_km) : nlohmann::json(nullptr);
  j["bearing"] = t.bearing ? nlohmann::json(std::string(to_string(*t.bearing))) : nlohmann::json(nullptr);
}

void from_json(const nlohmann::json& j, RelationTriple& t) {
  j.at("indicator").get_to(t.indicator);
  j.at("relatum").get_to(t.relatum);
  t.locatum.reset();
  t.distance_km.reset();
  t.bearing.reset();
  if (j.contains("locatum") && !j.at("locatum").is_null()) t.locatum = j.at("locatum").get<PlaceMention>();
  if (j.contains("distance_km") && !j.at("distance_km").is_null()) t.distance_km = j.at("distance_km").get<double>();
  if (j.contains("bearing") && !j.at("bearing").is_null())
    t.bearing = compass_from_string(j.at("bearing").get<std::string>());
  t.precision = j.value("precision", std::string("exact")) == "approximate" ? Precision::approximate : Precision::exact;
}

void to_json(nlohmann::json& j, const ParseResult& r) {
  nlohmann::json containment = nlohmann::json::array();
  for (const auto& c : r.containment) containment.push_back({{"parent", c.parent}, {"child", c.child}});
  j = {{"mentions", r.mentions}, {"triples", r.triples}, {"containment", containment}};
}

void from_json(const nlohmann::json& j, ParseResult& r) {
  r.mentions = j.value("mentions", std::vector<PlaceMention>{});
  r.triples = j.value("triples", std::vector<RelationTriple>{});
  r.containment.clear();
  if (j.contains("containment"))
    for (const auto& c : j.at("containment"))
      r.containment.push_back({c.at("parent").get<PlaceMention>(), c.at("child").get<PlaceMention>()});
}

}  // namespace georef
