#include "georef/georeferencer.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <regex>
#include <set>
#include <thread>

#include "georef/http.hpp"

namespace georef {

std::string_view to_string(PromptTemplate t) {
  switch (t) {
    case PromptTemplate::zero_shot: return "zero_shot";
    case PromptTemplate::auto_cot: return "auto_cot";
    case PromptTemplate::logical_cot: return "logical_cot";
    case PromptTemplate::logical_cot_grid: return "logical_cot_grid";
    case PromptTemplate::persona_logical_cot_grid: return "persona_logical_cot_grid";
    case PromptTemplate::baseline_text: return "baseline_text";
    case PromptTemplate::baseline_text_region: return "baseline_text_region";
  }
  return "?";
}

std::optional<PromptTemplate> template_from_string(std::string_view s) {
  for (PromptTemplate t : kAllTemplates)
    if (to_string(t) == s) return t;
  return std::nullopt;
}

bool is_gridded(PromptTemplate t) {
  return t != PromptTemplate::baseline_text && t != PromptTemplate::baseline_text_region;
}

namespace {

/// Rounds to two significant figures, half away from zero.
std::string two_significant(double v, const char* unit) {
  const int digits = static_cast<int>(std::floor(std::log10(v)));
  const double factor = std::pow(10.0, 1 - digits);
  const double r = std::round(v * factor) / factor;
  const int decimals = std::max(0, 1 - static_cast<int>(std::floor(std::log10(r))));
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f %s", decimals, r, unit);
  return buf;
}

constexpr const char* kGridQuestion =
    "Based on the gridded map given, what grid cell/cells represent the following location description?";
constexpr const char* kGridReasoning =
    "Think step by step. Identify the locations mentioned. If a distance is mentioned in the description, use the "
    "grid sizes to calculate the relative distances.";
constexpr const char* kBaselineIntro =
    "You are a language and geography expert.\n\n"
    "Georeference the following location description. Answer with coordinates in decimal degrees.";

}  // namespace

std::string format_grid_size(double cell_km) {
  if (!(cell_km > 0.0) || !std::isfinite(cell_km)) throw PromptError("grid size must be positive");
  const double metres = cell_km * 1000.0;
  if (metres < 1000.0) {
    std::string m = two_significant(metres, "m");
    if (m != "1000 m") return m;
  }
  return two_significant(cell_km, "km");
}

std::string build_prompt(PromptTemplate t, const std::string& description, std::optional<double> cell_km,
                         const std::optional<std::string>& region, const std::optional<std::string>& country) {
  if (trim(description).empty()) throw PromptError("location description is empty");
  const std::string tail = "\n\nLocation Description: " + description;
  const auto grid_sentence = [&] {
    if (!cell_km) throw PromptError(std::string(to_string(t)) + " needs the grid cell size");
    const std::string g = format_grid_size(*cell_km);
    return "Each grid cell is " + g + " × " + g + ".";
  };
  switch (t) {
    case PromptTemplate::zero_shot:
      return "What grid cell/cells represent the following location description?" + tail;
    case PromptTemplate::auto_cot:
      return std::string(kGridQuestion) + " Think step by step." + tail;
    case PromptTemplate::logical_cot:
      return std::string(kGridQuestion) +
             "\n\nThink step by step. Identify the locations mentioned and use the relative spatial relations "
             "mentioned in the description." +
             tail;
    case PromptTemplate::logical_cot_grid:
      return std::string(kGridQuestion) + "\n\n" + grid_sentence() + "\n\n" + kGridReasoning + tail;
    case PromptTemplate::persona_logical_cot_grid:
      return "You are a language and cartography expert.\n" + std::string(kGridQuestion) + "\n\n" +
             grid_sentence() + "\n\n" + kGridReasoning + tail;
    case PromptTemplate::baseline_text:
      return kBaselineIntro + tail;
    case PromptTemplate::baseline_text_region:
      if (!region || !country || trim(*region).empty() || trim(*country).empty())
        throw PromptError("baseline_text_region needs region and country");
      return std::string(kBaselineIntro) +
             " The country and the district of the location are provided.\n\nThis location is in " + *region + ", " +
             *country + "." + tail;
  }
  throw PromptError("unknown template");
}

std::string request_fingerprint(const LmmRequest& r) {
  char params[96];
  std::snprintf(params, sizeof params, "%.17g\n%d", r.temperature, r.max_output_tokens);
  const std::string image = r.image ? sha256_hex(*r.image) : "-";
  return sha256_hex(r.model_id + "\n" + params + "\n" + image + "\n" + r.prompt_text);
}

// ---------------------------------------------------------------------------
// providers

ChatCompletionsProvider::ChatCompletionsProvider(ProviderConfig config)
    : config_(std::move(config)), limiter_(config_.requests_per_second) {
  if (config_.request_shape != "chat-completions")
    throw ProviderError("unsupported request shape '" + config_.request_shape + "'", false);
}

nlohmann::json ChatCompletionsProvider::request_body(const LmmRequest& r) {
  nlohmann::json content = nlohmann::json::array();
  content.push_back({{"type", "text"}, {"text", r.prompt_text}});
  if (r.image) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(r.image->data());
    content.push_back(
        {{"type", "image_url"},
         {"image_url", {{"url", "data:image/png;base64," + base64_encode({bytes, r.image->size()})}}}});
  }
  return {{"model", r.model_id},
          {"temperature", r.temperature},
          {"max_tokens", r.max_output_tokens},
          {"messages", nlohmann::json::array({{{"role", "user"}, {"content", content}}})}};
}

std::string ChatCompletionsProvider::complete(const LmmRequest& request) {
  const char* key = std::getenv(config_.api_key_env.c_str());
  if (!key || !*key) throw ProviderError("environment variable " + config_.api_key_env + " is not set", false);
  limiter_.acquire();
  HttpResponse res;
  try {
    res = http_post(config_.endpoint, request_body(request).dump(), "application/json",
                    {{"Authorization", std::string("Bearer ") + key}}, config_.timeout_s);
  } catch (const std::exception& e) {
    throw ProviderError(config_.id + ": " + e.what(), true);
  }
  if (res.status == 429 || res.status >= 500)
    throw ProviderError(config_.id + ": HTTP " + std::to_string(res.status), true);
  if (res.status != 200)
    throw ProviderError(config_.id + ": HTTP " + std::to_string(res.status) + ": " + res.body.substr(0, 300), false);
  try {
    const auto doc = nlohmann::json::parse(res.body);
    const auto& content = doc.at("choices").at(0).at("message").at("content");
    if (content.is_string()) return content.get<std::string>();
    std::string text;
    for (const auto& part : content)
      if (part.value("type", "") == "text") text += part.value("text", "");
    return text;
  } catch (const nlohmann::json::exception& e) {
    throw ProviderError(config_.id + ": unreadable response: " + e.what(), false);
  }
}

MockProvider::MockProvider(std::map<std::string, std::string> by_fingerprint, std::map<std::string, std::string> by_item,
                           std::string model_id)
    : model_(std::move(model_id)), by_fingerprint_(std::move(by_fingerprint)), by_item_(std::move(by_item)) {}

std::unique_ptr<MockProvider> MockProvider::load(const std::filesystem::path& path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_file(path));
    return std::make_unique<MockProvider>(doc.value("by_fingerprint", std::map<std::string, std::string>{}),
                        doc.value("by_item", std::map<std::string, std::string>{}),
                        doc.value("model_id", std::string("mock")));
  } catch (const nlohmann::json::exception& e) {
    throw ProviderError(path.string() + ": " + e.what(), false);
  }
}

std::string MockProvider::complete(const LmmRequest& request) {
  ++calls_;
  if (auto it = by_fingerprint_.find(request_fingerprint(request)); it != by_fingerprint_.end()) return it->second;
  if (auto it = by_item_.find(request.item_id); it != by_item_.end()) return it->second;
  throw ProviderError("no fixture for item '" + request.item_id + "'", false);
}

// ---------------------------------------------------------------------------
// cache and audit

std::optional<std::string> ResponseCache::get(const std::string& fingerprint) const {
  const auto path = dir_ / (fingerprint + ".json");
  std::error_code ec;
  if (!std::filesystem::exists(path, ec)) return std::nullopt;
  try {
    const auto doc = nlohmann::json::parse(read_file(path));
    if (doc.at("fingerprint") != fingerprint) return std::nullopt;
    return doc.at("response").get<std::string>();
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

void ResponseCache::put(const std::string& fingerprint, const std::string& response) {
  std::lock_guard guard(mutex_);
  const nlohmann::json doc = {{"schema_version", 1}, {"fingerprint", fingerprint}, {"response", response}};
  write_file_atomic(dir_ / (fingerprint + ".json"), doc.dump(1) + "\n");
}

void AuditLog::append(const nlohmann::json& entry) {
  std::lock_guard guard(mutex_);
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  std::FILE* f = std::fopen(path_.c_str(), "ab");
  if (!f) throw std::runtime_error("cannot open audit log " + path_.string());
  const std::string line = entry.dump() + "\n";
  std::fwrite(line.data(), 1, line.size(), f);
  std::fclose(f);
}

// ---------------------------------------------------------------------------
// parsing

Prediction make_prediction(std::vector<std::string> cells, std::string rationale, std::string fingerprint) {
  Prediction p;
  p.cells = std::move(cells);
  if (!p.cells.empty()) p.primary = p.cells.front();
  p.unparseable = p.cells.empty();
  p.rationale = std::move(rationale);
  p.request_fingerprint = std::move(fingerprint);
  return p;
}

std::vector<std::string> parse_cells(const std::string& response, const GridSpec& grid) {
  static const std::regex label(R"(\b([A-Z]{1,2})([0-9]{1,2})\b)");
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (auto it = std::sregex_iterator(response.begin(), response.end(), label); it != std::sregex_iterator(); ++it) {
    const std::string text = it->str();
    const auto cell = parse_label(text);
    if (!cell || !in_grid(grid, *cell)) continue;
    const std::string canonical = label_for_index(grid, *cell);
    if (seen.insert(canonical).second) out.push_back(canonical);
  }
  return out;
}

namespace {

std::string normalise_numbers(std::string s) {
  const auto replace_all = [&](const std::string& from, const std::string& to) {
    for (auto pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) s.replace(pos, from.size(), to);
  };
  replace_all("−", "-");   // minus sign
  replace_all("°", " ");   // degree sign
  replace_all("′", " ");
  return s;
}

std::optional<GeoPoint> plausible(double lat, double lon) {
  const GeoPoint p{lat, lon};
  return is_valid(p) ? std::optional(p) : std::nullopt;
}

}  // namespace

std::optional<GeoPoint> parse_coordinates(const std::string& response) {
  const std::string s = normalise_numbers(response);
  const std::string num = R"(([-+]?\d{1,3}(?:\.\d+)?))";
  static const std::regex labelled("lat(?:itude)?\\s*[:=]?\\s*" + num + "\\s*([NS])?[^0-9\\-+]{0,40}?lon(?:gitude)?"
                                   "\\s*[:=]?\\s*" + num + "\\s*([EW])?",
                                   std::regex::icase);
  static const std::regex hemispheres(num + "\\s*([NS])\\b[\\s,;/]*" + num + "\\s*([EW])\\b");
  static const std::regex signed_pair(R"(([-+]?\d{1,3}\.\d+)\s*[,;]\s*([-+]?\d{1,3}\.\d+))");

  struct Hit {
    std::ptrdiff_t pos;
    GeoPoint p;
  };
  std::optional<Hit> best;
  const auto consider = [&](std::ptrdiff_t pos, std::optional<GeoPoint> p) {
    if (p && (!best || pos < best->pos)) best = Hit{pos, *p};
  };
  const auto sign = [](const std::string& hemi, char negative) {
    return !hemi.empty() && std::toupper(static_cast<unsigned char>(hemi[0])) == negative ? -1.0 : 1.0;
  };

  for (auto it = std::sregex_iterator(s.begin(), s.end(), labelled); it != std::sregex_iterator(); ++it) {
    const auto& m = *it;
    consider(m.position(), plausible(std::stod(m[1]) * sign(m[2], 'S'), std::stod(m[3]) * sign(m[4], 'W')));
  }
  for (auto it = std::sregex_iterator(s.begin(), s.end(), hemispheres); it != std::sregex_iterator(); ++it) {
    const auto& m = *it;
    consider(m.position(), plausible(std::abs(std::stod(m[1])) * sign(m[2], 'S'),
                                     std::abs(std::stod(m[3])) * sign(m[4], 'W')));
  }
  for (auto it = std::sregex_iterator(s.begin(), s.end(), signed_pair); it != std::sregex_iterator(); ++it) {
    const auto& m = *it;
    consider(m.position(), plausible(std::stod(m[1]), std::stod(m[2])));
  }
  if (!best) return std::nullopt;
  return best->p;
}

// ---------------------------------------------------------------------------

std::pair<std::string, bool> send(Provider& provider, const LmmRequest& request, const CallOptions& options) {
  const std::string fp = request_fingerprint(request);
  if (options.cache && !options.refresh_cache)
    if (auto hit = options.cache->get(fp)) return {*hit, true};
  const auto sleep = options.sleep ? options.sleep : [](double s) {
    std::this_thread::sleep_for(std::chrono::duration<double>(s));
  };
  for (int attempt = 0;; ++attempt) {
    try {
      std::string response = provider.complete(request);
      if (options.cache) options.cache->put(fp, response);
      return {std::move(response), false};
    } catch (const ProviderError& e) {
      if (!e.retryable() || attempt >= options.max_retries) throw;
      sleep(options.base_delay_s * std::pow(2.0, attempt));
    }
  }
}

namespace {

LmmRequest make_request(const std::string& item_id, std::string prompt, std::optional<std::string> image,
                        const Provider& provider, const CallOptions& options) {
  LmmRequest r;
  r.prompt_text = std::move(prompt);
  r.image = std::move(image);
  r.model_id = provider.model_id();
  r.temperature = options.temperature;
  r.max_output_tokens = options.max_output_tokens;
  r.item_id = item_id;
  return r;
}

nlohmann::json audit_entry(const std::string& item_id, PromptTemplate t, const LmmRequest& r,
                           const std::string& response, bool cached) {
  return {{"item_id", item_id},
          {"template", to_string(t)},
          {"prompt", r.prompt_text},
          {"image_sha256", r.image ? nlohmann::json(sha256_hex(*r.image)) : nlohmann::json(nullptr)},
          {"model_id", r.model_id},
          {"request_fingerprint", request_fingerprint(r)},
          {"response", response},
          {"cached", cached},
          {"timestamp", utc_timestamp()}};
}

}  // namespace

Prediction georeference(const std::string& item_id, const std::string& description, const std::string& map_png,
                        const GridSpec& grid, Provider& provider, PromptTemplate t, const CallOptions& options) {
  if (!is_gridded(t)) throw PromptError(std::string(to_string(t)) + " is not a gridded template");
  validate_grid(grid);
  const LmmRequest request =
      make_request(item_id, build_prompt(t, description, grid.cell_km), map_png, provider, options);
  auto [response, cached] = send(provider, request, options);
  Prediction p = make_prediction(parse_cells(response, grid), response, request_fingerprint(request));
  p.cached = cached;
  if (options.audit) {
    auto entry = audit_entry(item_id, t, request, response, cached);
    entry["cells"] = p.cells;
    options.audit->append(entry);
  }
  return p;
}

CoordinatePrediction text_only_georeference(const std::string& item_id, const std::string& description,
                                            Provider& provider, PromptTemplate t,
                                            const std::optional<std::string>& region,
                                            const std::optional<std::string>& country, const CallOptions& options) {
  if (is_gridded(t)) throw PromptError(std::string(to_string(t)) + " is not a text-only template");
  const LmmRequest request =
      make_request(item_id, build_prompt(t, description, std::nullopt, region, country), std::nullopt, provider,
                   options);
  auto [response, cached] = send(provider, request, options);
  CoordinatePrediction p;
  p.point = parse_coordinates(response);
  p.unparseable = !p.point;
  p.rationale = response;
  p.request_fingerprint = request_fingerprint(request);
  p.cached = cached;
  if (options.audit) {
    auto entry = audit_entry(item_id, t, request, response, cached);
    entry["point"] = p.point ? nlohmann::json(*p.point) : nlohmann::json(nullptr);
    options.audit->append(entry);
  }
  return p;
}

}  // namespace georef
