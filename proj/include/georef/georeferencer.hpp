#pragma once

#include <atomic>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "georef/geo.hpp"
#include "georef/grid.hpp"
#include "georef/util.hpp"

namespace georef {

enum class PromptTemplate {
  zero_shot,
  auto_cot,
  logical_cot,
  logical_cot_grid,
  persona_logical_cot_grid,
  baseline_text,
  baseline_text_region,
};

inline constexpr PromptTemplate kAllTemplates[] = {
    PromptTemplate::zero_shot,          PromptTemplate::auto_cot,      PromptTemplate::logical_cot,
    PromptTemplate::logical_cot_grid,   PromptTemplate::persona_logical_cot_grid,
    PromptTemplate::baseline_text,      PromptTemplate::baseline_text_region};

std::string_view to_string(PromptTemplate t);
std::optional<PromptTemplate> template_from_string(std::string_view s);
/// The five templates that are sent together with a gridded map.
bool is_gridded(PromptTemplate t);

class PromptError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Two significant figures: 1.88 -> "1.9 km", 0.45 -> "450 m".
std::string format_grid_size(double cell_km);

std::string build_prompt(PromptTemplate t, const std::string& description,
                         std::optional<double> cell_km = std::nullopt,
                         const std::optional<std::string>& region = std::nullopt,
                         const std::optional<std::string>& country = std::nullopt);

struct LmmRequest {
  std::string prompt_text;
  std::optional<std::string> image;  // PNG bytes
  std::string model_id;
  double temperature = 0.0;
  int max_output_tokens = 1024;
  std::string item_id;  // metadata only; not part of the fingerprint
};

/// SHA-256 over model, sampling parameters, prompt and image digest.
std::string request_fingerprint(const LmmRequest& r);

class ProviderError : public std::runtime_error {
 public:
  ProviderError(const std::string& what, bool retryable) : std::runtime_error(what), retryable_(retryable) {}
  bool retryable() const { return retryable_; }

 private:
  bool retryable_;
};

class Provider {
 public:
  virtual ~Provider() = default;
  virtual const std::string& id() const = 0;
  virtual const std::string& model_id() const = 0;
  virtual std::string complete(const LmmRequest& request) = 0;
};

struct ProviderConfig {
  std::string id = "openai";
  std::string endpoint = "https://api.openai.com/v1/chat/completions";
  std::string api_key_env = "OPENAI_API_KEY";
  std::string model_id = "gpt-4o-2024-08-06";
  std::string request_shape = "chat-completions";
  double temperature = 0.0;
  int max_output_tokens = 1024;
  double requests_per_second = 1.0;
  int timeout_s = 120;
};

/// OpenAI-style chat-completions wire format; the key is read from the
/// configured environment variable at call time.
class ChatCompletionsProvider final : public Provider {
 public:
  explicit ChatCompletionsProvider(ProviderConfig config);
  const std::string& id() const override { return config_.id; }
  const std::string& model_id() const override { return config_.model_id; }
  std::string complete(const LmmRequest& request) override;
  static nlohmann::json request_body(const LmmRequest& request);

 private:
  ProviderConfig config_;
  RateLimiter limiter_;
};

/// Canned responses looked up by request fingerprint, then by item id.
class MockProvider final : public Provider {
 public:
  MockProvider(std::map<std::string, std::string> by_fingerprint, std::map<std::string, std::string> by_item,
               std::string model_id = "mock");
  /// {"model_id": "...", "by_fingerprint": {...}, "by_item": {...}}
  static std::unique_ptr<MockProvider> load(const std::filesystem::path& path);
  const std::string& id() const override { return id_; }
  const std::string& model_id() const override { return model_; }
  std::string complete(const LmmRequest& request) override;
  int calls() const { return calls_.load(); }

 private:
  std::string id_ = "mock";
  std::string model_;
  std::map<std::string, std::string> by_fingerprint_;
  std::map<std::string, std::string> by_item_;
  std::atomic<int> calls_{0};
};

/// Raw responses on disk keyed by request fingerprint.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {}
  std::optional<std::string> get(const std::string& fingerprint) const;
  void put(const std::string& fingerprint, const std::string& response);

 private:
  std::filesystem::path dir_;
  std::mutex mutex_;
};

/// Append-only JSON lines.
class AuditLog {
 public:
  explicit AuditLog(std::filesystem::path path) : path_(std::move(path)) {}
  void append(const nlohmann::json& entry);
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::mutex mutex_;
};

struct CallOptions {
  double temperature = 0.0;
  int max_output_tokens = 1024;
  int max_retries = 3;
  double base_delay_s = 1.0;                   // doubled after each retryable failure
  std::function<void(double)> sleep;           // defaults to a real sleep
  ResponseCache* cache = nullptr;
  bool refresh_cache = false;                  // skip cache reads, still write
  AuditLog* audit = nullptr;
};

struct Prediction {
  std::vector<std::string> cells;
  std::optional<std::string> primary;
  std::string rationale;
  std::string request_fingerprint;
  bool unparseable = false;
  bool cached = false;
};

/// Builds a Prediction whose primary is the first cell.
Prediction make_prediction(std::vector<std::string> cells, std::string rationale, std::string fingerprint);

struct CoordinatePrediction {
  std::optional<GeoPoint> point;
  std::string rationale;
  std::string request_fingerprint;
  bool unparseable = false;
  bool cached = false;
};

/// In-grid labels in first-occurrence order, deduplicated.
std::vector<std::string> parse_cells(const std::string& response, const GridSpec& grid);

/// First decimal-degree pair: "lat: X, lon: Y" forms, hemisphere letters, or a signed "X, Y" pair.
std::optional<GeoPoint> parse_coordinates(const std::string& response);

/// Sends with bounded exponential-backoff retries, consulting the cache first.
/// Returns the response and whether it came from the cache.
std::pair<std::string, bool> send(Provider& provider, const LmmRequest& request, const CallOptions& options);

Prediction georeference(const std::string& item_id, const std::string& description, const std::string& map_png,
                        const GridSpec& grid, Provider& provider, PromptTemplate t, const CallOptions& options = {});

CoordinatePrediction text_only_georeference(const std::string& item_id, const std::string& description,
                                            Provider& provider, PromptTemplate t,
                                            const std::optional<std::string>& region = std::nullopt,
                                            const std::optional<std::string>& country = std::nullopt,
                                            const CallOptions& options = {});

}  // namespace georef
