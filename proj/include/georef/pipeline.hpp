#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "georef/eval.hpp"
#include "georef/gazetteer.hpp"
#include "georef/georeferencer.hpp"
#include "georef/mapgen.hpp"
#include "georef/records.hpp"
#include "georef/render.hpp"

namespace georef {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SourceConfig {
  std::string kind;  // "local" or "http"
  std::string id;
  int authority_rank = 0;
  std::filesystem::path path;  // local
  HttpSourceConfig http;       // http
};

struct ProviderEntry {
  std::string kind;  // "chat-completions" or "mock"
  ProviderConfig remote;
  std::filesystem::path fixtures;  // mock
};

/// JSON config; relative paths resolve against the config file's directory.
struct PipelineConfig {
  std::filesystem::path cache_dir = ".georef-cache";
  std::optional<std::filesystem::path> style;
  std::optional<std::filesystem::path> lexicon;
  std::optional<TileServerConfig> tile_server;  // absent: blank basemap
  std::vector<SourceConfig> sources;
  GridOptions grid;
  int image_width_px = 1024;
  ExtentOptions extent;
  std::size_t min_length = 60;
  std::map<std::string, ProviderEntry> providers;
  std::string default_provider;
  std::string default_template = "logical_cot_grid";
  int max_retries = 3;
  int workers = 1;
  std::optional<std::filesystem::path> annotations_dir;
  Imputation imputation = Imputation::exclude;
};

PipelineConfig load_config(const std::filesystem::path& path);
PipelineConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir);

/// Per-run switches that override the config file.
struct RunOptions {
  bool offline = false;        // only local sources, blank basemap
  bool refresh_cache = false;
  std::optional<int> workers;
  std::optional<std::size_t> min_length;
  std::optional<double> buffer_factor;
  std::optional<std::string> template_id;
  std::optional<std::string> provider;
  std::shared_ptr<Provider> provider_override;  // tests inject doubles here
  std::shared_ptr<TileSource> tiles_override;
  std::vector<std::shared_ptr<FeatureSource>> sources_override;
};

/// Item outcome tally shared by every stage artifact.
struct StageStatus {
  std::vector<std::string> completed;
  std::vector<std::pair<std::string, std::string>> failed;  // id, error

  /// 0 all done, 2 some failed, 3 none done (with at least one item).
  int exit_code() const;
  nlohmann::json manifest() const;
};

/// Names of the artifact files inside a run directory.
struct RunLayout {
  std::filesystem::path dir;
  std::filesystem::path parse() const { return dir / "parse.json"; }
  std::filesystem::path resolved() const { return dir / "resolved.json"; }
  std::filesystem::path mapgen() const { return dir / "mapgen.json"; }
  std::filesystem::path dataset() const { return dir / "dataset.json"; }
  std::filesystem::path maps() const { return dir / "maps"; }
  std::filesystem::path predictions() const { return dir / "predictions.json"; }
  std::filesystem::path audit() const { return dir / "audit.jsonl"; }
  std::filesystem::path report_csv() const { return dir / "report.csv"; }
  std::filesystem::path report_json() const { return dir / "report.json"; }
};

/// Records from CSV (`.csv`) or JSON (`{"records": [...]}`).
std::vector<CollectionRecord> load_records(const std::filesystem::path& path);

StageStatus cmd_parse(const std::filesystem::path& records, const RunLayout& out, const PipelineConfig& config,
                      const RunOptions& options = {});
StageStatus cmd_resolve(const RunLayout& run, const PipelineConfig& config, const RunOptions& options = {});
StageStatus cmd_mapgen(const RunLayout& run, const PipelineConfig& config, const RunOptions& options = {});
StageStatus cmd_georef(const RunLayout& run, const PipelineConfig& config, const RunOptions& options = {});
/// Scores predictions.json (or an audit log when given) against dataset.json.
StageStatus cmd_eval(const RunLayout& run, const PipelineConfig& config,
                     const std::optional<std::filesystem::path>& audit_log = std::nullopt,
                     const std::optional<std::filesystem::path>& dataset = std::nullopt);
/// All stages in order; stops after a stage that completes no item.
StageStatus cmd_run(const std::filesystem::path& records, const RunLayout& out, const PipelineConfig& config,
                    const RunOptions& options = {});

/// Re-scores an audit log: the last entry per item wins; cells are re-parsed from the raw response.
std::vector<MetricReport> rescore_audit_log(const std::filesystem::path& audit_log, const Dataset& dataset,
                                            Imputation imputation = Imputation::exclude);

}  // namespace georef
