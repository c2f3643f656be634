#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "georef/geo.hpp"
#include "georef/grid.hpp"

namespace georef {

struct CollectionRecord {
  std::string id;
  std::string text;
  std::string country;
  std::string region;
  std::optional<GeoPoint> ground_truth;

  friend bool operator==(const CollectionRecord&, const CollectionRecord&) = default;
};

/// One evaluable item: a record, its gridded map and the label of the cell
/// holding the ground truth.
struct DatasetItem {
  CollectionRecord record;
  std::string map_path;  // as written in the dataset file; relative paths resolve against its directory
  MapGeoreference map_meta;
  std::string label;
  double scale_km = 0.0;

  friend bool operator==(const DatasetItem&, const DatasetItem&) = default;
};

/// Raised for files that are not valid JSON or do not follow the dataset schema.
class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ItemIssue {
  std::size_t index = 0;
  std::string item_id;
  std::vector<std::string> violations;
};

struct Dataset {
  std::vector<DatasetItem> items;
  std::vector<ItemIssue> issues;  // items listed here are still present in `items`
  std::filesystem::path base_dir;

  std::vector<DatasetItem> valid_items() const;
};

Dataset load_dataset(const std::filesystem::path& path);
Dataset parse_dataset(const std::string& json_text, const std::filesystem::path& base_dir,
                      const std::string& source_name = "<memory>");
nlohmann::json dataset_to_json(const std::vector<DatasetItem>& items);
void save_dataset(const std::filesystem::path& path, const std::vector<DatasetItem>& items);

/// Lists every violated invariant; empty when the item is valid. Never throws.
std::vector<std::string> validate_item(const DatasetItem& item, const std::filesystem::path& base_dir = {});

/// Keeps records whose trimmed text has at least `min_length` Unicode scalar values.
std::vector<CollectionRecord> filter_records(const std::vector<CollectionRecord>& records, std::size_t min_length);

/// CSV import with header `id,text,country,region,lat,lon` (any column order, RFC 4180 quoting).
std::vector<CollectionRecord> load_records_csv(const std::filesystem::path& path);
std::vector<CollectionRecord> parse_records_csv(const std::string& csv_text);
std::vector<std::vector<std::string>> parse_csv(const std::string& text);

/// Width and height from a PNG header; empty when the file is missing or not a PNG.
std::optional<std::pair<int, int>> png_dimensions(const std::filesystem::path& path);

void to_json(nlohmann::json& j, const CollectionRecord& r);
void from_json(const nlohmann::json& j, CollectionRecord& r);

}  // namespace georef
