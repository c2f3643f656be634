#include "georef/records.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include "georef/util.hpp"

namespace georef {

namespace {

std::size_t line_of(const std::string& text, std::size_t byte) {
  byte = std::min(byte, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<long>(byte), '\n'));
}

const nlohmann::json& field(const nlohmann::json& obj, const char* name, const std::string& where) {
  if (!obj.is_object()) throw DatasetError(where + ": expected an object");
  const auto it = obj.find(name);
  if (it == obj.end()) throw DatasetError(where + "." + name + ": missing field");
  return *it;
}

template <typename T>
T typed(const nlohmann::json& obj, const char* name, const std::string& where) {
  const auto& v = field(obj, name, where);
  try {
    return v.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw DatasetError(where + "." + name + ": wrong type");
  }
}

}  // namespace

void to_json(nlohmann::json& j, const CollectionRecord& r) {
  j = {{"id", r.id}, {"text", r.text}, {"country", r.country}, {"region", r.region}};
  j["location"] = r.ground_truth ? nlohmann::json(*r.ground_truth) : nlohmann::json(nullptr);
}

void from_json(const nlohmann::json& j, CollectionRecord& r) {
  j.at("id").get_to(r.id);
  j.at("text").get_to(r.text);
  r.country = j.value("country", std::string());
  r.region = j.value("region", std::string());
  r.ground_truth.reset();
  if (j.contains("location") && !j.at("location").is_null()) r.ground_truth = j.at("location").get<GeoPoint>();
}

std::vector<DatasetItem> Dataset::valid_items() const {
  std::vector<bool> bad(items.size(), false);
  for (const auto& issue : issues) bad[issue.index] = true;
  std::vector<DatasetItem> out;
  for (std::size_t i = 0; i < items.size(); ++i)
    if (!bad[i]) out.push_back(items[i]);
  return out;
}

Dataset parse_dataset(const std::string& text, const std::filesystem::path& base_dir, const std::string& source) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw DatasetError(source + ":" + std::to_string(line_of(text, e.byte)) + ": " + e.what());
  }
  const auto& items = field(doc, "items", source);
  if (!items.is_array()) throw DatasetError(source + ".items: expected an array");

  Dataset out;
  out.base_dir = base_dir;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const std::string where = source + ".items[" + std::to_string(i) + "]";
    const auto& j = items[i];
    DatasetItem item;
    item.record.id = typed<std::string>(j, "id", where);
    item.record.text = typed<std::string>(j, "text", where);
    item.record.country = typed<std::string>(j, "country", where);
    item.record.region = typed<std::string>(j, "region", where);
    item.map_path = typed<std::string>(j, "map_path", where);
    item.label = typed<std::string>(j, "label", where);
    item.scale_km = typed<double>(j, "scale_km", where);
    const auto& loc = field(j, "location", where);
    if (!loc.is_null())
      item.record.ground_truth = GeoPoint{typed<double>(loc, "lat", where + ".location"),
                                          typed<double>(loc, "lon", where + ".location")};
    const auto& grid = field(j, "grid", where);
    try {
      item.map_meta = grid.get<MapGeoreference>();
    } catch (const nlohmann::json::exception& e) {
      throw DatasetError(where + ".grid: " + e.what());
    }
    out.items.push_back(std::move(item));
  }

  for (std::size_t i = 0; i < out.items.size(); ++i) {
    auto violations = validate_item(out.items[i], base_dir);
    if (!violations.empty()) out.issues.push_back({i, out.items[i].record.id, std::move(violations)});
  }
  return out;
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const std::exception& e) {
    throw DatasetError(e.what());
  }
  return parse_dataset(text, path.parent_path(), path.string());
}

nlohmann::json dataset_to_json(const std::vector<DatasetItem>& items) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& it : items) {
    arr.push_back({{"id", it.record.id},
                   {"text", it.record.text},
                   {"country", it.record.country},
                   {"region", it.record.region},
                   {"map_path", it.map_path},
                   {"grid", it.map_meta},
                   {"location", it.record.ground_truth ? nlohmann::json(*it.record.ground_truth) : nlohmann::json(nullptr)},
                   {"label", it.label},
                   {"scale_km", it.scale_km}});
  }
  return {{"schema_version", 1}, {"items", arr}};
}

void save_dataset(const std::filesystem::path& path, const std::vector<DatasetItem>& items) {
  write_file_atomic(path, dataset_to_json(items).dump(2) + "\n");
}

std::optional<std::pair<int, int>> png_dimensions(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  unsigned char h[24];
  if (!in.read(reinterpret_cast<char*>(h), sizeof h)) return std::nullopt;
  static constexpr unsigned char kSig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};
  if (!std::equal(kSig, kSig + 8, h) || !std::equal(h + 12, h + 16, "IHDR")) return std::nullopt;
  const auto be32 = [&](int o) { return (h[o] << 24) | (h[o + 1] << 16) | (h[o + 2] << 8) | h[o + 3]; };
  return std::pair{be32(16), be32(20)};
}

std::vector<std::string> validate_item(const DatasetItem& item, const std::filesystem::path& base_dir) {
  std::vector<std::string> out;
  if (item.record.id.empty()) out.emplace_back("id must be non-empty");
  if (trim(item.record.text).empty()) out.emplace_back("text must be non-empty");
  if (!(item.scale_km > 0.0)) out.emplace_back("scale must be positive");

  const MapGeoreference& meta = item.map_meta;
  bool geometry_ok = true;
  try {
    validate_extent(meta.extent);
    validate_grid(meta.grid);
  } catch (const GridError& e) {
    out.emplace_back(std::string("invalid georeference: ") + e.what());
    geometry_ok = false;
  }
  if (meta.projection != "web-mercator") out.emplace_back("unsupported projection '" + meta.projection + "'");
  if (meta.image_width_px <= 0 || meta.image_height_px <= 0) {
    out.emplace_back("image dimensions must be positive");
    geometry_ok = false;
  }
  if (geometry_ok) {
    const Eigen::Vector2d span = project(meta.extent).sizes();
    const double want = span.x() / span.y();
    const double have = static_cast<double>(meta.image_width_px) / meta.image_height_px;
    // one pixel of rounding on the shorter side
    const double tol = want / std::min(meta.image_width_px, meta.image_height_px);
    if (std::abs(have - want) > tol) out.emplace_back("image aspect ratio differs from extent");
  }

  std::optional<CellIndex> label_cell;
  if (const auto parsed = parse_label(item.label); !parsed) {
    out.emplace_back("label malformed");
  } else if (geometry_ok && !in_grid(meta.grid, *parsed)) {
    out.emplace_back("label outside grid");
  } else {
    label_cell = parsed;
  }

  if (!item.record.ground_truth) {
    out.emplace_back("ground truth missing");
  } else if (!is_valid(*item.record.ground_truth)) {
    out.emplace_back("ground truth is not a valid WGS84 point");
  } else if (geometry_ok) {
    if (!meta.extent.contains(*item.record.ground_truth)) {
      out.emplace_back("location outside extent");
    } else if (label_cell) {
      const CellIndex truth = point_to_cell(meta, *item.record.ground_truth);
      if (truth != *label_cell)
        out.emplace_back("label does not match location cell " + label_for_index(meta.grid, truth));
    }
  }

  std::filesystem::path image = item.map_path;
  if (image.is_relative() && !base_dir.empty()) image = base_dir / image;
  if (item.map_path.empty()) {
    out.emplace_back("map image unreadable: no path");
  } else if (const auto dims = png_dimensions(image); !dims) {
    out.emplace_back("map image unreadable: " + image.string());
  } else if (dims->first != meta.image_width_px || dims->second != meta.image_height_px) {
    out.emplace_back("map image dimensions differ from georeference");
  }
  return out;
}

std::vector<CollectionRecord> filter_records(const std::vector<CollectionRecord>& records, std::size_t min_length) {
  std::vector<CollectionRecord> out;
  std::copy_if(records.begin(), records.end(), std::back_inserter(out),
               [&](const CollectionRecord& r) { return utf8_length(trim(r.text)) >= min_length; });
  return out;
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string cell;
  bool quoted = false;
  bool any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          cell.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cell.push_back(c);
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      row.push_back(std::move(cell));
      cell.clear();
      any = true;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      if (any || !cell.empty()) {
        row.push_back(std::move(cell));
        rows.push_back(std::move(row));
      }
      row.clear();
      cell.clear();
      any = false;
    } else {
      cell.push_back(c);
      any = true;
    }
  }
  if (quoted) throw DatasetError("csv: unterminated quoted field");
  if (any || !cell.empty()) {
    row.push_back(std::move(cell));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<CollectionRecord> parse_records_csv(const std::string& text) {
  const auto rows = parse_csv(text);
  if (rows.empty()) return {};
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < rows[0].size(); ++i) col[std::string(trim(rows[0][i]))] = i;
  for (const char* name : {"id", "text", "country", "region", "lat", "lon"})
    if (!col.contains(name)) throw DatasetError(std::string("csv header: missing column '") + name + "'");

  std::vector<CollectionRecord> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    const auto get = [&](const char* name) -> std::string {
      const std::size_t i = col.at(name);
      return i < row.size() ? row[i] : std::string();
    };
    const std::string where = "csv line " + std::to_string(r + 1);
    CollectionRecord rec{get("id"), get("text"), get("country"), get("region"), std::nullopt};
    if (rec.id.empty()) throw DatasetError(where + ": empty id");
    const std::string lat = std::string(trim(get("lat")));
    const std::string lon = std::string(trim(get("lon")));
    if (!lat.empty() || !lon.empty()) {
      try {
        std::size_t a = 0, b = 0;
        GeoPoint p{std::stod(lat, &a), std::stod(lon, &b)};
        if (a != lat.size() || b != lon.size() || !is_valid(p)) throw std::invalid_argument("range");
        rec.ground_truth = p;
      } catch (const std::exception&) {
        throw DatasetError(where + ": invalid lat/lon '" + lat + "," + lon + "'");
      }
    }
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<CollectionRecord> load_records_csv(const std::filesystem::path& path) {
  return parse_records_csv(read_file(path));
}

}  // namespace georef
