#include "segrobust/core/manifest.hpp"

#include <algorithm>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "segrobust/core/image_io.hpp"

namespace segrobust {

namespace {

using nlohmann::json;

const json& require(const json& node, const char* key, const std::string& where) {
  if (!node.is_object() || !node.contains(key))
    throw ParseError(where + ": missing field '" + key + "'");
  return node.at(key);
}

std::string require_string(const json& node, const char* key, const std::string& where) {
  const auto& v = require(node, key, where);
  if (!v.is_string()) throw ParseError(where + "." + key + ": expected string");
  return v.get<std::string>();
}

Index require_int(const json& node, const char* key, const std::string& where) {
  const auto& v = require(node, key, where);
  if (!v.is_number_integer()) throw ParseError(where + "." + key + ": expected integer");
  return v.get<Index>();
}

std::size_t line_of_byte(const std::string& text, std::size_t byte) {
  byte = std::min(byte, text.size());
  return 1 + static_cast<std::size_t>(
                 std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(byte), '\n'));
}

}  // namespace

std::filesystem::path DatasetManifest::resolve(const std::string& relative) const {
  const std::filesystem::path p(relative);
  return p.is_absolute() ? p : base_dir / p;
}

std::string to_canonical_json(const DatasetManifest& manifest) {
  json records = json::array();
  for (const auto& r : manifest.records) {
    json masks = json::array();
    for (const auto& m : r.masks) masks.push_back({{"mask_path", m.mask_path}, {"area_px", m.area_px}});
    records.push_back({{"id", r.id}, {"image_path", r.image_path}, {"masks", masks}});
  }
  const json doc = {{"version", manifest.version}, {"records", records}};
  return doc.dump(2) + "\n";
}

DatasetManifest manifest_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError("manifest line " + std::to_string(line_of_byte(text, e.byte)) + ": " +
                     e.what());
  }
  DatasetManifest out;
  const auto version = require_int(doc, "version", "manifest");
  if (version != 1)
    throw ParseError("manifest.version: unsupported version " + std::to_string(version));
  out.version = static_cast<int>(version);
  const auto& records = require(doc, "records", "manifest");
  if (!records.is_array()) throw ParseError("manifest.records: expected array");
  for (std::size_t i = 0; i < records.size(); ++i) {
    const std::string where = "records[" + std::to_string(i) + "]";
    ManifestRecord rec;
    rec.id = require_string(records[i], "id", where);
    rec.image_path = require_string(records[i], "image_path", where);
    const auto& masks = require(records[i], "masks", where);
    if (!masks.is_array()) throw ParseError(where + ".masks: expected array");
    for (std::size_t j = 0; j < masks.size(); ++j) {
      const std::string mwhere = where + ".masks[" + std::to_string(j) + "]";
      rec.masks.push_back(
          {require_string(masks[j], "mask_path", mwhere), require_int(masks[j], "area_px", mwhere)});
    }
    out.records.push_back(std::move(rec));
  }
  return out;
}

DatasetManifest load_manifest(const std::filesystem::path& path, ManifestCheck check) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingFile("manifest not found: " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  auto manifest = manifest_from_json(buffer.str());
  manifest.base_dir = path.parent_path();
  if (check == ManifestCheck::Full)
    for (std::size_t i = 0; i < manifest.records.size(); ++i) (void)load_record(manifest, i);
  return manifest;
}

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write manifest: " + path.string());
  out << to_canonical_json(manifest);
  if (!out) throw IoError("write failed: " + path.string());
}

AnnotatedImage load_record(const DatasetManifest& manifest, std::size_t index) {
  const auto& rec = manifest.records.at(index);
  AnnotatedImage out;
  out.id = rec.id;
  out.image = read_png_rgb(manifest.resolve(rec.image_path));
  for (const auto& m : rec.masks) {
    Annotation a;
    a.mask = read_png_mask(manifest.resolve(m.mask_path));
    a.area = m.area_px;
    out.annotations.push_back(std::move(a));
  }
  out.validate();
  return out;
}

}  // namespace segrobust
