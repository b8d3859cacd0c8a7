#ifndef SEGROBUST_CORE_MANIFEST_HPP
#define SEGROBUST_CORE_MANIFEST_HPP

#include <filesystem>
#include <string>
#include <vector>

#include "segrobust/core/types.hpp"

namespace segrobust {

struct MaskEntry {
  std::string mask_path;
  Index area_px = 0;
  bool operator==(const MaskEntry&) const = default;
};

struct ManifestRecord {
  std::string id;
  std::string image_path;
  std::vector<MaskEntry> masks;
  bool operator==(const ManifestRecord&) const = default;
};

// Relative paths resolve against base_dir, which is the manifest's own
// directory after loading and is never serialized.
struct DatasetManifest {
  int version = 1;
  std::vector<ManifestRecord> records;
  std::filesystem::path base_dir;

  std::filesystem::path resolve(const std::string& relative) const;
  bool operator==(const DatasetManifest& o) const {
    return version == o.version && records == o.records;
  }
};

enum class ManifestCheck {
  SchemaOnly,  // parse and type-check the JSON only
  Full,        // also decode every image and mask and verify dimensions/areas
};

// Canonical form: sorted keys, two-space indent, trailing newline.
std::string to_canonical_json(const DatasetManifest& manifest);
DatasetManifest manifest_from_json(const std::string& text);

DatasetManifest load_manifest(const std::filesystem::path& path,
                              ManifestCheck check = ManifestCheck::Full);
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

// Decodes one record into memory and validates it.
AnnotatedImage load_record(const DatasetManifest& manifest, std::size_t index);

}  // namespace segrobust

#endif  // SEGROBUST_CORE_MANIFEST_HPP
