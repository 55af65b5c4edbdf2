#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace atrophy {

struct ManifestRow {
  std::string subject_id;
  std::filesystem::path t0, t1;
  std::optional<std::filesystem::path> mask_t0, mask_t1;
  std::optional<std::filesystem::path> labelmap_t0, labelmap_t1;
};

/// CSV with header subject_id,t0,t1[,mask_t0,mask_t1,labelmap_t0,labelmap_t1].
/// Optional columns may be absent or empty per row.
struct SubjectManifest {
  std::vector<ManifestRow> rows;
  std::filesystem::path base_dir;  // relative paths were resolved against this
};

/// Throws on a missing required column, an empty required field, or a
/// duplicate subject_id. Relative paths are resolved against `base_dir`.
SubjectManifest parse_manifest(std::string_view text, const std::filesystem::path& base_dir = {});
SubjectManifest read_manifest(const std::filesystem::path& path);

/// Writes the manifest back as CSV; optional columns are emitted when any
/// row uses them.
std::string manifest_csv(const SubjectManifest& m);

/// First file referenced by the row that does not exist, if any.
std::optional<std::filesystem::path> first_missing_file(const ManifestRow& row);

}  // namespace atrophy
