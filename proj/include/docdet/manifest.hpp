#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace docdet {

struct ManifestEntry {
    std::string image_id;
    std::filesystem::path gt_path;
    std::filesystem::path pred_path;
    std::optional<std::filesystem::path> probmap_path;
    std::vector<std::filesystem::path> ensemble_paths;
};

/// JSON-lines dataset listing. An optional line {"classes": [...]} declares
/// the class vocabulary (names for ids 1..K).
struct DatasetManifest {
    std::vector<std::string> classes;
    std::vector<ManifestEntry> entries;
    /// Raw file contents, used for report digests.
    std::string raw;
};

/// Relative paths are resolved against `base_dir`. With `check_files`, every
/// referenced path must exist.
DatasetManifest parse_manifest(std::string_view text, const std::filesystem::path& base_dir,
                               bool check_files = true);
DatasetManifest load_manifest(const std::filesystem::path& path, bool check_files = true);

/// Writes entries as JSON lines, with paths made relative to `base_dir` when possible.
std::string manifest_to_jsonl(const DatasetManifest& manifest, const std::filesystem::path& base_dir);

}  // namespace docdet
