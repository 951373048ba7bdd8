#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace mbt {

struct ManifestEntry {
    std::string split;       // e.g. train / val / test
    std::string image_path;  // relative to the manifest directory
    std::string mask_path;
    int line = 0;            // 1-based line in the manifest file
};

// Tab-separated dataset index: one `<split>\t<image>\t<mask>` entry per
// line. Blank lines and lines starting with '#' are skipped.
struct DatasetManifest {
    std::filesystem::path root;  // directory containing the manifest file
    std::vector<ManifestEntry> entries;

    std::vector<ManifestEntry> split(const std::string& name) const;
    std::filesystem::path resolve(const std::string& rel) const { return root / rel; }
};

// Parses and validates: 3 fields per line, no image path in two splits (or
// listed twice), and every referenced file must exist. Errors carry the
// offending line number.
DatasetManifest read_manifest(const std::filesystem::path& path);

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries);

}  // namespace mbt
