#include "mbt/manifest.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace mbt {

std::vector<ManifestEntry> DatasetManifest::split(const std::string& name) const {
    std::vector<ManifestEntry> out;
    for (const auto& e : entries) {
        if (e.split == name) out.push_back(e);
    }
    return out;
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("manifest: cannot open " + path.string());
    DatasetManifest m;
    m.root = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");

    std::unordered_map<std::string, std::string> image_split;  // disjointness check
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        ManifestEntry e;
        e.line = lineno;
        std::size_t t1 = line.find('\t');
        std::size_t t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
        if (t1 == std::string::npos || t2 == std::string::npos ||
            line.find('\t', t2 + 1) != std::string::npos) {
            throw std::runtime_error("manifest: line " + std::to_string(lineno) +
                                     ": expected 3 tab-separated fields");
        }
        e.split = line.substr(0, t1);
        e.image_path = line.substr(t1 + 1, t2 - t1 - 1);
        e.mask_path = line.substr(t2 + 1);
        if (e.split.empty() || e.image_path.empty() || e.mask_path.empty()) {
            throw std::runtime_error("manifest: line " + std::to_string(lineno) +
                                     ": empty field");
        }
        auto [it, inserted] = image_split.emplace(e.image_path, e.split);
        if (!inserted) {
            throw std::runtime_error("manifest: line " + std::to_string(lineno) + ": image " +
                                     e.image_path + " already listed in split '" + it->second +
                                     "'");
        }
        for (const auto* p : {&e.image_path, &e.mask_path}) {
            if (!std::filesystem::exists(m.resolve(*p))) {
                throw std::runtime_error("manifest: line " + std::to_string(lineno) +
                                         ": missing file " + m.resolve(*p).string());
            }
        }
        m.entries.push_back(std::move(e));
    }
    return m;
}

void write_manifest(const std::filesystem::path& path,
                    const std::vector<ManifestEntry>& entries) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("manifest: cannot write " + path.string());
    for (const auto& e : entries) {
        f << e.split << '\t' << e.image_path << '\t' << e.mask_path << '\n';
    }
    if (!f) throw std::runtime_error("manifest: short write to " + path.string());
}

}  // namespace mbt
