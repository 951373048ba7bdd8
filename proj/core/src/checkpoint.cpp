#include "mbt/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <unordered_map>

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace mbt {

namespace {

constexpr std::uint32_t kVersion = 1;

void write_u32(std::ofstream& f, std::uint32_t v) {
    f.write(reinterpret_cast<const char*>(&v), 4);
}

std::uint32_t read_u32(std::ifstream& f, const std::string& path) {
    std::uint32_t v = 0;
    if (!f.read(reinterpret_cast<char*>(&v), 4)) {
        throw std::runtime_error("checkpoint: truncated file: " + path);
    }
    return v;
}

void write_record(std::ofstream& f, const std::string& name, const Tensor<float>& t) {
    write_u32(f, static_cast<std::uint32_t>(name.size()));
    f.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_u32(f, static_cast<std::uint32_t>(t.rank()));
    for (int i = 0; i < t.rank(); ++i) write_u32(f, static_cast<std::uint32_t>(t.extent(i)));
    f.write(reinterpret_cast<const char*>(t.data()),
            static_cast<std::streamsize>(t.numel() * sizeof(float)));
}

std::pair<std::string, Tensor<float>> read_record(std::ifstream& f, const std::string& path) {
    std::uint32_t name_len = read_u32(f, path);
    if (name_len > 4096) throw std::runtime_error("checkpoint: implausible name length in " + path);
    std::string name(name_len, '\0');
    if (!f.read(name.data(), name_len)) {
        throw std::runtime_error("checkpoint: truncated name in " + path);
    }
    std::uint32_t rank = read_u32(f, path);
    if (rank > 4) throw std::runtime_error("checkpoint: record rank > 4 in " + path);
    Shape shape;
    for (std::uint32_t i = 0; i < rank; ++i) {
        shape.push_back(static_cast<int>(read_u32(f, path)));
    }
    Tensor<float> t(shape);
    if (!f.read(reinterpret_cast<char*>(t.data()),
                static_cast<std::streamsize>(t.numel() * sizeof(float)))) {
        throw std::runtime_error("checkpoint: truncated data for '" + name + "' in " + path);
    }
    return {std::move(name), std::move(t)};
}

void write_magic(std::ofstream& f, const char m[4]) { f.write(m, 4); }

}  // namespace

void save_checkpoint(const std::filesystem::path& path,
                     const std::vector<Parameter<float>*>& params,
                     const NamedTensors* trainer_entries) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw std::runtime_error("checkpoint: cannot open " + tmp.string() + " for writing");
        write_magic(f, "MBTC");
        write_u32(f, kVersion);
        write_u32(f, static_cast<std::uint32_t>(params.size()));
        for (const auto* p : params) write_record(f, p->name, p->value);
        if (trainer_entries != nullptr) {
            write_magic(f, "MBTO");
            write_u32(f, static_cast<std::uint32_t>(trainer_entries->size()));
            for (const auto& [name, t] : *trainer_entries) write_record(f, name, t);
        }
        f.flush();
        if (!f) throw std::runtime_error("checkpoint: write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("checkpoint: cannot open " + path.string());
    char magic[4];
    if (!f.read(magic, 4) || std::memcmp(magic, "MBTC", 4) != 0) {
        throw std::runtime_error("checkpoint: bad magic in " + path.string());
    }
    std::uint32_t version = read_u32(f, path.string());
    if (version != kVersion) {
        throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version) +
                                 " in " + path.string());
    }
    LoadedCheckpoint out;
    std::uint32_t n = read_u32(f, path.string());
    out.params.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) out.params.push_back(read_record(f, path.string()));

    if (f.read(magic, 4)) {
        if (std::memcmp(magic, "MBTO", 4) != 0) {
            throw std::runtime_error("checkpoint: unknown trailing section in " + path.string());
        }
        out.has_trainer_section = true;
        std::uint32_t m = read_u32(f, path.string());
        out.trainer.reserve(m);
        for (std::uint32_t i = 0; i < m; ++i) out.trainer.push_back(read_record(f, path.string()));
    }
    return out;
}

void apply_checkpoint(const LoadedCheckpoint& ckpt, std::vector<Parameter<float>*>& params) {
    std::unordered_map<std::string, const Tensor<float>*> by_name;
    for (const auto& [name, t] : ckpt.params) {
        if (!by_name.emplace(name, &t).second) {
            throw std::runtime_error("checkpoint: duplicate parameter '" + name + "'");
        }
    }
    for (auto* p : params) {
        auto it = by_name.find(p->name);
        if (it == by_name.end()) {
            throw std::runtime_error("checkpoint: missing parameter '" + p->name +
                                     "' (model and checkpoint configurations disagree?)");
        }
        if (it->second->shape() != p->value.shape()) {
            throw std::runtime_error("checkpoint: shape mismatch for '" + p->name + "': model " +
                                     shape_str(p->value.shape()) + " vs file " +
                                     shape_str(it->second->shape()));
        }
        p->value = *it->second;
        by_name.erase(it);
    }
    if (!by_name.empty()) {
        throw std::runtime_error("checkpoint: unmatched parameter '" + by_name.begin()->first +
                                 "' in file");
    }
}

}  // namespace mbt
