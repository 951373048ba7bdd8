#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mbt/losses.hpp"
#include "mbt/model.hpp"
#include "mbt/optimizer.hpp"
#include "mbt/synth.hpp"

namespace mbt {

// invalid invocation / configuration, as opposed to a runtime failure
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct KvEntry {
    std::string key, value;
    int line = 0;
};

// `key = value` per line; '#' starts a comment; keys and values trimmed.
std::vector<KvEntry> parse_kv_file(const std::filesystem::path& path);

// Effective settings of one CLI invocation. Values come from defaults, then
// an optional config file, then command-line flags (strongest).
struct RunConfig {
    // io
    std::string out_dir;
    std::string manifest;
    std::string checkpoint;
    std::string image, mask;     // predict inputs
    std::string split = "test";  // eval split
    bool force = false;
    bool resume = false;
    bool oracle_mode = false;

    std::uint64_t seed = 0;

    ModelConfig model;  // input_h/input_w are set from the data at run time

    int epochs = 100;
    LossWeights weights;
    RmsPropConfig opt;
    PlateauConfig plateau;

    // synthetic data generation
    SynthConfig synth;
    int patch = 64, patches_per_mosaic = 8;
    int train_mosaics = 8, val_mosaics = 1, test_mosaics = 1;

    // applies one key=value setting; throws UsageError on unknown keys or
    // unparsable values
    void apply(const std::string& key, const std::string& value);

    void apply_file(const std::filesystem::path& path);

    // full effective configuration, fixed key order
    std::vector<std::pair<std::string, std::string>> to_kv() const;

    void write(const std::filesystem::path& path) const;
};

}  // namespace mbt
