#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "mbt/graph.hpp"
#include "mbt/tensor.hpp"

namespace mbt {

// Binary checkpoint, little-endian, written atomically (temp file + rename).
//
//   section "MBTC": version, then each model parameter in registration
//                   order: name, rank, extents, raw f32 data
//   section "MBTO": optional trainer section in the same record format:
//                   optimizer accumulators named like their parameters plus
//                   scalar bookkeeping entries ("__state.*")
//
// Values round-trip bit-exactly, so save -> load -> save reproduces the
// file byte for byte.

using NamedTensors = std::vector<std::pair<std::string, Tensor<float>>>;

struct LoadedCheckpoint {
    NamedTensors params;
    NamedTensors trainer;  // empty when the file carries no trainer section
    bool has_trainer_section = false;
};

void save_checkpoint(const std::filesystem::path& path,
                     const std::vector<Parameter<float>*>& params,
                     const NamedTensors* trainer_entries = nullptr);

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

// Copies loaded values into the model parameters. Every parameter must be
// matched by name with an equal shape; missing or surplus names are errors.
void apply_checkpoint(const LoadedCheckpoint& ckpt, std::vector<Parameter<float>*>& params);

}  // namespace mbt
