#pragma once

#include <string>
#include <vector>

#include "mbt/manifest.hpp"
#include "mbt/masks.hpp"

namespace mbt {

// One training-ready sample: equalized image as (1,1,H,W) in [0,1] plus the
// ground-truth mask triplet (final from disk, edge/body derived on load).
struct SampleRecord {
    std::string id;
    Tensor<float> image;
    MaskTriplet<float> masks;
};

// Loads every entry of one manifest split. All samples in the split must
// share the same spatial size.
std::vector<SampleRecord> load_split(const DatasetManifest& manifest, const std::string& split,
                                     const MaskDeriveParams& derive = MaskDeriveParams{});

}  // namespace mbt
