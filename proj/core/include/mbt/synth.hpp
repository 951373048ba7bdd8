#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "mbt/tensor.hpp"

namespace mbt {

// Synthetic cell-mosaic generator: jittered-grid Voronoi cells, dark shared
// borders, per-cell brightness with center-bright shading, additive noise
// and one defocused (blurred) rectangular region per mosaic.
struct SynthConfig {
    int width = 128, height = 128;
    int cells = 24;
    double jitter = 0.45;          // fraction of a grid cell the seeds may move
    double border_width = 2.0;     // pixels: border iff d2 - d1 <= border_width
    double interior_lo = 0.55;     // per-cell base brightness range
    double interior_hi = 0.95;
    double border_level = 0.12;    // brightness on the shared borders
    double shade_floor = 0.70;     // interior shading floor toward the border
    double noise_sigma = 0.03;
    double fuzzy_fraction = 0.25;  // area fraction of the blurred rectangle
    double fuzzy_sigma = 2.0;

    void validate() const;
};

struct SeedPoint {
    double x = 0.0, y = 0.0;
};

struct MosaicSample {
    Tensor<float> image;  // (H,W) in [0,1]
    Tensor<float> mask;   // (H,W) binary, 1 on cell borders
};

// Jittered grid covering the image; returns exactly cfg.cells seeds.
std::vector<SeedPoint> scatter_seeds(const SynthConfig& cfg, std::mt19937_64& rng);

// Binary border mask: pixel (x,y) is border iff the two nearest seeds are
// nearly equidistant, d2 - d1 <= border_width. Distances are Euclidean with
// pixel centers at integer coordinates.
Tensor<float> voronoi_border_mask(const std::vector<SeedPoint>& seeds, int width, int height,
                                  double border_width);

// Fully deterministic in (cfg, seed).
MosaicSample generate_voronoi_mosaic(const SynthConfig& cfg, std::uint64_t seed);

// Random same-location crops of image and mask, corners drawn uniformly.
std::vector<MosaicSample> crop_patches(const MosaicSample& mosaic, int patch_h, int patch_w,
                                       int count, std::mt19937_64& rng);

}  // namespace mbt
