#include "mbt/synth.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "mbt/masks.hpp"

namespace mbt {

void SynthConfig::validate() const {
    if (width < 8 || height < 8) {
        throw std::invalid_argument("synth config: image size must be at least 8x8");
    }
    if (cells < 4) throw std::invalid_argument("synth config: need at least 4 cells");
    if (jitter < 0 || jitter > 1) throw std::invalid_argument("synth config: jitter must be in [0,1]");
    if (border_width < 1) throw std::invalid_argument("synth config: border_width must be >= 1");
    if (!(interior_lo > 0 && interior_hi <= 1 && interior_lo < interior_hi)) {
        throw std::invalid_argument("synth config: interior brightness range invalid");
    }
    if (border_level < 0 || border_level >= interior_lo) {
        throw std::invalid_argument("synth config: border_level must be below interior_lo");
    }
    if (shade_floor <= 0 || shade_floor > 1) {
        throw std::invalid_argument("synth config: shade_floor must be in (0,1]");
    }
    if (noise_sigma < 0) throw std::invalid_argument("synth config: noise_sigma must be >= 0");
    if (fuzzy_fraction < 0 || fuzzy_fraction > 1) {
        throw std::invalid_argument("synth config: fuzzy_fraction must be in [0,1]");
    }
    if (fuzzy_sigma <= 0) throw std::invalid_argument("synth config: fuzzy_sigma must be positive");
}

std::vector<SeedPoint> scatter_seeds(const SynthConfig& cfg, std::mt19937_64& rng) {
    cfg.validate();
    double aspect = static_cast<double>(cfg.width) / cfg.height;
    int gx = std::max(1, static_cast<int>(std::lround(std::sqrt(cfg.cells * aspect))));
    int gy = std::max(1, (cfg.cells + gx - 1) / gx);
    double cw = static_cast<double>(cfg.width) / gx;
    double ch = static_cast<double>(cfg.height) / gy;
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<SeedPoint> seeds;
    seeds.reserve(static_cast<std::size_t>(cfg.cells));
    for (int j = 0; j < gy && static_cast<int>(seeds.size()) < cfg.cells; ++j)
        for (int i = 0; i < gx && static_cast<int>(seeds.size()) < cfg.cells; ++i) {
            double x = (i + 0.5) * cw + cfg.jitter * cw * u(rng);
            double y = (j + 0.5) * ch + cfg.jitter * ch * u(rng);
            x = std::min(static_cast<double>(cfg.width - 1), std::max(0.0, x));
            y = std::min(static_cast<double>(cfg.height - 1), std::max(0.0, y));
            seeds.push_back({x, y});
        }
    return seeds;
}

namespace {

struct NearestTwo {
    int idx1 = -1;       // nearest seed (lowest index on ties)
    double d1 = 0.0, d2 = 0.0;
};

NearestTwo nearest_two(const std::vector<SeedPoint>& seeds, double px, double py) {
    NearestTwo n;
    double b1 = 1e300, b2 = 1e300;
    int i1 = -1;
    for (std::size_t s = 0; s < seeds.size(); ++s) {
        double dx = px - seeds[s].x, dy = py - seeds[s].y;
        double d = std::sqrt(dx * dx + dy * dy);
        if (d < b1) {
            b2 = b1;
            b1 = d;
            i1 = static_cast<int>(s);
        } else if (d < b2) {
            b2 = d;
        }
    }
    n.idx1 = i1;
    n.d1 = b1;
    n.d2 = b2;
    return n;
}

}  // namespace

Tensor<float> voronoi_border_mask(const std::vector<SeedPoint>& seeds, int width, int height,
                                  double border_width) {
    if (seeds.size() < 2) {
        throw std::invalid_argument("voronoi_border_mask: need at least 2 seeds, got " +
                                    std::to_string(seeds.size()));
    }
    if (width < 1 || height < 1) throw std::invalid_argument("voronoi_border_mask: empty image");
    Tensor<float> mask(Shape{height, width});
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            auto n = nearest_two(seeds, static_cast<double>(x), static_cast<double>(y));
            if (n.d2 - n.d1 <= border_width) {
                mask[static_cast<std::int64_t>(y) * width + x] = 1.0f;
            }
        }
    return mask;
}

MosaicSample generate_voronoi_mosaic(const SynthConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    std::mt19937_64 rng(seed);
    auto seeds = scatter_seeds(cfg, rng);

    std::uniform_real_distribution<double> bright(cfg.interior_lo, cfg.interior_hi);
    std::vector<double> cell_brightness(seeds.size());
    for (auto& b : cell_brightness) b = bright(rng);

    MosaicSample out;
    out.image = Tensor<float>(Shape{cfg.height, cfg.width});
    out.mask = Tensor<float>(Shape{cfg.height, cfg.width});
    for (int y = 0; y < cfg.height; ++y)
        for (int x = 0; x < cfg.width; ++x) {
            auto n = nearest_two(seeds, static_cast<double>(x), static_cast<double>(y));
            std::int64_t i = static_cast<std::int64_t>(y) * cfg.width + x;
            if (n.d2 - n.d1 <= cfg.border_width) {
                out.mask[i] = 1.0f;
                out.image[i] = static_cast<float>(cfg.border_level);
            } else {
                // center-bright shading: contrast ratio goes to 0 at borders
                double t = (n.d2 - n.d1) / (n.d2 + n.d1 + 1e-9);
                double v = cell_brightness[static_cast<std::size_t>(n.idx1)] *
                           (cfg.shade_floor + (1.0 - cfg.shade_floor) * t);
                out.image[i] = static_cast<float>(v);
            }
        }

    if (cfg.noise_sigma > 0) {
        std::normal_distribution<double> noise(0.0, cfg.noise_sigma);
        for (std::int64_t i = 0; i < out.image.numel(); ++i) {
            out.image[i] = static_cast<float>(out.image[i] + noise(rng));
        }
    }

    if (cfg.fuzzy_fraction > 0) {
        int rw = std::min(cfg.width, std::max(1, static_cast<int>(std::lround(
                                                     cfg.width * std::sqrt(cfg.fuzzy_fraction)))));
        int rh = std::min(cfg.height, std::max(1, static_cast<int>(std::lround(
                                                      cfg.height * std::sqrt(cfg.fuzzy_fraction)))));
        std::uniform_int_distribution<int> ux(0, cfg.width - rw), uy(0, cfg.height - rh);
        int x0 = ux(rng), y0 = uy(rng);
        Tensor<float> blurred = gaussian_blur(out.image, cfg.fuzzy_sigma, 5);
        for (int y = y0; y < y0 + rh; ++y)
            for (int x = x0; x < x0 + rw; ++x) {
                std::int64_t i = static_cast<std::int64_t>(y) * cfg.width + x;
                out.image[i] = blurred[i];
            }
    }

    for (std::int64_t i = 0; i < out.image.numel(); ++i) {
        out.image[i] = std::min(1.0f, std::max(0.0f, out.image[i]));
    }
    return out;
}

std::vector<MosaicSample> crop_patches(const MosaicSample& mosaic, int patch_h, int patch_w,
                                       int count, std::mt19937_64& rng) {
    int H = mosaic.image.extent(0), W = mosaic.image.extent(1);
    if (patch_h < 1 || patch_w < 1 || patch_h > H || patch_w > W) {
        throw std::invalid_argument("crop_patches: patch " + std::to_string(patch_h) + "x" +
                                    std::to_string(patch_w) + " does not fit in " +
                                    std::to_string(H) + "x" + std::to_string(W));
    }
    if (count < 1) throw std::invalid_argument("crop_patches: count must be >= 1");
    std::uniform_int_distribution<int> uy(0, H - patch_h), ux(0, W - patch_w);
    std::vector<MosaicSample> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int n = 0; n < count; ++n) {
        int y0 = uy(rng), x0 = ux(rng);
        MosaicSample p;
        p.image = Tensor<float>(Shape{patch_h, patch_w});
        p.mask = Tensor<float>(Shape{patch_h, patch_w});
        for (int y = 0; y < patch_h; ++y)
            for (int x = 0; x < patch_w; ++x) {
                std::int64_t src = static_cast<std::int64_t>(y0 + y) * W + (x0 + x);
                std::int64_t dst = static_cast<std::int64_t>(y) * patch_w + x;
                p.image[dst] = mosaic.image[src];
                p.mask[dst] = mosaic.mask[src];
            }
        out.push_back(std::move(p));
    }
    return out;
}

}  // namespace mbt
