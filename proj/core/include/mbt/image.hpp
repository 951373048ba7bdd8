#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mbt/tensor.hpp"

namespace mbt {

// Interleaved 8-bit image; channels is 1 (gray), 2 (gray+alpha), 3 (RGB)
// or 4 (RGBA).
struct ImageU8 {
    int width = 0, height = 0, channels = 1;
    std::vector<std::uint8_t> pixels;

    std::uint8_t& at(int y, int x, int c = 0) {
        return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    std::uint8_t at(int y, int x, int c = 0) const {
        return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
};

// Minimal PNG codec (zlib-backed): 8-bit gray / gray+alpha / RGB / RGBA,
// non-interlaced. Palette or 16-bit files are rejected with a clear error.
ImageU8 read_png(const std::string& path);
void write_png(const std::string& path, const ImageU8& img);

// ---- conversions -------------------------------------------------------

// first channel only, scaled to [0,1]
Tensor<float> image_to_gray01(const ImageU8& img);

// round-and-clamp [0,1] float (H,W) to 8-bit gray
ImageU8 gray01_to_image(const Tensor<float>& t);

// binary mask {0,1} <-> {0,255} gray (values >= 128 load as 1)
Tensor<float> image_to_mask(const ImageU8& img);
ImageU8 mask_to_image(const Tensor<float>& mask);

// ---- preprocessing -----------------------------------------------------

// Global histogram equalization over 256 gray levels:
//   lut(v) = round(255 * cdf(v) / N)
// Monotone; a constant image maps to a constant image.
void histogram_equalize(ImageU8& img);

// ---- visualization ------------------------------------------------------

// RGB overlay of a predicted mask against ground truth on top of a
// grayscale background: prediction-only pixels red (255,0,0), truth-only
// pixels green (0,255,0), agreement orange (255,165,0), everything else the
// gray input. All three inputs must share one (H,W) shape; masks binary.
ImageU8 render_overlay(const Tensor<float>& gray01, const Tensor<float>& pred_mask,
                       const Tensor<float>& gt_mask);

}  // namespace mbt
