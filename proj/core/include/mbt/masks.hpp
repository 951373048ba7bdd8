#pragma once

#include "mbt/losses.hpp"
#include "mbt/tensor.hpp"

namespace mbt {

// Parameters of the edge/body mask derivation. Edge masks come from a Canny
// pass over the binary final mask; body masks from a Gaussian blur of its
// complement.
struct MaskDeriveParams {
    double edge_blur_sigma = 1.0;   // pre-smoothing before the gradient
    int edge_blur_ksize = 5;
    double low_fraction = 0.1;      // hysteresis thresholds as fractions of
    double high_fraction = 0.3;     // the maximum gradient magnitude
    double body_sigma = 2.0;
    int body_ksize = 5;
};

// Normalized Gaussian blur, separable, replicate border. Exposed for tests.
Tensor<float> gaussian_blur(const Tensor<float>& img, double sigma, int ksize);

// Canny edge detection specialised to binary {0,1} masks: Gaussian smoothing,
// Sobel gradients, four-direction non-maximum suppression (ties broken so a
// two-pixel plateau keeps exactly one pixel), double threshold and 8-connected
// hysteresis. An all-zero mask yields an all-zero edge mask.
Tensor<float> derive_edge_mask(const Tensor<float>& final_mask,
                               const MaskDeriveParams& p = MaskDeriveParams{});

// body = gaussian_blur(1 - final): a soft interior-emphasis map in [0,1].
Tensor<float> derive_body_mask(const Tensor<float>& final_mask,
                               const MaskDeriveParams& p = MaskDeriveParams{});

// Bundles a (H,W) final mask with its two derived masks as (1,1,H,W)
// tensors ready for loss evaluation.
MaskTriplet<float> make_mask_triplet(const Tensor<float>& final_mask,
                                     const MaskDeriveParams& p = MaskDeriveParams{});

}  // namespace mbt
