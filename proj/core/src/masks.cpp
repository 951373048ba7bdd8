#include "mbt/masks.hpp"

#include <cmath>
#include <deque>
#include <stdexcept>
#include <string>
#include <vector>

namespace mbt {

namespace {

void require_hw(const Tensor<float>& t, const char* who) {
    if (t.rank() != 2) {
        throw std::invalid_argument(std::string(who) + ": expected a rank-2 (H,W) mask, got " +
                                    shape_str(t.shape()));
    }
}

void require_binary(const Tensor<float>& t, const char* who) {
    for (std::int64_t i = 0; i < t.numel(); ++i) {
        if (t[i] != 0.0f && t[i] != 1.0f) {
            throw std::invalid_argument(std::string(who) + ": mask must be binary {0,1}, found " +
                                        std::to_string(t[i]) + " at flat index " + std::to_string(i));
        }
    }
}

std::vector<double> gaussian_kernel_1d(double sigma, int ksize) {
    if (ksize < 1 || ksize % 2 == 0) {
        throw std::invalid_argument("gaussian kernel: size must be odd and positive, got " +
                                    std::to_string(ksize));
    }
    if (sigma <= 0) throw std::invalid_argument("gaussian kernel: sigma must be positive");
    int r = ksize / 2;
    std::vector<double> k(static_cast<std::size_t>(ksize));
    double sum = 0.0;
    for (int i = -r; i <= r; ++i) {
        double v = std::exp(-(static_cast<double>(i) * i) / (2.0 * sigma * sigma));
        k[static_cast<std::size_t>(i + r)] = v;
        sum += v;
    }
    for (auto& v : k) v /= sum;
    return k;
}

inline int reflect_clamp(int i, int n) { return i < 0 ? 0 : (i >= n ? n - 1 : i); }

}  // namespace

Tensor<float> gaussian_blur(const Tensor<float>& img, double sigma, int ksize) {
    require_hw(img, "gaussian_blur");
    auto k = gaussian_kernel_1d(sigma, ksize);
    int H = img.extent(0), W = img.extent(1), r = ksize / 2;
    Tensor<float> tmp(img.shape()), out(img.shape());
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            double acc = 0.0;
            for (int i = -r; i <= r; ++i) {
                acc += k[static_cast<std::size_t>(i + r)] *
                       static_cast<double>(img[static_cast<std::int64_t>(y) * W + reflect_clamp(x + i, W)]);
            }
            tmp[static_cast<std::int64_t>(y) * W + x] = static_cast<float>(acc);
        }
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            double acc = 0.0;
            for (int i = -r; i <= r; ++i) {
                acc += k[static_cast<std::size_t>(i + r)] *
                       static_cast<double>(tmp[static_cast<std::int64_t>(reflect_clamp(y + i, H)) * W + x]);
            }
            out[static_cast<std::int64_t>(y) * W + x] = static_cast<float>(acc);
        }
    return out;
}

Tensor<float> derive_edge_mask(const Tensor<float>& final_mask, const MaskDeriveParams& p) {
    require_hw(final_mask, "derive_edge_mask");
    require_binary(final_mask, "derive_edge_mask");
    int H = final_mask.extent(0), W = final_mask.extent(1);
    Tensor<float> out(final_mask.shape());

    Tensor<float> blurred = gaussian_blur(final_mask, p.edge_blur_sigma, p.edge_blur_ksize);

    // Sobel gradients, replicate border
    std::vector<double> gx(static_cast<std::size_t>(H) * W), gy(gx.size()), mag(gx.size());
    auto at = [&](int y, int x) {
        return static_cast<double>(
            blurred[static_cast<std::int64_t>(reflect_clamp(y, H)) * W + reflect_clamp(x, W)]);
    };
    double max_mag = 0.0;
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            double sx = (at(y - 1, x + 1) + 2.0 * at(y, x + 1) + at(y + 1, x + 1)) -
                        (at(y - 1, x - 1) + 2.0 * at(y, x - 1) + at(y + 1, x - 1));
            double sy = (at(y + 1, x - 1) + 2.0 * at(y + 1, x) + at(y + 1, x + 1)) -
                        (at(y - 1, x - 1) + 2.0 * at(y - 1, x) + at(y - 1, x + 1));
            std::size_t i = static_cast<std::size_t>(y) * W + x;
            gx[i] = sx;
            gy[i] = sy;
            mag[i] = std::sqrt(sx * sx + sy * sy);
            max_mag = std::max(max_mag, mag[i]);
        }
    if (max_mag == 0.0) return out;  // flat mask, no edges

    // non-maximum suppression along the quantized gradient direction; on an
    // exact two-pixel plateau the strict test against the minus-direction
    // neighbour keeps exactly one pixel
    std::vector<std::uint8_t> keep(static_cast<std::size_t>(H) * W, 0);
    auto mag_at = [&](int y, int x) {
        if (y < 0 || y >= H || x < 0 || x >= W) return 0.0;
        return mag[static_cast<std::size_t>(y) * W + x];
    };
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            std::size_t i = static_cast<std::size_t>(y) * W + x;
            if (mag[i] == 0.0) continue;
            double ang = std::atan2(gy[i], gx[i]) * 180.0 / 3.14159265358979323846;
            if (ang < 0) ang += 180.0;
            int dy = 0, dx = 0;
            if (ang < 22.5 || ang >= 157.5) {
                dx = 1;             // ~0 deg: horizontal gradient
            } else if (ang < 67.5) {
                dx = 1; dy = 1;     // ~45 deg
            } else if (ang < 112.5) {
                dy = 1;             // ~90 deg: vertical gradient
            } else {
                dx = -1; dy = 1;    // ~135 deg
            }
            double plus = mag_at(y + dy, x + dx);
            double minus = mag_at(y - dy, x - dx);
            if (mag[i] > minus && mag[i] >= plus) keep[i] = 1;
        }

    // double threshold + 8-connected hysteresis from strong pixels
    double high = p.high_fraction * max_mag, low = p.low_fraction * max_mag;
    std::deque<std::pair<int, int>> queue;
    std::vector<std::uint8_t> state(static_cast<std::size_t>(H) * W, 0);  // 1 = weak, 2 = edge
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            std::size_t i = static_cast<std::size_t>(y) * W + x;
            if (!keep[i] || mag[i] < low) continue;
            if (mag[i] >= high) {
                state[i] = 2;
                queue.emplace_back(y, x);
            } else {
                state[i] = 1;
            }
        }
    while (!queue.empty()) {
        auto [y, x] = queue.front();
        queue.pop_front();
        for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
                int ny = y + dy, nx = x + dx;
                if (ny < 0 || ny >= H || nx < 0 || nx >= W) continue;
                std::size_t ni = static_cast<std::size_t>(ny) * W + nx;
                if (state[ni] == 1) {
                    state[ni] = 2;
                    queue.emplace_back(ny, nx);
                }
            }
    }
    for (std::size_t i = 0; i < state.size(); ++i) {
        if (state[i] == 2) out[static_cast<std::int64_t>(i)] = 1.0f;
    }
    return out;
}

Tensor<float> derive_body_mask(const Tensor<float>& final_mask, const MaskDeriveParams& p) {
    require_hw(final_mask, "derive_body_mask");
    require_binary(final_mask, "derive_body_mask");
    Tensor<float> inv(final_mask.shape());
    for (std::int64_t i = 0; i < inv.numel(); ++i) inv[i] = 1.0f - final_mask[i];
    return gaussian_blur(inv, p.body_sigma, p.body_ksize);
}

MaskTriplet<float> make_mask_triplet(const Tensor<float>& final_mask, const MaskDeriveParams& p) {
    require_hw(final_mask, "make_mask_triplet");
    int H = final_mask.extent(0), W = final_mask.extent(1);
    auto lift = [&](const Tensor<float>& m) {
        return Tensor<float>(Shape{1, 1, H, W}, m.vec());
    };
    MaskTriplet<float> t;
    t.final_mask = lift(final_mask);
    t.edge_mask = lift(derive_edge_mask(final_mask, p));
    t.body_mask = lift(derive_body_mask(final_mask, p));
    return t;
}

}  // namespace mbt
