#include "mbt/image.hpp"

#include <zlib.h>

#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace mbt {

namespace {

constexpr std::array<std::uint8_t, 8> kPngSignature{137, 80, 78, 71, 13, 10, 26, 10};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

std::uint32_t get_u32(const std::uint8_t* p) {
    return (static_cast<std::uint32_t>(p[0]) << 24) | (static_cast<std::uint32_t>(p[1]) << 16) |
           (static_cast<std::uint32_t>(p[2]) << 8) | static_cast<std::uint32_t>(p[3]);
}

void append_chunk(std::vector<std::uint8_t>& out, const char type[4],
                  const std::vector<std::uint8_t>& payload) {
    put_u32(out, static_cast<std::uint32_t>(payload.size()));
    std::size_t crc_start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), payload.begin(), payload.end());
    uLong crc = crc32(0L, out.data() + crc_start, static_cast<uInt>(out.size() - crc_start));
    put_u32(out, static_cast<std::uint32_t>(crc));
}

int color_type_for(int channels) {
    switch (channels) {
        case 1: return 0;
        case 2: return 4;
        case 3: return 2;
        case 4: return 6;
        default:
            throw std::invalid_argument("png: unsupported channel count " +
                                        std::to_string(channels));
    }
}

int channels_for(int color_type, const std::string& path) {
    switch (color_type) {
        case 0: return 1;
        case 2: return 3;
        case 4: return 2;
        case 6: return 4;
        case 3:
            throw std::runtime_error("png: palette images are not supported: " + path);
        default:
            throw std::runtime_error("png: unknown color type " + std::to_string(color_type) +
                                     ": " + path);
    }
}

int paeth(int a, int b, int c) {
    int p = a + b - c;
    int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return a;
    if (pb <= pc) return b;
    return c;
}

}  // namespace

void write_png(const std::string& path, const ImageU8& img) {
    if (img.width < 1 || img.height < 1) {
        throw std::invalid_argument("write_png: empty image for " + path);
    }
    if (img.pixels.size() !=
        static_cast<std::size_t>(img.width) * img.height * img.channels) {
        throw std::invalid_argument("write_png: pixel buffer size mismatch for " + path);
    }
    std::vector<std::uint8_t> ihdr;
    put_u32(ihdr, static_cast<std::uint32_t>(img.width));
    put_u32(ihdr, static_cast<std::uint32_t>(img.height));
    ihdr.push_back(8);  // bit depth
    ihdr.push_back(static_cast<std::uint8_t>(color_type_for(img.channels)));
    ihdr.push_back(0);  // compression
    ihdr.push_back(0);  // filter
    ihdr.push_back(0);  // interlace

    // raw scanlines, filter type 0 per row
    std::size_t stride = static_cast<std::size_t>(img.width) * img.channels;
    std::vector<std::uint8_t> raw;
    raw.reserve((stride + 1) * static_cast<std::size_t>(img.height));
    for (int y = 0; y < img.height; ++y) {
        raw.push_back(0);
        const std::uint8_t* row = img.pixels.data() + static_cast<std::size_t>(y) * stride;
        raw.insert(raw.end(), row, row + stride);
    }
    uLongf comp_len = compressBound(static_cast<uLong>(raw.size()));
    std::vector<std::uint8_t> comp(comp_len);
    if (compress2(comp.data(), &comp_len, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK) {
        throw std::runtime_error("write_png: zlib compression failed for " + path);
    }
    comp.resize(comp_len);

    std::vector<std::uint8_t> out(kPngSignature.begin(), kPngSignature.end());
    append_chunk(out, "IHDR", ihdr);
    append_chunk(out, "IDAT", comp);
    append_chunk(out, "IEND", {});

    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("write_png: cannot open " + path + " for writing");
    f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
    if (!f) throw std::runtime_error("write_png: short write to " + path);
}

ImageU8 read_png(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("read_png: cannot open " + path);
    std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
    if (buf.size() < kPngSignature.size() ||
        !std::equal(kPngSignature.begin(), kPngSignature.end(), buf.begin())) {
        throw std::runtime_error("read_png: not a PNG file: " + path);
    }

    ImageU8 img;
    int bit_depth = 0, color_type = 0;
    bool seen_ihdr = false, seen_iend = false;
    std::vector<std::uint8_t> idat;
    std::size_t pos = kPngSignature.size();
    while (pos + 12 <= buf.size() && !seen_iend) {
        std::uint32_t len = get_u32(buf.data() + pos);
        if (pos + 12 + len > buf.size()) {
            throw std::runtime_error("read_png: truncated chunk in " + path);
        }
        const char* type = reinterpret_cast<const char*>(buf.data() + pos + 4);
        const std::uint8_t* payload = buf.data() + pos + 8;
        std::uint32_t expect_crc = get_u32(payload + len);
        uLong crc = crc32(0L, buf.data() + pos + 4, static_cast<uInt>(4 + len));
        if (static_cast<std::uint32_t>(crc) != expect_crc) {
            throw std::runtime_error("read_png: CRC mismatch in " + path);
        }
        if (std::memcmp(type, "IHDR", 4) == 0) {
            if (len != 13) throw std::runtime_error("read_png: bad IHDR in " + path);
            img.width = static_cast<int>(get_u32(payload));
            img.height = static_cast<int>(get_u32(payload + 4));
            bit_depth = payload[8];
            color_type = payload[9];
            if (payload[12] != 0) {
                throw std::runtime_error("read_png: interlaced PNGs are not supported: " + path);
            }
            if (bit_depth != 8) {
                throw std::runtime_error("read_png: only 8-bit PNGs are supported, got depth " +
                                         std::to_string(bit_depth) + ": " + path);
            }
            img.channels = channels_for(color_type, path);
            seen_ihdr = true;
        } else if (std::memcmp(type, "IDAT", 4) == 0) {
            idat.insert(idat.end(), payload, payload + len);
        } else if (std::memcmp(type, "IEND", 4) == 0) {
            seen_iend = true;
        }
        pos += 12 + len;
    }
    if (!seen_ihdr || img.width < 1 || img.height < 1) {
        throw std::runtime_error("read_png: missing or invalid IHDR in " + path);
    }
    if (idat.empty()) throw std::runtime_error("read_png: no image data in " + path);

    std::size_t stride = static_cast<std::size_t>(img.width) * img.channels;
    std::vector<std::uint8_t> raw((stride + 1) * static_cast<std::size_t>(img.height));
    uLongf raw_len = static_cast<uLongf>(raw.size());
    int zrc = uncompress(raw.data(), &raw_len, idat.data(), static_cast<uLong>(idat.size()));
    if (zrc != Z_OK || raw_len != raw.size()) {
        throw std::runtime_error("read_png: corrupt image data in " + path);
    }

    // undo per-row filters
    img.pixels.assign(stride * static_cast<std::size_t>(img.height), 0);
    int bpp = img.channels;
    for (int y = 0; y < img.height; ++y) {
        std::uint8_t filter = raw[static_cast<std::size_t>(y) * (stride + 1)];
        const std::uint8_t* src = raw.data() + static_cast<std::size_t>(y) * (stride + 1) + 1;
        std::uint8_t* dst = img.pixels.data() + static_cast<std::size_t>(y) * stride;
        const std::uint8_t* prev = y > 0 ? dst - stride : nullptr;
        for (std::size_t x = 0; x < stride; ++x) {
            int a = x >= static_cast<std::size_t>(bpp) ? dst[x - bpp] : 0;
            int b = prev ? prev[x] : 0;
            int c = (prev && x >= static_cast<std::size_t>(bpp)) ? prev[x - bpp] : 0;
            int v;
            switch (filter) {
                case 0: v = src[x]; break;
                case 1: v = src[x] + a; break;
                case 2: v = src[x] + b; break;
                case 3: v = src[x] + (a + b) / 2; break;
                case 4: v = src[x] + paeth(a, b, c); break;
                default:
                    throw std::runtime_error("read_png: unknown filter type " +
                                             std::to_string(filter) + " in " + path);
            }
            dst[x] = static_cast<std::uint8_t>(v & 0xff);
        }
    }
    return img;
}

// ---- conversions ---------------------------------------------------------

Tensor<float> image_to_gray01(const ImageU8& img) {
    Tensor<float> t(Shape{img.height, img.width});
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            t[static_cast<std::int64_t>(y) * img.width + x] =
                static_cast<float>(img.at(y, x, 0)) / 255.0f;
        }
    return t;
}

ImageU8 gray01_to_image(const Tensor<float>& t) {
    if (t.rank() != 2) {
        throw std::invalid_argument("gray01_to_image: expected rank-2 tensor, got " +
                                    shape_str(t.shape()));
    }
    ImageU8 img;
    img.height = t.extent(0);
    img.width = t.extent(1);
    img.channels = 1;
    img.pixels.resize(static_cast<std::size_t>(img.width) * img.height);
    for (std::int64_t i = 0; i < t.numel(); ++i) {
        float v = std::min(1.0f, std::max(0.0f, t[i]));
        img.pixels[static_cast<std::size_t>(i)] =
            static_cast<std::uint8_t>(std::lround(v * 255.0f));
    }
    return img;
}

Tensor<float> image_to_mask(const ImageU8& img) {
    Tensor<float> t(Shape{img.height, img.width});
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            t[static_cast<std::int64_t>(y) * img.width + x] = img.at(y, x, 0) >= 128 ? 1.0f : 0.0f;
        }
    return t;
}

ImageU8 mask_to_image(const Tensor<float>& mask) {
    if (mask.rank() != 2) {
        throw std::invalid_argument("mask_to_image: expected rank-2 tensor, got " +
                                    shape_str(mask.shape()));
    }
    ImageU8 img;
    img.height = mask.extent(0);
    img.width = mask.extent(1);
    img.channels = 1;
    img.pixels.resize(static_cast<std::size_t>(img.width) * img.height);
    for (std::int64_t i = 0; i < mask.numel(); ++i) {
        float v = mask[i];
        if (v != 0.0f && v != 1.0f) {
            throw std::invalid_argument("mask_to_image: mask must be binary {0,1}, found " +
                                        std::to_string(v));
        }
        img.pixels[static_cast<std::size_t>(i)] = v != 0.0f ? 255 : 0;
    }
    return img;
}

// ---- preprocessing --------------------------------------------------------

void histogram_equalize(ImageU8& img) {
    if (img.channels != 1) {
        throw std::invalid_argument("histogram_equalize: expects a single-channel image, got " +
                                    std::to_string(img.channels) + " channels");
    }
    std::array<std::int64_t, 256> hist{};
    for (std::uint8_t v : img.pixels) ++hist[v];
    std::int64_t n = static_cast<std::int64_t>(img.pixels.size());
    if (n == 0) return;
    std::array<std::uint8_t, 256> lut{};
    std::int64_t cdf = 0;
    for (int v = 0; v < 256; ++v) {
        cdf += hist[static_cast<std::size_t>(v)];
        lut[static_cast<std::size_t>(v)] = static_cast<std::uint8_t>(
            std::lround(255.0 * static_cast<double>(cdf) / static_cast<double>(n)));
    }
    for (auto& p : img.pixels) p = lut[p];
}

// ---- visualization ---------------------------------------------------------

ImageU8 render_overlay(const Tensor<float>& gray01, const Tensor<float>& pred_mask,
                       const Tensor<float>& gt_mask) {
    if (gray01.rank() != 2 || !gray01.same_shape(pred_mask) || !gray01.same_shape(gt_mask)) {
        throw std::invalid_argument("render_overlay: image " + shape_str(gray01.shape()) +
                                    ", prediction " + shape_str(pred_mask.shape()) +
                                    " and truth " + shape_str(gt_mask.shape()) +
                                    " must share one rank-2 shape");
    }
    auto binary = [](const Tensor<float>& m, const char* what) {
        for (std::int64_t i = 0; i < m.numel(); ++i) {
            if (m[i] != 0.0f && m[i] != 1.0f) {
                throw std::invalid_argument(std::string("render_overlay: ") + what +
                                            " mask must be binary {0,1}, found " +
                                            std::to_string(m[i]));
            }
        }
    };
    binary(pred_mask, "prediction");
    binary(gt_mask, "truth");

    ImageU8 img;
    img.height = gray01.extent(0);
    img.width = gray01.extent(1);
    img.channels = 3;
    img.pixels.resize(static_cast<std::size_t>(img.width) * img.height * 3);
    for (std::int64_t i = 0; i < gray01.numel(); ++i) {
        bool p = pred_mask[i] != 0.0f, g = gt_mask[i] != 0.0f;
        std::uint8_t r, gr, b;
        if (p && g) {
            r = 255; gr = 165; b = 0;  // agreement: orange
        } else if (p) {
            r = 255; gr = 0; b = 0;    // prediction only: red
        } else if (g) {
            r = 0; gr = 255; b = 0;    // truth only: green
        } else {
            float v = std::min(1.0f, std::max(0.0f, gray01[i]));
            r = gr = b = static_cast<std::uint8_t>(std::lround(v * 255.0f));
        }
        std::size_t o = static_cast<std::size_t>(i) * 3;
        img.pixels[o] = r;
        img.pixels[o + 1] = gr;
        img.pixels[o + 2] = b;
    }
    return img;
}

}  // namespace mbt
