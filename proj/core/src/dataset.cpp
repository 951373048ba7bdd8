#include "mbt/dataset.hpp"

#include <stdexcept>

#include "mbt/image.hpp"

namespace mbt {

std::vector<SampleRecord> load_split(const DatasetManifest& manifest, const std::string& split,
                                     const MaskDeriveParams& derive) {
    auto entries = manifest.split(split);
    if (entries.empty()) {
        throw std::runtime_error("dataset: manifest has no entries for split '" + split + "'");
    }
    std::vector<SampleRecord> out;
    out.reserve(entries.size());
    int H = -1, W = -1;
    for (const auto& e : entries) {
        ImageU8 img = read_png(manifest.resolve(e.image_path).string());
        if (img.channels != 1) {
            throw std::runtime_error("dataset: " + e.image_path + ": expected grayscale, got " +
                                     std::to_string(img.channels) + " channels");
        }
        histogram_equalize(img);
        Tensor<float> gray = image_to_gray01(img);

        ImageU8 mimg = read_png(manifest.resolve(e.mask_path).string());
        Tensor<float> mask = image_to_mask(mimg);
        if (!gray.same_shape(mask)) {
            throw std::runtime_error("dataset: " + e.image_path + ": image " +
                                     shape_str(gray.shape()) + " and mask " +
                                     shape_str(mask.shape()) + " disagree");
        }
        if (H < 0) {
            H = gray.extent(0);
            W = gray.extent(1);
        } else if (gray.extent(0) != H || gray.extent(1) != W) {
            throw std::runtime_error("dataset: " + e.image_path + ": size " +
                                     shape_str(gray.shape()) + " differs from the split's " +
                                     std::to_string(H) + "x" + std::to_string(W));
        }

        SampleRecord rec;
        rec.id = std::filesystem::path(e.image_path).stem().string();
        rec.image = Tensor<float>(Shape{1, 1, H, W}, gray.vec());
        rec.masks = make_mask_triplet(mask, derive);
        out.push_back(std::move(rec));
    }
    return out;
}

}  // namespace mbt
