#include "cbw/features.hpp"

#include <map>
#include <string>

#include "cbw/error.hpp"
#include "cbw/rng.hpp"
#include "cbw/tokenize.hpp"

namespace cbw {

namespace {

int text_bucket(const std::string& token, int buckets, bool instruction) {
    const std::string tagged = (instruction ? "I\x1f" : "P\x1f") + token;
    return static_cast<int>(fnv1a64(tagged) % static_cast<std::uint64_t>(buckets));
}

int image_bucket(int gy, int gx, int channel, int buckets) {
    const std::string tag = "G\x1f" + std::to_string(gy) + "," +
                            std::to_string(gx) + "," + std::to_string(channel);
    return 2 * buckets +
           static_cast<int>(fnv1a64(tag) % static_cast<std::uint64_t>(buckets));
}

int shared_bucket(const std::string& token, int buckets) {
    return 3 * buckets +
           static_cast<int>(fnv1a64("S\x1f" + token) %
                            static_cast<std::uint64_t>(buckets));
}

void accumulate_text(std::map<int, Scalar>& acc, const std::string& text,
                     int buckets, bool instruction) {
    for (const auto& token : tokenize(text)) {
        acc[text_bucket(token, buckets, instruction)] += 1.0;
        acc[shared_bucket(token, buckets)] += 1.0;
    }
}

void accumulate_image(std::map<int, Scalar>& acc, const Image& img,
                      int buckets, int grid) {
    if (img.empty()) throw Error("cannot featurize a zero-dimension image");
    for (int gy = 0; gy < grid; ++gy) {
        const int y0 = static_cast<int>(
            static_cast<std::int64_t>(gy) * img.height / grid);
        const int y1 = static_cast<int>(
            static_cast<std::int64_t>(gy + 1) * img.height / grid);
        for (int gx = 0; gx < grid; ++gx) {
            const int x0 = static_cast<int>(
                static_cast<std::int64_t>(gx) * img.width / grid);
            const int x1 = static_cast<int>(
                static_cast<std::int64_t>(gx + 1) * img.width / grid);
            if (y1 <= y0 || x1 <= x0) continue;  // grid finer than the image
            double sum[3] = {0, 0, 0};
            for (int y = y0; y < y1; ++y) {
                for (int x = x0; x < x1; ++x) {
                    const std::uint8_t* px = img.at(x, y);
                    sum[0] += px[0];
                    sum[1] += px[1];
                    sum[2] += px[2];
                }
            }
            const double count = static_cast<double>(y1 - y0) * (x1 - x0);
            for (int ch = 0; ch < 3; ++ch)
                acc[image_bucket(gy, gx, ch, buckets)] +=
                    sum[ch] / count / 255.0;
        }
    }
}

SparseFeature finish(std::map<int, Scalar>&& acc) {
    SparseFeature out;
    out.reserve(acc.size());
    for (auto& [idx, value] : acc) out.emplace_back(idx, value);
    return out;
}

void check_params(int buckets, int grid) {
    if (buckets < 64) throw Error("featurizer needs at least 64 buckets");
    if (grid < 1) throw Error("image grid must be >= 1");
}

}  // namespace

SparseFeature featurize_sparse_with_image(const PromptRecord& record,
                                          const Image* image, int buckets,
                                          int grid) {
    check_params(buckets, grid);
    std::map<int, Scalar> acc;
    accumulate_text(acc, record.instruction, buckets, true);
    accumulate_text(acc, record.input, buckets, false);
    if (image) accumulate_image(acc, *image, buckets, grid);
    return finish(std::move(acc));
}

SparseFeature featurize_sparse(const PromptRecord& record, int buckets,
                               int grid, const ImageStore* store) {
    const Image* img = nullptr;
    if (record.multimodal()) {
        if (!store)
            throw Error("record " + record.id +
                        " has an image but no image store was supplied");
        img = &store->get(record.image);
    }
    return featurize_sparse_with_image(record, img, buckets, grid);
}

Vec featurize(const PromptRecord& record, int buckets, int grid,
              const ImageStore* store) {
    Vec dense = Vec::Zero(feature_dim(buckets));
    for (const auto& [idx, value] : featurize_sparse(record, buckets, grid, store))
        dense[idx] = value;
    return dense;
}

}  // namespace cbw
