#include "hybridgl/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace hybridgl {

ImageData::ImageData(int height, int width)
    : ImageData(height, width,
                std::vector<std::uint8_t>(static_cast<size_t>(std::max(height, 0)) *
                                          static_cast<size_t>(std::max(width, 0)) * 3, 0)) {}

ImageData::ImageData(int height, int width, std::vector<std::uint8_t> pixels)
    : height_(height), width_(width), pixels_(std::move(pixels)) {
    if (height < 1 || width < 1) {
        throw Error("image dimensions must be positive, got " + std::to_string(height) + "x" +
                    std::to_string(width));
    }
    if (pixels_.size() != static_cast<size_t>(height) * width * 3) {
        throw Error("image pixel buffer size does not match " + std::to_string(height) + "x" +
                    std::to_string(width) + "x3");
    }
}

BinaryMask::BinaryMask(int height, int width, bool value)
    : height_(height), width_(width),
      data_(static_cast<size_t>(std::max(height, 0)) * static_cast<size_t>(std::max(width, 0)),
            value ? 1 : 0) {
    if (height < 1 || width < 1) {
        throw Error("mask dimensions must be positive");
    }
}

BinaryMask::BinaryMask(int height, int width, std::vector<std::uint8_t> data)
    : height_(height), width_(width), data_(std::move(data)) {
    if (height < 1 || width < 1) {
        throw Error("mask dimensions must be positive");
    }
    if (data_.size() != static_cast<size_t>(height) * width) {
        throw Error("mask buffer size does not match shape");
    }
    for (auto& v : data_) v = v ? 1 : 0;
}

size_t BinaryMask::area() const {
    return static_cast<size_t>(std::count(data_.begin(), data_.end(), std::uint8_t{1}));
}

RleCounts rle_encode(const BinaryMask& mask) {
    RleCounts rle{mask.height(), mask.width(), {}};
    bool current = false;
    std::uint32_t run = 0;
    for (int x = 0; x < mask.width(); ++x) {
        for (int y = 0; y < mask.height(); ++y) {
            const bool v = mask.at(y, x);
            if (v != current) {
                rle.counts.push_back(run);
                run = 0;
                current = v;
            }
            ++run;
        }
    }
    rle.counts.push_back(run);
    return rle;
}

BinaryMask rle_decode(const RleCounts& rle) {
    BinaryMask mask(rle.height, rle.width);
    const size_t total = static_cast<size_t>(rle.height) * rle.width;
    size_t pos = 0;
    bool value = false;
    for (std::uint32_t run : rle.counts) {
        if (pos + run > total) throw Error("RLE counts exceed mask size");
        if (value) {
            for (size_t i = pos; i < pos + run; ++i) {
                const int x = static_cast<int>(i / rle.height);
                const int y = static_cast<int>(i % rle.height);
                mask.set(y, x, true);
            }
        }
        pos += run;
        value = !value;
    }
    if (pos != total) throw Error("RLE counts do not cover the mask");
    return mask;
}

bool rle_less(const RleCounts& a, const RleCounts& b) {
    if (a.height != b.height) return a.height < b.height;
    if (a.width != b.width) return a.width < b.width;
    return std::lexicographical_compare(a.counts.begin(), a.counts.end(), b.counts.begin(),
                                        b.counts.end());
}

BoxAndCenter bbox_and_center(const BinaryMask& mask) {
    int x0 = mask.width(), y0 = mask.height(), x1 = -1, y1 = -1;
    for (int y = 0; y < mask.height(); ++y) {
        for (int x = 0; x < mask.width(); ++x) {
            if (!mask.at(y, x)) continue;
            x0 = std::min(x0, x);
            y0 = std::min(y0, y);
            x1 = std::max(x1, x);
            y1 = std::max(y1, y);
        }
    }
    if (x1 < 0) throw Error("empty mask");
    BoxAndCenter out;
    out.box = {x0, y0, x1, y1};
    out.center = {0.5 * (x0 + x1), 0.5 * (y0 + y1)};
    return out;
}

size_t intersection_area(const BinaryMask& a, const BinaryMask& b) {
    if (!a.same_shape(b)) throw Error("mask shape mismatch");
    size_t inter = 0;
    const auto da = a.data();
    const auto db = b.data();
    for (size_t i = 0; i < da.size(); ++i) inter += (da[i] & db[i]);
    return inter;
}

double mask_iou(const BinaryMask& a, const BinaryMask& b) {
    if (!a.same_shape(b)) throw Error("mask shape mismatch");
    size_t inter = 0, uni = 0;
    const auto da = a.data();
    const auto db = b.data();
    for (size_t i = 0; i < da.size(); ++i) {
        inter += (da[i] & db[i]);
        uni += (da[i] | db[i]);
    }
    if (uni == 0) return 0.0;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

void canonical_order(std::vector<MaskProposal>& proposals) {
    struct Keyed {
        size_t area;
        RleCounts rle;
        size_t slot;
    };
    std::vector<Keyed> keys;
    keys.reserve(proposals.size());
    for (size_t i = 0; i < proposals.size(); ++i) {
        keys.push_back({proposals[i].mask.area(), rle_encode(proposals[i].mask), i});
    }
    std::sort(keys.begin(), keys.end(), [&](const Keyed& a, const Keyed& b) {
        if (a.area != b.area) return a.area > b.area;
        if (rle_less(a.rle, b.rle)) return true;
        if (rle_less(b.rle, a.rle)) return false;
        // Identical masks: fall back on metadata so the order is still total.
        const auto& pa = proposals[a.slot];
        const auto& pb = proposals[b.slot];
        if (pa.predicted_iou != pb.predicted_iou) return pa.predicted_iou > pb.predicted_iou;
        return pa.stability_score > pb.stability_score;
    });
    std::vector<MaskProposal> out;
    out.reserve(proposals.size());
    for (size_t i = 0; i < keys.size(); ++i) {
        out.push_back(std::move(proposals[keys[i].slot]));
        out.back().index = static_cast<int>(i);
    }
    proposals = std::move(out);
}

ImageData resize_bilinear(const ImageData& image, int height, int width) {
    if (image.height() == height && image.width() == width) return image;
    ImageData out(height, width);
    const double sy = static_cast<double>(image.height()) / height;
    const double sx = static_cast<double>(image.width()) / width;
    for (int y = 0; y < height; ++y) {
        // Half-pixel centers, clamped at the borders.
        const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, image.height() - 1.0);
        const int y0 = static_cast<int>(std::floor(fy));
        const int y1 = std::min(y0 + 1, image.height() - 1);
        const double wy = fy - y0;
        for (int x = 0; x < width; ++x) {
            const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, image.width() - 1.0);
            const int x0 = static_cast<int>(std::floor(fx));
            const int x1 = std::min(x0 + 1, image.width() - 1);
            const double wx = fx - x0;
            for (int c = 0; c < 3; ++c) {
                const double top = (1 - wx) * image.at(y0, x0, c) + wx * image.at(y0, x1, c);
                const double bot = (1 - wx) * image.at(y1, x0, c) + wx * image.at(y1, x1, c);
                const double v = (1 - wy) * top + wy * bot;
                out.at(y, x, c) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
            }
        }
    }
    return out;
}

BinaryMask resize_nearest(const BinaryMask& mask, int height, int width) {
    if (mask.height() == height && mask.width() == width) return mask;
    BinaryMask out(height, width);
    for (int y = 0; y < height; ++y) {
        const int sy = std::min(mask.height() - 1,
                                static_cast<int>((y + 0.5) * mask.height() / height));
        for (int x = 0; x < width; ++x) {
            const int sx = std::min(mask.width() - 1,
                                    static_cast<int>((x + 0.5) * mask.width() / width));
            out.set(y, x, mask.at(sy, sx));
        }
    }
    return out;
}

}  // namespace hybridgl
