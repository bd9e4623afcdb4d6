// core.hpp
//
// Domain types shared by every stage of the pipeline: images, binary masks,
// run-length encoding, mask geometry and IoU.

#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace hybridgl {

/// Base error for everything the library reports as a data/contract failure.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Images
// ---------------------------------------------------------------------------

/// Interleaved 8-bit RGB image, row-major (y, x, channel).
class ImageData {
public:
    ImageData() = default;
    ImageData(int height, int width);
    ImageData(int height, int width, std::vector<std::uint8_t> pixels);

    int height() const { return height_; }
    int width() const { return width_; }
    bool empty() const { return pixels_.empty(); }

    std::uint8_t at(int y, int x, int c) const {
        return pixels_[(static_cast<size_t>(y) * width_ + x) * 3 + c];
    }
    std::uint8_t& at(int y, int x, int c) {
        return pixels_[(static_cast<size_t>(y) * width_ + x) * 3 + c];
    }

    std::span<const std::uint8_t> pixels() const { return pixels_; }
    std::span<std::uint8_t> pixels() { return pixels_; }

    bool operator==(const ImageData&) const = default;

private:
    int height_ = 0;
    int width_ = 0;
    std::vector<std::uint8_t> pixels_;
};

// ---------------------------------------------------------------------------
// Masks and RLE
// ---------------------------------------------------------------------------

/// COCO-style uncompressed RLE: column-major runs, first run counts falses.
struct RleCounts {
    int height = 0;
    int width = 0;
    std::vector<std::uint32_t> counts;

    bool operator==(const RleCounts&) const = default;
};

class BinaryMask {
public:
    BinaryMask() = default;
    BinaryMask(int height, int width, bool value = false);
    BinaryMask(int height, int width, std::vector<std::uint8_t> data);

    int height() const { return height_; }
    int width() const { return width_; }
    size_t size() const { return data_.size(); }

    bool at(int y, int x) const { return data_[static_cast<size_t>(y) * width_ + x] != 0; }
    void set(int y, int x, bool v) { data_[static_cast<size_t>(y) * width_ + x] = v ? 1 : 0; }

    /// Row-major 0/1 bytes.
    std::span<const std::uint8_t> data() const { return data_; }

    size_t area() const;
    bool empty_mask() const { return area() == 0; }
    bool same_shape(const BinaryMask& o) const { return height_ == o.height_ && width_ == o.width_; }

    bool operator==(const BinaryMask&) const = default;

private:
    int height_ = 0;
    int width_ = 0;
    std::vector<std::uint8_t> data_;
};

RleCounts rle_encode(const BinaryMask& mask);
BinaryMask rle_decode(const RleCounts& rle);

/// Lexicographic comparison of the counts arrays (shape first).
bool rle_less(const RleCounts& a, const RleCounts& b);

// ---------------------------------------------------------------------------
// Geometry
// ---------------------------------------------------------------------------

/// Inclusive pixel bounds.
struct BoundingBox {
    int x_min = 0;
    int y_min = 0;
    int x_max = 0;
    int y_max = 0;

    bool operator==(const BoundingBox&) const = default;
};

struct Point2 {
    double x = 0.0;
    double y = 0.0;

    bool operator==(const Point2&) const = default;
};

struct BoxAndCenter {
    BoundingBox box;
    Point2 center;  // bbox midpoint, not centroid
};

/// Throws Error("empty mask") on an all-false mask.
BoxAndCenter bbox_and_center(const BinaryMask& mask);

/// |a & b|; throws on shape mismatch.
size_t intersection_area(const BinaryMask& a, const BinaryMask& b);

/// |a & b| / |a | b|, 0 when both are empty. Throws on shape mismatch.
double mask_iou(const BinaryMask& a, const BinaryMask& b);

// ---------------------------------------------------------------------------
// Proposals
// ---------------------------------------------------------------------------

struct MaskProposal {
    BinaryMask mask;
    double predicted_iou = 0.0;
    double stability_score = 0.0;
    int index = -1;
};

/// Sorts by descending area, ties by RLE lexicographic order, and renumbers
/// indices 0..n-1. Identical inputs in any order give identical output.
void canonical_order(std::vector<MaskProposal>& proposals);

// ---------------------------------------------------------------------------
// Resampling
// ---------------------------------------------------------------------------

ImageData resize_bilinear(const ImageData& image, int height, int width);
BinaryMask resize_nearest(const BinaryMask& mask, int height, int width);

}  // namespace hybridgl
