#pragma once

#include <bit>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "docdet/error.hpp"
#include "docdet/geometry.hpp"
#include "docdet/label_mask.hpp"
#include "docdet/page.hpp"
#include "docdet/probmap.hpp"

namespace docdet {

/// Inclusive pixel rectangle. Empty when x1 < x0 or y1 < y0.
struct BoundingBox {
    int x0 = 0;
    int y0 = 0;
    int x1 = -1;
    int y1 = -1;

    bool empty() const noexcept { return x1 < x0 || y1 < y0; }
    int width() const noexcept { return empty() ? 0 : x1 - x0 + 1; }
    int height() const noexcept { return empty() ? 0 : y1 - y0 + 1; }
    std::int64_t area() const noexcept { return static_cast<std::int64_t>(width()) * height(); }

    friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

bool boxes_intersect(const BoundingBox& a, const BoundingBox& b, int margin = 0);

struct PixelCoord {
    int x = 0;
    int y = 0;
    friend bool operator==(const PixelCoord&, const PixelCoord&) = default;
};

/// Pixel set of one object on an image grid. Rows are stored as 64-bit words
/// aligned to absolute image columns, so two masks on the same grid can be
/// intersected word by word. The bounding box is always tight.
class ObjectMask {
public:
    ObjectMask() = default;
    ObjectMask(int grid_width, int grid_height);

    /// `dense` is a row-major membership grid covering `region`, which must
    /// lie inside the image grid.
    static ObjectMask from_region(int grid_width, int grid_height, const BoundingBox& region,
                                  std::span<const std::uint8_t> dense);
    static ObjectMask from_pixels(int grid_width, int grid_height, std::span<const PixelCoord> pixels);

    int grid_width() const noexcept { return grid_w_; }
    int grid_height() const noexcept { return grid_h_; }
    const BoundingBox& box() const noexcept { return box_; }
    std::int64_t pixel_count() const noexcept { return pixel_count_; }
    bool empty() const noexcept { return pixel_count_ == 0; }

    bool contains(int x, int y) const noexcept;
    std::vector<PixelCoord> pixels() const;
    /// Membership bytes over box(), row-major.
    std::vector<std::uint8_t> to_dense() const;

    template <class F>
    void for_each_pixel(F&& fn) const
    {
        if (empty()) return;
        for (int y = box_.y0; y <= box_.y1; ++y) {
            const std::uint64_t* row = &bits_[static_cast<std::size_t>(y - box_.y0) * words_per_row_];
            for (int w = 0; w < words_per_row_; ++w) {
                std::uint64_t word = row[w];
                while (word) {
                    const int bit = std::countr_zero(word);
                    fn((word_x0_ + w) * 64 + bit, y);
                    word &= word - 1;
                }
            }
        }
    }

    /// Number of member pixels shared with `other`; grids must match.
    std::int64_t intersection_count(const ObjectMask& other) const;

    bool same_pixels(const ObjectMask& other) const noexcept;

    int class_id = 1;
    std::optional<double> confidence;

private:
    void allocate(const BoundingBox& box);
    void set_unchecked(int x, int y);
    std::uint64_t word_at(int y, int word_index) const noexcept;

    int grid_w_ = 0;
    int grid_h_ = 0;
    BoundingBox box_;
    std::int64_t pixel_count_ = 0;
    int word_x0_ = 0;
    int words_per_row_ = 0;
    std::vector<std::uint64_t> bits_;
};

struct ExtractConfig {
    double threshold = 0.7;
    int min_cc = 50;
    int connectivity = 8;
};

void validate_extract_config(const ExtractConfig& cfg);

/// Pixel (x, y) is a member iff its center (x + 0.5, y + 0.5) lies inside the
/// polygon under the even-odd rule, boundary included. Zero-area polygons
/// give an empty mask and a warning.
ObjectMask rasterize_polygon(const Polygon& poly, int width, int height, Warnings* warnings = nullptr);

/// Rasterizes every object of `page` onto a grid_w x grid_h grid, scaling
/// vertices when the page was annotated at another resolution.
std::vector<ObjectMask> rasterize_objects(const PageRecord& page, int grid_w, int grid_h,
                                          Warnings* warnings = nullptr);

/// Draws masks into a label image in order; later masks overwrite earlier.
LabelMask render_label_mask(std::span<const ObjectMask> masks, int width, int height);
void paint(LabelMask& target, const ObjectMask& mask, std::uint16_t value);

/// Maximal same-class regions of non-zero pixels, with components smaller
/// than cfg.min_cc removed, sorted by (y0, x0, pixel_count desc).
std::vector<ObjectMask> connected_components(const LabelMask& mask, const ExtractConfig& cfg);

/// Argmax over object classes, thresholded, then connected components.
/// Each object's confidence is the mean class probability over its pixels.
std::vector<ObjectMask> extract_objects(const ProbabilityMap& map, const ExtractConfig& cfg);
LabelMask threshold_probabilities(const ProbabilityMap& map, double threshold);

/// Square structuring element of side 2r+1; pixels outside the grid count as
/// background.
ObjectMask erode(const ObjectMask& mask, int radius);
ObjectMask dilate(const ObjectMask& mask, int radius);
ObjectMask subtract(const ObjectMask& a, const ObjectMask& b);

struct Overlap {
    std::int64_t intersection = 0;
    std::int64_t union_count = 0;
    double iou = 1.0;
};

/// Exact pixel overlap. Two empty masks have IoU 1.
Overlap mask_overlap(const ObjectMask& a, const ObjectMask& b);

/// True when some pixel of `a` is 8-adjacent to (or shared with) a pixel of `b`.
bool masks_adjacent(const ObjectMask& a, const ObjectMask& b);

/// Outer boundary along pixel edges, collinear vertices removed. Holes are
/// not represented, so rasterizing the outline fills them.
Polygon trace_outline(const ObjectMask& mask);

}  // namespace docdet
