#pragma once

#include <cstdint>
#include <vector>

#include "docdet/label_mask.hpp"
#include "docdet/page.hpp"
#include "docdet/raster.hpp"

namespace docdet {

struct UniformizeConfig {
    int target_long_side = 768;
    double overlap_ratio_threshold = 0.20;
    int erosion_radius = 1;
    /// Keep an overlapping pair untouched as soon as one of the two ratios
    /// reaches the threshold. Off by default: a pair is only kept when both
    /// ratios reach it, otherwise the smaller-ratio object gives up the
    /// shared pixels.
    bool keep_if_either = false;
};

void validate_uniformize_config(const UniformizeConfig& cfg);

/// Uniform rescale so the longer side equals `target_long_side`. Dimensions
/// are rounded to the nearest integer (at least 1); vertices stay fractional.
PageRecord scale_page(const PageRecord& page, int target_long_side);

enum class PairAction { touching_eroded, split, kept };

const char* to_string(PairAction action);

struct PairEvent {
    std::size_t first = 0;
    std::size_t second = 0;
    PairAction action = PairAction::kept;
    /// Overlap of the input (freshly rasterized) masks.
    std::int64_t input_intersection = 0;
    double ratio_first = 0.0;
    double ratio_second = 0.0;
    /// Index of the object that gave up the shared pixels (split only).
    std::size_t loser = 0;
};

struct NormalizedPage {
    std::vector<ObjectMask> input_masks;
    std::vector<ObjectMask> masks;
    LabelMask labels;
    std::vector<PairEvent> events;
    Warnings warnings;
};

/// Separates touching objects, splits small overlaps and keeps large ones,
/// then draws the result into one label image. Pairs are visited in
/// (i, j) lexicographic order; each edit applies immediately.
NormalizedPage normalize_page(const PageRecord& page, const UniformizeConfig& cfg);

}  // namespace docdet
