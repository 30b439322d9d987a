#pragma once

#include <span>
#include <string>
#include <vector>

#include "docdet/probmap.hpp"
#include "docdet/raster.hpp"

namespace docdet {

/// Number of dropout predictions per image used by default.
inline constexpr int kDefaultEnsembleSize = 10;
/// Histogram bins per object feature.
inline constexpr int kDefaultFeatureBins = 10;
inline constexpr int kNumObjectFeatures = 8;

struct ConfidenceScore {
    double value = 0.0;
    /// False for estimators where a lower value means more confident (DOV).
    bool higher_is_better = true;
    /// Set when the image had no detected object to score.
    bool no_detection = false;

    /// Value oriented so that larger always means more confident.
    double oriented() const noexcept { return higher_is_better ? value : -value; }
};

/// Mean over objects of each object's mean class probability (each object
/// weighs the same regardless of size). No objects: 0 with no_detection set.
ConfidenceScore pce(std::span<const ObjectMask> objects, const ProbabilityMap& map);

/// Same estimator from the per-object confidences already stored on the
/// masks (as set by extract_objects); missing confidences count as 1.
ConfidenceScore pce_from_confidences(std::span<const ObjectMask> objects);

struct PredictionEnsemble {
    std::string image_id;
    std::vector<std::vector<ObjectMask>> members;
};

/// Mean mAP@[.5,.95] over ordered member pairs, one member acting as
/// ground truth for the other.
ConfidenceScore dap(const PredictionEnsemble& ensemble, unsigned jobs = 1);

/// Sample variance (denominator N-1) of per-member object counts.
ConfidenceScore dov(std::span<const std::size_t> object_counts);
ConfidenceScore dov(const PredictionEnsemble& ensemble);

/// Eight per-image feature histograms, each normalized to sum to 1 (or all
/// zero without samples), concatenated. Per object: box height / image
/// height, box width / image width, box height / box width, area / image
/// area, area / box area, box area / image area. Per unordered object pair:
/// |dy| / image height and |dx| / image width between box centers. The
/// aspect ratio is binned over [0, 4], everything else over [0, 1]; values
/// beyond the range land in the last bin.
std::vector<double> object_features(std::span<const ObjectMask> objects, int width, int height,
                                    int bins = kDefaultFeatureBins);

}  // namespace docdet
