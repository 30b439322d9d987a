#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "docdet/confidence.hpp"
#include "docdet/error.hpp"

namespace docdet {

struct ScoredImage {
    std::string image_id;
    ConfidenceScore score;
};

struct RejectionPoint {
    double threshold = 0.0;
    double rejection_rate = 0.0;
    double metric = 0.0;
    std::size_t retained = 0;
};

struct RejectionCurve {
    bool higher_is_better = true;
    std::vector<RejectionPoint> points;
};

/// 0, 0.05, ..., 1 for scores where higher means more confident; 10, 9, ..., 0
/// for variance-like scores.
std::vector<double> default_rejection_thresholds(bool higher_is_better);

/// An image is rejected when its score is on the unconfident side of the
/// threshold (below it, or above it for lower-is-better scores). Each point
/// reports the rejected fraction and the mean metric of the rest.
/// Thresholds that keep nothing are omitted, and a threshold that keeps
/// exactly the same images as the previous point does not add a new one.
RejectionCurve rejection_curve(std::span<const double> scores, std::span<const double> metrics,
                               bool higher_is_better, std::span<const double> thresholds);

struct BandPoint {
    double threshold = 0.0;
    std::size_t samples = 0;  ///< resamples that kept at least one image
    double rejection_rate = 0.0;  ///< median
    double median = 0.0;
    double p10 = 0.0;
    double p90 = 0.0;
};

struct BootstrapBands {
    std::size_t resamples = 0;
    std::vector<BandPoint> points;
};

/// Nearest-rank percentile of an ascending-sorted sample (p in [0, 100]).
double nearest_rank_percentile(std::span<const double> sorted, double p);

/// Resamples the image set with replacement and recomputes, per threshold,
/// the mean metric of the retained images.
BootstrapBands bootstrap_bands(std::span<const double> scores, std::span<const double> metrics, bool higher_is_better,
                               std::span<const double> thresholds, int resamples, std::uint64_t seed);

enum class Strategy { lowest, highest, random };
enum class AnnotationMode { manual, auto_label };

const char* to_string(Strategy s);
const char* to_string(AnnotationMode m);
Strategy parse_strategy(const std::string& name);

struct SelectionRequest {
    Strategy strategy = Strategy::lowest;
    std::optional<double> threshold;
    std::optional<std::size_t> budget;
    std::uint64_t seed = 0;
    std::uint64_t iteration = 0;
};

struct SelectionOutcome {
    std::uint64_t iteration = 0;
    std::vector<std::string> selected;
    Strategy strategy = Strategy::lowest;
    std::optional<double> threshold;
    std::size_t budget_consumed = 0;
    AnnotationMode mode = AnnotationMode::manual;
    Warnings warnings;
};

/// lowest: images on the unconfident side of the threshold (strictly), or the
/// k least confident. highest: the complement side (confident or equal), or
/// the k most confident; their predictions become labels. random: uniform
/// draw without replacement of k images, or with a threshold of as many
/// images as lowest would take. Ties in confidence keep pool order.
SelectionOutcome select_images(std::span<const ScoredImage> pool, const SelectionRequest& request);

}  // namespace docdet
