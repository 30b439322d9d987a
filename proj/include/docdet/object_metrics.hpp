#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "docdet/raster.hpp"

namespace docdet {

/// IoU thresholds 0.50, 0.55, ..., 0.95.
std::vector<double> default_iou_thresholds();

/// Parses "start:stop:step" into an inclusive, decimal-rounded list.
std::vector<double> parse_threshold_range(const std::string& spec);

struct IouTable {
    std::size_t num_preds = 0;
    std::size_t num_gts = 0;
    std::vector<double> values;

    double at(std::size_t pred, std::size_t gt) const { return values[pred * num_gts + gt]; }
};

IouTable compute_iou_table(std::span<const ObjectMask> preds, std::span<const ObjectMask> gts);

struct RankedPrediction {
    std::size_t image = 0;
    std::size_t index = 0;
    double confidence = 1.0;
    std::int64_t pixel_count = 0;
    /// Set only for true positives.
    std::optional<std::size_t> gt_index;
    /// Best IoU against the ground truths still unmatched at this rank.
    double iou = 0.0;
    bool is_tp = false;
};

struct RankedMatches {
    std::vector<RankedPrediction> ranked;
    std::size_t total_gt = 0;
    double threshold = 0.5;
};

/// Ranking: confidence descending (missing confidence counts as 1), then
/// pixel count descending, then input order.
std::vector<std::size_t> confidence_order(std::span<const ObjectMask> preds);

/// Greedy matching: in ranked order each prediction looks at the unmatched
/// ground truths it overlaps, picks the one of highest IoU (lower index on
/// ties) and becomes a true positive when that IoU reaches `threshold`.
RankedMatches match_objects(std::span<const ObjectMask> preds, std::span<const ObjectMask> gts,
                            double threshold);
RankedMatches match_objects(const IouTable& table, std::span<const ObjectMask> preds, double threshold);

/// Merges per-image rankings into one dataset ranking.
RankedMatches pool_matches(std::span<const RankedMatches> per_image);

struct PRPoint {
    double recall = 0.0;
    double precision = 0.0;
    double interpolated = 0.0;
};

/// One point per ranked prediction. Precision and recall at prediction i
/// count every prediction whose confidence is >= that of i.
std::vector<PRPoint> pr_curve(const RankedMatches& matches);

/// Area under the interpolated precision-recall curve, integrated exactly
/// up to the highest recall reached. No ground truth: 1 without
/// predictions, 0 with.
double average_precision(const RankedMatches& matches);

struct APResult {
    std::vector<double> thresholds;
    std::vector<double> ap_at;
    double map_range = 0.0;
};

APResult map_over_thresholds(std::span<const ObjectMask> preds, std::span<const ObjectMask> gts,
                             std::span<const double> thresholds);

/// Mean of per-class mAP values.
double map_multiclass(std::span<const double> per_class_map);

/// Multi-class mAP of one image: mean of map_range over the classes present
/// in either set, 1.0 when neither contains anything.
double image_map(std::span<const ObjectMask> preds, std::span<const ObjectMask> gts,
                 std::span<const double> thresholds);

struct ImageDetections {
    std::vector<ObjectMask> preds;
    std::vector<ObjectMask> gts;
};

struct ObjectEvaluation {
    std::vector<double> thresholds;
    /// Pooled over images, keyed by class id.
    std::map<int, APResult> per_class;
    double map = 1.0;
    std::vector<double> per_image_map;
};

ObjectEvaluation evaluate_objects(std::span<const ImageDetections> images, std::span<const double> thresholds,
                                  unsigned jobs = 1);

}  // namespace docdet
