#pragma once

#include <cstdint>
#include <vector>

#include "docdet/label_mask.hpp"

namespace docdet {

struct ClassCounts {
    std::int64_t tp = 0;
    std::int64_t fp = 0;
    std::int64_t fn = 0;

    bool present() const noexcept { return tp + fp + fn > 0; }
    ClassCounts& operator+=(const ClassCounts& o)
    {
        tp += o.tp;
        fp += o.fp;
        fn += o.fn;
        return *this;
    }
    friend bool operator==(const ClassCounts&, const ClassCounts&) = default;
};

/// Indexed by class id; entry 0 is the background class.
struct ConfusionCounts {
    std::vector<ClassCounts> per_class;

    ConfusionCounts& operator+=(const ConfusionCounts& o);
};

struct ClassScores {
    double iou = 1.0;
    double precision = 1.0;
    double recall = 1.0;
    double f1 = 1.0;
};

struct PixelMetrics {
    std::vector<ClassScores> per_class;
    /// Mean over non-background classes present in either mask; 1.0 when
    /// no such class exists.
    ClassScores macro;
    std::size_t macro_classes = 0;
};

ConfusionCounts pixel_confusion(const LabelMask& pred, const LabelMask& gt, int num_classes);

/// Zero-denominator conventions: a class absent from both masks scores 1
/// everywhere; TP = 0 with FP > 0 gives precision 0; TP = 0 with FN > 0 gives
/// recall 0.
ClassScores class_scores(const ClassCounts& counts);
PixelMetrics pixel_metrics(const ConfusionCounts& counts);

}  // namespace docdet
