#include "docdet/pixel_metrics.hpp"

#include <algorithm>

#include "docdet/error.hpp"

namespace docdet {

ConfusionCounts& ConfusionCounts::operator+=(const ConfusionCounts& o)
{
    if (per_class.size() < o.per_class.size()) per_class.resize(o.per_class.size());
    for (std::size_t c = 0; c < o.per_class.size(); ++c) per_class[c] += o.per_class[c];
    return *this;
}

ConfusionCounts pixel_confusion(const LabelMask& pred, const LabelMask& gt, int num_classes)
{
    if (pred.width != gt.width || pred.height != gt.height)
        throw DimensionError("prediction is " + std::to_string(pred.width) + "x" + std::to_string(pred.height) +
                             " but ground truth is " + std::to_string(gt.width) + "x" +
                             std::to_string(gt.height));
    if (num_classes < 1) throw ConfigError("num_classes must be at least 1");

    // Joint histogram, then per-class marginals.
    const std::size_t k = static_cast<std::size_t>(num_classes);
    std::vector<std::int64_t> joint(k * k, 0);
    const std::size_t n = pred.labels.size();
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t p = pred.labels[i];
        const std::size_t g = gt.labels[i];
        if (p >= k || g >= k)
            throw RangeError("label " + std::to_string(std::max(p, g)) + " exceeds num_classes " +
                             std::to_string(num_classes));
        ++joint[p * k + g];
    }

    ConfusionCounts cc;
    cc.per_class.resize(k);
    for (std::size_t c = 0; c < k; ++c) {
        std::int64_t pred_total = 0;
        std::int64_t gt_total = 0;
        for (std::size_t o = 0; o < k; ++o) {
            pred_total += joint[c * k + o];
            gt_total += joint[o * k + c];
        }
        const std::int64_t tp = joint[c * k + c];
        cc.per_class[c] = {tp, pred_total - tp, gt_total - tp};
    }
    return cc;
}

ClassScores class_scores(const ClassCounts& c)
{
    ClassScores s;
    if (!c.present()) return s;
    const auto tp = static_cast<double>(c.tp);
    s.precision = c.tp + c.fp == 0 ? 1.0 : tp / static_cast<double>(c.tp + c.fp);
    s.recall = c.tp + c.fn == 0 ? 1.0 : tp / static_cast<double>(c.tp + c.fn);
    s.iou = tp / static_cast<double>(c.tp + c.fp + c.fn);
    s.f1 = 2.0 * tp / static_cast<double>(2 * c.tp + c.fp + c.fn);
    return s;
}

PixelMetrics pixel_metrics(const ConfusionCounts& counts)
{
    PixelMetrics m;
    m.per_class.reserve(counts.per_class.size());
    ClassScores sum{0.0, 0.0, 0.0, 0.0};
    for (std::size_t c = 0; c < counts.per_class.size(); ++c) {
        m.per_class.push_back(class_scores(counts.per_class[c]));
        if (c == 0 || !counts.per_class[c].present()) continue;
        sum.iou += m.per_class.back().iou;
        sum.precision += m.per_class.back().precision;
        sum.recall += m.per_class.back().recall;
        sum.f1 += m.per_class.back().f1;
        ++m.macro_classes;
    }
    if (m.macro_classes > 0) {
        const double n = static_cast<double>(m.macro_classes);
        m.macro = {sum.iou / n, sum.precision / n, sum.recall / n, sum.f1 / n};
    }
    return m;
}

}  // namespace docdet
