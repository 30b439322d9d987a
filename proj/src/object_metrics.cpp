#include "docdet/object_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "docdet/parallel.hpp"

namespace docdet {

std::vector<double> default_iou_thresholds()
{
    std::vector<double> t;
    for (int pct = 50; pct <= 95; pct += 5) t.push_back(pct / 100.0);
    return t;
}

std::vector<double> parse_threshold_range(const std::string& spec)
{
    std::vector<double> parts;
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ':')) {
        try {
            std::size_t used = 0;
            parts.push_back(std::stod(item, &used));
            if (used != item.size()) throw ConfigError("");
        } catch (...) {
            throw ConfigError("invalid threshold range \"" + spec + "\"");
        }
    }
    if (parts.size() == 1) return parts;
    if (parts.size() != 3 || parts[2] == 0.0 || (parts[1] - parts[0]) / parts[2] < -1e-9)
        throw ConfigError("threshold range must be start:stop:step, got \"" + spec + "\"");
    std::vector<double> out;
    const auto steps = static_cast<long>(std::floor((parts[1] - parts[0]) / parts[2] + 1e-9));
    for (long k = 0; k <= steps; ++k) out.push_back(std::round((parts[0] + k * parts[2]) * 1e9) / 1e9);
    return out;
}

IouTable compute_iou_table(std::span<const ObjectMask> preds, std::span<const ObjectMask> gts)
{
    IouTable table;
    table.num_preds = preds.size();
    table.num_gts = gts.size();
    table.values.assign(preds.size() * gts.size(), 0.0);
    for (std::size_t p = 0; p < preds.size(); ++p)
        for (std::size_t g = 0; g < gts.size(); ++g)
            if (boxes_intersect(preds[p].box(), gts[g].box()))
                table.values[p * gts.size() + g] = mask_overlap(preds[p], gts[g]).iou;
    return table;
}

std::vector<std::size_t> confidence_order(std::span<const ObjectMask> preds)
{
    std::vector<std::size_t> order(preds.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const double ca = preds[a].confidence.value_or(1.0);
        const double cb = preds[b].confidence.value_or(1.0);
        if (ca != cb) return ca > cb;
        return preds[a].pixel_count() > preds[b].pixel_count();
    });
    return order;
}

RankedMatches match_objects(const IouTable& table, std::span<const ObjectMask> preds, double threshold)
{
    if (table.num_preds != preds.size()) throw DimensionError("IoU table does not match predictions");
    RankedMatches rm;
    rm.total_gt = table.num_gts;
    rm.threshold = threshold;
    std::vector<bool> taken(table.num_gts, false);
    for (std::size_t p : confidence_order(preds)) {
        RankedPrediction r;
        r.index = p;
        r.confidence = preds[p].confidence.value_or(1.0);
        r.pixel_count = preds[p].pixel_count();
        std::optional<std::size_t> best;
        for (std::size_t g = 0; g < table.num_gts; ++g) {
            if (taken[g]) continue;
            const double iou = table.at(p, g);
            if (iou > 0.0 && (!best || iou > r.iou)) {
                best = g;
                r.iou = iou;
            }
        }
        if (best && r.iou >= threshold) {
            r.is_tp = true;
            r.gt_index = best;
            taken[*best] = true;
        }
        rm.ranked.push_back(r);
    }
    return rm;
}

RankedMatches match_objects(std::span<const ObjectMask> preds, std::span<const ObjectMask> gts, double threshold)
{
    return match_objects(compute_iou_table(preds, gts), preds, threshold);
}

RankedMatches pool_matches(std::span<const RankedMatches> per_image)
{
    RankedMatches pooled;
    for (std::size_t img = 0; img < per_image.size(); ++img) {
        pooled.total_gt += per_image[img].total_gt;
        pooled.threshold = per_image[img].threshold;
        for (RankedPrediction r : per_image[img].ranked) {
            r.image = img;
            pooled.ranked.push_back(r);
        }
    }
    std::stable_sort(pooled.ranked.begin(), pooled.ranked.end(),
                     [](const RankedPrediction& a, const RankedPrediction& b) {
                         if (a.confidence != b.confidence) return a.confidence > b.confidence;
                         if (a.pixel_count != b.pixel_count) return a.pixel_count > b.pixel_count;
                         if (a.image != b.image) return a.image < b.image;
                         return a.index < b.index;
                     });
    return pooled;
}

namespace {

struct TieGroup {
    std::size_t end = 0;  // one past the last prediction of the group
    std::size_t tp = 0;   // cumulative true positives through the group
};

std::vector<TieGroup> tie_groups(const RankedMatches& m)
{
    std::vector<TieGroup> groups;
    std::size_t tp = 0;
    for (std::size_t i = 0; i < m.ranked.size(); ++i) {
        if (m.ranked[i].is_tp) ++tp;
        const bool last = i + 1 == m.ranked.size() || m.ranked[i + 1].confidence != m.ranked[i].confidence;
        if (last) groups.push_back({i + 1, tp});
    }
    return groups;
}

}  // namespace

std::vector<PRPoint> pr_curve(const RankedMatches& m)
{
    std::vector<PRPoint> points(m.ranked.size());
    const auto groups = tie_groups(m);
    std::size_t begin = 0;
    for (const TieGroup& g : groups) {
        const double precision = static_cast<double>(g.tp) / static_cast<double>(g.end);
        const double recall = m.total_gt == 0 ? 0.0 : static_cast<double>(g.tp) / static_cast<double>(m.total_gt);
        for (std::size_t i = begin; i < g.end; ++i) points[i] = {recall, precision, precision};
        begin = g.end;
    }
    double running = 0.0;
    for (std::size_t i = points.size(); i-- > 0;) {
        running = std::max(running, points[i].precision);
        points[i].interpolated = running;
    }
    return points;
}

double average_precision(const RankedMatches& m)
{
    if (m.total_gt == 0) return m.ranked.empty() ? 1.0 : 0.0;
    const auto groups = tie_groups(m);
    if (groups.empty()) return 0.0;

    std::vector<long double> suffix_max(groups.size());
    long double running = 0.0L;
    for (std::size_t k = groups.size(); k-- > 0;) {
        running = std::max(running, static_cast<long double>(groups[k].tp) / groups[k].end);
        suffix_max[k] = running;
    }
    long double area = 0.0L;
    std::size_t prev_tp = 0;
    for (std::size_t k = 0; k < groups.size(); ++k) {
        area += static_cast<long double>(groups[k].tp - prev_tp) * suffix_max[k];
        prev_tp = groups[k].tp;
    }
    return static_cast<double>(area / static_cast<long double>(m.total_gt));
}

APResult map_over_thresholds(std::span<const ObjectMask> preds, std::span<const ObjectMask> gts,
                             std::span<const double> thresholds)
{
    if (thresholds.empty()) throw ConfigError("threshold list must not be empty");
    APResult result;
    result.thresholds.assign(thresholds.begin(), thresholds.end());
    const IouTable table = compute_iou_table(preds, gts);
    double sum = 0.0;
    for (double t : thresholds) {
        result.ap_at.push_back(average_precision(match_objects(table, preds, t)));
        sum += result.ap_at.back();
    }
    result.map_range = sum / static_cast<double>(thresholds.size());
    return result;
}

double map_multiclass(std::span<const double> per_class_map)
{
    if (per_class_map.empty()) throw ConfigError("mAP needs at least one class");
    double sum = 0.0;
    for (double v : per_class_map) sum += v;
    return sum / static_cast<double>(per_class_map.size());
}

namespace {

std::set<int> classes_of(std::span<const ObjectMask> a, std::span<const ObjectMask> b)
{
    std::set<int> classes;
    for (const auto& m : a) classes.insert(m.class_id);
    for (const auto& m : b) classes.insert(m.class_id);
    return classes;
}

std::vector<ObjectMask> of_class(std::span<const ObjectMask> masks, int cls)
{
    std::vector<ObjectMask> out;
    for (const auto& m : masks)
        if (m.class_id == cls) out.push_back(m);
    return out;
}

}  // namespace

double image_map(std::span<const ObjectMask> preds, std::span<const ObjectMask> gts,
                 std::span<const double> thresholds)
{
    const std::set<int> classes = classes_of(preds, gts);
    if (classes.empty()) return 1.0;
    if (classes.size() == 1) return map_over_thresholds(preds, gts, thresholds).map_range;
    std::vector<double> per_class;
    for (int cls : classes)
        per_class.push_back(map_over_thresholds(of_class(preds, cls), of_class(gts, cls), thresholds).map_range);
    return map_multiclass(per_class);
}

ObjectEvaluation evaluate_objects(std::span<const ImageDetections> images, std::span<const double> thresholds,
                                  unsigned jobs)
{
    if (thresholds.empty()) throw ConfigError("threshold list must not be empty");
    ObjectEvaluation eval;
    eval.thresholds.assign(thresholds.begin(), thresholds.end());

    std::set<int> classes;
    for (const auto& img : images) {
        const auto c = classes_of(img.preds, img.gts);
        classes.insert(c.begin(), c.end());
    }
    const std::vector<int> class_list(classes.begin(), classes.end());

    // matches[image][class][threshold]
    std::vector<std::vector<std::vector<RankedMatches>>> matches(images.size());
    eval.per_image_map.assign(images.size(), 1.0);
    parallel_for(images.size(), jobs, [&](std::size_t i) {
        const ImageDetections& img = images[i];
        std::vector<double> class_maps;
        matches[i].resize(class_list.size());
        for (std::size_t c = 0; c < class_list.size(); ++c) {
            const auto preds = of_class(img.preds, class_list[c]);
            const auto gts = of_class(img.gts, class_list[c]);
            const IouTable table = compute_iou_table(preds, gts);
            double sum = 0.0;
            for (double t : thresholds) {
                matches[i][c].push_back(match_objects(table, preds, t));
                sum += average_precision(matches[i][c].back());
            }
            if (!preds.empty() || !gts.empty()) class_maps.push_back(sum / static_cast<double>(thresholds.size()));
        }
        if (!class_maps.empty()) eval.per_image_map[i] = map_multiclass(class_maps);
    });

    std::vector<double> class_maps;
    for (std::size_t c = 0; c < class_list.size(); ++c) {
        APResult r;
        r.thresholds = eval.thresholds;
        double sum = 0.0;
        for (std::size_t t = 0; t < thresholds.size(); ++t) {
            std::vector<RankedMatches> per_image;
            per_image.reserve(images.size());
            for (std::size_t i = 0; i < images.size(); ++i) per_image.push_back(std::move(matches[i][c][t]));
            r.ap_at.push_back(average_precision(pool_matches(per_image)));
            sum += r.ap_at.back();
        }
        r.map_range = sum / static_cast<double>(thresholds.size());
        class_maps.push_back(r.map_range);
        eval.per_class.emplace(class_list[c], std::move(r));
    }
    if (!class_maps.empty()) eval.map = map_multiclass(class_maps);
    return eval;
}

}  // namespace docdet
