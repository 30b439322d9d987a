#include "docdet/confidence.hpp"

#include <algorithm>
#include <cmath>

#include "docdet/object_metrics.hpp"
#include "docdet/parallel.hpp"

namespace docdet {

ConfidenceScore pce(std::span<const ObjectMask> objects, const ProbabilityMap& map)
{
    ConfidenceScore score;
    if (objects.empty()) {
        score.no_detection = true;
        return score;
    }
    double sum = 0.0;
    for (const ObjectMask& obj : objects) {
        if (obj.empty()) throw ValidationError("cannot score an empty object");
        const BoundingBox& b = obj.box();
        if (b.x1 >= static_cast<int>(map.width()) || b.y1 >= static_cast<int>(map.height()))
            throw DimensionError("object extends beyond the probability map");
        if (obj.class_id < 1 || static_cast<std::uint32_t>(obj.class_id) >= map.num_classes())
            throw RangeError("object class " + std::to_string(obj.class_id) + " has no probability plane");
        double object_sum = 0.0;
        obj.for_each_pixel([&](int x, int y) {
            object_sum += map.at(static_cast<std::uint32_t>(obj.class_id), static_cast<std::uint32_t>(x),
                                 static_cast<std::uint32_t>(y));
        });
        sum += object_sum / static_cast<double>(obj.pixel_count());
    }
    score.value = sum / static_cast<double>(objects.size());
    return score;
}

ConfidenceScore pce_from_confidences(std::span<const ObjectMask> objects)
{
    ConfidenceScore score;
    if (objects.empty()) {
        score.no_detection = true;
        return score;
    }
    double sum = 0.0;
    for (const ObjectMask& obj : objects) sum += obj.confidence.value_or(1.0);
    score.value = sum / static_cast<double>(objects.size());
    return score;
}

ConfidenceScore dap(const PredictionEnsemble& ensemble, unsigned jobs)
{
    const std::size_t n = ensemble.members.size();
    if (n < 2) throw ConfigError("DAP needs at least 2 ensemble members");
    const auto thresholds = default_iou_thresholds();
    std::vector<double> pair_map(n * n, 0.0);
    parallel_for(n * n, jobs, [&](std::size_t k) {
        const std::size_t i = k / n;
        const std::size_t j = k % n;
        if (i != j) pair_map[k] = image_map(ensemble.members[i], ensemble.members[j], thresholds);
    });
    double sum = 0.0;
    for (double v : pair_map) sum += v;
    ConfidenceScore score;
    score.value = sum / static_cast<double>(n * n - n);
    score.no_detection = std::all_of(ensemble.members.begin(), ensemble.members.end(),
                                     [](const auto& m) { return m.empty(); });
    return score;
}

ConfidenceScore dov(std::span<const std::size_t> counts)
{
    if (counts.size() < 2) throw ConfigError("DOV needs at least 2 ensemble members");
    double mean = 0.0;
    for (std::size_t c : counts) mean += static_cast<double>(c);
    mean /= static_cast<double>(counts.size());
    double ss = 0.0;
    for (std::size_t c : counts) ss += (static_cast<double>(c) - mean) * (static_cast<double>(c) - mean);
    ConfidenceScore score;
    score.value = ss / static_cast<double>(counts.size() - 1);
    score.higher_is_better = false;
    return score;
}

ConfidenceScore dov(const PredictionEnsemble& ensemble)
{
    std::vector<std::size_t> counts;
    for (const auto& member : ensemble.members) counts.push_back(member.size());
    return dov(counts);
}

std::vector<double> object_features(std::span<const ObjectMask> objects, int width, int height, int bins)
{
    if (bins < 1) throw ConfigError("feature histograms need at least one bin");
    if (width <= 0 || height <= 0) throw DimensionError("image dimensions must be positive");
    const std::size_t b = static_cast<std::size_t>(bins);
    std::vector<double> features(kNumObjectFeatures * b, 0.0);
    std::vector<std::size_t> samples(kNumObjectFeatures, 0);
    static constexpr double kRange[kNumObjectFeatures] = {1.0, 1.0, 4.0, 1.0, 1.0, 1.0, 1.0, 1.0};

    auto add = [&](int feature, double value) {
        double pos = std::floor(value / kRange[feature] * bins);
        const std::size_t bin = pos < 0 ? 0 : std::min(b - 1, static_cast<std::size_t>(std::min(pos, 1e9)));
        features[feature * b + bin] += 1.0;
        ++samples[feature];
    };

    const double img_w = width;
    const double img_h = height;
    const double img_area = img_w * img_h;
    std::vector<std::pair<double, double>> centers;
    for (const ObjectMask& obj : objects) {
        if (obj.empty()) continue;
        const BoundingBox& box = obj.box();
        const double bw = box.width();
        const double bh = box.height();
        const double area = static_cast<double>(obj.pixel_count());
        add(0, bh / img_h);
        add(1, bw / img_w);
        add(2, bh / bw);
        add(3, area / img_area);
        add(4, area / (bw * bh));
        add(5, bw * bh / img_area);
        centers.emplace_back(box.x0 + bw / 2.0, box.y0 + bh / 2.0);
    }
    for (std::size_t i = 0; i < centers.size(); ++i)
        for (std::size_t j = i + 1; j < centers.size(); ++j) {
            add(6, std::abs(centers[i].second - centers[j].second) / img_h);
            add(7, std::abs(centers[i].first - centers[j].first) / img_w);
        }

    for (int f = 0; f < kNumObjectFeatures; ++f) {
        if (samples[f] == 0) continue;
        for (std::size_t k = 0; k < b; ++k) features[f * b + k] /= static_cast<double>(samples[f]);
    }
    return features;
}

}  // namespace docdet
