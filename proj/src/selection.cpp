#include "docdet/selection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "docdet/random.hpp"

namespace docdet {

namespace {

bool rejected(double score, double threshold, bool higher_is_better)
{
    return higher_is_better ? score < threshold : score > threshold;
}

void check_inputs(std::span<const double> scores, std::span<const double> metrics)
{
    if (scores.empty()) throw ConfigError("rejection curve needs at least one image");
    if (scores.size() != metrics.size())
        throw DimensionError("score and metric counts differ (" + std::to_string(scores.size()) + " vs " +
                             std::to_string(metrics.size()) + ")");
}

}  // namespace

std::vector<double> default_rejection_thresholds(bool higher_is_better)
{
    std::vector<double> out;
    if (higher_is_better) {
        for (int k = 0; k <= 20; ++k) out.push_back(k * 5 / 100.0);
    } else {
        for (int k = 10; k >= 0; --k) out.push_back(static_cast<double>(k));
    }
    return out;
}

RejectionCurve rejection_curve(std::span<const double> scores, std::span<const double> metrics,
                               bool higher_is_better, std::span<const double> thresholds)
{
    check_inputs(scores, metrics);
    RejectionCurve curve;
    curve.higher_is_better = higher_is_better;
    std::vector<char> previous;
    std::vector<char> kept(scores.size());
    for (double t : thresholds) {
        std::size_t count = 0;
        double sum = 0.0;
        for (std::size_t i = 0; i < scores.size(); ++i) {
            kept[i] = rejected(scores[i], t, higher_is_better) ? 0 : 1;
            if (kept[i]) {
                ++count;
                sum += metrics[i];
            }
        }
        if (count == 0) continue;
        if (kept == previous) continue;
        previous = kept;
        RejectionPoint p;
        p.threshold = t;
        p.retained = count;
        p.rejection_rate = static_cast<double>(scores.size() - count) / static_cast<double>(scores.size());
        p.metric = sum / static_cast<double>(count);
        curve.points.push_back(p);
    }
    return curve;
}

double nearest_rank_percentile(std::span<const double> sorted, double p)
{
    if (sorted.empty()) throw ConfigError("percentile of an empty sample");
    const double n = static_cast<double>(sorted.size());
    auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * n));
    if (rank < 1) rank = 1;
    if (rank > sorted.size()) rank = sorted.size();
    return sorted[rank - 1];
}

BootstrapBands bootstrap_bands(std::span<const double> scores, std::span<const double> metrics, bool higher_is_better,
                               std::span<const double> thresholds, int resamples, std::uint64_t seed)
{
    check_inputs(scores, metrics);
    if (resamples < 2) throw ConfigError("bootstrap needs at least 2 resamples");
    const std::size_t n = scores.size();
    const std::size_t nt = thresholds.size();
    std::vector<std::vector<double>> values(nt), rates(nt);
    std::vector<std::size_t> draw(n);
    for (int r = 0; r < resamples; ++r) {
        Rng rng = make_stream(seed, "bootstrap", static_cast<std::uint64_t>(r));
        for (auto& d : draw) d = uniform_index(rng, n);
        for (std::size_t t = 0; t < nt; ++t) {
            std::size_t count = 0;
            double sum = 0.0;
            for (std::size_t d : draw) {
                if (rejected(scores[d], thresholds[t], higher_is_better)) continue;
                ++count;
                sum += metrics[d];
            }
            if (count == 0) continue;
            values[t].push_back(sum / static_cast<double>(count));
            rates[t].push_back(static_cast<double>(n - count) / static_cast<double>(n));
        }
    }
    BootstrapBands bands;
    bands.resamples = static_cast<std::size_t>(resamples);
    for (std::size_t t = 0; t < nt; ++t) {
        if (values[t].empty()) continue;
        std::sort(values[t].begin(), values[t].end());
        std::sort(rates[t].begin(), rates[t].end());
        BandPoint p;
        p.threshold = thresholds[t];
        p.samples = values[t].size();
        p.rejection_rate = nearest_rank_percentile(rates[t], 50);
        p.median = nearest_rank_percentile(values[t], 50);
        p.p10 = nearest_rank_percentile(values[t], 10);
        p.p90 = nearest_rank_percentile(values[t], 90);
        bands.points.push_back(p);
    }
    return bands;
}

const char* to_string(Strategy s)
{
    switch (s) {
    case Strategy::lowest: return "lowest";
    case Strategy::highest: return "highest";
    case Strategy::random: return "random";
    }
    return "?";
}

const char* to_string(AnnotationMode m) { return m == AnnotationMode::manual ? "manual" : "auto-label"; }

Strategy parse_strategy(const std::string& name)
{
    if (name == "lowest") return Strategy::lowest;
    if (name == "highest") return Strategy::highest;
    if (name == "random") return Strategy::random;
    throw ConfigError("unknown selection strategy \"" + name + "\" (expected lowest, highest or random)");
}

SelectionOutcome select_images(std::span<const ScoredImage> pool, const SelectionRequest& request)
{
    if (pool.empty()) throw ConfigError("selection pool is empty");
    if (request.threshold.has_value() == request.budget.has_value())
        throw ConfigError("selection needs exactly one of a threshold or a budget");
    const bool hib = pool.front().score.higher_is_better;
    for (const auto& img : pool)
        if (img.score.higher_is_better != hib) throw ConfigError("pool mixes score orientations");

    SelectionOutcome out;
    out.iteration = request.iteration;
    out.strategy = request.strategy;
    out.threshold = request.threshold;
    out.mode = request.strategy == Strategy::highest ? AnnotationMode::auto_label : AnnotationMode::manual;

    // Least confident first; equal confidence keeps pool order.
    std::vector<std::size_t> order(pool.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return pool[a].score.oriented() < pool[b].score.oriented();
    });

    std::vector<std::size_t> chosen;
    std::size_t k = 0;
    if (request.budget) {
        k = *request.budget;
        if (k > pool.size()) {
            warn(&out.warnings, "budget " + std::to_string(k) + " exceeds pool size " + std::to_string(pool.size()) +
                                    "; selecting the whole pool");
            k = pool.size();
        }
    }
    const auto low_side = [&](const ScoredImage& img) { return rejected(img.score.value, *request.threshold, hib); };

    switch (request.strategy) {
    case Strategy::lowest:
        if (request.budget) {
            chosen.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
        } else {
            for (std::size_t i : order)
                if (low_side(pool[i])) chosen.push_back(i);
        }
        break;
    case Strategy::highest: {
        std::vector<std::size_t> desc(pool.size());
        std::iota(desc.begin(), desc.end(), std::size_t{0});
        std::stable_sort(desc.begin(), desc.end(), [&](std::size_t a, std::size_t b) {
            return pool[a].score.oriented() > pool[b].score.oriented();
        });
        if (request.budget) {
            chosen.assign(desc.begin(), desc.begin() + static_cast<std::ptrdiff_t>(k));
        } else {
            for (std::size_t i : desc)
                if (!low_side(pool[i])) chosen.push_back(i);
        }
        break;
    }
    case Strategy::random: {
        if (request.threshold) {
            k = static_cast<std::size_t>(
                std::count_if(pool.begin(), pool.end(), [&](const ScoredImage& img) { return low_side(img); }));
        }
        std::vector<std::size_t> idx(pool.size());
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        Rng rng = make_stream(request.seed, "select-random", request.iteration);
        for (std::size_t i = 0; i < k; ++i) {
            const std::size_t j = i + uniform_index(rng, idx.size() - i);
            std::swap(idx[i], idx[j]);
            chosen.push_back(idx[i]);
        }
        break;
    }
    }

    for (std::size_t i : chosen) out.selected.push_back(pool[i].image_id);
    out.budget_consumed = out.selected.size();
    return out;
}

}  // namespace docdet
