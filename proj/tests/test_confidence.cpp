#include <doctest.h>

#include <random>

#include "docdet/confidence.hpp"
#include "docdet/object_metrics.hpp"
#include "test_util.hpp"

using namespace docdet;
using testutil::block;

namespace {

ProbabilityMap map_with(int w, int h, const std::vector<std::pair<PixelCoord, float>>& probs)
{
    ProbabilityMap map(static_cast<std::uint32_t>(w), static_cast<std::uint32_t>(h), 2);
    for (const auto& [p, v] : probs) map.at(1, static_cast<std::uint32_t>(p.x), static_cast<std::uint32_t>(p.y)) = v;
    return map;
}

}  // namespace

TEST_CASE("defaults")
{
    CHECK(kDefaultEnsembleSize == 10);
    CHECK(kDefaultFeatureBins == 10);
    CHECK(ExtractConfig{}.min_cc == 50);
    CHECK(ExtractConfig{}.threshold == 0.7);
}

TEST_CASE("PCE examples")
{
    const ObjectMask obj = block(10, 10, 0, 0, 2, 2);
    std::vector<std::pair<PixelCoord, float>> probs;
    obj.for_each_pixel([&](int x, int y) { probs.push_back({{x, y}, 1.0f}); });
    const ConfidenceScore one = pce(std::vector<ObjectMask>{obj}, map_with(10, 10, probs));
    CHECK(one.value == 1.0);
    CHECK(one.higher_is_better);

    // Means 0.8 and 0.6 with different sizes: the outer mean is unweighted.
    const ObjectMask a = block(10, 10, 0, 0, 1, 1), b = block(10, 10, 5, 5, 3, 3);
    probs.clear();
    probs.push_back({{0, 0}, 0.8f});
    b.for_each_pixel([&](int x, int y) { probs.push_back({{x, y}, 0.6f}); });
    CHECK(pce(std::vector<ObjectMask>{a, b}, map_with(10, 10, probs)).value == doctest::Approx(0.7));

    const ObjectMask three = ObjectMask::from_pixels(10, 10, std::vector<PixelCoord>{{0, 0}, {1, 0}, {2, 0}});
    const auto m = map_with(10, 10, {{{0, 0}, 0.9f}, {{1, 0}, 0.8f}, {{2, 0}, 0.7f}});
    CHECK(pce(std::vector<ObjectMask>{three}, m).value == doctest::Approx(0.8));

    const ConfidenceScore none = pce(std::vector<ObjectMask>{}, m);
    CHECK(none.no_detection);
    CHECK_THROWS_AS(pce(std::vector<ObjectMask>{ObjectMask(10, 10)}, m), ValidationError);
}

TEST_CASE("PCE equals the mean of extracted object confidences")
{
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    for (int trial = 0; trial < 20; ++trial) {
        ProbabilityMap map(60, 40, 2);
        for (std::uint32_t y = 0; y < 40; ++y)
            for (std::uint32_t x = 0; x < 60; ++x) {
                const float p = ((x / 10 + y / 10) % 2) ? u(rng) * 0.5f + 0.5f : u(rng) * 0.3f;
                map.at(1, x, y) = p;
                map.at(0, x, y) = 1.0f - p;
            }
        const auto objs = extract_objects(map, {0.6, 1, 4});
        const double a = pce(objs, map).value;
        const double b = pce_from_confidences(objs).value;
        CHECK(a == doctest::Approx(b).epsilon(1e-12));
    }
}

TEST_CASE("DOV examples and algebra")
{
    CHECK(dov(std::vector<std::size_t>{3, 3, 3}).value == 0.0);
    CHECK(dov(std::vector<std::size_t>{1, 2, 3}).value == 1.0);
    CHECK(dov(std::vector<std::size_t>{0, 5, 10}).value == 25.0);
    CHECK_FALSE(dov(std::vector<std::size_t>{1, 2}).higher_is_better);
    CHECK_THROWS_AS(dov(std::vector<std::size_t>{4}), ConfigError);

    std::mt19937_64 rng(9);
    for (int i = 0; i < 100; ++i) {
        std::vector<std::size_t> c(2 + rng() % 10);
        for (auto& v : c) v = rng() % 20;
        const double base = dov(c).value;
        auto shifted = c;
        for (auto& v : shifted) v += 7;
        CHECK(dov(shifted).value == doctest::Approx(base));
        auto scaled = c;
        for (auto& v : scaled) v *= 3;
        CHECK(dov(scaled).value == doctest::Approx(9.0 * base));
    }
}

TEST_CASE("DAP examples")
{
    PredictionEnsemble same;
    const std::vector<ObjectMask> member{block(50, 50, 0, 0, 10, 10), block(50, 50, 20, 20, 15, 5)};
    for (int k = 0; k < 10; ++k) same.members.push_back(member);
    CHECK(dap(same).value == 1.0);
    CHECK(dap(same, 4).value == 1.0);

    PredictionEnsemble disjoint;
    disjoint.members.push_back({block(50, 50, 0, 0, 10, 10)});
    disjoint.members.push_back({block(50, 50, 30, 30, 10, 10)});
    CHECK(dap(disjoint).value == 0.0);

    PredictionEnsemble pair;
    pair.members.push_back({block(50, 50, 0, 0, 10, 10), block(50, 50, 20, 0, 10, 10)});
    pair.members.push_back({block(50, 50, 1, 0, 10, 10)});
    const auto thr = default_iou_thresholds();
    const double ab = image_map(pair.members[0], pair.members[1], thr);
    const double ba = image_map(pair.members[1], pair.members[0], thr);
    CHECK(dap(pair).value == doctest::Approx((ab + ba) / 2.0));

    PredictionEnsemble lonely;
    lonely.members.push_back(member);
    CHECK_THROWS_AS(dap(lonely), ConfigError);
}

TEST_CASE("DAP stays in the unit interval")
{
    std::mt19937_64 rng(10);
    for (int trial = 0; trial < 20; ++trial) {
        PredictionEnsemble e;
        for (int k = 0; k < 4; ++k) {
            std::vector<ObjectMask> m;
            const int n = static_cast<int>(rng() % 4);
            for (int i = 0; i < n; ++i)
                m.push_back(block(64, 64, static_cast<int>(rng() % 50), static_cast<int>(rng() % 50), 5 + static_cast<int>(rng() % 10), 5));
            e.members.push_back(m);
        }
        const double v = dap(e).value;
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
}

TEST_CASE("object features")
{
    const auto empty = object_features(std::vector<ObjectMask>{}, 100, 100);
    CHECK(empty.size() == 80);
    for (double v : empty) CHECK(v == 0.0);

    const auto full = object_features(std::vector<ObjectMask>{block(100, 80, 0, 0, 100, 80)}, 100, 80);
    for (int f : {0, 1, 3, 4, 5}) {
        CHECK(full[f * 10 + 9] == 1.0);
        for (int k = 0; k < 9; ++k) CHECK(full[f * 10 + k] == 0.0);
    }
    // Aspect ratio 0.8 over [0, 4]: bin 2.
    CHECK(full[2 * 10 + 2] == 1.0);
    for (int f : {6, 7})
        for (int k = 0; k < 10; ++k) CHECK(full[f * 10 + k] == 0.0);

    const auto two = object_features(std::vector<ObjectMask>{block(100, 100, 0, 0, 10, 10), block(100, 100, 0, 50, 10, 10)}, 100, 100);
    // Vertical centroid distance 0.5 falls in bin 5, horizontal 0.0 in bin 0.
    CHECK(two[6 * 10 + 5] == 1.0);
    CHECK(two[7 * 10 + 0] == 1.0);
    CHECK_THROWS_AS(object_features(std::vector<ObjectMask>{}, 10, 10, 0), ConfigError);
}

TEST_CASE("object features ignore a uniform rescale")
{
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<ObjectMask> small, big;
        const int n = 1 + static_cast<int>(rng() % 6);
        for (int i = 0; i < n; ++i) {
            const int x = static_cast<int>(rng() % 50), y = static_cast<int>(rng() % 70);
            const int w = 1 + static_cast<int>(rng() % 20), h = 1 + static_cast<int>(rng() % 20);
            small.push_back(block(80, 100, x, y, w, h));
            big.push_back(block(240, 300, 3 * x, 3 * y, 3 * w, 3 * h));
        }
        CHECK(object_features(small, 80, 100) == object_features(big, 240, 300));
    }
}
