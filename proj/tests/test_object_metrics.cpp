#include <doctest.h>

#include <random>

#include "checks.hpp"
#include "docdet/object_metrics.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace docdet;
using testutil::block;

namespace {

ObjectMask with_conf(ObjectMask m, double c)
{
    m.confidence = c;
    return m;
}

RankedMatches ranked_of(const std::vector<bool>& tps, std::size_t total_gt)
{
    RankedMatches rm;
    rm.total_gt = total_gt;
    double c = 1.0;
    for (bool tp : tps) {
        RankedPrediction p;
        p.confidence = c;
        p.is_tp = tp;
        rm.ranked.push_back(p);
        c -= 0.01;
    }
    return rm;
}

}  // namespace

TEST_CASE("default thresholds and range parsing")
{
    const auto t = default_iou_thresholds();
    REQUIRE(t.size() == 10);
    CHECK(t.front() == 0.5);
    CHECK(t.back() == 0.95);
    CHECK(parse_threshold_range("0.5:0.95:0.05") == t);
    CHECK(parse_threshold_range("0.5") == std::vector<double>{0.5});
    CHECK_THROWS_AS(parse_threshold_range("0.9:0.5:0.05"), ConfigError);
    CHECK_THROWS_AS(parse_threshold_range("abc"), ConfigError);
}

TEST_CASE("matching basics")
{
    const ObjectMask gt = block(20, 20, 0, 0, 10, 10);
    std::vector<ObjectMask> gts{gt};
    std::vector<ObjectMask> same{gt};
    for (double t : {0.5, 0.75, 1.0}) {
        const RankedMatches m = match_objects(same, gts, t);
        REQUIRE(m.ranked.size() == 1);
        CHECK(m.ranked[0].is_tp);
        CHECK(m.total_gt == 1);
    }
    // IoU 0.4: a 4x10 strip inside the block.
    std::vector<ObjectMask> weak{block(20, 20, 0, 0, 4, 10)};
    const RankedMatches m = match_objects(weak, gts, 0.5);
    CHECK_FALSE(m.ranked[0].is_tp);
    CHECK(m.ranked[0].iou == doctest::Approx(0.4));
    CHECK(average_precision(m) == 0.0);
}

TEST_CASE("greedy matching gives the ground truth to the most confident prediction")
{
    std::vector<ObjectMask> gts{block(20, 20, 0, 0, 10, 10)};
    std::vector<ObjectMask> preds{with_conf(block(20, 20, 0, 0, 10, 6), 0.8),
                                  with_conf(block(20, 20, 0, 0, 10, 8), 0.9)};
    const RankedMatches m = match_objects(preds, gts, 0.5);
    REQUIRE(m.ranked.size() == 2);
    CHECK(m.ranked[0].index == 1);
    CHECK(m.ranked[0].is_tp);
    CHECK(m.ranked[0].iou == doctest::Approx(0.8));
    CHECK(m.ranked[1].index == 0);
    CHECK_FALSE(m.ranked[1].is_tp);

    std::vector<oracle::Detection> dp{{oracle::rasterize(testutil::rect(0, 0, 10, 6), 20, 20), 0.8},
                                      {oracle::rasterize(testutil::rect(0, 0, 10, 8), 20, 20), 0.9}};
    const auto ref = oracle::greedy_match(dp, {oracle::rasterize(testutil::rect(0, 0, 10, 10), 20, 20)}, 0.5);
    CHECK(ref[0].tp);
    CHECK_FALSE(ref[1].tp);
}

TEST_CASE("confidence ties fall back to size then input order")
{
    std::vector<ObjectMask> preds{with_conf(block(20, 20, 0, 0, 2, 2), 0.5), with_conf(block(20, 20, 5, 5, 3, 3), 0.5),
                                  with_conf(block(20, 20, 10, 10, 2, 2), 0.5), ObjectMask(20, 20)};
    CHECK(confidence_order(preds) == std::vector<std::size_t>{3, 1, 0, 2});
}

TEST_CASE("AP examples")
{
    CHECK(average_precision(ranked_of({true}, 1)) == 1.0);
    CHECK(average_precision(ranked_of({false, false}, 2)) == 0.0);
    CHECK(average_precision(ranked_of({true, false, true}, 2)) == 5.0 / 6.0);
    CHECK(average_precision(ranked_of({}, 0)) == 1.0);
    CHECK(average_precision(ranked_of({false}, 0)) == 0.0);
    CHECK(average_precision(ranked_of({}, 3)) == 0.0);

    const auto pts = pr_curve(ranked_of({true, false, true}, 2));
    REQUIRE(pts.size() == 3);
    CHECK(pts[0].recall == 0.5);
    CHECK(pts[0].precision == 1.0);
    CHECK(pts[1].precision == 0.5);
    CHECK(pts[2].recall == 1.0);
    CHECK(pts[2].precision == doctest::Approx(2.0 / 3.0));
    CHECK(pts[1].interpolated == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("tied confidences are evaluated as one level")
{
    RankedMatches rm = ranked_of({false, true}, 1);
    rm.ranked[1].confidence = rm.ranked[0].confidence;
    CHECK(average_precision(rm) == doctest::Approx(0.5));
    const std::vector<oracle::Ranked> ref{{1.0, false}, {1.0, true}};
    CHECK(oracle::average_precision(ref, 1) == doctest::Approx(0.5));
}

TEST_CASE("interpolated precision is the suffix maximum")
{
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<bool> tps;
        const std::size_t n = 1 + rng() % 15;
        for (std::size_t i = 0; i < n; ++i) tps.push_back(rng() % 2);
        const std::size_t gt = 1 + rng() % 10;
        std::size_t tp_total = 0;
        for (bool b : tps) tp_total += b;
        if (tp_total > gt) continue;
        const auto pts = pr_curve(ranked_of(tps, gt));
        for (std::size_t i = 0; i < pts.size(); ++i) {
            double best = 0.0;
            for (std::size_t j = i; j < pts.size(); ++j) best = std::max(best, pts[j].precision);
            CHECK(pts[i].interpolated == best);
        }
    }
}

TEST_CASE("adding a TP at the bottom never lowers AP, adding an FP never raises it")
{
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<bool> tps;
        const std::size_t n = rng() % 12;
        std::size_t tp_total = 0;
        for (std::size_t i = 0; i < n; ++i) {
            tps.push_back(rng() % 2);
            tp_total += tps.back();
        }
        const std::size_t gt = tp_total + 1 + rng() % 4;
        const double base = average_precision(ranked_of(tps, gt));
        auto more = tps;
        more.push_back(true);
        CHECK(average_precision(ranked_of(more, gt)) >= base);
        more.back() = false;
        CHECK(average_precision(ranked_of(more, gt)) <= base);
    }
}

TEST_CASE("mAP over thresholds")
{
    std::vector<ObjectMask> gts{block(40, 40, 0, 0, 10, 10), block(40, 40, 20, 20, 10, 10)};
    const auto thr = default_iou_thresholds();
    const APResult perfect = map_over_thresholds(gts, gts, thr);
    for (double ap : perfect.ap_at) CHECK(ap == 1.0);
    CHECK(perfect.map_range == 1.0);

    // 10x10 ground truth against a 10x6.2 prediction: IoU exactly 0.62.
    std::vector<ObjectMask> one{block(40, 40, 0, 0, 10, 10)};
    ObjectMask p = rasterize_polygon(testutil::rect(0, 0, 10, 6.2), 40, 40);
    CHECK(p.pixel_count() == 60);
    // Pixel centers make 6.2 cover rows 0..5; use 62 pixels instead.
    std::vector<PixelCoord> px;
    for (int y = 0; y < 6; ++y)
        for (int x = 0; x < 10; ++x) px.push_back({x, y});
    px.push_back({0, 6});
    px.push_back({1, 6});
    std::vector<ObjectMask> pred{ObjectMask::from_pixels(40, 40, px)};
    CHECK(mask_overlap(pred[0], one[0]).iou == doctest::Approx(0.62));
    const APResult r = map_over_thresholds(pred, one, thr);
    for (std::size_t k = 0; k < thr.size(); ++k) CHECK(r.ap_at[k] == (thr[k] <= 0.62 ? 1.0 : 0.0));
    CHECK(r.map_range == 0.3);

    CHECK(map_over_thresholds(std::vector<ObjectMask>{}, one, thr).map_range == 0.0);
    CHECK_THROWS_AS(map_over_thresholds(pred, one, std::vector<double>{}), ConfigError);
}

TEST_CASE("multi-class averaging")
{
    CHECK(map_multiclass(std::vector<double>{0.8}) == 0.8);
    CHECK(map_multiclass(std::vector<double>{0.8, 0.4}) == doctest::Approx(0.6));
    std::vector<ObjectMask> gts{block(40, 40, 0, 0, 10, 10, 1), block(40, 40, 20, 20, 10, 10, 2)};
    std::vector<ObjectMask> preds{block(40, 40, 0, 0, 10, 10, 1)};
    CHECK(image_map(preds, gts, default_iou_thresholds()) == doctest::Approx(0.5));
    CHECK(image_map(std::vector<ObjectMask>{}, std::vector<ObjectMask>{}, default_iou_thresholds()) == 1.0);
}

TEST_CASE("averaging order over classes and thresholds does not matter")
{
    std::mt19937_64 rng(31);
    std::vector<ImageDetections> images;
    for (int i = 0; i < 8; ++i) {
        checks::Scene s = checks::random_scene(rng);
        ImageDetections d;
        d.preds = s.preds;
        d.gts = s.gts;
        for (std::size_t k = 0; k < d.preds.size(); ++k) d.preds[k].class_id = 1 + static_cast<int>(k % 2);
        for (std::size_t k = 0; k < d.gts.size(); ++k) d.gts[k].class_id = 1 + static_cast<int>(k % 2);
        images.push_back(d);
    }
    const auto thr = default_iou_thresholds();
    const ObjectEvaluation ev = evaluate_objects(images, thr);
    double by_threshold = 0.0;
    for (std::size_t k = 0; k < thr.size(); ++k) {
        double across = 0.0;
        for (const auto& [cls, res] : ev.per_class) across += res.ap_at[k];
        by_threshold += across / static_cast<double>(ev.per_class.size());
    }
    CHECK(ev.map == doctest::Approx(by_threshold / static_cast<double>(thr.size())).epsilon(1e-12));
}

TEST_CASE("AP only depends on the confidence ranking")
{
    std::mt19937_64 rng(37);
    for (int trial = 0; trial < 50; ++trial) {
        checks::Scene s = checks::random_scene(rng);
        const APResult a = map_over_thresholds(s.preds, s.gts, default_iou_thresholds());
        for (auto& p : s.preds) p.confidence = std::exp(3.0 * *p.confidence) - 7.0;
        const APResult b = map_over_thresholds(s.preds, s.gts, default_iou_thresholds());
        CHECK(a.ap_at == b.ap_at);
    }
}

TEST_CASE("single-image AP agrees with the brute-force reference")
{
    std::mt19937_64 rng(41);
    const auto thr = default_iou_thresholds();
    for (int trial = 0; trial < 100; ++trial) CHECK(checks::ap_oracle_gap(checks::random_scene(rng), thr) <= 1e-9);
}

TEST_CASE("pooled AP agrees with the brute-force reference and is thread independent")
{
    std::mt19937_64 rng(43);
    std::vector<checks::Scene> scenes;
    std::vector<ImageDetections> images;
    for (int i = 0; i < 12; ++i) {
        scenes.push_back(checks::random_scene(rng));
        images.push_back({scenes.back().preds, scenes.back().gts});
    }
    const auto thr = default_iou_thresholds();
    const ObjectEvaluation one = evaluate_objects(images, thr, 1);
    const ObjectEvaluation four = evaluate_objects(images, thr, 4);
    CHECK(one.map == four.map);
    CHECK(one.per_image_map == four.per_image_map);
    if (one.per_class.count(1)) {
        for (std::size_t k = 0; k < thr.size(); ++k) {
            std::vector<oracle::Ranked> all;
            std::size_t total = 0;
            for (const auto& s : scenes) {
                auto r = oracle::greedy_match(s.dense_preds, s.dense_gts, thr[k]);
                all.insert(all.end(), r.begin(), r.end());
                total += s.gts.size();
            }
            CHECK(one.per_class.at(1).ap_at[k] == doctest::Approx(oracle::average_precision(all, total)).epsilon(1e-12));
        }
    }
}
