#include <doctest.h>

#include <random>

#include "docdet/pixel_metrics.hpp"
#include "test_util.hpp"

using namespace docdet;

namespace {

LabelMask block_labels(int w, int h, int x0, int y0, int bw, int bh, std::uint16_t cls = 1)
{
    LabelMask m(w, h);
    for (int y = y0; y < y0 + bh; ++y)
        for (int x = x0; x < x0 + bw; ++x) m.at(x, y) = cls;
    return m;
}

}  // namespace

TEST_CASE("confusion counts for the basic cases")
{
    const LabelMask gt = block_labels(10, 10, 2, 2, 4, 4);
    auto c = pixel_confusion(gt, gt, 2).per_class[1];
    CHECK(c == ClassCounts{16, 0, 0});
    c = pixel_confusion(LabelMask(10, 10), gt, 2).per_class[1];
    CHECK(c == ClassCounts{0, 0, 16});
    c = pixel_confusion(block_labels(10, 10, 3, 2, 4, 4), gt, 2).per_class[1];
    CHECK(c == ClassCounts{12, 4, 4});
    CHECK_THROWS_AS(pixel_confusion(LabelMask(10, 9), gt, 2), DimensionError);
}

TEST_CASE("scores from counts")
{
    const ClassScores s = class_scores({12, 4, 4});
    CHECK(s.iou == doctest::Approx(0.6));
    CHECK(s.precision == doctest::Approx(0.75));
    CHECK(s.recall == doctest::Approx(0.75));
    CHECK(s.f1 == doctest::Approx(0.75));

    const ClassScores absent = class_scores({0, 0, 0});
    CHECK(absent.iou == 1.0);
    CHECK(absent.precision == 1.0);
    CHECK(absent.recall == 1.0);
    CHECK(absent.f1 == 1.0);

    const ClassScores only_fp = class_scores({0, 5, 0});
    CHECK(only_fp.precision == 0.0);
    CHECK(only_fp.iou == 0.0);
    CHECK(only_fp.f1 == 0.0);
    const ClassScores only_fn = class_scores({0, 0, 5});
    CHECK(only_fn.recall == 0.0);
    CHECK(only_fn.iou == 0.0);
}

TEST_CASE("F1 and IoU are tied together")
{
    std::mt19937_64 rng(1);
    for (int i = 0; i < 500; ++i) {
        const ClassCounts c{static_cast<std::int64_t>(rng() % 50), static_cast<std::int64_t>(rng() % 50),
                            static_cast<std::int64_t>(rng() % 50)};
        const ClassScores s = class_scores(c);
        CHECK(s.f1 * (1 + s.iou) == doctest::Approx(2 * s.iou));
        CHECK(s.iou >= 0.0);
        CHECK(s.iou <= 1.0);
    }
}

TEST_CASE("swapping prediction and ground truth swaps precision and recall")
{
    std::mt19937_64 rng(2);
    for (int i = 0; i < 30; ++i) {
        LabelMask a(20, 15), b(20, 15);
        for (auto& v : a.labels) v = static_cast<std::uint16_t>(rng() % 3);
        for (auto& v : b.labels) v = static_cast<std::uint16_t>(rng() % 3);
        const PixelMetrics ab = pixel_metrics(pixel_confusion(a, b, 3));
        const PixelMetrics ba = pixel_metrics(pixel_confusion(b, a, 3));
        for (int c = 1; c < 3; ++c) {
            CHECK(ab.per_class[c].precision == doctest::Approx(ba.per_class[c].recall));
            CHECK(ab.per_class[c].iou == doctest::Approx(ba.per_class[c].iou));
            CHECK(ab.per_class[c].f1 == doctest::Approx(ba.per_class[c].f1));
        }
    }
}

TEST_CASE("macro average skips background and absent classes")
{
    LabelMask gt = block_labels(10, 10, 0, 0, 4, 4, 1);
    LabelMask pred = block_labels(10, 10, 1, 0, 4, 4, 1);
    const PixelMetrics m = pixel_metrics(pixel_confusion(pred, gt, 4));
    CHECK(m.macro_classes == 1);
    CHECK(m.macro.iou == doctest::Approx(m.per_class[1].iou));
    const PixelMetrics none = pixel_metrics(pixel_confusion(LabelMask(5, 5), LabelMask(5, 5), 3));
    CHECK(none.macro_classes == 0);
    CHECK(none.macro.iou == 1.0);

    ConfusionCounts total = pixel_confusion(pred, gt, 2);
    total += pixel_confusion(gt, gt, 2);
    CHECK(total.per_class[1] == ClassCounts{16 + 12, 4, 4});
}
