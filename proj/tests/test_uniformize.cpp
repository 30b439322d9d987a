#include <doctest.h>

#include <random>

#include "checks.hpp"
#include "docdet/uniformize.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace docdet;
using testutil::rect;

namespace {

PageRecord page_of(int w, int h, std::vector<Polygon> polys)
{
    PageRecord p;
    p.image_id = "t";
    p.width = w;
    p.height = h;
    for (auto& poly : polys) p.objects.push_back({1, std::move(poly), std::nullopt, std::nullopt});
    return p;
}

}  // namespace

TEST_CASE("defaults")
{
    const UniformizeConfig cfg;
    CHECK(cfg.target_long_side == 768);
    CHECK(cfg.overlap_ratio_threshold == doctest::Approx(0.20));
    CHECK(cfg.erosion_radius == 1);
    CHECK_FALSE(cfg.keep_if_either);
    UniformizeConfig bad;
    bad.overlap_ratio_threshold = 1.0;
    CHECK_THROWS_AS(validate_uniformize_config(bad), ConfigError);
    bad = {};
    bad.target_long_side = 0;
    CHECK_THROWS_AS(validate_uniformize_config(bad), ConfigError);
}

TEST_CASE("scale_page halves a 1536x1024 page")
{
    const PageRecord p = page_of(1536, 1024, {rect(10, 20, 301, 401)});
    const PageRecord s = scale_page(p, 768);
    CHECK(s.width == 768);
    CHECK(s.height == 512);
    for (std::size_t k = 0; k < 4; ++k) {
        CHECK(s.objects[0].polygon.points[k].x == doctest::Approx(p.objects[0].polygon.points[k].x / 2));
        CHECK(s.objects[0].polygon.points[k].y == doctest::Approx(p.objects[0].polygon.points[k].y / 2));
    }
}

TEST_CASE("scale_page identity and rounding")
{
    const PageRecord p = page_of(500, 768, {rect(1.25, 2.5, 30, 40)});
    CHECK(scale_page(p, 768) == p);
    const PageRecord tall = scale_page(page_of(100, 3000, {}), 768);
    CHECK(tall.width == static_cast<int>(std::lround(100.0 * 768.0 / 3000.0)));
    CHECK(tall.width == 26);
    CHECK(tall.height == 768);
    CHECK(scale_page(page_of(1, 5000, {}), 768).width == 1);
}

TEST_CASE("disjoint rectangles are left alone")
{
    const PageRecord p = page_of(40, 40, {rect(0, 0, 5, 5), rect(20, 20, 30, 30)});
    const NormalizedPage out = normalize_page(p, {});
    CHECK(out.events.empty());
    CHECK(out.masks[0].pixel_count() == 25);
    CHECK(out.masks[1].pixel_count() == 100);
    std::int64_t fg = 0;
    for (auto v : out.labels.labels) fg += v != 0;
    CHECK(fg == 125);
}

TEST_CASE("small overlap: the smaller-ratio object loses the shared pixels")
{
    // A is 10x10 at the origin, B is 8 wide and 10 tall starting at column 9.
    const Polygon a = rect(0, 0, 10, 10), b = rect(9, 0, 17, 10);
    const auto ga = oracle::rasterize(a, 30, 20), gb = oracle::rasterize(b, 30, 20);
    std::int64_t inter = 0;
    for (std::size_t i = 0; i < ga.size(); ++i) inter += ga[i] && gb[i];
    REQUIRE(inter == 10);
    REQUIRE(oracle::count(ga) == 100);
    REQUIRE(oracle::count(gb) == 80);

    const NormalizedPage out = normalize_page(page_of(30, 20, {a, b}), {});
    REQUIRE(out.events.size() == 1);
    CHECK(out.events[0].action == PairAction::split);
    CHECK(out.events[0].ratio_first == doctest::Approx(0.10));
    CHECK(out.events[0].ratio_second == doctest::Approx(0.125));
    CHECK(out.events[0].loser == 0);
    CHECK(out.masks[0].pixel_count() == oracle::count(ga) - inter);
    CHECK(out.masks[1].pixel_count() == oracle::count(gb));
}

TEST_CASE("equal ratios: the later object gives way")
{
    const NormalizedPage out = normalize_page(page_of(40, 20, {rect(0, 0, 10, 10), rect(9, 0, 19, 10)}), {});
    REQUIRE(out.events.size() == 1);
    CHECK(out.events[0].loser == 1);
    CHECK(out.masks[0].pixel_count() == 100);
    CHECK(out.masks[1].pixel_count() == 90);
}

TEST_CASE("large overlap is kept")
{
    const NormalizedPage out = normalize_page(page_of(30, 20, {rect(0, 0, 10, 10), rect(5, 0, 15, 10)}), {});
    REQUIRE(out.events.size() == 1);
    CHECK(out.events[0].input_intersection == 50);
    CHECK(out.events[0].action == PairAction::kept);
    CHECK(out.masks[0].pixel_count() == 100);
    CHECK(out.masks[1].pixel_count() == 100);
    CHECK(out.labels.at(7, 5) == 1);
}

TEST_CASE("keep_if_either keeps a pair when only one ratio is large")
{
    // 4x4 block inside a 20x20 block: ratios 1.0 and 0.04.
    const PageRecord p = page_of(30, 30, {rect(0, 0, 20, 20), rect(2, 2, 6, 6)});
    UniformizeConfig cfg;
    CHECK(normalize_page(p, cfg).events[0].action == PairAction::split);
    cfg.keep_if_either = true;
    CHECK(normalize_page(p, cfg).events[0].action == PairAction::kept);
}

TEST_CASE("touching rectangles are both eroded")
{
    const NormalizedPage out = normalize_page(page_of(40, 20, {rect(0, 0, 10, 10), rect(10, 0, 20, 10)}), {});
    REQUIRE(out.events.size() == 1);
    CHECK(out.events[0].action == PairAction::touching_eroded);
    CHECK(out.masks[0].pixel_count() == 8 * 8);
    CHECK(out.masks[1].pixel_count() == 8 * 8);
    CHECK_FALSE(masks_adjacent(out.masks[0], out.masks[1]));
}

TEST_CASE("objects erased by erosion stay in the output with a warning")
{
    const NormalizedPage out = normalize_page(page_of(40, 20, {rect(0, 0, 10, 10), rect(10, 0, 11, 10)}), {});
    REQUIRE(out.masks.size() == 2);
    CHECK(out.masks[1].empty());
    CHECK(out.warnings.size() == 1);
}

TEST_CASE("post-conditions on random pages")
{
    std::mt19937_64 rng(99);
    for (int i = 0; i < 60; ++i) {
        const PageRecord page = checks::random_uniformize_page(rng, i);
        CHECK_MESSAGE(checks::uniformize_violation(page, {}).empty(), page.image_id);
        UniformizeConfig cfg;
        cfg.erosion_radius = 2;
        cfg.overlap_ratio_threshold = 0.35;
        CHECK_MESSAGE(checks::uniformize_violation(page, cfg).empty(), page.image_id);
    }
}

TEST_CASE("normalization is deterministic")
{
    std::mt19937_64 rng(5);
    const PageRecord page = checks::random_uniformize_page(rng, 0);
    CHECK(normalize_page(page, {}).labels == normalize_page(page, {}).labels);
}
