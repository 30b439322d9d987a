#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

#include "docdet/selection.hpp"

using namespace docdet;

namespace {

std::vector<ScoredImage> pool_of(const std::vector<double>& values, bool hib = true)
{
    std::vector<ScoredImage> pool;
    for (std::size_t i = 0; i < values.size(); ++i) {
        ConfidenceScore s;
        s.value = values[i];
        s.higher_is_better = hib;
        pool.push_back({"img" + std::to_string(i), s});
    }
    return pool;
}

std::vector<double> random_values(std::mt19937_64& rng, std::size_t n)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> v(n);
    for (auto& x : v) x = u(rng);
    return v;
}

}  // namespace

TEST_CASE("default sweeps")
{
    const auto up = default_rejection_thresholds(true);
    REQUIRE(up.size() == 21);
    CHECK(up.front() == 0.0);
    CHECK(up[1] == 0.05);
    CHECK(up.back() == 1.0);
    const auto down = default_rejection_thresholds(false);
    REQUIRE(down.size() == 11);
    CHECK(down.front() == 10.0);
    CHECK(down.back() == 0.0);
}

TEST_CASE("rejection curve examples")
{
    const std::vector<double> scores{0.2, 0.4, 0.6, 0.8}, metrics{0.1, 0.5, 0.4, 1.0};
    const std::vector<double> zero{0.0};
    const RejectionCurve all = rejection_curve(scores, metrics, true, zero);
    REQUIRE(all.points.size() == 1);
    CHECK(all.points[0].rejection_rate == 0.0);
    CHECK(all.points[0].metric == doctest::Approx(0.5));

    const std::vector<double> thr{0.0, 0.3, 0.5, 0.7, 0.9};
    const RejectionCurve c = rejection_curve(scores, metrics, true, thr);
    REQUIRE(c.points.size() == 4);
    CHECK(c.points[1].rejection_rate == 0.25);
    CHECK(c.points[1].metric == doctest::Approx(1.9 / 3.0));
    CHECK(c.points[3].retained == 1);

    // Lower-is-better: large scores are rejected.
    const RejectionCurve d = rejection_curve(scores, metrics, false, std::vector<double>{0.5});
    REQUIRE(d.points.size() == 1);
    CHECK(d.points[0].retained == 2);
    CHECK(d.points[0].metric == doctest::Approx(0.3));

    const std::vector<double> flat(4, 0.5);
    CHECK(rejection_curve(flat, metrics, true, default_rejection_thresholds(true)).points.size() == 1);

    const std::vector<double> none;
    CHECK_THROWS_AS(rejection_curve(none, none, true, thr), ConfigError);
    CHECK_THROWS_AS(rejection_curve(scores, std::vector<double>{1.0}, true, thr), DimensionError);
}

TEST_CASE("oracle scores give a monotone curve")
{
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 100; ++trial) {
        const auto metrics = random_values(rng, 5 + rng() % 50);
        const RejectionCurve c = rejection_curve(metrics, metrics, true, default_rejection_thresholds(true));
        for (std::size_t i = 1; i < c.points.size(); ++i) {
            CHECK(c.points[i].rejection_rate >= c.points[i - 1].rejection_rate);
            CHECK(c.points[i].metric >= c.points[i - 1].metric);
        }
    }
}

TEST_CASE("nearest-rank percentiles")
{
    const std::vector<double> v{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    CHECK(nearest_rank_percentile(v, 10) == 1);
    CHECK(nearest_rank_percentile(v, 50) == 5);
    CHECK(nearest_rank_percentile(v, 90) == 9);
    CHECK(nearest_rank_percentile(v, 100) == 10);
    CHECK(nearest_rank_percentile(v, 0) == 1);
}

TEST_CASE("bootstrap bands")
{
    const std::vector<double> same(6, 0.4), same_metric(6, 0.7);
    const BootstrapBands flat = bootstrap_bands(same, same_metric, true, default_rejection_thresholds(true), 100, 3);
    CHECK(flat.resamples == 100);
    for (const auto& p : flat.points) {
        CHECK(p.p10 == p.p90);
        CHECK(p.median == doctest::Approx(0.7));
    }

    std::mt19937_64 rng(2);
    const auto s = random_values(rng, 40), m = random_values(rng, 40);
    const auto thr = default_rejection_thresholds(true);
    const BootstrapBands a = bootstrap_bands(s, m, true, thr, 100, 9);
    const BootstrapBands b = bootstrap_bands(s, m, true, thr, 100, 9);
    REQUIRE(a.points.size() == b.points.size());
    for (std::size_t i = 0; i < a.points.size(); ++i) {
        CHECK(a.points[i].p10 == b.points[i].p10);
        CHECK(a.points[i].median == b.points[i].median);
        CHECK(a.points[i].p90 == b.points[i].p90);
        CHECK(a.points[i].p10 <= a.points[i].median);
        CHECK(a.points[i].median <= a.points[i].p90);
    }
    const BootstrapBands c = bootstrap_bands(s, m, true, thr, 100, 10);
    bool differs = false;
    for (std::size_t i = 0; i < std::min(a.points.size(), c.points.size()); ++i)
        differs = differs || a.points[i].median != c.points[i].median || a.points[i].p10 != c.points[i].p10;
    CHECK(differs);
    CHECK_THROWS_AS(bootstrap_bands(s, m, true, thr, 1, 0), ConfigError);
}

TEST_CASE("two-image bootstrap only produces achievable means")
{
    const std::vector<double> scores{0.2, 0.8}, metrics{0.3, 0.9};
    // Resample multisets {a,a}, {a,b}, {b,b} retained in full.
    const std::set<double> achievable{0.3, (0.3 + 0.9) / 2.0, 0.9};
    const BootstrapBands b = bootstrap_bands(scores, metrics, true, std::vector<double>{0.0, 0.5}, 100, 4);
    REQUIRE_FALSE(b.points.empty());
    for (const auto& p : b.points)
        for (double v : {p.p10, p.median, p.p90}) {
            bool found = false;
            for (double a : achievable) found = found || std::abs(a - v) < 1e-12;
            CHECK(found);
        }
}

TEST_CASE("selection examples")
{
    const auto pool = pool_of({0.1, 0.9});
    SelectionRequest r;
    r.budget = 1;
    CHECK(select_images(pool, r).selected == std::vector<std::string>{"img0"});
    CHECK(select_images(pool, r).mode == AnnotationMode::manual);
    r.strategy = Strategy::highest;
    CHECK(select_images(pool, r).selected == std::vector<std::string>{"img1"});
    CHECK(select_images(pool, r).mode == AnnotationMode::auto_label);

    r.strategy = Strategy::lowest;
    r.budget = 2;
    CHECK(select_images(pool, r).selected.size() == 2);
    r.budget = 5;
    const SelectionOutcome over = select_images(pool, r);
    CHECK(over.selected.size() == 2);
    CHECK(over.warnings.size() == 1);

    // Variance: the highest value is the least confident.
    const auto dov_pool = pool_of({0.5, 7.0, 2.0}, false);
    r.budget = 1;
    CHECK(select_images(dov_pool, r).selected == std::vector<std::string>{"img1"});
    r.budget.reset();
    r.threshold = 1.5;
    const auto above = select_images(dov_pool, r).selected;
    CHECK(std::set<std::string>(above.begin(), above.end()) == std::set<std::string>{"img1", "img2"});
}

TEST_CASE("selection argument checks")
{
    const auto pool = pool_of({0.1, 0.2});
    SelectionRequest r;
    CHECK_THROWS_AS(select_images(pool, r), ConfigError);
    r.budget = 1;
    r.threshold = 0.5;
    CHECK_THROWS_AS(select_images(pool, r), ConfigError);
    r.threshold.reset();
    CHECK_THROWS_AS(select_images(std::vector<ScoredImage>{}, r), ConfigError);
    auto mixed = pool;
    mixed[1].score.higher_is_better = false;
    CHECK_THROWS_AS(select_images(mixed, r), ConfigError);
    CHECK(parse_strategy("random") == Strategy::random);
    CHECK_THROWS_AS(parse_strategy("best"), ConfigError);
}

TEST_CASE("lowest and highest with the same threshold partition the pool")
{
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        const bool hib = trial % 2 == 0;
        auto values = random_values(rng, 1 + rng() % 30);
        for (std::size_t i = 0; i + 1 < values.size(); i += 3) values[i + 1] = values[i];
        const auto pool = pool_of(values, hib);
        SelectionRequest r;
        r.threshold = values[rng() % values.size()];
        const auto low = select_images(pool, r).selected;
        r.strategy = Strategy::highest;
        const auto high = select_images(pool, r).selected;
        std::set<std::string> all(low.begin(), low.end());
        for (const auto& id : high) CHECK(all.insert(id).second);
        CHECK(all.size() == pool.size());
    }
}

TEST_CASE("random selection is seeded")
{
    std::mt19937_64 rng(6);
    const auto pool = pool_of(random_values(rng, 50));
    SelectionRequest r;
    r.strategy = Strategy::random;
    r.budget = 10;
    r.seed = 3;
    const auto a = select_images(pool, r).selected;
    CHECK(a == select_images(pool, r).selected);
    CHECK(std::set<std::string>(a.begin(), a.end()).size() == 10);
    r.seed = 4;
    CHECK(a != select_images(pool, r).selected);
    r.seed = 3;
    r.iteration = 1;
    CHECK(a != select_images(pool, r).selected);
    r.budget.reset();
    r.threshold = 0.5;
    std::size_t below = 0;
    for (const auto& p : pool) below += p.score.value < 0.5;
    CHECK(select_images(pool, r).selected.size() == below);
}
