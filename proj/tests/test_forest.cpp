#include <doctest.h>

#include <random>

#include "docdet/forest.hpp"
#include "test_util.hpp"

using namespace docdet;

namespace {

struct Data {
    std::vector<std::vector<double>> x;
    std::vector<double> y;
};

Data mean_target_data(std::uint64_t seed, std::size_t n, std::size_t dims)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Data d;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> row(dims);
        double s = 0.0;
        for (auto& v : row) {
            v = u(rng);
            s += v;
        }
        d.x.push_back(row);
        d.y.push_back(s / static_cast<double>(dims));
    }
    return d;
}

ForestParams small_forest(int trees)
{
    ForestParams p;
    p.num_trees = trees;
    return p;
}

}  // namespace

TEST_CASE("defaults")
{
    const ForestParams p;
    CHECK(p.num_trees == 100);
    CHECK(p.max_depth == -1);
    CHECK(p.min_samples_leaf == 1);
    CHECK(p.min_samples_split == 2);
    CHECK(p.bootstrap);
}

TEST_CASE("constant targets and a single sample")
{
    const Data d = mean_target_data(1, 30, 4);
    const std::vector<double> c(30, 0.37);
    const RegressionForest f = RegressionForest::train(d.x, c, small_forest(10), 1);
    for (const auto& row : d.x) CHECK(f.predict(row).value == doctest::Approx(0.37));

    const std::vector<std::vector<double>> one_x{{0.1, 0.2}};
    const std::vector<double> one_y{0.8};
    const RegressionForest g = RegressionForest::train(one_x, one_y, small_forest(5), 2);
    CHECK(g.predict(std::vector<double>{0.9, 0.9}).value == doctest::Approx(0.8));
    CHECK(g.predict(std::vector<double>{-5.0, 3.0}).value == doctest::Approx(0.8));
}

TEST_CASE("errors")
{
    const std::vector<std::vector<double>> none;
    const std::vector<double> no_y;
    CHECK_THROWS_AS(RegressionForest::train(none, no_y, {}, 0), ConfigError);
    const Data d = mean_target_data(2, 10, 3);
    const std::vector<double> short_y(5, 0.5);
    CHECK_THROWS_AS(RegressionForest::train(d.x, short_y, {}, 0), DimensionError);
    const RegressionForest f = RegressionForest::train(d.x, d.y, small_forest(3), 0);
    CHECK_THROWS_AS(f.predict(std::vector<double>{0.1}), DimensionError);
    CHECK_THROWS_AS(RegressionForest::from_json("{\"format\":\"nope\"}"), FormatError);
    CHECK_THROWS(RegressionForest::from_json("not json"));
}

TEST_CASE("the forest learns the mean of its inputs")
{
    const Data train = mean_target_data(3, 200, 5);
    const Data test = mean_target_data(4, 200, 5);
    const RegressionForest f = RegressionForest::train(train.x, train.y, small_forest(50), 7);
    double mean = 0.0;
    for (double y : test.y) mean += y;
    mean /= static_cast<double>(test.y.size());
    double var = 0.0, mse = 0.0;
    for (std::size_t i = 0; i < test.y.size(); ++i) {
        var += (test.y[i] - mean) * (test.y[i] - mean);
        const double p = f.predict(test.x[i]).value;
        mse += (p - test.y[i]) * (p - test.y[i]);
    }
    CHECK(mse < var);
}

TEST_CASE("predictions stay within the target range")
{
    const Data d = mean_target_data(5, 80, 3);
    const RegressionForest f = RegressionForest::train(d.x, d.y, small_forest(20), 1);
    const double lo = *std::min_element(d.y.begin(), d.y.end());
    const double hi = *std::max_element(d.y.begin(), d.y.end());
    const Data probe = mean_target_data(6, 100, 3);
    for (const auto& row : probe.x) {
        const double p = f.predict_raw(row);
        CHECK(p >= lo - 1e-12);
        CHECK(p <= hi + 1e-12);
    }
}

TEST_CASE("training is deterministic and thread independent")
{
    const Data d = mean_target_data(8, 60, 4);
    const RegressionForest a = RegressionForest::train(d.x, d.y, small_forest(16), 11, 1);
    const RegressionForest b = RegressionForest::train(d.x, d.y, small_forest(16), 11, 4);
    CHECK(a.to_json() == b.to_json());
    const RegressionForest c = RegressionForest::train(d.x, d.y, small_forest(16), 12, 1);
    CHECK(a.to_json() != c.to_json());
}

TEST_CASE("JSON round trip")
{
    const Data d = mean_target_data(9, 40, 3);
    ForestParams p = small_forest(8);
    p.max_depth = 4;
    p.min_samples_leaf = 2;
    const RegressionForest f = RegressionForest::train(d.x, d.y, p, 3);
    const RegressionForest g = RegressionForest::from_json(f.to_json());
    CHECK(g.to_json() == f.to_json());
    CHECK(g.num_features() == 3);
    for (const auto& row : d.x) CHECK(g.predict_raw(row) == f.predict_raw(row));

    testutil::TempDir tmp;
    f.save(tmp / "model.json");
    CHECK(RegressionForest::load(tmp / "model.json").to_json() == f.to_json());
}

TEST_CASE("depth and leaf-size limits are honoured")
{
    const Data d = mean_target_data(10, 100, 4);
    ForestParams p = small_forest(5);
    p.max_depth = 2;
    const RegressionForest f = RegressionForest::train(d.x, d.y, p, 1);
    for (const auto& tree : f.trees()) CHECK(tree.nodes.size() <= 7);
    p.max_depth = 0;
    const RegressionForest stump = RegressionForest::train(d.x, d.y, p, 1);
    for (const auto& tree : stump.trees()) CHECK(tree.nodes.size() == 1);
}

TEST_CASE("removing one tree moves the prediction by at most range / T")
{
    const Data d = mean_target_data(11, 50, 3);
    const int trees = 20;
    RegressionForest f = RegressionForest::train(d.x, d.y, small_forest(trees), 5);
    const double range = f.target_max() - f.target_min();
    const Data probe = mean_target_data(12, 50, 3);
    for (const auto& row : probe.x) {
        const double full = f.predict_raw(row);
        double sum = 0.0;
        for (const auto& t : f.trees()) sum += t.predict(row);
        CHECK(full == doctest::Approx(sum / trees));
        for (const auto& t : f.trees()) {
            const double without = (sum - t.predict(row)) / (trees - 1);
            CHECK(std::abs(without - full) <= range / trees + 1e-12);
        }
    }
}
