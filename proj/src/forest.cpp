#include "docdet/forest.hpp"

#include <algorithm>
#include <numeric>

#include <json.hpp>

#include "docdet/page.hpp"
#include "docdet/parallel.hpp"
#include "docdet/random.hpp"

namespace docdet {

double RegressionTree::predict(std::span<const double> x) const
{
    int node = 0;
    while (nodes[node].feature >= 0) {
        const TreeNode& n = nodes[node];
        node = x[n.feature] <= n.threshold ? n.left : n.right;
    }
    return nodes[node].leaf_value;
}

namespace {

struct SplitChoice {
    int feature = -1;
    double threshold = 0.0;
    double cost = 0.0;
};

class TreeBuilder {
public:
    TreeBuilder(std::span<const std::vector<double>> x, std::span<const double> y, const ForestParams& params)
        : x_(x), y_(y), params_(params)
    {
    }

    RegressionTree build(std::vector<std::size_t> samples)
    {
        tree_.nodes.clear();
        grow(samples, 0);
        return std::move(tree_);
    }

private:
    int grow(std::vector<std::size_t>& samples, int depth)
    {
        const int id = static_cast<int>(tree_.nodes.size());
        tree_.nodes.emplace_back();
        double sum = 0.0;
        for (std::size_t s : samples) sum += y_[s];
        tree_.nodes[id].leaf_value = sum / static_cast<double>(samples.size());

        const bool pure = std::all_of(samples.begin(), samples.end(), [&](std::size_t s) { return y_[s] == y_[samples[0]]; });
        const bool depth_reached = params_.max_depth >= 0 && depth >= params_.max_depth;
        if (pure || depth_reached || static_cast<int>(samples.size()) < params_.min_samples_split) return id;

        const SplitChoice split = best_split(samples);
        if (split.feature < 0) return id;

        std::vector<std::size_t> left, right;
        for (std::size_t s : samples) (x_[s][split.feature] <= split.threshold ? left : right).push_back(s);
        samples.clear();
        samples.shrink_to_fit();
        tree_.nodes[id].feature = split.feature;
        tree_.nodes[id].threshold = split.threshold;
        const int l = grow(left, depth + 1);
        const int r = grow(right, depth + 1);
        tree_.nodes[id].left = l;
        tree_.nodes[id].right = r;
        return id;
    }

    SplitChoice best_split(const std::vector<std::size_t>& samples)
    {
        SplitChoice best;
        const std::size_t n = samples.size();
        const std::size_t min_leaf = static_cast<std::size_t>(std::max(1, params_.min_samples_leaf));
        std::vector<std::size_t> order(samples);
        double total = 0.0, total_sq = 0.0;
        for (std::size_t s : samples) {
            total += y_[s];
            total_sq += y_[s] * y_[s];
        }
        const std::size_t dims = x_[samples[0]].size();
        for (std::size_t f = 0; f < dims; ++f) {
            std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                if (x_[a][f] != x_[b][f]) return x_[a][f] < x_[b][f];
                return a < b;
            });
            double left_sum = 0.0, left_sq = 0.0;
            for (std::size_t k = 0; k + 1 < n; ++k) {
                const double yk = y_[order[k]];
                left_sum += yk;
                left_sq += yk * yk;
                const double lo = x_[order[k]][f];
                const double hi = x_[order[k + 1]][f];
                if (lo == hi) continue;
                const std::size_t nl = k + 1;
                const std::size_t nr = n - nl;
                if (nl < min_leaf || nr < min_leaf) continue;
                const double right_sum = total - left_sum;
                const double right_sq = total_sq - left_sq;
                const double cost = (left_sq - left_sum * left_sum / static_cast<double>(nl)) +
                                    (right_sq - right_sum * right_sum / static_cast<double>(nr));
                if (best.feature < 0 || cost < best.cost) {
                    double mid = lo + (hi - lo) / 2.0;
                    if (!(mid < hi)) mid = lo;
                    best = {static_cast<int>(f), mid, cost};
                }
            }
        }
        return best;
    }

    std::span<const std::vector<double>> x_;
    std::span<const double> y_;
    const ForestParams& params_;
    RegressionTree tree_;
};

}  // namespace

RegressionForest RegressionForest::train(std::span<const std::vector<double>> features, std::span<const double> targets,
                                         const ForestParams& params, std::uint64_t seed, unsigned jobs)
{
    if (features.empty()) throw ConfigError("cannot train a forest on an empty training set");
    if (features.size() != targets.size())
        throw DimensionError("feature and target counts differ (" + std::to_string(features.size()) + " vs " +
                             std::to_string(targets.size()) + ")");
    if (params.num_trees < 1) throw ConfigError("forest needs at least one tree");
    const std::size_t dims = features[0].size();
    for (const auto& row : features)
        if (row.size() != dims) throw DimensionError("feature vectors have inconsistent lengths");

    RegressionForest forest;
    forest.num_features_ = dims;
    forest.num_samples_ = features.size();
    forest.seed_ = seed;
    forest.params_ = params;
    forest.target_min_ = *std::min_element(targets.begin(), targets.end());
    forest.target_max_ = *std::max_element(targets.begin(), targets.end());
    forest.trees_.resize(static_cast<std::size_t>(params.num_trees));

    const std::size_t n = features.size();
    parallel_for(forest.trees_.size(), jobs, [&](std::size_t t) {
        std::vector<std::size_t> samples(n);
        if (params.bootstrap) {
            Rng rng = make_stream(seed, "forest-tree", t);
            for (std::size_t& s : samples) s = uniform_index(rng, n);
        } else {
            std::iota(samples.begin(), samples.end(), std::size_t{0});
        }
        TreeBuilder builder(features, targets, params);
        forest.trees_[t] = builder.build(std::move(samples));
    });
    return forest;
}

double RegressionForest::predict_raw(std::span<const double> x) const
{
    if (x.size() != num_features_)
        throw DimensionError("feature vector has " + std::to_string(x.size()) + " entries, model expects " +
                             std::to_string(num_features_));
    if (trees_.empty()) throw ConfigError("forest has no trees");
    double sum = 0.0;
    for (const auto& tree : trees_) sum += tree.predict(x);
    return sum / static_cast<double>(trees_.size());
}

ConfidenceScore RegressionForest::predict(std::span<const double> x) const
{
    ConfidenceScore score;
    score.value = std::clamp(predict_raw(x), 0.0, 1.0);
    return score;
}

std::string RegressionForest::to_json() const
{
    nlohmann::ordered_json doc;
    doc["format"] = "docdet-regression-forest";
    doc["version"] = 1;
    doc["num_features"] = num_features_;
    doc["num_samples"] = num_samples_;
    doc["seed"] = seed_;
    doc["params"] = {{"num_trees", params_.num_trees},
                     {"max_depth", params_.max_depth},
                     {"min_samples_leaf", params_.min_samples_leaf},
                     {"min_samples_split", params_.min_samples_split},
                     {"bootstrap", params_.bootstrap}};
    doc["target_min"] = target_min_;
    doc["target_max"] = target_max_;
    auto trees = nlohmann::ordered_json::array();
    for (const auto& tree : trees_) {
        auto nodes = nlohmann::ordered_json::array();
        for (const TreeNode& n : tree.nodes) {
            nlohmann::ordered_json node;
            node["feature"] = n.feature;
            node["threshold"] = n.threshold;
            node["left"] = n.left;
            node["right"] = n.right;
            node["leaf_value"] = n.leaf_value;
            nodes.push_back(std::move(node));
        }
        trees.push_back(std::move(nodes));
    }
    doc["trees"] = std::move(trees);
    return doc.dump() + "\n";
}

RegressionForest RegressionForest::from_json(std::string_view text)
{
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text.begin(), text.end());
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("malformed forest JSON: ") + e.what(), e.byte);
    }
    try {
        if (doc.at("format") != "docdet-regression-forest" || doc.at("version") != 1)
            throw FormatError("not a docdet regression forest (format/version mismatch)");
        RegressionForest f;
        f.num_features_ = doc.at("num_features").get<std::size_t>();
        f.num_samples_ = doc.value("num_samples", std::size_t{0});
        f.seed_ = doc.value("seed", std::uint64_t{0});
        const auto& p = doc.at("params");
        f.params_.num_trees = p.at("num_trees").get<int>();
        f.params_.max_depth = p.at("max_depth").get<int>();
        f.params_.min_samples_leaf = p.at("min_samples_leaf").get<int>();
        f.params_.min_samples_split = p.at("min_samples_split").get<int>();
        f.params_.bootstrap = p.at("bootstrap").get<bool>();
        f.target_min_ = doc.at("target_min").get<double>();
        f.target_max_ = doc.at("target_max").get<double>();
        for (const auto& tree_doc : doc.at("trees")) {
            RegressionTree tree;
            for (const auto& nd : tree_doc) {
                TreeNode n;
                n.feature = nd.at("feature").get<int>();
                n.threshold = nd.at("threshold").get<double>();
                n.left = nd.at("left").get<int>();
                n.right = nd.at("right").get<int>();
                n.leaf_value = nd.at("leaf_value").get<double>();
                tree.nodes.push_back(n);
            }
            const int count = static_cast<int>(tree.nodes.size());
            if (count == 0) throw FormatError("forest contains an empty tree");
            for (int i = 0; i < count; ++i) {
                const TreeNode& n = tree.nodes[i];
                if (n.feature < 0) continue;
                if (static_cast<std::size_t>(n.feature) >= f.num_features_ || n.left <= i || n.right <= i ||
                    n.left >= count || n.right >= count)
                    throw FormatError("forest node " + std::to_string(i) + " has invalid links");
            }
            f.trees_.push_back(std::move(tree));
        }
        return f;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("invalid forest JSON: ") + e.what());
    }
}

void RegressionForest::save(const std::filesystem::path& path) const { write_text_file(path, to_json()); }

RegressionForest RegressionForest::load(const std::filesystem::path& path) { return from_json(read_text_file(path)); }

}  // namespace docdet
