#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "docdet/confidence.hpp"

namespace docdet {

/// Defaults follow the usual random-forest regressor settings: 100 fully
/// grown trees, every feature tried at every split, bootstrap resampling.
struct ForestParams {
    int num_trees = 100;
    int max_depth = -1;  ///< -1 for unlimited
    int min_samples_leaf = 1;
    int min_samples_split = 2;
    bool bootstrap = true;
};

struct TreeNode {
    int feature = -1;  ///< -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double leaf_value = 0.0;
};

struct RegressionTree {
    std::vector<TreeNode> nodes;  ///< nodes[0] is the root

    double predict(std::span<const double> x) const;
};

/// Bagged CART regression trees; splits minimize the summed squared error
/// of the two children and send x[feature] <= threshold left.
class RegressionForest {
public:
    static RegressionForest train(std::span<const std::vector<double>> features, std::span<const double> targets,
                                  const ForestParams& params, std::uint64_t seed, unsigned jobs = 1);

    /// Mean of the tree predictions, unclamped.
    double predict_raw(std::span<const double> x) const;
    /// Estimated mAP, clamped to [0, 1].
    ConfidenceScore predict(std::span<const double> x) const;

    std::size_t num_features() const noexcept { return num_features_; }
    const std::vector<RegressionTree>& trees() const noexcept { return trees_; }
    std::vector<RegressionTree>& trees() noexcept { return trees_; }
    double target_min() const noexcept { return target_min_; }
    double target_max() const noexcept { return target_max_; }

    std::string to_json() const;
    static RegressionForest from_json(std::string_view text);
    void save(const std::filesystem::path& path) const;
    static RegressionForest load(const std::filesystem::path& path);

private:
    std::size_t num_features_ = 0;
    std::size_t num_samples_ = 0;
    std::uint64_t seed_ = 0;
    ForestParams params_;
    double target_min_ = 0.0;
    double target_max_ = 0.0;
    std::vector<RegressionTree> trees_;
};

}  // namespace docdet
