#pragma once

#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "docdet/confidence.hpp"
#include "docdet/forest.hpp"
#include "docdet/manifest.hpp"
#include "docdet/page.hpp"

namespace docdet {

using Json = nlohmann::ordered_json;

/// Ground truth and prediction of one manifest entry.
struct PagePair {
    std::string image_id;
    PageRecord gt;
    PageRecord pred;
};

/// Loads every entry's pages. Warnings are prefixed with the image id and
/// kept in manifest order.
std::vector<PagePair> load_page_pairs(const DatasetManifest& manifest, unsigned jobs, Warnings* warnings);

/// Largest class id used in any page, plus one (at least 2).
int infer_num_classes(std::span<const PagePair> pairs);

/// Pixel metrics with predictions rasterized onto the ground-truth grid.
/// Reports both the micro average (summed counts) and the mean of per-page
/// macro scores.
Json eval_pixel(std::span<const PagePair> pairs, int num_classes, unsigned jobs, Warnings* warnings);

/// Pooled per-class AP at each threshold, overall mAP, per-image mAP.
Json eval_object(std::span<const PagePair> pairs, std::span<const double> thresholds, unsigned jobs,
                 Warnings* warnings);

/// Per-image mAP@thresholds of one pair, predictions rasterized on the
/// ground-truth grid.
double pair_image_map(const PagePair& pair, std::span<const double> thresholds);

enum class TextMode { page, line };
TextMode parse_text_mode(const std::string& name);

/// Dataset CER/WER obtained by summing error counts and reference lengths.
Json eval_text(std::span<const PagePair> pairs, TextMode mode, std::span<const double> thresholds, unsigned jobs,
               Warnings* warnings);

enum class Estimator { pce, dov, dap, rfr };
Estimator parse_estimator(const std::string& name);
const char* to_string(Estimator e);

struct ScoringOptions {
    int ensemble_size = kDefaultEnsembleSize;
    int feature_bins = kDefaultFeatureBins;
    const RegressionForest* forest = nullptr;
};

/// Features fed to the regression forest: object_features of the
/// prediction at its own resolution.
std::vector<double> page_features(const PageRecord& pred, int bins);

/// Scores one manifest entry. PCE reads the probability map when present
/// (otherwise the stored object confidences); DOV and DAP read the first
/// `ensemble_size` ensemble members.
ConfidenceScore score_entry(const ManifestEntry& entry, Estimator estimator, const ScoringOptions& options,
                            Warnings* warnings);

/// SHA-256 of a byte string as lowercase hex.
std::string sha256_hex(std::string_view data);

}  // namespace docdet
