#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "docdet/page.hpp"
#include "docdet/probmap.hpp"

namespace docdet {

struct SynthConfig {
    int pages = 20;
    int width = 576;
    int height = 768;
    int min_objects = 3;
    int max_objects = 12;
    int num_classes = 1;  ///< object classes, background excluded
    double jitter = 2.0;  ///< largest displacement of each predicted corner, pixels
    double drop_probability = 0.1;
    double spurious_rate = 0.1;  ///< chance per ground-truth object of an extra false detection
    double text_mutation = 0.05;  ///< per-character substitution probability
    double epsilon = 0.05;  ///< probability mass left to background inside predicted objects
    int ensemble_size = 0;
    /// Scale the noise of each page by its own random factor in [0, 2] so
    /// image quality varies across the dataset.
    bool vary_noise = true;
    bool write_probmaps = true;
    std::uint64_t seed = 0;
};

void validate_synth_config(const SynthConfig& cfg);

struct SynthPage {
    PageRecord gt;
    PageRecord pred;
    std::optional<ProbabilityMap> probmap;
    std::vector<PageRecord> ensemble;
    double noise_factor = 1.0;
    /// mAP@[.5,.95] of pred against gt.
    double true_map = 1.0;
};

std::string synth_image_id(int index);

/// Page `index` of the dataset; independent of the other pages.
SynthPage generate_page(const SynthConfig& cfg, int index);

struct SynthSummary {
    std::filesystem::path manifest_path;
    std::filesystem::path truth_path;
    std::vector<double> true_map;
};

/// Writes gt/, pred/, probmap/, ensemble/, manifest.jsonl and truth.jsonl
/// under `out_dir`.
SynthSummary generate_synthetic(const SynthConfig& cfg, const std::filesystem::path& out_dir, unsigned jobs = 1);

}  // namespace docdet
