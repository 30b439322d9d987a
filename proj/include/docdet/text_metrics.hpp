#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "docdet/raster.hpp"

namespace docdet {

/// Decodes UTF-8 into Unicode scalar values; malformed sequences become U+FFFD.
std::u32string decode_utf8(std::string_view text);

/// Whitespace-separated tokens.
std::vector<std::string> split_words(std::string_view text);

/// Unit-cost Levenshtein distance.
std::size_t edit_distance(std::u32string_view a, std::u32string_view b);
std::size_t edit_distance(std::span<const std::uint32_t> a, std::span<const std::uint32_t> b);
/// Over Unicode scalar values of two UTF-8 strings.
std::size_t edit_distance(std::string_view a, std::string_view b);
/// Over whitespace-separated words.
std::size_t word_edit_distance(std::string_view a, std::string_view b);

/// Number of Unicode scalar values.
std::size_t char_length(std::string_view text);

/// distance / max(len(ref), 1); may exceed 1.
double cer(std::string_view hyp, std::string_view ref);
double wer(std::string_view hyp, std::string_view ref);

struct TextLine {
    ObjectMask mask;
    std::string text;
};

/// Predicted line texts sorted by bounding-box center (y, then x) and joined
/// by single spaces.
std::string page_hypothesis(std::span<const TextLine> lines);

double cer_page(std::span<const TextLine> pred_lines, std::string_view gt_text);

struct LinePair {
    std::size_t pred = 0;
    std::size_t gt = 0;
    double iou = 0.0;
};

/// One-to-one pairing by decreasing IoU; pairs with zero overlap are never formed.
std::vector<LinePair> pair_lines(std::span<const TextLine> preds, std::span<const TextLine> gts);

struct TextThresholdRow {
    double threshold = 0.0;
    std::int64_t char_errors = 0;
    std::int64_t char_reference = 0;
    std::int64_t word_errors = 0;
    std::int64_t word_reference = 0;
    std::int64_t matched_chars = 0;
    double cer = 0.0;
    double wer = 0.0;
    double matched_char_fraction = 0.0;
};

struct TextEvalResult {
    std::vector<TextThresholdRow> rows;
    double cer_range = 0.0;
    /// Values at the first threshold.
    double cer = 0.0;
    double wer = 0.0;
    double matched_char_fraction = 0.0;
};

/// Finalizes ratios from the counts in `rows` (errors / max(reference, 1)).
void finalize_text_result(TextEvalResult& result);

/// Line-level CER. At threshold t, pairs with IoU >= t contribute their edit
/// distance; ground-truth lines that are unmatched or paired below t cost
/// their full length, and so do unmatched predictions.
TextEvalResult cer_line(std::span<const TextLine> preds, std::span<const TextLine> gts,
                        std::span<const double> thresholds);

}  // namespace docdet
