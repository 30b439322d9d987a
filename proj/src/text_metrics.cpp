#include "docdet/text_metrics.hpp"

#include <algorithm>
#include <map>
#include <numeric>

namespace docdet {

std::u32string decode_utf8(std::string_view text)
{
    std::u32string out;
    out.reserve(text.size());
    std::size_t i = 0;
    const auto byte = [&](std::size_t k) { return static_cast<unsigned char>(text[k]); };
    while (i < text.size()) {
        const unsigned char c = byte(i);
        int len = 0;
        char32_t cp = 0;
        if (c < 0x80) {
            len = 1;
            cp = c;
        } else if ((c & 0xE0) == 0xC0) {
            len = 2;
            cp = c & 0x1F;
        } else if ((c & 0xF0) == 0xE0) {
            len = 3;
            cp = c & 0x0F;
        } else if ((c & 0xF8) == 0xF0) {
            len = 4;
            cp = c & 0x07;
        }
        bool ok = len > 0 && i + len <= text.size();
        for (int k = 1; ok && k < len; ++k) {
            if ((byte(i + k) & 0xC0) != 0x80) ok = false;
            else cp = (cp << 6) | (byte(i + k) & 0x3F);
        }
        if (ok) {
            static constexpr char32_t min_for_len[5] = {0, 0, 0x80, 0x800, 0x10000};
            if (cp < min_for_len[len] || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) ok = false;
        }
        if (!ok) {
            out.push_back(U'�');
            ++i;
            continue;
        }
        out.push_back(cp);
        i += static_cast<std::size_t>(len);
    }
    return out;
}

std::vector<std::string> split_words(std::string_view text)
{
    std::vector<std::string> words;
    std::size_t i = 0;
    auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; };
    while (i < text.size()) {
        while (i < text.size() && is_space(text[i])) ++i;
        const std::size_t start = i;
        while (i < text.size() && !is_space(text[i])) ++i;
        if (i > start) words.emplace_back(text.substr(start, i - start));
    }
    return words;
}

namespace {

template <class T>
std::size_t levenshtein(std::span<const T> a, std::span<const T> b)
{
    if (a.size() < b.size()) std::swap(a, b);
    std::vector<std::size_t> row(b.size() + 1);
    std::iota(row.begin(), row.end(), std::size_t{0});
    for (std::size_t i = 1; i <= a.size(); ++i) {
        std::size_t diag = row[0];
        row[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::size_t up = row[j];
            row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
            diag = up;
        }
    }
    return row[b.size()];
}

std::pair<std::vector<std::uint32_t>, std::vector<std::uint32_t>> word_ids(std::string_view a, std::string_view b)
{
    std::map<std::string, std::uint32_t> ids;
    auto encode = [&](std::string_view text) {
        std::vector<std::uint32_t> out;
        for (auto& w : split_words(text)) {
            const auto [it, inserted] = ids.emplace(std::move(w), static_cast<std::uint32_t>(ids.size()));
            out.push_back(it->second);
        }
        return out;
    };
    auto first = encode(a);
    auto second = encode(b);
    return {std::move(first), std::move(second)};
}

}  // namespace

std::size_t edit_distance(std::u32string_view a, std::u32string_view b)
{
    return levenshtein<char32_t>({a.data(), a.size()}, {b.data(), b.size()});
}

std::size_t edit_distance(std::span<const std::uint32_t> a, std::span<const std::uint32_t> b)
{
    return levenshtein<std::uint32_t>(a, b);
}

std::size_t edit_distance(std::string_view a, std::string_view b)
{
    return edit_distance(std::u32string_view(decode_utf8(a)), std::u32string_view(decode_utf8(b)));
}

std::size_t word_edit_distance(std::string_view a, std::string_view b)
{
    const auto [wa, wb] = word_ids(a, b);
    return edit_distance(std::span<const std::uint32_t>(wa), std::span<const std::uint32_t>(wb));
}

std::size_t char_length(std::string_view text) { return decode_utf8(text).size(); }

double cer(std::string_view hyp, std::string_view ref)
{
    const double denom = static_cast<double>(std::max<std::size_t>(char_length(ref), 1));
    return static_cast<double>(edit_distance(hyp, ref)) / denom;
}

double wer(std::string_view hyp, std::string_view ref)
{
    const double denom = static_cast<double>(std::max<std::size_t>(split_words(ref).size(), 1));
    return static_cast<double>(word_edit_distance(hyp, ref)) / denom;
}

std::string page_hypothesis(std::span<const TextLine> lines)
{
    std::vector<std::size_t> order(lines.size());
    std::iota(order.begin(), order.end(), 0);
    // Centers doubled to stay in integers.
    auto center = [&](std::size_t i) {
        const BoundingBox& b = lines[i].mask.box();
        return std::pair<long, long>{static_cast<long>(b.y0) + b.y1, static_cast<long>(b.x0) + b.x1};
    };
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return center(a) < center(b); });
    std::string out;
    for (std::size_t k = 0; k < order.size(); ++k) {
        if (k > 0) out.push_back(' ');
        out += lines[order[k]].text;
    }
    return out;
}

double cer_page(std::span<const TextLine> pred_lines, std::string_view gt_text)
{
    return cer(page_hypothesis(pred_lines), gt_text);
}

std::vector<LinePair> pair_lines(std::span<const TextLine> preds, std::span<const TextLine> gts)
{
    std::vector<LinePair> candidates;
    for (std::size_t p = 0; p < preds.size(); ++p)
        for (std::size_t g = 0; g < gts.size(); ++g) {
            if (!boxes_intersect(preds[p].mask.box(), gts[g].mask.box())) continue;
            const double iou = mask_overlap(preds[p].mask, gts[g].mask).iou;
            if (iou > 0.0) candidates.push_back({p, g, iou});
        }
    std::stable_sort(candidates.begin(), candidates.end(), [](const LinePair& a, const LinePair& b) {
        if (a.iou != b.iou) return a.iou > b.iou;
        if (a.gt != b.gt) return a.gt < b.gt;
        return a.pred < b.pred;
    });
    std::vector<bool> pred_used(preds.size(), false);
    std::vector<bool> gt_used(gts.size(), false);
    std::vector<LinePair> pairs;
    for (const LinePair& c : candidates) {
        if (pred_used[c.pred] || gt_used[c.gt]) continue;
        pred_used[c.pred] = gt_used[c.gt] = true;
        pairs.push_back(c);
    }
    return pairs;
}

void finalize_text_result(TextEvalResult& result)
{
    double sum = 0.0;
    for (TextThresholdRow& row : result.rows) {
        row.cer = static_cast<double>(row.char_errors) / static_cast<double>(std::max<std::int64_t>(row.char_reference, 1));
        row.wer = static_cast<double>(row.word_errors) / static_cast<double>(std::max<std::int64_t>(row.word_reference, 1));
        row.matched_char_fraction =
            row.char_reference == 0 ? 1.0
                                    : static_cast<double>(row.matched_chars) / static_cast<double>(row.char_reference);
        sum += row.cer;
    }
    if (result.rows.empty()) return;
    result.cer_range = sum / static_cast<double>(result.rows.size());
    result.cer = result.rows.front().cer;
    result.wer = result.rows.front().wer;
    result.matched_char_fraction = result.rows.front().matched_char_fraction;
}

TextEvalResult cer_line(std::span<const TextLine> preds, std::span<const TextLine> gts,
                        std::span<const double> thresholds)
{
    if (thresholds.empty()) throw ConfigError("threshold list must not be empty");
    const std::vector<LinePair> pairs = pair_lines(preds, gts);

    std::vector<std::int64_t> pred_chars(preds.size()), pred_words(preds.size());
    std::vector<std::int64_t> gt_chars(gts.size()), gt_words(gts.size());
    for (std::size_t p = 0; p < preds.size(); ++p) {
        pred_chars[p] = static_cast<std::int64_t>(char_length(preds[p].text));
        pred_words[p] = static_cast<std::int64_t>(split_words(preds[p].text).size());
    }
    std::int64_t total_chars = 0, total_words = 0;
    for (std::size_t g = 0; g < gts.size(); ++g) {
        gt_chars[g] = static_cast<std::int64_t>(char_length(gts[g].text));
        gt_words[g] = static_cast<std::int64_t>(split_words(gts[g].text).size());
        total_chars += gt_chars[g];
        total_words += gt_words[g];
    }
    std::vector<std::int64_t> pair_char_dist, pair_word_dist;
    for (const LinePair& lp : pairs) {
        pair_char_dist.push_back(static_cast<std::int64_t>(edit_distance(preds[lp.pred].text, gts[lp.gt].text)));
        pair_word_dist.push_back(static_cast<std::int64_t>(word_edit_distance(preds[lp.pred].text, gts[lp.gt].text)));
    }

    std::vector<bool> pred_paired(preds.size(), false), gt_paired(gts.size(), false);
    for (const LinePair& lp : pairs) pred_paired[lp.pred] = gt_paired[lp.gt] = true;

    TextEvalResult result;
    for (double t : thresholds) {
        TextThresholdRow row;
        row.threshold = t;
        row.char_reference = total_chars;
        row.word_reference = total_words;
        for (std::size_t k = 0; k < pairs.size(); ++k) {
            const std::size_t g = pairs[k].gt;
            if (pairs[k].iou >= t) {
                row.char_errors += pair_char_dist[k];
                row.word_errors += pair_word_dist[k];
                row.matched_chars += gt_chars[g];
            } else {
                // A pair below threshold never costs less than it would matched.
                row.char_errors += std::max(gt_chars[g], pair_char_dist[k]);
                row.word_errors += std::max(gt_words[g], pair_word_dist[k]);
            }
        }
        for (std::size_t g = 0; g < gts.size(); ++g)
            if (!gt_paired[g]) {
                row.char_errors += gt_chars[g];
                row.word_errors += gt_words[g];
            }
        for (std::size_t p = 0; p < preds.size(); ++p)
            if (!pred_paired[p]) {
                row.char_errors += pred_chars[p];
                row.word_errors += pred_words[p];
            }
        result.rows.push_back(row);
    }
    finalize_text_result(result);
    return result;
}

}  // namespace docdet
