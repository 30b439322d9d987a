#include "docdet/pipeline.hpp"

#include <algorithm>
#include <array>
#include <cstdio>

#include <openssl/evp.h>

#include "docdet/object_metrics.hpp"
#include "docdet/parallel.hpp"
#include "docdet/pixel_metrics.hpp"
#include "docdet/probmap.hpp"
#include "docdet/raster.hpp"
#include "docdet/text_metrics.hpp"

namespace docdet {

namespace {

void merge_warnings(Warnings* sink, const std::vector<Warnings>& per_item, std::span<const PagePair> pairs)
{
    if (!sink) return;
    for (std::size_t i = 0; i < per_item.size(); ++i)
        for (const auto& w : per_item[i]) sink->push_back(pairs[i].image_id + ": " + w);
}

Json scores_json(const ClassScores& s)
{
    Json j;
    j["iou"] = s.iou;
    j["precision"] = s.precision;
    j["recall"] = s.recall;
    j["f1"] = s.f1;
    return j;
}

std::string threshold_key(double t)
{
    char buf[16];
    std::snprintf(buf, sizeof buf, "%02d", static_cast<int>(t * 100.0 + 0.5));
    return buf;
}

std::vector<ObjectMask> nonempty(std::vector<ObjectMask> masks, Warnings* warnings)
{
    const auto before = masks.size();
    std::erase_if(masks, [](const ObjectMask& m) { return m.empty(); });
    if (masks.size() != before)
        warn(warnings, std::to_string(before - masks.size()) + " object(s) cover no pixel and were ignored");
    return masks;
}

std::vector<TextLine> text_lines(std::vector<ObjectMask> masks, const PageRecord& page)
{
    std::vector<TextLine> lines;
    for (std::size_t i = 0; i < masks.size(); ++i)
        lines.push_back({std::move(masks[i]), page.objects[i].text.value_or("")});
    return lines;
}

}  // namespace

std::vector<PagePair> load_page_pairs(const DatasetManifest& manifest, unsigned jobs, Warnings* warnings)
{
    const auto& entries = manifest.entries;
    std::vector<PagePair> pairs(entries.size());
    std::vector<Warnings> w(entries.size());
    parallel_for(entries.size(), jobs, [&](std::size_t i) {
        pairs[i].image_id = entries[i].image_id;
        pairs[i].gt = load_page(entries[i].gt_path, &w[i]);
        pairs[i].pred = load_page(entries[i].pred_path, &w[i]);
    });
    merge_warnings(warnings, w, pairs);
    return pairs;
}

int infer_num_classes(std::span<const PagePair> pairs)
{
    int top = 1;
    for (const auto& p : pairs) {
        for (const auto& o : p.gt.objects) top = std::max(top, o.class_id);
        for (const auto& o : p.pred.objects) top = std::max(top, o.class_id);
    }
    return top + 1;
}

Json eval_pixel(std::span<const PagePair> pairs, int num_classes, unsigned jobs, Warnings* warnings)
{
    if (num_classes < 2) throw ConfigError("pixel evaluation needs at least 2 classes including background");
    std::vector<ConfusionCounts> counts(pairs.size());
    std::vector<Warnings> w(pairs.size());
    parallel_for(pairs.size(), jobs, [&](std::size_t i) {
        const PageRecord& gt = pairs[i].gt;
        const auto gt_masks = rasterize_objects(gt, gt.width, gt.height, &w[i]);
        const auto pred_masks = rasterize_objects(pairs[i].pred, gt.width, gt.height, &w[i]);
        const LabelMask gt_labels = render_label_mask(gt_masks, gt.width, gt.height);
        const LabelMask pred_labels = render_label_mask(pred_masks, gt.width, gt.height);
        counts[i] = pixel_confusion(pred_labels, gt_labels, num_classes);
    });
    merge_warnings(warnings, w, pairs);

    ConfusionCounts total;
    total.per_class.assign(static_cast<std::size_t>(num_classes), {});
    Json per_image = Json::array();
    ClassScores page_mean{0, 0, 0, 0};
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        total += counts[i];
        const PixelMetrics m = pixel_metrics(counts[i]);
        page_mean.iou += m.macro.iou;
        page_mean.precision += m.macro.precision;
        page_mean.recall += m.macro.recall;
        page_mean.f1 += m.macro.f1;
        Json row;
        row["image_id"] = pairs[i].image_id;
        row["macro"] = scores_json(m.macro);
        per_image.push_back(std::move(row));
    }
    if (!pairs.empty()) {
        const double n = static_cast<double>(pairs.size());
        page_mean = {page_mean.iou / n, page_mean.precision / n, page_mean.recall / n, page_mean.f1 / n};
    } else {
        page_mean = ClassScores{};
    }
    const PixelMetrics micro = pixel_metrics(total);

    Json out;
    out["num_classes"] = num_classes;
    out["pages"] = pairs.size();
    Json classes = Json::array();
    for (int c = 1; c < num_classes; ++c) {
        const ClassCounts& cc = total.per_class[static_cast<std::size_t>(c)];
        Json row;
        row["class"] = c;
        row["tp"] = cc.tp;
        row["fp"] = cc.fp;
        row["fn"] = cc.fn;
        row["scores"] = scores_json(micro.per_class[static_cast<std::size_t>(c)]);
        classes.push_back(std::move(row));
    }
    out["per_class"] = std::move(classes);
    out["micro_macro"] = scores_json(micro.macro);
    out["micro_macro_classes"] = micro.macro_classes;
    out["page_macro_mean"] = scores_json(page_mean);
    out["per_image"] = std::move(per_image);
    return out;
}

double pair_image_map(const PagePair& pair, std::span<const double> thresholds)
{
    const auto gts = rasterize_objects(pair.gt, pair.gt.width, pair.gt.height);
    const auto preds = rasterize_objects(pair.pred, pair.gt.width, pair.gt.height);
    return image_map(preds, gts, thresholds);
}

Json eval_object(std::span<const PagePair> pairs, std::span<const double> thresholds, unsigned jobs,
                 Warnings* warnings)
{
    std::vector<ImageDetections> images(pairs.size());
    std::vector<Warnings> w(pairs.size());
    parallel_for(pairs.size(), jobs, [&](std::size_t i) {
        const PageRecord& gt = pairs[i].gt;
        images[i].gts = rasterize_objects(gt, gt.width, gt.height, &w[i]);
        images[i].preds = rasterize_objects(pairs[i].pred, gt.width, gt.height, &w[i]);
    });
    merge_warnings(warnings, w, pairs);
    const ObjectEvaluation eval = evaluate_objects(images, thresholds, jobs);

    Json out;
    out["thresholds"] = eval.thresholds;
    Json classes = Json::array();
    for (const auto& [cls, r] : eval.per_class) {
        Json row;
        row["class"] = cls;
        Json ap_at;
        for (std::size_t t = 0; t < r.thresholds.size(); ++t) ap_at[threshold_key(r.thresholds[t])] = r.ap_at[t];
        row["ap_at"] = std::move(ap_at);
        row["map_range"] = r.map_range;
        classes.push_back(std::move(row));
    }
    out["per_class"] = std::move(classes);
    out["map"] = eval.map;
    double mean = 1.0;
    if (!eval.per_image_map.empty()) {
        mean = 0.0;
        for (double v : eval.per_image_map) mean += v;
        mean /= static_cast<double>(eval.per_image_map.size());
    }
    out["per_image_mean_map"] = mean;
    Json per_image = Json::array();
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        Json row;
        row["image_id"] = pairs[i].image_id;
        row["map"] = eval.per_image_map[i];
        per_image.push_back(std::move(row));
    }
    out["per_image"] = std::move(per_image);
    return out;
}

TextMode parse_text_mode(const std::string& name)
{
    if (name == "page") return TextMode::page;
    if (name == "line") return TextMode::line;
    throw ConfigError("unknown text mode \"" + name + "\" (expected page or line)");
}

Json eval_text(std::span<const PagePair> pairs, TextMode mode, std::span<const double> thresholds, unsigned jobs,
               Warnings* warnings)
{
    std::vector<Warnings> w(pairs.size());
    Json out;
    Json per_image = Json::array();
    if (mode == TextMode::page) {
        struct Counts {
            std::int64_t char_errors = 0, char_ref = 0, word_errors = 0, word_ref = 0;
        };
        std::vector<Counts> counts(pairs.size());
        parallel_for(pairs.size(), jobs, [&](std::size_t i) {
            const PageRecord& gt = pairs[i].gt;
            const auto lines = text_lines(rasterize_objects(pairs[i].pred, gt.width, gt.height, &w[i]), pairs[i].pred);
            std::string reference;
            if (gt.page_text) {
                reference = *gt.page_text;
            } else {
                warn(&w[i], "no page_text; joining ground-truth lines in reading order");
                reference = page_hypothesis(text_lines(rasterize_objects(gt, gt.width, gt.height), gt));
            }
            const std::string hyp = page_hypothesis(lines);
            counts[i] = {static_cast<std::int64_t>(edit_distance(hyp, reference)),
                         static_cast<std::int64_t>(char_length(reference)),
                         static_cast<std::int64_t>(word_edit_distance(hyp, reference)),
                         static_cast<std::int64_t>(split_words(reference).size())};
        });
        Counts total;
        for (std::size_t i = 0; i < pairs.size(); ++i) {
            const Counts& c = counts[i];
            total.char_errors += c.char_errors;
            total.char_ref += c.char_ref;
            total.word_errors += c.word_errors;
            total.word_ref += c.word_ref;
            Json row;
            row["image_id"] = pairs[i].image_id;
            row["cer"] = static_cast<double>(c.char_errors) / static_cast<double>(std::max<std::int64_t>(c.char_ref, 1));
            row["wer"] = static_cast<double>(c.word_errors) / static_cast<double>(std::max<std::int64_t>(c.word_ref, 1));
            per_image.push_back(std::move(row));
        }
        out["mode"] = "page";
        out["char_errors"] = total.char_errors;
        out["char_reference"] = total.char_ref;
        out["cer"] = static_cast<double>(total.char_errors) / static_cast<double>(std::max<std::int64_t>(total.char_ref, 1));
        out["wer"] = static_cast<double>(total.word_errors) / static_cast<double>(std::max<std::int64_t>(total.word_ref, 1));
    } else {
        if (thresholds.empty()) throw ConfigError("threshold list must not be empty");
        std::vector<TextEvalResult> results(pairs.size());
        parallel_for(pairs.size(), jobs, [&](std::size_t i) {
            const PageRecord& gt = pairs[i].gt;
            const auto preds = text_lines(rasterize_objects(pairs[i].pred, gt.width, gt.height, &w[i]), pairs[i].pred);
            const auto gts = text_lines(rasterize_objects(gt, gt.width, gt.height, &w[i]), gt);
            results[i] = cer_line(preds, gts, thresholds);
        });
        TextEvalResult total;
        for (double t : thresholds) total.rows.push_back(TextThresholdRow{.threshold = t});
        for (std::size_t i = 0; i < pairs.size(); ++i) {
            for (std::size_t t = 0; t < thresholds.size(); ++t) {
                TextThresholdRow& dst = total.rows[t];
                const TextThresholdRow& src = results[i].rows[t];
                dst.char_errors += src.char_errors;
                dst.char_reference += src.char_reference;
                dst.word_errors += src.word_errors;
                dst.word_reference += src.word_reference;
                dst.matched_chars += src.matched_chars;
            }
            Json row;
            row["image_id"] = pairs[i].image_id;
            row["cer_range"] = results[i].cer_range;
            row["cer"] = results[i].cer;
            row["matched_char_fraction"] = results[i].matched_char_fraction;
            per_image.push_back(std::move(row));
        }
        finalize_text_result(total);
        out["mode"] = "line";
        Json table = Json::array();
        for (const auto& r : total.rows) {
            Json row;
            row["threshold"] = r.threshold;
            row["char_errors"] = r.char_errors;
            row["char_reference"] = r.char_reference;
            row["cer"] = r.cer;
            row["wer"] = r.wer;
            row["matched_char_fraction"] = r.matched_char_fraction;
            table.push_back(std::move(row));
        }
        out["thresholds"] = std::move(table);
        out["cer_range"] = total.cer_range;
        out["cer"] = total.cer;
        out["wer"] = total.wer;
        out["matched_char_fraction"] = total.matched_char_fraction;
    }
    merge_warnings(warnings, w, pairs);
    out["per_image"] = std::move(per_image);
    return out;
}

Estimator parse_estimator(const std::string& name)
{
    if (name == "pce") return Estimator::pce;
    if (name == "dov") return Estimator::dov;
    if (name == "dap") return Estimator::dap;
    if (name == "rfr" || name == "map-rfr") return Estimator::rfr;
    throw ConfigError("unknown estimator \"" + name + "\" (expected pce, dov, dap or rfr)");
}

const char* to_string(Estimator e)
{
    switch (e) {
    case Estimator::pce: return "pce";
    case Estimator::dov: return "dov";
    case Estimator::dap: return "dap";
    case Estimator::rfr: return "rfr";
    }
    return "?";
}

std::vector<double> page_features(const PageRecord& pred, int bins)
{
    const auto masks = rasterize_objects(pred, pred.width, pred.height);
    return object_features(masks, pred.width, pred.height, bins);
}

ConfidenceScore score_entry(const ManifestEntry& entry, Estimator estimator, const ScoringOptions& options,
                            Warnings* warnings)
{
    switch (estimator) {
    case Estimator::pce: {
        const PageRecord pred = load_page(entry.pred_path, warnings);
        if (entry.probmap_path) {
            const ProbabilityMap map = load_probmap(*entry.probmap_path);
            const auto masks = nonempty(
                rasterize_objects(pred, static_cast<int>(map.width()), static_cast<int>(map.height()), warnings),
                warnings);
            return pce(masks, map);
        }
        return pce_from_confidences(nonempty(rasterize_objects(pred, pred.width, pred.height, warnings), warnings));
    }
    case Estimator::dov:
    case Estimator::dap: {
        const std::size_t n = std::min(entry.ensemble_paths.size(), static_cast<std::size_t>(options.ensemble_size));
        if (n < 2)
            throw ConfigError("image " + entry.image_id + " has " + std::to_string(entry.ensemble_paths.size()) +
                              " ensemble member(s); at least 2 are required");
        PredictionEnsemble ensemble;
        ensemble.image_id = entry.image_id;
        int gw = 0, gh = 0;
        std::vector<std::size_t> counts;
        for (std::size_t k = 0; k < n; ++k) {
            const PageRecord member = load_page(entry.ensemble_paths[k], warnings);
            if (k == 0) {
                gw = member.width;
                gh = member.height;
            }
            counts.push_back(member.objects.size());
            if (estimator == Estimator::dap) ensemble.members.push_back(rasterize_objects(member, gw, gh, warnings));
        }
        return estimator == Estimator::dov ? dov(counts) : dap(ensemble);
    }
    case Estimator::rfr: {
        if (!options.forest) throw ConfigError("rfr scoring needs a trained model");
        const PageRecord pred = load_page(entry.pred_path, warnings);
        ConfidenceScore s = options.forest->predict(page_features(pred, options.feature_bins));
        s.no_detection = pred.objects.empty();
        return s;
    }
    }
    throw ConfigError("unknown estimator");
}

std::string sha256_hex(std::string_view data)
{
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1)
        throw Error("SHA-256 computation failed");
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xF];
    }
    return out;
}

}  // namespace docdet
