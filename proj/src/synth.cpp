#include "docdet/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <json.hpp>

#include "docdet/manifest.hpp"
#include "docdet/object_metrics.hpp"
#include "docdet/parallel.hpp"
#include "docdet/random.hpp"
#include "docdet/raster.hpp"
#include "docdet/text_metrics.hpp"

namespace docdet {

namespace fs = std::filesystem;

namespace {

struct Box {
    double x0, y0, x1, y1;
};

Polygon box_polygon(const Box& b) { return Polygon{{{b.x0, b.y0}, {b.x1, b.y0}, {b.x1, b.y1}, {b.x0, b.y1}}}; }

constexpr std::string_view kAlphabet = "abcdefghijklmnopqrstuvwxyz";

std::string random_text(Rng& rng)
{
    std::string out;
    const auto words = 1 + uniform_index(rng, 5);
    for (std::uint64_t w = 0; w < words; ++w) {
        if (w) out += ' ';
        const auto len = 2 + uniform_index(rng, 7);
        for (std::uint64_t c = 0; c < len; ++c) out += kAlphabet[uniform_index(rng, kAlphabet.size())];
    }
    return out;
}

std::string mutate_text(const std::string& text, double p, Rng& rng)
{
    std::string out = text;
    for (char& c : out)
        if (c != ' ' && bernoulli(rng, p)) c = kAlphabet[uniform_index(rng, kAlphabet.size())];
    return out;
}

/// Moves each corner independently, so noisy predictions come out as
/// irregular quadrilaterals rather than shifted rectangles.
Polygon jitter_corners(const Box& b, double amount, const PageRecord& page, Rng& rng)
{
    const double a = std::min(amount, 0.4 * std::min(b.x1 - b.x0, b.y1 - b.y0));
    Polygon p = box_polygon(b);
    for (Point& v : p.points) {
        v.x = std::clamp(v.x + uniform_real(rng, -a, a), 0.0, static_cast<double>(page.width));
        v.y = std::clamp(v.y + uniform_real(rng, -a, a), 0.0, static_cast<double>(page.height));
    }
    return p;
}

Box random_box(const SynthConfig& cfg, Rng& rng)
{
    const double w = std::min(static_cast<double>(cfg.width) - 2.0, uniform_real(rng, 40.0, 220.0));
    const double h = std::min(static_cast<double>(cfg.height) - 2.0, uniform_real(rng, 16.0, 48.0));
    const double x0 = std::round(uniform_real(rng, 0.0, cfg.width - w));
    const double y0 = std::round(uniform_real(rng, 0.0, cfg.height - h));
    return {x0, y0, x0 + std::round(w), y0 + std::round(h)};
}

bool separated(const Box& a, const Box& b, double gap)
{
    return a.x1 + gap <= b.x0 || b.x1 + gap <= a.x0 || a.y1 + gap <= b.y0 || b.y1 + gap <= a.y0;
}

/// One noisy copy of the ground truth.
PageRecord corrupt(const PageRecord& gt, const std::vector<Box>& boxes, const SynthConfig& cfg, double q, Rng& rng)
{
    PageRecord pred;
    pred.image_id = gt.image_id;
    pred.width = gt.width;
    pred.height = gt.height;
    const double drop = std::min(1.0, cfg.drop_probability * q);
    const double spurious = std::min(1.0, cfg.spurious_rate * q);
    const double mutation = std::min(1.0, cfg.text_mutation * q);
    for (std::size_t i = 0; i < gt.objects.size(); ++i) {
        const bool dropped = bernoulli(rng, drop);
        Polygon shape = jitter_corners(boxes[i], cfg.jitter * q, gt, rng);
        const std::string text = mutate_text(gt.objects[i].text.value_or(""), mutation, rng);
        if (!dropped) {
            ObjectInstance obj;
            obj.class_id = gt.objects[i].class_id;
            obj.polygon = std::move(shape);
            obj.text = text;
            pred.objects.push_back(std::move(obj));
        }
        if (bernoulli(rng, spurious)) {
            ObjectInstance obj;
            obj.class_id = 1 + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(cfg.num_classes)));
            obj.polygon = box_polygon(random_box(cfg, rng));
            obj.text = random_text(rng);
            pred.objects.push_back(std::move(obj));
        }
    }
    return pred;
}

}  // namespace

void validate_synth_config(const SynthConfig& cfg)
{
    if (cfg.pages < 0) throw ConfigError("pages must be non-negative");
    if (cfg.width < 64 || cfg.height < 64) throw ConfigError("synthetic pages must be at least 64x64");
    if (cfg.min_objects < 0 || cfg.max_objects < cfg.min_objects)
        throw ConfigError("object count range must satisfy 0 <= min <= max");
    if (cfg.num_classes < 1 || cfg.num_classes > 255) throw ConfigError("num_classes must be in [1, 255]");
    if (cfg.jitter < 0) throw ConfigError("jitter must be non-negative");
    for (double p : {cfg.drop_probability, cfg.spurious_rate, cfg.text_mutation, cfg.epsilon})
        if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("synthetic noise probabilities must lie in [0, 1]");
    if (cfg.ensemble_size < 0) throw ConfigError("ensemble size must be non-negative");
}

std::string synth_image_id(int index)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "page_%04d", index);
    return buf;
}

SynthPage generate_page(const SynthConfig& cfg, int index)
{
    validate_synth_config(cfg);
    const auto idx = static_cast<std::uint64_t>(index);
    Rng layout = make_stream(cfg.seed, "synth-layout", idx);
    SynthPage page;
    page.noise_factor = cfg.vary_noise ? 2.0 * uniform01(layout) : 1.0;

    PageRecord& gt = page.gt;
    gt.image_id = synth_image_id(index);
    gt.width = cfg.width;
    gt.height = cfg.height;
    const auto target = static_cast<std::size_t>(
        cfg.min_objects +
        static_cast<int>(uniform_index(layout, static_cast<std::uint64_t>(cfg.max_objects - cfg.min_objects + 1))));
    const double gap = 2.0 * cfg.jitter * (cfg.vary_noise ? 2.0 : 1.0) + 4.0;
    std::vector<Box> boxes;
    for (int attempt = 0; attempt < 200 && boxes.size() < target; ++attempt) {
        const Box b = random_box(cfg, layout);
        if (std::all_of(boxes.begin(), boxes.end(), [&](const Box& o) { return separated(b, o, gap); }))
            boxes.push_back(b);
    }
    // Reading order keeps page_text consistent with the line geometry.
    std::sort(boxes.begin(), boxes.end(), [](const Box& a, const Box& b) {
        const double ay = a.y0 + a.y1, by = b.y0 + b.y1;
        if (ay != by) return ay < by;
        return a.x0 + a.x1 < b.x0 + b.x1;
    });
    std::string page_text;
    for (const Box& b : boxes) {
        ObjectInstance obj;
        obj.class_id = 1 + static_cast<int>(uniform_index(layout, static_cast<std::uint64_t>(cfg.num_classes)));
        obj.polygon = box_polygon(b);
        obj.text = random_text(layout);
        if (!page_text.empty()) page_text += ' ';
        page_text += *obj.text;
        gt.objects.push_back(std::move(obj));
    }
    gt.page_text = page_text;

    Rng noise = make_stream(cfg.seed, "synth-pred", idx);
    page.pred = corrupt(gt, boxes, cfg, page.noise_factor, noise);

    for (std::size_t i = 0; i < page.pred.objects.size(); ++i) {
        const double p = 1.0 - cfg.epsilon * (1.0 + 2.0 * page.noise_factor * uniform01(noise));
        page.pred.objects[i].confidence = std::clamp(p, 0.0, 1.0);
    }
    const auto pred_masks = rasterize_objects(page.pred, cfg.width, cfg.height);
    if (cfg.write_probmaps) {
        const auto C = static_cast<std::uint32_t>(cfg.num_classes + 1);
        ProbabilityMap map(static_cast<std::uint32_t>(cfg.width), static_cast<std::uint32_t>(cfg.height), C);
        auto bg = map.plane(0);
        std::fill(bg.begin(), bg.end(), 1.0f);
        for (std::size_t i = 0; i < pred_masks.size(); ++i) {
            const auto cls = static_cast<std::uint32_t>(page.pred.objects[i].class_id);
            const auto p = static_cast<float>(*page.pred.objects[i].confidence);
            pred_masks[i].for_each_pixel([&](int x, int y) {
                const auto ux = static_cast<std::uint32_t>(x), uy = static_cast<std::uint32_t>(y);
                for (std::uint32_t c = 1; c < C; ++c) map.at(c, ux, uy) = 0.0f;
                map.at(cls, ux, uy) = p;
                map.at(0, ux, uy) = 1.0f - p;
            });
        }
        page.probmap = std::move(map);
    }

    for (int k = 0; k < cfg.ensemble_size; ++k) {
        Rng member = make_stream(cfg.seed, "synth-member", idx * 65536 + static_cast<std::uint64_t>(k));
        PageRecord m = corrupt(gt, boxes, cfg, page.noise_factor, member);
        for (auto& obj : m.objects) obj.confidence = 1.0 - cfg.epsilon;
        page.ensemble.push_back(std::move(m));
    }

    const auto gt_masks = rasterize_objects(gt, cfg.width, cfg.height);
    page.true_map = image_map(pred_masks, gt_masks, default_iou_thresholds());
    return page;
}

SynthSummary generate_synthetic(const SynthConfig& cfg, const fs::path& out_dir, unsigned jobs)
{
    validate_synth_config(cfg);
    for (const char* sub : {"gt", "pred"}) fs::create_directories(out_dir / sub);
    if (cfg.write_probmaps) fs::create_directories(out_dir / "probmap");
    if (cfg.ensemble_size > 0) fs::create_directories(out_dir / "ensemble");
    const auto n = static_cast<std::size_t>(cfg.pages);
    DatasetManifest manifest;
    for (int c = 1; c <= cfg.num_classes; ++c)
        manifest.classes.push_back(cfg.num_classes == 1 ? "text_line" : "class_" + std::to_string(c));
    manifest.entries.resize(n);
    SynthSummary summary;
    summary.true_map.resize(n);
    parallel_for(n, jobs, [&](std::size_t i) {
        const SynthPage page = generate_page(cfg, static_cast<int>(i));
        ManifestEntry& e = manifest.entries[i];
        e.image_id = page.gt.image_id;
        e.gt_path = out_dir / "gt" / (e.image_id + ".json");
        e.pred_path = out_dir / "pred" / (e.image_id + ".json");
        save_page(page.gt, e.gt_path);
        save_page(page.pred, e.pred_path);
        if (page.probmap) {
            e.probmap_path = out_dir / "probmap" / (e.image_id + ".pmap");
            save_probmap(*page.probmap, *e.probmap_path);
        }
        for (std::size_t k = 0; k < page.ensemble.size(); ++k) {
            e.ensemble_paths.push_back(out_dir / "ensemble" / (e.image_id + "_" + std::to_string(k) + ".json"));
            save_page(page.ensemble[k], e.ensemble_paths.back());
        }
        summary.true_map[i] = page.true_map;
    });
    summary.manifest_path = out_dir / "manifest.jsonl";
    summary.truth_path = out_dir / "truth.jsonl";
    write_text_file(summary.manifest_path, manifest_to_jsonl(manifest, out_dir));
    std::string truth;
    for (std::size_t i = 0; i < n; ++i) {
        nlohmann::ordered_json row;
        row["image_id"] = manifest.entries[i].image_id;
        row["map"] = summary.true_map[i];
        truth += row.dump() + "\n";
    }
    write_text_file(summary.truth_path, truth);
    return summary;
}

}  // namespace docdet
