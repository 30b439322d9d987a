#include "docdet/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "docdet/active_learning.hpp"
#include "docdet/forest.hpp"
#include "docdet/label_mask.hpp"
#include "docdet/object_metrics.hpp"
#include "docdet/parallel.hpp"
#include "docdet/pipeline.hpp"
#include "docdet/probmap.hpp"
#include "docdet/raster.hpp"
#include "docdet/selection.hpp"
#include "docdet/synth.hpp"
#include "docdet/uniformize.hpp"

namespace docdet {

namespace fs = std::filesystem;

namespace {

struct Common {
    std::string config;
    std::string out;
    unsigned jobs = 1;
};

void add_common(CLI::App* sub, Common& c, bool with_out = true)
{
    sub->add_option("--config", c.config, "JSON file of option values; command-line flags take precedence");
    if (with_out) sub->add_option("--out", c.out, "Write the JSON result here instead of stdout");
    sub->add_option("--jobs", c.jobs, "Worker threads (default: DOCDET_EVAL_JOBS or 1)")->check(CLI::Range(1u, 1024u));
}

/// Fills options not given on the command line from a JSON object whose
/// keys are long option names.
void apply_config(CLI::App* sub, const std::string& path)
{
    if (path.empty()) return;
    const std::string text = read_text_file(path);
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError("config " + path + ": " + e.what(), e.byte);
    }
    if (!doc.is_object()) throw ConfigError("config " + path + " must hold a JSON object");
    for (const auto& [key, value] : doc.items()) {
        std::string name = key;
        std::replace(name.begin(), name.end(), '_', '-');
        if (name == "config") throw ConfigError("config files cannot nest --config");
        CLI::Option* opt = sub->get_option_no_throw("--" + name);
        if (!opt) throw ConfigError("config " + path + ": unknown option \"" + key + "\"");
        if (opt->count() > 0) continue;
        auto as_text = [](const nlohmann::json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); };
        if (value.is_boolean()) {
            if (!value.get<bool>()) continue;
            opt->add_result("true");
        } else if (value.is_array()) {
            for (const auto& v : value) opt->add_result(as_text(v));
        } else {
            opt->add_result(as_text(value));
        }
        opt->run_callback();
    }
}

void emit(const Common& c, const std::string& text, std::ostream& out)
{
    if (c.out.empty())
        out << text;
    else
        write_text_file(c.out, text);
}

Json report(const std::string& command, const DatasetManifest* manifest, Json config, Json sections,
            const Warnings& warnings)
{
    Json r;
    r["tool"] = "docdet";
    r["version"] = DOCDET_VERSION;
    r["command"] = command;
    r["manifest_sha256"] = manifest ? Json(sha256_hex(manifest->raw)) : Json(nullptr);
    r["config"] = std::move(config);
    r["sections"] = std::move(sections);
    r["warnings"] = warnings;
    return r;
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

std::vector<std::string> jsonl_lines(const std::string& path)
{
    std::istringstream in(read_text_file(path));
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line))
        if (line.find_first_not_of(" \t\r") != std::string::npos) lines.push_back(line);
    return lines;
}

nlohmann::json parse_line(const std::string& path, const std::string& line, std::size_t no)
{
    try {
        auto j = nlohmann::json::parse(line);
        if (!j.is_object()) throw ValidationError(path + " line " + std::to_string(no) + ": expected an object");
        return j;
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path + " line " + std::to_string(no) + ": " + e.what(), e.byte);
    }
}

struct ScoreFile {
    std::string estimator;
    std::vector<ScoredImage> scores;
};

ScoreFile read_scores(const std::string& path)
{
    ScoreFile f;
    std::size_t no = 0;
    for (const auto& line : jsonl_lines(path)) {
        const auto j = parse_line(path, line, ++no);
        try {
            ScoredImage s;
            s.image_id = j.at("image_id").get<std::string>();
            s.score.value = j.at("value").get<double>();
            const std::string orientation = j.value("orientation", std::string("higher_is_better"));
            if (orientation != "higher_is_better" && orientation != "lower_is_better")
                throw ValidationError(path + " line " + std::to_string(no) + ": bad orientation \"" + orientation + "\"");
            s.score.higher_is_better = orientation == "higher_is_better";
            s.score.no_detection = j.value("no_detection", false);
            if (f.estimator.empty()) f.estimator = j.value("estimator", std::string());
            f.scores.push_back(std::move(s));
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError(path + " line " + std::to_string(no) + ": " + e.what());
        }
    }
    if (f.scores.empty()) throw ValidationError(path + " contains no scores");
    return f;
}

std::map<std::string, double> read_metrics(const std::string& path)
{
    std::map<std::string, double> m;
    std::size_t no = 0;
    for (const auto& line : jsonl_lines(path)) {
        const auto j = parse_line(path, line, ++no);
        try {
            const std::string id = j.at("image_id").get<std::string>();
            double v;
            if (j.contains("map"))
                v = j.at("map").get<double>();
            else if (j.contains("metric"))
                v = j.at("metric").get<double>();
            else
                v = j.at("value").get<double>();
            if (!m.emplace(id, v).second) throw ValidationError(path + ": duplicate image_id \"" + id + "\"");
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError(path + " line " + std::to_string(no) + ": " + e.what());
        }
    }
    return m;
}

std::string score_line(const std::string& image_id, const std::string& estimator, const ConfidenceScore& s)
{
    Json j;
    j["image_id"] = image_id;
    j["estimator"] = estimator;
    j["value"] = s.value;
    j["orientation"] = s.higher_is_better ? "higher_is_better" : "lower_is_better";
    j["no_detection"] = s.no_detection;
    return j.dump() + "\n";
}

std::string summary_number(double v)
{
    std::ostringstream os;
    os.precision(4);
    os << std::fixed << v;
    return os.str();
}

// ---------------------------------------------------------------- normalize

struct NormalizeArgs {
    Common c;
    std::string manifest, out_dir, source = "gt";
    UniformizeConfig cfg;
};

int cmd_normalize(const NormalizeArgs& a, std::ostream& out, std::ostream& err)
{
    validate_uniformize_config(a.cfg);
    const DatasetManifest manifest = load_manifest(a.manifest);
    const auto& entries = manifest.entries;
    std::vector<Json> rows(entries.size());
    std::vector<Warnings> w(entries.size());
    std::vector<std::array<std::size_t, 4>> tallies(entries.size());
    parallel_for(entries.size(), a.c.jobs, [&](std::size_t i) {
        const PageRecord page = load_page(a.source == "pred" ? entries[i].pred_path : entries[i].gt_path, &w[i]);
        const PageRecord scaled = scale_page(page, a.cfg.target_long_side);
        NormalizedPage np = normalize_page(scaled, a.cfg);
        for (auto& msg : np.warnings) w[i].push_back(std::move(msg));
        save_label_mask(np.labels, fs::path(a.out_dir) / (entries[i].image_id + ".png"));

        Json side;
        side["image_id"] = entries[i].image_id;
        side["source_width"] = page.width;
        side["source_height"] = page.height;
        side["width"] = scaled.width;
        side["height"] = scaled.height;
        Json objs = Json::array();
        std::size_t emptied = 0;
        for (std::size_t k = 0; k < np.masks.size(); ++k) {
            Json o;
            o["index"] = k;
            o["class"] = np.masks[k].class_id;
            o["input_pixels"] = np.input_masks[k].pixel_count();
            o["output_pixels"] = np.masks[k].pixel_count();
            if (np.masks[k].empty() && !np.input_masks[k].empty()) ++emptied;
            objs.push_back(std::move(o));
        }
        side["objects"] = std::move(objs);
        Json events = Json::array();
        std::array<std::size_t, 4> t{0, 0, 0, emptied};
        for (const auto& e : np.events) {
            Json ev;
            ev["first"] = e.first;
            ev["second"] = e.second;
            ev["action"] = to_string(e.action);
            ev["input_intersection"] = e.input_intersection;
            ev["ratio_first"] = e.ratio_first;
            ev["ratio_second"] = e.ratio_second;
            if (e.action == PairAction::split) ev["loser"] = e.loser;
            events.push_back(std::move(ev));
            ++t[static_cast<std::size_t>(e.action)];
        }
        side["events"] = std::move(events);
        side["warnings"] = w[i];
        write_text_file(fs::path(a.out_dir) / (entries[i].image_id + ".json"), side.dump(2) + "\n");
        tallies[i] = t;
        Json row;
        row["image_id"] = entries[i].image_id;
        row["touching_eroded"] = t[0];
        row["split"] = t[1];
        row["kept"] = t[2];
        row["emptied"] = t[3];
        rows[i] = std::move(row);
    });
    Warnings warnings;
    std::array<std::size_t, 4> total{};
    Json per_image = Json::array();
    for (std::size_t i = 0; i < entries.size(); ++i) {
        for (const auto& msg : w[i]) warnings.push_back(entries[i].image_id + ": " + msg);
        for (std::size_t k = 0; k < 4; ++k) total[k] += tallies[i][k];
        per_image.push_back(std::move(rows[i]));
    }
    Json config;
    config["manifest"] = a.manifest;
    config["out_dir"] = a.out_dir;
    config["source"] = a.source;
    config["long_side"] = a.cfg.target_long_side;
    config["overlap_threshold"] = a.cfg.overlap_ratio_threshold;
    config["erosion"] = a.cfg.erosion_radius;
    config["keep_if_either"] = a.cfg.keep_if_either;
    Json section;
    section["pages"] = entries.size();
    section["touching_eroded"] = total[0];
    section["split"] = total[1];
    section["kept"] = total[2];
    section["emptied_objects"] = total[3];
    section["per_image"] = std::move(per_image);
    Json sections;
    sections["normalize"] = std::move(section);
    emit(a.c, dump(report("normalize", &manifest, config, sections, warnings)), out);
    err << "normalize: " << entries.size() << " page(s), " << total[0] << " touching pair(s) eroded, " << total[1]
        << " split, " << total[2] << " kept\n";
    return 0;
}

// ---------------------------------------------------------------- extract

struct ExtractArgs {
    Common c;
    std::string manifest, out_dir;
    ExtractConfig cfg;
};

int cmd_extract(const ExtractArgs& a, std::ostream& out, std::ostream& err)
{
    validate_extract_config(a.cfg);
    const DatasetManifest manifest = load_manifest(a.manifest);
    const fs::path dir(a.out_dir);
    DatasetManifest result;
    result.classes = manifest.classes;
    result.entries = manifest.entries;
    std::vector<std::size_t> counts(manifest.entries.size());
    parallel_for(manifest.entries.size(), a.c.jobs, [&](std::size_t i) {
        const ManifestEntry& e = manifest.entries[i];
        if (!e.probmap_path) throw ValidationError("image " + e.image_id + " has no probmap_path");
        const ProbabilityMap map = load_probmap(*e.probmap_path);
        const auto objects = extract_objects(map, a.cfg);
        PageRecord page;
        page.image_id = e.image_id;
        page.width = static_cast<int>(map.width());
        page.height = static_cast<int>(map.height());
        for (const ObjectMask& m : objects) {
            ObjectInstance obj;
            obj.class_id = m.class_id;
            obj.polygon = trace_outline(m);
            obj.confidence = m.confidence;
            page.objects.push_back(std::move(obj));
        }
        counts[i] = page.objects.size();
        result.entries[i].pred_path = dir / "pred" / (e.image_id + ".json");
        save_page(page, result.entries[i].pred_path);
    });
    const fs::path manifest_out = dir / "manifest.jsonl";
    write_text_file(manifest_out, manifest_to_jsonl(result, dir));

    std::size_t total = 0;
    Json per_image = Json::array();
    for (std::size_t i = 0; i < counts.size(); ++i) {
        total += counts[i];
        Json row;
        row["image_id"] = manifest.entries[i].image_id;
        row["objects"] = counts[i];
        per_image.push_back(std::move(row));
    }
    Json config;
    config["manifest"] = a.manifest;
    config["out_dir"] = a.out_dir;
    config["threshold"] = a.cfg.threshold;
    config["min_cc"] = a.cfg.min_cc;
    config["connectivity"] = a.cfg.connectivity;
    Json section;
    section["pages"] = counts.size();
    section["objects"] = total;
    section["manifest"] = manifest_out.generic_string();
    section["per_image"] = std::move(per_image);
    Json sections;
    sections["extract"] = std::move(section);
    emit(a.c, dump(report("extract", &manifest, config, sections, {})), out);
    err << "extract: " << total << " object(s) from " << counts.size() << " probability map(s)\n";
    return 0;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
    Common c;
    std::string manifest;
    int classes = 0;
    std::string thresholds = "0.5:0.95:0.05";
    std::string mode = "page";
    std::string per_image_out;
};

int cmd_eval(const std::string& kind, const EvalArgs& a, std::ostream& out, std::ostream& err)
{
    const DatasetManifest manifest = load_manifest(a.manifest);
    Warnings warnings;
    const auto pairs = load_page_pairs(manifest, a.c.jobs, &warnings);
    Json config;
    config["manifest"] = a.manifest;
    Json sections;
    if (kind == "pixel") {
        int k = a.classes > 0 ? a.classes + 1 : 0;
        if (k == 0) k = manifest.classes.empty() ? infer_num_classes(pairs) : static_cast<int>(manifest.classes.size()) + 1;
        config["classes"] = k - 1;
        sections["pixel"] = eval_pixel(pairs, k, a.c.jobs, &warnings);
        const auto& macro = sections["pixel"]["micro_macro"];
        err << "eval pixel: " << pairs.size() << " page(s), IoU " << summary_number(macro["iou"].get<double>())
            << ", F1 " << summary_number(macro["f1"].get<double>()) << "\n";
    } else if (kind == "object") {
        const auto thresholds = parse_threshold_range(a.thresholds);
        config["thresholds"] = a.thresholds;
        sections["object"] = eval_object(pairs, thresholds, a.c.jobs, &warnings);
        if (!a.per_image_out.empty()) {
            std::string lines;
            for (const auto& row : sections["object"]["per_image"]) lines += row.dump() + "\n";
            write_text_file(a.per_image_out, lines);
        }
        err << "eval object: " << pairs.size() << " page(s), mAP " << summary_number(sections["object"]["map"].get<double>())
            << "\n";
    } else {
        const TextMode mode = parse_text_mode(a.mode);
        const auto thresholds = parse_threshold_range(a.thresholds);
        config["mode"] = a.mode;
        if (mode == TextMode::line) config["thresholds"] = a.thresholds;
        sections["text"] = eval_text(pairs, mode, thresholds, a.c.jobs, &warnings);
        err << "eval text (" << a.mode << "): " << pairs.size() << " page(s), CER "
            << summary_number(sections["text"]["cer"].get<double>()) << "\n";
    }
    emit(a.c, dump(report("eval " + kind, &manifest, config, sections, warnings)), out);
    return 0;
}

// ---------------------------------------------------------------- confidence

struct ConfidenceArgs {
    Common c;
    std::string manifest;
    int ensemble_size = kDefaultEnsembleSize;
    std::string model;
    std::string targets;
    std::uint64_t seed = 0;
    ForestParams params;
    int bins = kDefaultFeatureBins;
};

int cmd_confidence(const std::string& kind, const ConfidenceArgs& a, std::ostream& out, std::ostream& err)
{
    const DatasetManifest manifest = load_manifest(a.manifest);
    const auto& entries = manifest.entries;
    if (a.ensemble_size < 2) throw ConfigError("--ensemble-size must be at least 2");
    if (a.bins < 1) throw ConfigError("--bins must be at least 1");

    if (kind == "rfr-train") {
        if (a.model.empty()) throw ConfigError("rfr-train needs --model");
        std::map<std::string, double> given;
        if (!a.targets.empty()) given = read_metrics(a.targets);
        std::vector<std::vector<double>> features(entries.size());
        std::vector<double> targets(entries.size());
        std::vector<Warnings> w(entries.size());
        const auto thresholds = default_iou_thresholds();
        parallel_for(entries.size(), a.c.jobs, [&](std::size_t i) {
            PagePair pair;
            pair.image_id = entries[i].image_id;
            pair.pred = load_page(entries[i].pred_path, &w[i]);
            features[i] = page_features(pair.pred, a.bins);
            if (!a.targets.empty()) {
                const auto it = given.find(pair.image_id);
                if (it == given.end()) throw ValidationError("no target for image " + pair.image_id);
                targets[i] = it->second;
            } else {
                pair.gt = load_page(entries[i].gt_path, &w[i]);
                targets[i] = pair_image_map(pair, thresholds);
            }
        });
        const RegressionForest forest = RegressionForest::train(features, targets, a.params, a.seed, a.c.jobs);
        forest.save(a.model);
        double mean = 0.0, mse = 0.0;
        for (double t : targets) mean += t;
        mean /= static_cast<double>(std::max<std::size_t>(targets.size(), 1));
        for (std::size_t i = 0; i < targets.size(); ++i) {
            const double d = forest.predict_raw(features[i]) - targets[i];
            mse += d * d;
        }
        mse /= static_cast<double>(std::max<std::size_t>(targets.size(), 1));
        Json summary;
        summary["model"] = a.model;
        summary["samples"] = targets.size();
        summary["features"] = forest.num_features();
        summary["trees"] = forest.trees().size();
        summary["seed"] = a.seed;
        summary["target_mean"] = mean;
        summary["training_mse"] = mse;
        Warnings warnings;
        for (std::size_t i = 0; i < w.size(); ++i)
            for (const auto& msg : w[i]) warnings.push_back(entries[i].image_id + ": " + msg);
        summary["warnings"] = warnings;
        emit(a.c, dump(summary), out);
        err << "rfr-train: " << targets.size() << " page(s), training MSE " << summary_number(mse) << "\n";
        return 0;
    }

    Estimator estimator = Estimator::rfr;
    std::optional<RegressionForest> forest;
    ScoringOptions options;
    options.ensemble_size = a.ensemble_size;
    if (kind == "rfr-predict") {
        if (a.model.empty()) throw ConfigError("rfr-predict needs --model");
        forest = RegressionForest::load(a.model);
        if (forest->num_features() % kNumObjectFeatures != 0)
            throw FormatError("model feature count is not a multiple of " + std::to_string(kNumObjectFeatures));
        options.forest = &*forest;
        options.feature_bins = static_cast<int>(forest->num_features() / kNumObjectFeatures);
    } else {
        estimator = parse_estimator(kind);
    }
    std::vector<ConfidenceScore> scores(entries.size());
    std::vector<Warnings> w(entries.size());
    parallel_for(entries.size(), a.c.jobs,
                 [&](std::size_t i) { scores[i] = score_entry(entries[i], estimator, options, &w[i]); });
    std::string lines;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        lines += score_line(entries[i].image_id, to_string(estimator), scores[i]);
        for (const auto& msg : w[i]) err << "warning: " << entries[i].image_id << ": " << msg << "\n";
    }
    emit(a.c, lines, out);
    err << "confidence " << kind << ": scored " << entries.size() << " image(s)\n";
    return 0;
}

// ---------------------------------------------------------------- reject-curve

struct RejectArgs {
    Common c;
    std::string scores, metrics, thresholds;
    int bootstrap = 100;
    std::uint64_t seed = 0;
};

int cmd_reject(const RejectArgs& a, std::ostream& out, std::ostream& err)
{
    const ScoreFile sf = read_scores(a.scores);
    const auto metrics = read_metrics(a.metrics);
    const bool hib = sf.scores.front().score.higher_is_better;
    std::vector<double> s, m;
    for (const auto& img : sf.scores) {
        if (img.score.higher_is_better != hib) throw ValidationError(a.scores + " mixes score orientations");
        const auto it = metrics.find(img.image_id);
        if (it == metrics.end()) throw ValidationError("no metric for image " + img.image_id);
        s.push_back(img.score.value);
        m.push_back(it->second);
    }
    const auto thresholds = a.thresholds.empty() ? default_rejection_thresholds(hib) : parse_threshold_range(a.thresholds);
    const RejectionCurve curve = rejection_curve(s, m, hib, thresholds);
    Json section;
    section["estimator"] = sf.estimator;
    section["orientation"] = hib ? "higher_is_better" : "lower_is_better";
    section["images"] = s.size();
    Json points = Json::array();
    for (const auto& p : curve.points) {
        Json j;
        j["threshold"] = p.threshold;
        j["rejection_rate"] = p.rejection_rate;
        j["retained"] = p.retained;
        j["metric"] = p.metric;
        points.push_back(std::move(j));
    }
    section["points"] = std::move(points);
    if (a.bootstrap > 0) {
        const BootstrapBands bands = bootstrap_bands(s, m, hib, thresholds, a.bootstrap, a.seed);
        Json b;
        b["resamples"] = bands.resamples;
        b["seed"] = a.seed;
        b["percentiles"] = {10, 50, 90};
        Json bp = Json::array();
        for (const auto& p : bands.points) {
            Json j;
            j["threshold"] = p.threshold;
            j["samples"] = p.samples;
            j["rejection_rate"] = p.rejection_rate;
            j["p10"] = p.p10;
            j["median"] = p.median;
            j["p90"] = p.p90;
            bp.push_back(std::move(j));
        }
        b["points"] = std::move(bp);
        section["bootstrap"] = std::move(b);
    }
    Json config;
    config["scores"] = a.scores;
    config["metrics"] = a.metrics;
    config["thresholds"] = thresholds;
    config["bootstrap"] = a.bootstrap;
    config["seed"] = a.seed;
    Json sections;
    sections["reject_curve"] = std::move(section);
    emit(a.c, dump(report("reject-curve", nullptr, config, sections, {})), out);
    err << "reject-curve: " << curve.points.size() << " point(s) over " << s.size() << " image(s)\n";
    return 0;
}

// ---------------------------------------------------------------- select

struct SelectArgs {
    Common c;
    std::string scores, strategy = "lowest";
    std::optional<double> threshold;
    std::optional<std::size_t> budget;
    std::uint64_t seed = 0;
    std::uint64_t iteration = 0;
};

int cmd_select(const SelectArgs& a, std::ostream& out, std::ostream& err)
{
    const ScoreFile sf = read_scores(a.scores);
    SelectionRequest req;
    req.strategy = parse_strategy(a.strategy);
    req.threshold = a.threshold;
    req.budget = a.budget;
    req.seed = a.seed;
    req.iteration = a.iteration;
    const SelectionOutcome o = select_images(sf.scores, req);
    Json j;
    j["iteration"] = o.iteration;
    j["strategy"] = to_string(o.strategy);
    j["mode"] = to_string(o.mode);
    j["threshold"] = o.threshold ? Json(*o.threshold) : Json(nullptr);
    j["budget"] = a.budget ? Json(*a.budget) : Json(nullptr);
    j["budget_consumed"] = o.budget_consumed;
    j["selected"] = o.selected;
    j["warnings"] = o.warnings;
    emit(a.c, dump(j), out);
    for (const auto& msg : o.warnings) err << "warning: " << msg << "\n";
    err << "select: " << o.selected.size() << " of " << sf.scores.size() << " image(s) (" << to_string(o.mode) << ")\n";
    return 0;
}

// ---------------------------------------------------------------- al-run

struct AlArgs {
    Common c;
    std::string replay;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
};

int cmd_al(CLI::App* sub, const AlArgs& a, std::ostream& out, std::ostream& err)
{
    if (!a.replay.empty()) {
        const ReplayResult r = replay_ledger(a.replay);
        Json j;
        j["ledger"] = a.replay;
        j["ok"] = r.ok;
        j["iterations"] = r.iterations;
        j["total_selected"] = r.total_selected;
        j["problems"] = r.problems;
        emit(a.c, dump(j), out);
        err << "al-run replay: " << r.iterations << " iteration(s), " << (r.ok ? "consistent" : "MISMATCH") << "\n";
        return r.ok ? 0 : 1;
    }
    if (a.c.config.empty()) throw CLI::RequiredError("--config or --replay");
    const fs::path cfg_path(a.c.config);
    AlConfig cfg = parse_al_config(read_text_file(cfg_path), cfg_path.parent_path());
    if (!a.out_dir.empty()) cfg.out_dir = a.out_dir;
    if (a.seed) cfg.seed = *a.seed;
    if (sub->get_option("--jobs")->count() > 0 || std::getenv("DOCDET_EVAL_JOBS")) cfg.jobs = a.c.jobs;
    const AlResult r = al_run(cfg);
    Json j;
    j["ledger"] = r.ledger_path.generic_string();
    j["iterations"] = r.iterations.size();
    j["selected"] = r.iterations.empty() ? 0 : r.iterations.back().cumulative;
    j["halted"] = r.halted;
    j["halt_reason"] = r.halt_reason;
    j["warnings"] = r.warnings;
    emit(a.c, dump(j), out);
    err << "al-run: " << r.iterations.size() << " iteration(s)";
    if (r.halted) err << "; halted: " << r.halt_reason;
    err << "\n";
    return r.halted ? 1 : 0;
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
    Common c;
    std::string out_dir;
    SynthConfig cfg;
    bool fixed_noise = false;
    bool no_probmaps = false;
};

int cmd_synth(const SynthArgs& a, std::ostream& out, std::ostream& err)
{
    SynthConfig cfg = a.cfg;
    cfg.vary_noise = !a.fixed_noise;
    cfg.write_probmaps = !a.no_probmaps;
    const SynthSummary s = generate_synthetic(cfg, a.out_dir, a.c.jobs);
    double mean = 0.0;
    for (double v : s.true_map) mean += v;
    if (!s.true_map.empty()) mean /= static_cast<double>(s.true_map.size());
    Json j;
    j["manifest"] = s.manifest_path.generic_string();
    j["truth"] = s.truth_path.generic_string();
    j["pages"] = s.true_map.size();
    j["seed"] = cfg.seed;
    j["mean_true_map"] = mean;
    emit(a.c, dump(j), out);
    err << "synth: " << s.true_map.size() << " page(s) in " << a.out_dir << ", mean true mAP " << summary_number(mean)
        << "\n";
    return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Document layout detection evaluation, confidence estimation and active-learning selection",
                 "docdet"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(DOCDET_VERSION));
    const unsigned default_job_count = default_jobs();

    NormalizeArgs na;
    na.c.jobs = default_job_count;
    auto* normalize = app.add_subcommand("normalize", "Rescale pages and uniformize overlapping annotations");
    add_common(normalize, na.c);
    normalize->add_option("--manifest", na.manifest, "Dataset manifest (JSON lines)")->required();
    normalize->add_option("--out-dir", na.out_dir, "Directory for label PNGs and sidecars")->required();
    normalize->add_option("--long-side", na.cfg.target_long_side, "Working resolution of the longer side")->capture_default_str();
    normalize->add_option("--overlap-threshold", na.cfg.overlap_ratio_threshold, "Overlap ratio at which a pair is kept")->capture_default_str();
    normalize->add_option("--erosion", na.cfg.erosion_radius, "Erosion radius for touching objects")->capture_default_str();
    normalize->add_flag("--keep-if-either", na.cfg.keep_if_either, "Keep a pair when either ratio reaches the threshold");
    normalize->add_option("--source", na.source, "Which pages to normalize")->check(CLI::IsMember({"gt", "pred"}))->capture_default_str();

    ExtractArgs xa;
    xa.c.jobs = default_job_count;
    auto* extract = app.add_subcommand("extract", "Turn probability maps into predicted objects");
    add_common(extract, xa.c);
    extract->add_option("--manifest", xa.manifest, "Dataset manifest with probmap_path entries")->required();
    extract->add_option("--out-dir", xa.out_dir, "Directory for predicted pages and the new manifest")->required();
    extract->add_option("--threshold", xa.cfg.threshold, "Probability threshold t")->capture_default_str();
    extract->add_option("--min-cc", xa.cfg.min_cc, "Minimum component size in pixels")->capture_default_str();
    extract->add_option("--connectivity", xa.cfg.connectivity, "4 or 8")->capture_default_str();

    EvalArgs ea;
    ea.c.jobs = default_job_count;
    auto* eval = app.add_subcommand("eval", "Evaluate predictions against ground truth");
    eval->require_subcommand(1);
    std::map<std::string, CLI::App*> eval_subs;
    for (const char* kind : {"pixel", "object", "text"}) {
        auto* s = eval->add_subcommand(kind, std::string(kind) + "-level metrics");
        add_common(s, ea.c);
        s->add_option("--manifest", ea.manifest, "Dataset manifest")->required();
        eval_subs[kind] = s;
    }
    eval_subs["pixel"]->add_option("--classes", ea.classes, "Number of object classes (default: from the manifest)");
    eval_subs["object"]->add_option("--thresholds", ea.thresholds, "IoU thresholds start:stop:step")->capture_default_str();
    eval_subs["object"]->add_option("--per-image-out", ea.per_image_out, "Write per-image mAP as JSON lines");
    eval_subs["text"]->add_option("--mode", ea.mode, "page or line")->check(CLI::IsMember({"page", "line"}))->capture_default_str();
    eval_subs["text"]->add_option("--thresholds", ea.thresholds, "IoU thresholds for line mode")->capture_default_str();

    ConfidenceArgs ca;
    ca.c.jobs = default_job_count;
    auto* confidence = app.add_subcommand("confidence", "Per-image confidence estimators");
    confidence->require_subcommand(1);
    std::map<std::string, CLI::App*> conf_subs;
    for (const char* kind : {"pce", "dov", "dap", "rfr-train", "rfr-predict"}) {
        auto* s = confidence->add_subcommand(kind);
        add_common(s, ca.c);
        s->add_option("--manifest", ca.manifest, "Dataset manifest")->required();
        conf_subs[kind] = s;
    }
    conf_subs["pce"]->description("Mean object probability");
    conf_subs["dov"]->description("Variance of object counts across the dropout ensemble");
    conf_subs["dap"]->description("Mean pairwise mAP across the dropout ensemble");
    conf_subs["rfr-train"]->description("Train the regression forest on object statistics");
    conf_subs["rfr-predict"]->description("Estimate mAP with a trained forest");
    for (const char* kind : {"pce", "dov", "dap"})
        conf_subs[kind]->add_option("--ensemble-size", ca.ensemble_size, "Members used per image")->capture_default_str();
    for (const char* kind : {"rfr-train", "rfr-predict"})
        conf_subs[kind]->add_option("--model", ca.model, "Forest model file")->required();
    auto* train = conf_subs["rfr-train"];
    train->add_option("--seed", ca.seed, "Random seed")->capture_default_str();
    train->add_option("--targets", ca.targets, "JSON lines of per-image targets (default: mAP against ground truth)");
    train->add_option("--trees", ca.params.num_trees, "Number of trees")->capture_default_str();
    train->add_option("--max-depth", ca.params.max_depth, "Tree depth limit, -1 for none")->capture_default_str();
    train->add_option("--min-samples-leaf", ca.params.min_samples_leaf, "Minimum samples per leaf")->capture_default_str();
    train->add_option("--bins", ca.bins, "Histogram bins per feature")->capture_default_str();

    RejectArgs ra;
    ra.c.jobs = default_job_count;
    auto* reject = app.add_subcommand("reject-curve", "Metric of the retained images versus rejection rate");
    add_common(reject, ra.c);
    reject->add_option("--scores", ra.scores, "Confidence scores (JSON lines)")->required();
    reject->add_option("--metrics", ra.metrics, "Per-image metric (JSON lines with image_id and map)")->required();
    reject->add_option("--thresholds", ra.thresholds, "Threshold sweep start:stop:step (default by orientation)");
    reject->add_option("--bootstrap", ra.bootstrap, "Bootstrap resamples, 0 to disable")->capture_default_str();
    reject->add_option("--seed", ra.seed, "Random seed")->capture_default_str();

    SelectArgs sa;
    sa.c.jobs = default_job_count;
    auto* select = app.add_subcommand("select", "Choose images for annotation from confidence scores");
    add_common(select, sa.c);
    select->add_option("--scores", sa.scores, "Confidence scores (JSON lines)")->required();
    select->add_option("--strategy", sa.strategy, "lowest, highest or random")
        ->check(CLI::IsMember({"lowest", "highest", "random"}))
        ->capture_default_str();
    auto* thr_opt = select->add_option("--threshold", sa.threshold, "Confidence threshold");
    auto* budget_opt = select->add_option("--budget", sa.budget, "Number of images");
    thr_opt->excludes(budget_opt);
    select->add_option("--seed", sa.seed, "Random seed")->capture_default_str();
    select->add_option("--iteration", sa.iteration, "Iteration index (selects the random sub-stream)")->capture_default_str();

    AlArgs aa;
    aa.c.jobs = default_job_count;
    auto* al = app.add_subcommand("al-run", "Run or replay an active-learning loop");
    al->add_option("--config", aa.c.config, "Active-learning configuration (JSON)");
    al->add_option("--out", aa.c.out, "Write the JSON summary here instead of stdout");
    al->add_option("--jobs", aa.c.jobs, "Worker threads for scoring")->check(CLI::Range(1u, 1024u));
    al->add_option("--replay", aa.replay, "Verify a ledger instead of running");
    al->add_option("--out-dir", aa.out_dir, "Override the configured output directory");
    al->add_option("--seed", aa.seed, "Override the configured seed");

    SynthArgs ya;
    ya.c.jobs = default_job_count;
    auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset with known per-image mAP");
    add_common(synth, ya.c);
    synth->add_option("--out-dir", ya.out_dir, "Output directory")->required();
    synth->add_option("--pages", ya.cfg.pages, "Number of pages")->capture_default_str();
    synth->add_option("--width", ya.cfg.width, "Page width")->capture_default_str();
    synth->add_option("--height", ya.cfg.height, "Page height")->capture_default_str();
    synth->add_option("--min-objects", ya.cfg.min_objects, "Fewest objects per page")->capture_default_str();
    synth->add_option("--max-objects", ya.cfg.max_objects, "Most objects per page")->capture_default_str();
    synth->add_option("--classes", ya.cfg.num_classes, "Object classes")->capture_default_str();
    synth->add_option("--jitter", ya.cfg.jitter, "Largest corner displacement in pixels")->capture_default_str();
    synth->add_option("--drop", ya.cfg.drop_probability, "Probability of missing an object")->capture_default_str();
    synth->add_option("--spurious", ya.cfg.spurious_rate, "Spurious detections per object")->capture_default_str();
    synth->add_option("--text-mutation", ya.cfg.text_mutation, "Per-character substitution probability")->capture_default_str();
    synth->add_option("--epsilon", ya.cfg.epsilon, "Background probability inside predicted objects")->capture_default_str();
    synth->add_option("--ensemble-size", ya.cfg.ensemble_size, "Dropout ensemble members per page")->capture_default_str();
    synth->add_flag("--fixed-noise", ya.fixed_noise, "Use the same noise level on every page");
    synth->add_flag("--no-probmaps", ya.no_probmaps, "Skip probability maps");
    synth->add_option("--seed", ya.cfg.seed, "Random seed")->capture_default_str();

    if (!args.empty() && !args.front().starts_with("-")) {
        const auto subs = app.get_subcommands([](CLI::App*) { return true; });
        if (std::none_of(subs.begin(), subs.end(), [&](CLI::App* s) { return s->get_name() == args.front(); })) {
            err << "error: unknown subcommand \"" << args.front() << "\"\n\n" << app.help();
            return 2;
        }
    }
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::CallForVersion&) {
        out << DOCDET_VERSION << "\n";
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return 2;
    }

    try {
        if (normalize->parsed()) {
            apply_config(normalize, na.c.config);
            return cmd_normalize(na, out, err);
        }
        if (extract->parsed()) {
            apply_config(extract, xa.c.config);
            return cmd_extract(xa, out, err);
        }
        for (const auto& [kind, s] : eval_subs) {
            if (!s->parsed()) continue;
            apply_config(s, ea.c.config);
            return cmd_eval(kind, ea, out, err);
        }
        for (const auto& [kind, s] : conf_subs) {
            if (!s->parsed()) continue;
            apply_config(s, ca.c.config);
            return cmd_confidence(kind, ca, out, err);
        }
        if (reject->parsed()) {
            apply_config(reject, ra.c.config);
            return cmd_reject(ra, out, err);
        }
        if (select->parsed()) {
            apply_config(select, sa.c.config);
            if (sa.threshold.has_value() == sa.budget.has_value()) {
                err << "error: select needs exactly one of --threshold or --budget\n\n" << select->help();
                return 2;
            }
            return cmd_select(sa, out, err);
        }
        if (al->parsed()) return cmd_al(al, aa, out, err);
        if (synth->parsed()) {
            apply_config(synth, ya.c.config);
            return cmd_synth(ya, out, err);
        }
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const ParseError& e) {
        err << "error: " << e.what() << " (byte offset " << e.byte_offset() << ")\n";
        return 1;
    } catch (const LengthError& e) {
        err << "error: " << e.what() << " (expected " << e.expected() << " bytes, got " << e.actual() << ")\n";
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    err << app.help();
    return 2;
}

}  // namespace docdet
