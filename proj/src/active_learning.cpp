#include "docdet/active_learning.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <sys/wait.h>

#include "docdet/parallel.hpp"

namespace docdet {

namespace fs = std::filesystem;

const char* to_string(Schedule s)
{
    switch (s) {
    case Schedule::fixed: return "fixed";
    case Schedule::quantile: return "quantile";
    case Schedule::budget: return "budget";
    }
    return "?";
}

Schedule parse_schedule(const std::string& name)
{
    if (name == "fixed") return Schedule::fixed;
    if (name == "quantile") return Schedule::quantile;
    if (name == "budget") return Schedule::budget;
    throw ConfigError("unknown schedule \"" + name + "\" (expected fixed, quantile or budget)");
}

AlConfig parse_al_config(std::string_view json_text, const fs::path& base_dir)
{
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(json_text.begin(), json_text.end());
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("malformed al-run config: ") + e.what(), e.byte);
    }
    if (!doc.is_object()) throw ConfigError("al-run config must be a JSON object");
    static const std::set<std::string> known{"manifest",       "scorer",   "model",          "ensemble_size",
                                             "strategy",       "schedule", "threshold",      "quantile",
                                             "per_iteration",  "max_iterations", "total_budget", "trainer_command",
                                             "out_dir",        "seed",     "jobs"};
    for (const auto& [key, _] : doc.items())
        if (!known.count(key)) throw ConfigError("unknown al-run config key \"" + key + "\"");
    auto path = [&](const std::string& p) {
        fs::path r(p);
        return r.is_relative() ? (base_dir / r).lexically_normal() : r;
    };
    try {
        AlConfig cfg;
        if (!doc.contains("manifest")) throw ConfigError("al-run config needs \"manifest\"");
        cfg.manifest = path(doc.at("manifest").get<std::string>());
        if (doc.contains("scorer")) cfg.scorer = doc.at("scorer").get<std::string>();
        if (doc.contains("model")) cfg.model = path(doc.at("model").get<std::string>());
        if (doc.contains("ensemble_size")) cfg.ensemble_size = doc.at("ensemble_size").get<int>();
        if (doc.contains("strategy")) cfg.strategy = parse_strategy(doc.at("strategy").get<std::string>());
        if (doc.contains("schedule")) cfg.schedule = parse_schedule(doc.at("schedule").get<std::string>());
        if (doc.contains("threshold")) cfg.threshold = doc.at("threshold").get<double>();
        if (doc.contains("quantile")) cfg.quantile = doc.at("quantile").get<double>();
        if (doc.contains("per_iteration")) cfg.per_iteration = doc.at("per_iteration").get<std::size_t>();
        if (doc.contains("max_iterations")) cfg.max_iterations = doc.at("max_iterations").get<int>();
        if (doc.contains("total_budget") && !doc.at("total_budget").is_null())
            cfg.total_budget = doc.at("total_budget").get<std::size_t>();
        if (doc.contains("trainer_command")) cfg.trainer_command = doc.at("trainer_command").get<std::string>();
        if (doc.contains("out_dir")) cfg.out_dir = path(doc.at("out_dir").get<std::string>());
        if (doc.contains("seed")) cfg.seed = doc.at("seed").get<std::uint64_t>();
        if (doc.contains("jobs")) cfg.jobs = doc.at("jobs").get<unsigned>();
        return cfg;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("invalid al-run config: ") + e.what());
    }
}

namespace {

void validate(const AlConfig& cfg)
{
    if (cfg.max_iterations < 0) throw ConfigError("max_iterations must be non-negative");
    if (cfg.schedule == Schedule::quantile && !(cfg.quantile > 0.0 && cfg.quantile <= 1.0))
        throw ConfigError("quantile must lie in (0, 1]");
    if (cfg.ensemble_size < 2 && (cfg.scorer == "dap" || cfg.scorer == "dov"))
        throw ConfigError("ensemble_size must be at least 2");
}

std::string shell_quote(const std::string& s)
{
    std::string out = "'";
    for (char c : s) {
        if (c == '\'')
            out += "'\\''";
        else
            out += c;
    }
    return out + "'";
}

std::string substitute(std::string command, const std::string& key, const std::string& value)
{
    for (std::size_t pos = command.find(key); pos != std::string::npos; pos = command.find(key, pos + value.size()))
        command.replace(pos, key.size(), value);
    return command;
}

std::string iteration_dir(int iteration)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "iter_%03d", iteration);
    return buf;
}

Json config_json(const AlConfig& cfg)
{
    Json j;
    j["type"] = "config";
    j["scorer"] = cfg.scorer;
    j["strategy"] = to_string(cfg.strategy);
    j["schedule"] = to_string(cfg.schedule);
    j["threshold"] = cfg.threshold;
    j["quantile"] = cfg.quantile;
    j["per_iteration"] = cfg.per_iteration;
    j["max_iterations"] = cfg.max_iterations;
    j["total_budget"] = cfg.total_budget ? Json(*cfg.total_budget) : Json(nullptr);
    j["ensemble_size"] = cfg.ensemble_size;
    j["seed"] = cfg.seed;
    j["trainer_command"] = cfg.trainer_command;
    return j;
}

Json iteration_json(const AlIteration& it, const fs::path& out_dir)
{
    Json j;
    j["type"] = "iteration";
    j["iteration"] = it.iteration;
    j["pool_size"] = it.scores.size();
    Json scores = Json::array();
    for (const auto& s : it.scores) {
        Json row;
        row["image_id"] = s.image_id;
        row["value"] = s.score.value;
        row["higher_is_better"] = s.score.higher_is_better;
        scores.push_back(std::move(row));
    }
    j["scores"] = std::move(scores);
    j["strategy"] = to_string(it.outcome.strategy);
    j["threshold"] = it.outcome.threshold ? Json(*it.outcome.threshold) : Json(nullptr);
    j["mode"] = to_string(it.outcome.mode);
    j["selected"] = it.outcome.selected;
    j["truncated"] = it.truncated;
    j["budget_consumed"] = it.outcome.budget_consumed;
    j["cumulative"] = it.cumulative;
    j["selection_manifest"] = it.selection_manifest.lexically_relative(out_dir).generic_string();
    j["trainer_exit"] = it.trainer_exit ? Json(*it.trainer_exit) : Json(nullptr);
    return j;
}

AlConfig config_from_ledger(const nlohmann::json& j)
{
    AlConfig cfg;
    cfg.scorer = j.at("scorer").get<std::string>();
    cfg.strategy = parse_strategy(j.at("strategy").get<std::string>());
    cfg.schedule = parse_schedule(j.at("schedule").get<std::string>());
    cfg.threshold = j.at("threshold").get<double>();
    cfg.quantile = j.at("quantile").get<double>();
    cfg.per_iteration = j.at("per_iteration").get<std::size_t>();
    cfg.max_iterations = j.at("max_iterations").get<int>();
    if (!j.at("total_budget").is_null()) cfg.total_budget = j.at("total_budget").get<std::size_t>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
    return cfg;
}

/// Truncates the selection to the remaining budget; true when something was cut.
bool apply_budget(const AlConfig& cfg, SelectionOutcome& outcome, std::size_t consumed)
{
    if (!cfg.total_budget) return false;
    const std::size_t remaining = *cfg.total_budget > consumed ? *cfg.total_budget - consumed : 0;
    if (outcome.selected.size() <= remaining) return false;
    outcome.selected.resize(remaining);
    outcome.budget_consumed = remaining;
    return true;
}

}  // namespace

SelectionRequest schedule_request(const AlConfig& cfg, std::span<const ScoredImage> pool, int iteration)
{
    SelectionRequest req;
    req.strategy = cfg.strategy;
    req.seed = cfg.seed;
    req.iteration = static_cast<std::uint64_t>(iteration);
    switch (cfg.schedule) {
    case Schedule::fixed: req.threshold = cfg.threshold; break;
    case Schedule::budget: req.budget = cfg.per_iteration; break;
    case Schedule::quantile: {
        // Threshold halfway between the k-th and (k+1)-th image on the
        // strategy's side of the ranking, k = ceil(q * pool).
        const bool hib = pool.front().score.higher_is_better;
        std::vector<double> oriented;
        for (const auto& s : pool) oriented.push_back(s.score.oriented());
        std::sort(oriented.begin(), oriented.end());
        const std::size_t n = oriented.size();
        const auto k = std::min(n, static_cast<std::size_t>(std::ceil(cfg.quantile * static_cast<double>(n) - 1e-9)));
        double t;
        if (cfg.strategy == Strategy::highest) {
            // highest keeps oriented >= t
            if (k == 0) t = oriented.back() + 1.0;
            else if (k == n) t = oriented.front();
            else t = (oriented[n - k] + oriented[n - k - 1]) / 2.0;
        } else {
            // lowest keeps oriented < t
            if (k == 0) t = oriented.front();
            else if (k == n) t = oriented.back() + 1.0;
            else t = (oriented[k - 1] + oriented[k]) / 2.0;
        }
        req.threshold = hib ? t : -t;
        break;
    }
    }
    return req;
}

AlResult al_run(const AlConfig& cfg, Scorer scorer)
{
    validate(cfg);
    const DatasetManifest manifest = load_manifest(cfg.manifest);
    std::optional<RegressionForest> forest;
    if (!scorer) {
        const Estimator estimator = parse_estimator(cfg.scorer);
        ScoringOptions options;
        options.ensemble_size = cfg.ensemble_size;
        if (estimator == Estimator::rfr) {
            forest = RegressionForest::load(cfg.model);
            options.forest = &*forest;
        }
        scorer = [estimator, options](const ManifestEntry& e, int, Warnings* w) {
            return score_entry(e, estimator, options, w);
        };
    }

    AlResult result;
    fs::create_directories(cfg.out_dir);
    result.ledger_path = cfg.out_dir / "ledger.jsonl";
    std::ofstream ledger(result.ledger_path, std::ios::binary | std::ios::trunc);
    if (!ledger) throw IoError("cannot write " + result.ledger_path.string());
    ledger << config_json(cfg).dump() << '\n' << std::flush;

    std::vector<std::size_t> pool(manifest.entries.size());
    for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;
    std::size_t consumed = 0;

    for (int iter = 0; iter < cfg.max_iterations; ++iter) {
        if (pool.empty()) {
            warn(&result.warnings, "pool exhausted after " + std::to_string(iter) + " iteration(s)");
            break;
        }
        if (cfg.total_budget && consumed >= *cfg.total_budget) break;

        AlIteration it;
        it.iteration = iter;
        it.scores.resize(pool.size());
        std::vector<Warnings> w(pool.size());
        parallel_for(pool.size(), cfg.jobs, [&](std::size_t k) {
            const ManifestEntry& e = manifest.entries[pool[k]];
            it.scores[k] = {e.image_id, scorer(e, iter, &w[k])};
        });
        for (std::size_t k = 0; k < pool.size(); ++k)
            for (auto& msg : w[k]) result.warnings.push_back(it.scores[k].image_id + ": " + msg);

        it.outcome = select_images(it.scores, schedule_request(cfg, it.scores, iter));
        for (auto& msg : it.outcome.warnings) result.warnings.push_back(msg);
        it.truncated = apply_budget(cfg, it.outcome, consumed);
        consumed += it.outcome.selected.size();
        it.cumulative = consumed;

        const std::set<std::string> chosen(it.outcome.selected.begin(), it.outcome.selected.end());
        DatasetManifest selection;
        selection.classes = manifest.classes;
        for (const auto& id : it.outcome.selected) {
            for (std::size_t idx : pool) {
                if (manifest.entries[idx].image_id != id) continue;
                ManifestEntry e = manifest.entries[idx];
                // Auto-labelled images take their prediction as ground truth.
                if (it.outcome.mode == AnnotationMode::auto_label) e.gt_path = e.pred_path;
                selection.entries.push_back(std::move(e));
            }
        }
        const fs::path dir = cfg.out_dir / iteration_dir(iter);
        it.selection_manifest = dir / "selection.jsonl";
        write_text_file(it.selection_manifest, manifest_to_jsonl(selection, dir));
        std::erase_if(pool, [&](std::size_t idx) { return chosen.count(manifest.entries[idx].image_id) > 0; });

        if (!cfg.trainer_command.empty()) {
            std::string command = substitute(cfg.trainer_command, "{manifest}", shell_quote(it.selection_manifest.string()));
            command = substitute(command, "{iteration}", std::to_string(iter));
            const int status = std::system(command.c_str());
            int code = status;
            if (status != -1 && WIFEXITED(status)) code = WEXITSTATUS(status);
            else if (status != -1 && WIFSIGNALED(status)) code = 128 + WTERMSIG(status);
            it.trainer_exit = code;
            if (code != 0) {
                result.halted = true;
                result.halt_reason = "trainer command exited with status " + std::to_string(code) + " at iteration " +
                                     std::to_string(iter);
            }
        }
        ledger << iteration_json(it, cfg.out_dir).dump() << '\n' << std::flush;
        result.iterations.push_back(std::move(it));
        if (result.halted) break;
    }
    if (!ledger) throw IoError("write failed for " + result.ledger_path.string());
    return result;
}

ReplayResult replay_ledger(const fs::path& ledger_path)
{
    ReplayResult r;
    std::istringstream in(read_text_file(ledger_path));
    std::string line;
    std::optional<AlConfig> cfg;
    std::vector<std::string> expected_pool;
    bool have_pool = false;
    std::set<std::string> ever_selected;
    std::size_t consumed = 0;
    int expected_iteration = 0;
    auto problem = [&](std::string msg) {
        r.ok = false;
        r.problems.push_back(std::move(msg));
    };
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError("ledger line " + std::to_string(line_no) + ": " + e.what(), e.byte);
        }
        try {
            const std::string type = j.at("type").get<std::string>();
            if (type == "config") {
                cfg = config_from_ledger(j);
                continue;
            }
            if (type != "iteration") throw FormatError("ledger line " + std::to_string(line_no) + ": unknown entry type");
            if (!cfg) throw FormatError("ledger does not start with a config entry");
            const int iter = j.at("iteration").get<int>();
            const std::string where = "iteration " + std::to_string(iter) + ": ";
            if (iter != expected_iteration) problem(where + "out of sequence");
            ++expected_iteration;

            std::vector<ScoredImage> pool;
            std::vector<std::string> ids;
            for (const auto& s : j.at("scores")) {
                ScoredImage img;
                img.image_id = s.at("image_id").get<std::string>();
                img.score.value = s.at("value").get<double>();
                img.score.higher_is_better = s.at("higher_is_better").get<bool>();
                ids.push_back(img.image_id);
                pool.push_back(std::move(img));
            }
            if (have_pool && ids != expected_pool) problem(where + "pool differs from the previous pool minus its selection");
            SelectionOutcome outcome = select_images(pool, schedule_request(*cfg, pool, iter));
            const bool truncated = apply_budget(*cfg, outcome, consumed);
            const auto recorded = j.at("selected").get<std::vector<std::string>>();
            if (outcome.selected != recorded) problem(where + "selection does not replay");
            if (truncated != j.at("truncated").get<bool>()) problem(where + "truncation flag does not replay");
            for (const auto& id : recorded) {
                if (std::find(ids.begin(), ids.end(), id) == ids.end()) problem(where + id + " is not in the pool");
                if (!ever_selected.insert(id).second) problem(where + id + " selected twice");
            }
            consumed += recorded.size();
            if (j.at("cumulative").get<std::size_t>() != consumed) problem(where + "cumulative count mismatch");
            if (cfg->total_budget && consumed > *cfg->total_budget) problem(where + "budget exceeded");
            expected_pool.clear();
            for (const auto& id : ids)
                if (std::find(recorded.begin(), recorded.end(), id) == recorded.end()) expected_pool.push_back(id);
            have_pool = true;
            ++r.iterations;
        } catch (const nlohmann::json::exception& e) {
            throw FormatError("ledger line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    if (!cfg) throw FormatError("ledger has no config entry");
    r.total_selected = consumed;
    return r;
}

}  // namespace docdet
