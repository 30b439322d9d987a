#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "docdet/manifest.hpp"
#include "docdet/pipeline.hpp"
#include "docdet/selection.hpp"

namespace docdet {

/// How many images each iteration takes: everything past a fixed
/// threshold, a fixed fraction of the current pool (the threshold then moves
/// with the score distribution), or a fixed count.
enum class Schedule { fixed, quantile, budget };

const char* to_string(Schedule s);
Schedule parse_schedule(const std::string& name);

struct AlConfig {
    std::filesystem::path manifest;
    std::string scorer = "pce";
    std::filesystem::path model;  ///< forest file for the rfr scorer
    int ensemble_size = kDefaultEnsembleSize;
    Strategy strategy = Strategy::lowest;
    Schedule schedule = Schedule::budget;
    double threshold = 0.5;
    double quantile = 0.1;
    std::size_t per_iteration = 10;
    int max_iterations = 5;
    std::optional<std::size_t> total_budget;
    /// Shell command run after each selection; {manifest} and {iteration}
    /// are substituted. Empty for none.
    std::string trainer_command;
    std::filesystem::path out_dir = "al_run";
    std::uint64_t seed = 0;
    unsigned jobs = 1;
};

/// Reads a JSON config object; relative paths resolve against `base_dir`.
AlConfig parse_al_config(std::string_view json_text, const std::filesystem::path& base_dir);

using Scorer = std::function<ConfidenceScore(const ManifestEntry&, int iteration, Warnings*)>;

struct AlIteration {
    int iteration = 0;
    std::vector<ScoredImage> scores;
    SelectionOutcome outcome;
    bool truncated = false;
    std::size_t cumulative = 0;
    std::filesystem::path selection_manifest;
    std::optional<int> trainer_exit;
};

struct AlResult {
    std::vector<AlIteration> iterations;
    std::filesystem::path ledger_path;
    bool halted = false;
    std::string halt_reason;
    Warnings warnings;
};

/// The selection request an iteration issues for its pool.
SelectionRequest schedule_request(const AlConfig& cfg, std::span<const ScoredImage> pool, int iteration);

/// Runs the loop, writing ledger.jsonl and iter_NNN/selection.jsonl under
/// out_dir. Without an explicit scorer, cfg.scorer names a built-in
/// estimator. A failing trainer command stops the run after its ledger
/// entry has been written.
AlResult al_run(const AlConfig& cfg, Scorer scorer = {});

struct ReplayResult {
    bool ok = true;
    std::size_t iterations = 0;
    std::size_t total_selected = 0;
    std::vector<std::string> problems;
};

/// Recomputes every selection from the scores stored in the ledger and
/// checks it against the recorded one, along with pool bookkeeping and
/// the budget.
ReplayResult replay_ledger(const std::filesystem::path& ledger_path);

}  // namespace docdet
