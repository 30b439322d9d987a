#include <doctest.h>

#include <algorithm>
#include <set>

#include "docdet/active_learning.hpp"
#include "docdet/synth.hpp"
#include "test_util.hpp"

using namespace docdet;

namespace {

struct Fixture {
    testutil::TempDir tmp;
    std::filesystem::path manifest;

    explicit Fixture(int pages = 30)
    {
        SynthConfig cfg;
        cfg.pages = pages;
        cfg.width = 96;
        cfg.height = 128;
        cfg.min_objects = 1;
        cfg.max_objects = 3;
        cfg.seed = 4;
        manifest = generate_synthetic(cfg, tmp / "data").manifest_path;
    }

    AlConfig config(const std::string& run) const
    {
        AlConfig cfg;
        cfg.manifest = manifest;
        cfg.out_dir = tmp / run;
        cfg.per_iteration = 4;
        return cfg;
    }
};

std::size_t ledger_lines(const std::filesystem::path& p)
{
    const std::string s = read_text_file(p);
    return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

}  // namespace

TEST_CASE("zero iterations leave only the config line")
{
    Fixture f;
    AlConfig cfg = f.config("none");
    cfg.max_iterations = 0;
    const AlResult r = al_run(cfg);
    CHECK(r.iterations.empty());
    CHECK(ledger_lines(r.ledger_path) == 1);
    const ReplayResult rep = replay_ledger(r.ledger_path);
    CHECK(rep.ok);
    CHECK(rep.iterations == 0);
}

TEST_CASE("budget loop removes selected images from the pool")
{
    Fixture f;
    const AlResult r = al_run(f.config("budget"));
    REQUIRE(r.iterations.size() == 5);
    std::set<std::string> seen;
    for (std::size_t i = 0; i < r.iterations.size(); ++i) {
        const auto& it = r.iterations[i];
        CHECK(it.scores.size() == 30 - 4 * i);
        CHECK(it.outcome.selected.size() == 4);
        for (const auto& id : it.outcome.selected) CHECK(seen.insert(id).second);
        CHECK(std::filesystem::exists(it.selection_manifest));
        CHECK(load_manifest(it.selection_manifest).entries.size() == 4);
    }
    CHECK(replay_ledger(r.ledger_path).ok);
}

TEST_CASE("threshold selection is truncated to the total budget")
{
    Fixture f;
    AlConfig cfg = f.config("cap");
    cfg.schedule = Schedule::fixed;
    cfg.threshold = 1.1;
    cfg.total_budget = 7;
    const AlResult r = al_run(cfg);
    REQUIRE_FALSE(r.iterations.empty());
    CHECK(r.iterations[0].truncated);
    CHECK(r.iterations.back().cumulative == 7);
    std::size_t total = 0;
    for (const auto& it : r.iterations) total += it.outcome.selected.size();
    CHECK(total == 7);
    const ReplayResult rep = replay_ledger(r.ledger_path);
    CHECK(rep.ok);
    CHECK(rep.total_selected == 7);
}

TEST_CASE("quantile schedule takes a fraction of the pool")
{
    Fixture f;
    AlConfig cfg = f.config("quantile");
    cfg.schedule = Schedule::quantile;
    cfg.quantile = 0.2;
    cfg.max_iterations = 3;
    const AlResult r = al_run(cfg, [](const ManifestEntry& e, int, Warnings*) {
        ConfidenceScore s;
        s.value = static_cast<double>(std::stoi(e.image_id.substr(5))) / 100.0;
        return s;
    });
    REQUIRE(r.iterations.size() == 3);
    CHECK(r.iterations[0].outcome.selected.size() == 6);
    CHECK(r.iterations[0].outcome.selected.front() == "page_0000");
    CHECK(r.iterations[1].outcome.selected.size() == 5);
    CHECK(replay_ledger(r.ledger_path).ok);
}

TEST_CASE("highest strategy auto-labels with the prediction")
{
    Fixture f;
    AlConfig cfg = f.config("auto");
    cfg.strategy = Strategy::highest;
    cfg.max_iterations = 1;
    const AlResult r = al_run(cfg);
    const DatasetManifest sel = load_manifest(r.iterations[0].selection_manifest);
    for (const auto& e : sel.entries) CHECK(e.gt_path == e.pred_path);
}

TEST_CASE("seeded random runs repeat within a seed and differ across seeds")
{
    Fixture f;
    std::vector<std::string> ledgers;
    for (int rep = 0; rep < 5; ++rep) {
        AlConfig cfg = f.config("rand" + std::to_string(rep));
        cfg.strategy = Strategy::random;
        cfg.seed = 17;
        ledgers.push_back(read_text_file(al_run(cfg).ledger_path));
    }
    for (const auto& l : ledgers) CHECK(l == ledgers.front());
    AlConfig other = f.config("rand_other");
    other.strategy = Strategy::random;
    other.seed = 18;
    const std::string diff = read_text_file(al_run(other).ledger_path);
    CHECK(diff != ledgers.front());
}

TEST_CASE("a failing trainer halts the run with the ledger intact")
{
    Fixture f;
    AlConfig cfg = f.config("fail");
    cfg.trainer_command = "test {iteration} -lt 2";
    const AlResult r = al_run(cfg);
    CHECK(r.halted);
    REQUIRE(r.iterations.size() == 3);
    CHECK(r.iterations[2].trainer_exit == 1);
    CHECK(ledger_lines(r.ledger_path) == 4);
    const ReplayResult rep = replay_ledger(r.ledger_path);
    CHECK(rep.ok);
    CHECK(rep.iterations == 3);
}

TEST_CASE("the trainer sees the selection manifest")
{
    Fixture f;
    AlConfig cfg = f.config("trainer");
    cfg.max_iterations = 2;
    cfg.trainer_command = "cp {manifest} " + (f.tmp / "seen_{iteration}.jsonl").string();
    const AlResult r = al_run(cfg);
    CHECK_FALSE(r.halted);
    CHECK(read_text_file(f.tmp / "seen_1.jsonl") == read_text_file(r.iterations[1].selection_manifest));
}

TEST_CASE("tampered ledgers fail replay")
{
    Fixture f;
    const AlResult r = al_run(f.config("tamper"));
    std::string text = read_text_file(r.ledger_path);
    const std::string id = r.iterations[0].outcome.selected[0];
    const std::string other = r.iterations[0].outcome.selected[0] == "page_0000" ? "page_0001" : "page_0000";
    const auto pos = text.find("\"selected\":[\"" + id);
    REQUIRE(pos != std::string::npos);
    text.replace(pos + 13, id.size(), other);
    write_text_file(f.tmp / "bad.jsonl", text);
    CHECK_FALSE(replay_ledger(f.tmp / "bad.jsonl").ok);
}

TEST_CASE("config parsing")
{
    const AlConfig cfg = parse_al_config(R"({"manifest":"m.jsonl","strategy":"random","schedule":"fixed",
        "threshold":0.3,"total_budget":12,"seed":5})", "/base");
    CHECK(cfg.manifest == std::filesystem::path("/base/m.jsonl"));
    CHECK(cfg.strategy == Strategy::random);
    CHECK(cfg.schedule == Schedule::fixed);
    CHECK(cfg.total_budget == 12u);
    CHECK_THROWS_AS(parse_al_config(R"({"manifest":"m","bogus":1})", "."), ConfigError);
    CHECK_THROWS_AS(parse_al_config(R"({"strategy":"lowest"})", "."), ConfigError);
    CHECK_THROWS_AS(parse_al_config("{", "."), ParseError);
}
