// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>

#include "gar/error.hpp"
#include "gar/harness.hpp"
#include "harness_fixture.hpp"

using namespace gar;
namespace fs = std::filesystem;

namespace {

RunReport run_json(const json& doc) { return run_benchmark(run_config_from_json(doc)); }

int cli(const std::string& args) {
    const std::string cmd = std::string(GAR_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

json record(const std::string& id, bool success, double reward, std::uint64_t gen, std::uint64_t assist, std::uint64_t wall_ms,
            std::size_t rollbacks, json samples = json::array()) {
    json rec{{"schema", 1},
             {"task_id", id},
             {"env", "game24"},
             {"success", success},
             {"reward", reward},
             {"total_gen_tokens", gen},
             {"total_assist_tokens", assist},
             {"rollbacks", json::array()},
             {"feedback_samples", samples},
             {"timing", {{"timestamp", "2024-01-01T00:00:00Z"}, {"wall_time_ms", wall_ms}, {"step_latency_ms", json::array()}}}};
    for (std::size_t i = 0; i < rollbacks; ++i) rec["rollbacks"].push_back(json{{"from_length", 3}, {"to_length", 1}});
    return rec;
}

void write_records(const fs::path& dir, const std::vector<json>& recs, const std::string& extra = {}) {
    std::ofstream out(dir / "episodes.jsonl");
    for (const auto& r : recs) out << r.dump() << '\n';
    out << extra;
}

std::vector<json> fixture_records() {
    return {record("A", false, 0.0, 100, 50, 1000, 1,
                   json::array({json{{"confidence", 0.95}, {"accepted", true}}, json{{"confidence", 0.9}, {"accepted", false}}})),
            record("A", true, 1.0, 200, 0, 2000, 0), record("B", false, 0.5, 300, 100, 500, 0)};
}

}  // namespace

TEST(Aggregate, HandComputedFixture) {
    auto r = aggregate_records(fixture_records());
    EXPECT_EQ(r.episodes, 2u);
    EXPECT_EQ(r.trials, 3u);
    EXPECT_EQ(r.successes, 1u);
    EXPECT_EQ(r.failures, 0u);
    EXPECT_DOUBLE_EQ(r.success_rate, 50.0);
    EXPECT_DOUBLE_EQ(r.mean_reward, 75.0);       // (1 + 0.5) / 2
    EXPECT_DOUBLE_EQ(r.avg_tokens_k, 0.375);     // (350 + 400) / 2 / 1000
    EXPECT_DOUBLE_EQ(r.avg_time_s, 1.75);        // (3000 + 500) / 2 / 1000
    EXPECT_EQ(r.total_gen_tokens, 600u);
    EXPECT_EQ(r.total_assist_tokens, 150u);
    EXPECT_EQ(r.rollback_histogram, (std::map<std::size_t, std::size_t>{{0, 1}, {1, 1}}));
    EXPECT_EQ(r.feedback_count, 2u);
    EXPECT_EQ(r.discarded_count, 1u);
    EXPECT_DOUBLE_EQ(r.discard_rate, 0.5);
}

TEST(Aggregate, ErroredTasksCountOnlyTowardSuccessRate) {
    auto recs = fixture_records();
    auto failed = record("C", false, 0.0, 40, 0, 10, 0);
    failed["error"] = "remote peer closed";
    recs.push_back(failed);
    auto r = aggregate_records(recs);
    EXPECT_EQ(r.episodes, 3u);
    EXPECT_EQ(r.failures, 1u);
    EXPECT_DOUBLE_EQ(r.success_rate, 100.0 / 3.0);
    EXPECT_DOUBLE_EQ(r.mean_reward, 75.0);
    EXPECT_DOUBLE_EQ(r.avg_tokens_k, 0.375);
    EXPECT_EQ(r.total_gen_tokens, 640u);
}

TEST(Aggregate, CorruptLinesAreSkippedAndCounted) {
    test::TempDir dir;
    write_records(dir.path(), fixture_records(), "{\"task_id\": \"A\", truncated\n[1, 2]\n\n");
    auto r = report_from_dir(dir.path());
    EXPECT_EQ(r.corrupt_lines, 2u);
    auto clean = aggregate_records(fixture_records());
    clean.corrupt_lines = 2;
    EXPECT_EQ(r, clean);
    EXPECT_NE(render_report(r).find("corrupt lines       2"), std::string::npos);
}

TEST(Aggregate, EmptyAndMissingDirectories) {
    test::TempDir dir;
    EXPECT_EQ(report_from_dir(dir.path()).episodes, 0u);
    EXPECT_THROW(report_from_dir(dir / "nope"), ConfigError);
    EXPECT_EQ(cli("report " + dir.path().string()), 1);
    EXPECT_EQ(cli("report " + (dir / "nope").string()), 2);
}

TEST(Harness, DeterministicAcrossRunsAndWorkerCounts) {
    test::TempDir dir;
    auto a = run_json(test::scripted_run_config(dir.path(), dir / "a", 1));
    auto b = run_json(test::scripted_run_config(dir.path(), dir / "b", 1));
    auto c = run_json(test::scripted_run_config(dir.path(), dir / "c", 4));
    EXPECT_EQ(a.episodes, 16u);
    EXPECT_EQ(test::timeless(a), test::timeless(b));
    EXPECT_EQ(test::timeless(a), test::timeless(c));
    const auto recs = test::stripped_records(dir / "a");
    EXPECT_EQ(recs, test::stripped_records(dir / "b"));
    EXPECT_EQ(recs, test::stripped_records(dir / "c"));
    EXPECT_EQ(test::read_file(dir / "a/confidence_samples.csv"), test::read_file(dir / "c/confidence_samples.csv"));

    // The scripted assistant exercises both accepted and discarded feedback.
    EXPECT_GT(a.feedback_count, a.discarded_count);
    EXPECT_GT(a.discarded_count, 0u);
    EXPECT_GT(a.rollback_histogram.rbegin()->first, 0u);
    for (const auto& rec : recs) {
        EXPECT_FALSE(rec.contains("wall_time_ms"));
        for (const auto& step : rec["trajectory"]["steps"]) EXPECT_FALSE(step.contains("latency_ms"));
    }
}

TEST(Harness, ReportIsAFixedPointOfTheLogs) {
    test::TempDir dir;
    auto live = run_json(test::scripted_run_config(dir.path(), dir / "run", 2));
    auto derived = report_from_dir(dir / "run");
    EXPECT_EQ(live, derived);
    EXPECT_EQ(json::parse(test::read_file(dir / "run/report.json")), report_to_json(derived));
    EXPECT_EQ(test::read_file(dir / "run/summary.txt"), render_report(derived));
    // Re-aggregating the derived report's inputs again changes nothing.
    EXPECT_EQ(report_from_dir(dir / "run"), derived);
    EXPECT_TRUE(fs::exists(dir / "run/events.jsonl"));
    auto cfg = json::parse(test::read_file(dir / "run/run_config.json"));
    EXPECT_EQ(run_config_to_json(run_config_from_json(cfg)), cfg);
}

TEST(Harness, TokenTotalsMatchTheRecords) {
    test::TempDir dir;
    auto report = run_json(test::scripted_run_config(dir.path(), dir / "run", 3));
    std::uint64_t gen = 0, assist = 0;
    for (const auto& line : test::stripped_records(dir / "run")) {
        gen += line["total_gen_tokens"].get<std::uint64_t>();
        assist += line["total_assist_tokens"].get<std::uint64_t>();
    }
    EXPECT_EQ(report.total_gen_tokens, gen);
    EXPECT_EQ(report.total_assist_tokens, assist);
    EXPECT_GT(gen, 0u);
}

TEST(Harness, LimitDrawsASeededSubset) {
    auto cfg = run_config_from_json(test::scripted_run_config("/tmp", "/tmp/unused", 1, 5));
    cfg.assistant.script = test::source_dir() / "data/scripts/confident_assistant.json";
    auto p1 = prepare_run(cfg);
    auto p2 = prepare_run(cfg);
    ASSERT_EQ(p1.plan.tasks.size(), 5u);
    auto all = load_tasks("game24", cfg.instances);
    std::vector<std::string> ids1, ids2;
    for (const auto& t : p1.plan.tasks) ids1.push_back(t.id);
    for (const auto& t : p2.plan.tasks) ids2.push_back(t.id);
    EXPECT_EQ(ids1, ids2);
    std::vector<std::string> all_ids;
    for (const auto& t : all) all_ids.push_back(t.id);
    auto pos = [&](const std::string& id) { return std::find(all_ids.begin(), all_ids.end(), id) - all_ids.begin(); };
    for (std::size_t i = 1; i < ids1.size(); ++i) EXPECT_LT(pos(ids1[i - 1]), pos(ids1[i]));
    cfg.seed += 1;
    auto p3 = prepare_run(cfg);
    std::vector<std::string> ids3;
    for (const auto& t : p3.plan.tasks) ids3.push_back(t.id);
    EXPECT_NE(ids1, ids3);
    EXPECT_EQ(p1.plan.controller.max_env_steps, 12u);
    EXPECT_EQ(p1.plan.controller.wait_info_k, 0u);
}

TEST(Sweep, MonotoneWithExtremes) {
    std::vector<double> samples;
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> unit(0.5, 1.0);
    for (int i = 0; i < 500; ++i) samples.push_back(unit(rng));
    auto grid = default_theta_grid(samples);
    ASSERT_GE(grid.size(), 2u);
    EXPECT_LE(grid.front(), *std::min_element(samples.begin(), samples.end()));
    EXPECT_GE(grid.back(), *std::max_element(samples.begin(), samples.end()));
    auto rows = sweep_threshold(samples, grid);
    EXPECT_EQ(rows.front().accepted_count, samples.size());
    for (std::size_t i = 1; i < rows.size(); ++i) {
        EXPECT_LE(rows[i].accepted_count, rows[i - 1].accepted_count);
        const auto brute = std::count_if(samples.begin(), samples.end(), [&](double s) { return s >= rows[i].theta; });
        EXPECT_EQ(rows[i].accepted_count, static_cast<std::size_t>(brute));
    }
    EXPECT_EQ(sweep_threshold(samples, {1.01})[0].accepted_count, 0u);
    EXPECT_THROW(sweep_threshold({}, {0.5}), Error);
}

TEST(Sweep, ReplayRecordsSuccessPerThreshold) {
    test::TempDir dir;
    run_json(test::scripted_run_config(dir.path(), dir / "run", 2, 6));
    auto rows = sweep_threshold_replay(dir / "run", {0.5, 0.99});
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_TRUE(rows[0].success_rate && rows[1].success_rate);
    EXPECT_TRUE(fs::exists(dir / "run/sweep/theta_0.50/report.json"));
    EXPECT_TRUE(fs::exists(dir / "run/sweep/theta_0.99/report.json"));
    EXPECT_GE(rows[0].accepted_count, rows[1].accepted_count);
    EXPECT_NE(render_sweep(rows).find("0.99"), std::string::npos);
    EXPECT_EQ(cli("sweep-theta " + (dir / "run").string() + " --thetas 0.9,0.95"), 0);
}

TEST(Config, RejectsBadInput) {
    EXPECT_THROW(run_config_from_json(json{{"bogus", 1}}), ConfigError);
    EXPECT_THROW(run_config_from_json(json{{"controller", {{"thetaa", 0.5}}}}), ConfigError);
    EXPECT_THROW(run_config_from_json(json{{"generator", {{"type", "magic"}}}}), ConfigError);
    EXPECT_THROW(run_config_from_json(json::array()), ConfigError);

    test::TempDir dir;
    auto base = test::scripted_run_config(dir.path(), dir / "out", 1);
    auto bad_env = base;
    bad_env["env"] = "chess";
    EXPECT_THROW(prepare_run(run_config_from_json(bad_env)), ConfigError);
    auto bad_theta = base;
    bad_theta["controller"]["theta"] = 1.5;
    EXPECT_THROW(prepare_run(run_config_from_json(bad_theta)), ConfigError);
    auto missing = base;
    missing["instances"] = (dir / "none.jsonl").string();
    EXPECT_THROW(prepare_run(run_config_from_json(missing)), ConfigError);
    auto no_parallel = base;
    no_parallel["parallel"] = 0;
    EXPECT_THROW(run_benchmark(run_config_from_json(no_parallel)), ConfigError);
}

TEST(Config, InstanceFilesAreValidated) {
    test::TempDir dir;
    test::write_file(dir / "dup.jsonl", "{\"id\": \"x\", \"numbers\": [1, 2, 3, 4]}\n{\"id\": \"x\", \"numbers\": [4, 3, 2, 1]}\n");
    EXPECT_THROW(load_tasks("game24", dir / "dup.jsonl"), ConfigError);
    test::write_file(dir / "remote.jsonl", "{\"id\": \"r1\", \"description\": \"\", \"config\": {}}\n");
    EXPECT_THROW(load_tasks("remote", dir / "remote.jsonl"), ConfigError);
    test::write_file(dir / "ok.jsonl", "{\"id\": \"r1\", \"description\": \"open the door\", \"config\": {\"room\": 2}}\n");
    auto tasks = load_tasks("remote", dir / "ok.jsonl");
    ASSERT_EQ(tasks.size(), 1u);
    EXPECT_EQ(tasks[0].env_config, (json{{"room", 2}}));
    auto shop = load_tasks("minishop", test::source_dir() / "data/minishop/goals.jsonl");
    EXPECT_EQ(shop.size(), 20u);
    EXPECT_EQ(shop[1].id, "ms-0002");
}

TEST(Cli, ExitCodes) {
    test::TempDir dir;
    std::ofstream(dir / "cfg.json") << test::scripted_run_config(dir.path(), dir / "run", 2, 4).dump();
    EXPECT_EQ(cli("run --config " + (dir / "cfg.json").string()), 0);
    EXPECT_TRUE(fs::exists(dir / "run/summary.txt"));
    EXPECT_EQ(cli("report " + (dir / "run").string() + " --json"), 0);
    EXPECT_EQ(cli("run --config " + (dir / "cfg.json").string() + " --theta abc"), 2);
    EXPECT_EQ(cli("run --config " + (dir / "cfg.json").string() + " --theta 3"), 2);
    EXPECT_EQ(cli("no-such-command"), 2);
    EXPECT_EQ(cli("gen-instances -n 3 --seed 4 -o " + (dir / "inst.jsonl").string()), 0);
    EXPECT_EQ(load_tasks("game24", dir / "inst.jsonl").size(), 3u);
    EXPECT_EQ(cli("validate-catalog " + (test::source_dir() / "data/minishop/catalog.json").string() + " --goals " +
                  (test::source_dir() / "data/minishop/goals.jsonl").string()),
              0);
    // Every episode failing on an unreachable remote is a run-level failure.
    EXPECT_EQ(cli("run --env remote --remote-tcp 127.0.0.1:1 --instances " +
                  (test::source_dir() / "tests/fixtures/remote_tasks.jsonl").string() + " --generator-script " +
                  (test::source_dir() / "data/scripts/confident_assistant.json").string() + " --assistant-script " +
                  (test::source_dir() / "data/scripts/confident_assistant.json").string() + " -o " +
                  (dir / "remote").string()),
              1);
}
