// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gar/controller.hpp"

namespace gar {

struct BackendSpec {
    std::string type = "scripted";  // "scripted" | "http"
    std::filesystem::path script;   // rule file for "scripted"
    HttpBackendConfig http;
};

struct RunConfig {
    ControllerConfig controller;
    bool max_env_steps_set = false;  // otherwise the per-environment default applies
    bool wait_info_k_set = false;    // likewise
    std::string env = "game24";      // game24 | minishop | remote
    std::filesystem::path instances;
    std::filesystem::path catalog;              // minishop
    std::vector<std::string> remote_command;    // remote over stdio
    std::string remote_tcp;                     // remote over TCP, "host:port"
    BackendSpec generator;
    BackendSpec assistant;
    std::size_t parallel = 1;
    std::uint64_t seed = 0;
    std::size_t limit = 0;  // 0 = every instance; otherwise a seeded sample
    std::filesystem::path output_dir = "runs/latest";
};

/// Reads a JSON config document. Unknown keys are rejected.
RunConfig run_config_from_json(const json& doc);
json run_config_to_json(const RunConfig& cfg);

/// Everything needed to execute a batch, independent of files on disk.
struct RunPlan {
    std::vector<TaskInstance> tasks;
    EnvironmentFactory env_factory;
    ModelBackend* generator = nullptr;  // shared between workers; must be thread-safe
    ModelBackend* assistant = nullptr;
    PromptKit prompts;
    ControllerConfig controller;
    std::size_t parallel = 1;
    std::filesystem::path output_dir;
    std::function<std::uint64_t()> clock_ms;  // optional, for tests
    json config_snapshot;                     // written to run_config.json when non-null
};

/// Owns what a RunPlan points at.
struct PreparedRun {
    RunPlan plan;
    std::unique_ptr<ModelBackend> generator;
    std::unique_ptr<ModelBackend> assistant;
};

/// Loads instances, catalogs and backends and validates everything. Throws ConfigError.
PreparedRun prepare_run(const RunConfig& cfg);

/// Loads TaskInstances from an instance file for the given environment kind.
std::vector<TaskInstance> load_tasks(const std::string& env, const std::filesystem::path& path);

struct RunReport {
    std::size_t episodes = 0;   // tasks
    std::size_t successes = 0;
    std::size_t failures = 0;   // tasks whose final trial aborted with an error
    std::size_t trials = 0;     // JSONL records
    double success_rate = 0.0;  // percent of all tasks
    double mean_reward = 0.0;   // percent scale, completed tasks only
    double avg_tokens_k = 0.0;  // completed tasks only
    double avg_time_s = 0.0;    // completed tasks only
    std::uint64_t total_gen_tokens = 0;
    std::uint64_t total_assist_tokens = 0;
    std::map<std::size_t, std::size_t> rollback_histogram;  // rollbacks per task -> tasks
    std::size_t feedback_count = 0;
    std::size_t discarded_count = 0;
    double discard_rate = 0.0;
    std::size_t corrupt_lines = 0;
    std::string confidence_samples_path;

    friend bool operator==(const RunReport&, const RunReport&) = default;
};

json report_to_json(const RunReport& report);
std::string render_report(const RunReport& report);

/// Executes every task (worker pool of `parallel` threads), writes the run directory and returns the report.
RunReport execute_plan(const RunPlan& plan);
RunReport run_benchmark(const RunConfig& cfg);

/// One episodes.jsonl line. Timing data lives under "timing" and nowhere else.
json episode_record(const TaskInstance& task, const EpisodeResult& result, bool final_trial, const std::string& timestamp);

/// Aggregates parsed episodes.jsonl records.
RunReport aggregate_records(const std::vector<json>& records);

struct LoadedRecords {
    std::vector<json> records;
    std::size_t corrupt_lines = 0;
};

/// Reads episodes.jsonl, skipping (and counting) lines that are not valid records.
LoadedRecords load_records(const std::filesystem::path& run_dir);

/// Re-derives the report purely from the run directory's JSONL.
RunReport report_from_dir(const std::filesystem::path& run_dir);

/// Drops the "timing" field so records can be compared across runs.
json strip_timing(json record);

struct SweepRow {
    double theta = 0.0;
    std::size_t accepted_count = 0;
    std::optional<double> success_rate;
};

/// Every recorded assistant confidence in the run. Throws gar::Error when there are none.
std::vector<double> recorded_confidences(const std::filesystem::path& run_dir);

/// Offline accepted-feedback counts per threshold.
std::vector<SweepRow> sweep_threshold(const std::vector<double>& confidences, const std::vector<double>& thetas);

/// Thresholds at 0.01 intervals covering [min, max] of the samples.
std::vector<double> default_theta_grid(const std::vector<double>& confidences);

/// Re-runs a recorded scripted run once per threshold (under run_dir/sweep/) and fills success_rate.
/// Throws ConfigError when the recorded run used a non-scripted backend.
std::vector<SweepRow> sweep_threshold_replay(const std::filesystem::path& run_dir, const std::vector<double>& thetas);

std::string render_sweep(const std::vector<SweepRow>& rows);

}  // namespace gar
