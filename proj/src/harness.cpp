// SPDX-License-Identifier: Apache-2.0
#include "gar/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include <fmt/core.h>

#include "gar/error.hpp"
#include "gar/game24.hpp"
#include "gar/minishop.hpp"

namespace gar {

namespace fs = std::filesystem;

// --- config -----------------------------------------------------------------------------

namespace {

void reject_unknown(const json& obj, std::initializer_list<std::string_view> known, const std::string& where) {
    for (const auto& [key, value] : obj.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            throw ConfigError("unknown key '" + key + "' in " + where);
        }
    }
}

BackendSpec backend_from_json(const json& j, const std::string& where) {
    reject_unknown(j, {"type", "script", "base_url", "model", "api_key_env", "timeout_ms", "max_retries"}, where);
    BackendSpec spec;
    spec.type = j.value("type", std::string("scripted"));
    if (spec.type == "scripted") {
        spec.script = j.value("script", std::string{});
    } else if (spec.type == "http") {
        spec.http.base_url = j.value("base_url", std::string{});
        spec.http.model = j.value("model", std::string{});
        if (j.contains("api_key_env")) {
            const auto var = j.at("api_key_env").get<std::string>();
            if (const char* v = std::getenv(var.c_str())) spec.http.api_key = v;
        }
        spec.http.timeout = std::chrono::milliseconds(j.value("timeout_ms", std::int64_t{120'000}));
        spec.http.max_retries = j.value("max_retries", 3);
    } else {
        throw ConfigError(where + ": backend type must be 'scripted' or 'http'");
    }
    return spec;
}

json backend_to_json(const BackendSpec& spec) {
    if (spec.type == "scripted") return json{{"type", "scripted"}, {"script", spec.script.string()}};
    return json{{"type", "http"},
                {"base_url", spec.http.base_url},
                {"model", spec.http.model},
                {"timeout_ms", spec.http.timeout.count()},
                {"max_retries", spec.http.max_retries}};
}

}  // namespace

RunConfig run_config_from_json(const json& doc) {
    if (!doc.is_object()) throw ConfigError("run config must be a JSON object");
    reject_unknown(doc,
                   {"controller", "env", "instances", "catalog", "remote", "generator", "assistant", "parallel", "seed",
                    "limit", "output_dir"},
                   "run config");
    RunConfig cfg;
    try {
        if (doc.contains("controller")) {
            const auto& c = doc.at("controller");
            reject_unknown(c,
                           {"theta", "wait_info_k", "max_rollback_span", "max_rollback_attempts", "max_env_steps",
                            "reflexion_trials", "generator_params", "assistant_params", "mode"},
                           "controller");
            from_json(c, cfg.controller);
            cfg.max_env_steps_set = c.contains("max_env_steps");
            cfg.wait_info_k_set = c.contains("wait_info_k");
        }
        cfg.env = doc.value("env", cfg.env);
        cfg.instances = doc.value("instances", std::string{});
        cfg.catalog = doc.value("catalog", std::string{});
        if (doc.contains("remote")) {
            const auto& r = doc.at("remote");
            reject_unknown(r, {"command", "tcp"}, "remote");
            cfg.remote_command = r.value("command", std::vector<std::string>{});
            cfg.remote_tcp = r.value("tcp", std::string{});
        }
        if (doc.contains("generator")) cfg.generator = backend_from_json(doc.at("generator"), "generator");
        if (doc.contains("assistant")) cfg.assistant = backend_from_json(doc.at("assistant"), "assistant");
        cfg.parallel = doc.value("parallel", cfg.parallel);
        cfg.seed = doc.value("seed", cfg.seed);
        cfg.limit = doc.value("limit", cfg.limit);
        cfg.output_dir = doc.value("output_dir", cfg.output_dir.string());
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid run config: ") + e.what());
    }
    return cfg;
}

json run_config_to_json(const RunConfig& cfg) {
    json controller = cfg.controller;
    if (!cfg.max_env_steps_set) controller.erase("max_env_steps");
    if (!cfg.wait_info_k_set) controller.erase("wait_info_k");
    json doc{{"controller", controller},
             {"env", cfg.env},
             {"instances", cfg.instances.string()},
             {"generator", backend_to_json(cfg.generator)},
             {"assistant", backend_to_json(cfg.assistant)},
             {"parallel", cfg.parallel},
             {"seed", cfg.seed},
             {"limit", cfg.limit},
             {"output_dir", cfg.output_dir.string()}};
    if (!cfg.catalog.empty()) doc["catalog"] = cfg.catalog.string();
    if (!cfg.remote_command.empty() || !cfg.remote_tcp.empty()) {
        doc["remote"] = json::object();
        if (!cfg.remote_command.empty()) doc["remote"]["command"] = cfg.remote_command;
        if (!cfg.remote_tcp.empty()) doc["remote"]["tcp"] = cfg.remote_tcp;
    }
    return doc;
}

// --- preparation ---------------------------------------------------------------------------

namespace {

std::vector<json> read_jsonl_strict(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path.string());
    std::vector<json> out;
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(json::parse(line));
        } catch (const json::exception& e) {
            throw ConfigError(fmt::format("{}:{}: {}", path.string(), number, e.what()));
        }
    }
    return out;
}

std::unique_ptr<ModelBackend> make_backend(const BackendSpec& spec, std::uint64_t seed, const std::string& role) {
    if (spec.type == "scripted") {
        if (spec.script.empty()) throw ConfigError(role + ": scripted backend needs a script file");
        return load_scripted_backend(spec.script);
    }
    auto http = HttpBackendConfig::from_environment(spec.http);
    http.jitter_seed = seed;
    return std::make_unique<HttpBackend>(http);
}

}  // namespace

std::vector<TaskInstance> load_tasks(const std::string& env, const fs::path& path) {
    std::vector<TaskInstance> tasks;
    std::set<std::string> seen;
    try {
        for (const auto& item : read_jsonl_strict(path)) {
            TaskInstance task;
            task.env_name = env;
            if (env == "game24") {
                auto inst = game24::instance_from_json(item);
                task.id = inst.id;
                task.description = game24::task_description();
                task.env_config = json{{"numbers", inst.numbers}};
            } else if (env == "minishop") {
                auto goal = minishop::goal_from_json(item);
                if (goal.id.empty()) throw ConfigError("minishop goal without id");
                task.id = goal.id;
                task.description = goal.instruction;
                task.env_config = minishop::goal_to_json(goal);
            } else if (env == "remote") {
                task.id = item.at("id").get<std::string>();
                task.description = item.at("description").get<std::string>();
                task.env_config = item.value("config", json::object());
            } else {
                throw ConfigError("unknown environment '" + env + "'");
            }
            if (task.description.empty()) throw ConfigError("task " + task.id + " has an empty description");
            if (!seen.insert(task.id).second) throw ConfigError("duplicate task id " + task.id);
            tasks.push_back(std::move(task));
        }
    } catch (const json::exception& e) {
        throw ConfigError("bad instance record in " + path.string() + ": " + e.what());
    }
    return tasks;
}

PreparedRun prepare_run(const RunConfig& cfg) {
    PreparedRun run;
    auto& plan = run.plan;
    plan.controller = cfg.controller;
    if (!cfg.max_env_steps_set) plan.controller.max_env_steps = default_max_env_steps(cfg.env);
    if (!cfg.wait_info_k_set) plan.controller.wait_info_k = default_wait_info_k(cfg.env);
    plan.controller.validate();
    if (cfg.parallel < 1) throw ConfigError("parallel must be >= 1");
    if (cfg.instances.empty()) throw ConfigError("no instance file given");

    plan.tasks = load_tasks(cfg.env, cfg.instances);
    if (cfg.limit > 0 && cfg.limit < plan.tasks.size()) {
        std::vector<std::size_t> order(plan.tasks.size());
        std::iota(order.begin(), order.end(), 0);
        std::mt19937_64 rng(cfg.seed);
        std::shuffle(order.begin(), order.end(), rng);
        order.resize(cfg.limit);
        std::sort(order.begin(), order.end());
        std::vector<TaskInstance> sampled;
        for (auto i : order) sampled.push_back(plan.tasks[i]);
        plan.tasks = std::move(sampled);
    }

    const bool react = cfg.controller.mode == PromptMode::react;
    EnvironmentFactory base;
    if (cfg.env == "game24") {
        base = [] { return std::make_unique<game24::Game24Env>(); };
    } else if (cfg.env == "minishop") {
        if (cfg.catalog.empty()) throw ConfigError("minishop needs a catalog file");
        auto catalog = std::make_shared<const minishop::Catalog>(minishop::load_catalog(cfg.catalog));
        base = [catalog] { return std::make_unique<minishop::MiniShopEnv>(catalog); };
    } else if (cfg.env == "remote") {
        if (!cfg.remote_command.empty()) {
            auto command = cfg.remote_command;
            base = [command] { return remote_env(spawn_process(command)); };
        } else if (!cfg.remote_tcp.empty()) {
            auto colon = cfg.remote_tcp.rfind(':');
            if (colon == std::string::npos) throw ConfigError("remote tcp address must be host:port");
            auto host = cfg.remote_tcp.substr(0, colon);
            auto port = static_cast<std::uint16_t>(std::stoi(cfg.remote_tcp.substr(colon + 1)));
            base = [host, port] { return remote_env(connect_tcp(host, port)); };
        } else {
            throw ConfigError("remote environment needs a command or a tcp address");
        }
    } else {
        throw ConfigError("unknown environment '" + cfg.env + "'");
    }
    plan.env_factory = react ? EnvironmentFactory([base] { return think_wrapper(base()); }) : base;

    run.generator = make_backend(cfg.generator, cfg.seed, "generator");
    run.assistant = make_backend(cfg.assistant, cfg.seed + 1, "assistant");
    plan.generator = run.generator.get();
    plan.assistant = run.assistant.get();
    plan.prompts = builtin_prompt_kit(cfg.env, cfg.controller.mode);
    plan.parallel = cfg.parallel;
    plan.output_dir = cfg.output_dir;
    plan.config_snapshot = run_config_to_json(cfg);
    return run;
}

// --- records ---------------------------------------------------------------------------------

namespace {

std::string utc_timestamp() {
    auto now = std::chrono::system_clock::now();
    std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string format_double(double v, int digits) { return fmt::format("{:.{}f}", v, digits); }

}  // namespace

json episode_record(const TaskInstance& task, const EpisodeResult& result, bool final_trial, const std::string& timestamp) {
    json body = result;
    json latencies = json::array();
    for (auto& step : body["trajectory"]["steps"]) {
        latencies.push_back(step["latency_ms"]);
        step.erase("latency_ms");
    }
    body.erase("wall_time_ms");

    json record{{"schema", 1}, {"task_id", task.id}, {"env", task.env_name}, {"final_trial", final_trial}};
    record.update(body);
    record["timing"] = json{{"timestamp", timestamp}, {"wall_time_ms", result.wall_time_ms}, {"step_latency_ms", latencies}};
    return record;
}

json strip_timing(json record) {
    record.erase("timing");
    return record;
}

RunReport aggregate_records(const std::vector<json>& records) {
    struct TaskTotals {
        bool success = false;
        bool errored = false;
        double reward = 0.0;
        std::uint64_t tokens = 0;
        std::uint64_t time_ms = 0;
        std::size_t rollbacks = 0;
    };
    std::vector<std::string> order;
    std::map<std::string, TaskTotals> tasks;

    RunReport report;
    for (const auto& rec : records) {
        const auto id = rec.at("task_id").get<std::string>();
        auto [it, inserted] = tasks.try_emplace(id);
        if (inserted) order.push_back(id);
        auto& t = it->second;

        const auto gen = rec.value("total_gen_tokens", std::uint64_t{0});
        const auto assist = rec.value("total_assist_tokens", std::uint64_t{0});
        report.total_gen_tokens += gen;
        report.total_assist_tokens += assist;
        t.tokens += gen + assist;
        if (rec.contains("timing")) t.time_ms += rec.at("timing").value("wall_time_ms", std::uint64_t{0});
        t.rollbacks += rec.value("rollbacks", json::array()).size();
        // Records arrive in trial order; the last one describes the task outcome.
        t.success = rec.value("success", false);
        t.reward = rec.value("reward", 0.0);
        t.errored = rec.contains("error") && !rec.at("error").is_null();

        for (const auto& s : rec.value("feedback_samples", json::array())) {
            ++report.feedback_count;
            if (!s.value("accepted", true)) ++report.discarded_count;
        }
        ++report.trials;
    }

    report.episodes = order.size();
    double reward_sum = 0.0;
    double tokens_sum = 0.0;
    double time_sum = 0.0;
    std::size_t completed = 0;
    for (const auto& id : order) {
        const auto& t = tasks.at(id);
        if (t.success) ++report.successes;
        ++report.rollback_histogram[t.rollbacks];
        if (t.errored) {
            ++report.failures;
            continue;
        }
        ++completed;
        reward_sum += t.reward;
        tokens_sum += static_cast<double>(t.tokens);
        time_sum += static_cast<double>(t.time_ms);
    }
    if (report.episodes > 0) {
        report.success_rate = static_cast<double>(report.successes) / static_cast<double>(report.episodes) * 100.0;
    }
    if (completed > 0) {
        const auto n = static_cast<double>(completed);
        report.mean_reward = reward_sum / n * 100.0;
        report.avg_tokens_k = tokens_sum / n / 1000.0;
        report.avg_time_s = time_sum / n / 1000.0;
    }
    if (report.feedback_count > 0) {
        report.discard_rate = static_cast<double>(report.discarded_count) / static_cast<double>(report.feedback_count);
    }
    return report;
}

LoadedRecords load_records(const fs::path& run_dir) {
    LoadedRecords loaded;
    std::ifstream in(run_dir / "episodes.jsonl");
    if (!in) return loaded;
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            auto rec = json::parse(line);
            if (!rec.is_object() || !rec.contains("task_id") || !rec.at("task_id").is_string()) {
                throw std::runtime_error("record lacks a task_id");
            }
            loaded.records.push_back(std::move(rec));
        } catch (const std::exception& e) {
            fmt::print(stderr, "warning: skipping corrupt line {} of {}: {}\n", number, (run_dir / "episodes.jsonl").string(),
                       e.what());
            ++loaded.corrupt_lines;
        }
    }
    return loaded;
}

RunReport report_from_dir(const fs::path& run_dir) {
    if (!fs::is_directory(run_dir)) throw ConfigError("run directory " + run_dir.string() + " does not exist");
    auto loaded = load_records(run_dir);
    RunReport report;
    try {
        report = aggregate_records(loaded.records);
    } catch (const json::exception& e) {
        throw Error(std::string("cannot aggregate records: ") + e.what());
    }
    report.corrupt_lines = loaded.corrupt_lines;
    if (fs::exists(run_dir / "confidence_samples.csv")) report.confidence_samples_path = "confidence_samples.csv";
    return report;
}

json report_to_json(const RunReport& r) {
    json histogram = json::object();
    for (const auto& [rollbacks, count] : r.rollback_histogram) histogram[std::to_string(rollbacks)] = count;
    return json{{"episodes", r.episodes},
                {"successes", r.successes},
                {"failures", r.failures},
                {"trials", r.trials},
                {"success_rate", r.success_rate},
                {"mean_reward", r.mean_reward},
                {"avg_tokens_k", r.avg_tokens_k},
                {"avg_time_s", r.avg_time_s},
                {"total_gen_tokens", r.total_gen_tokens},
                {"total_assist_tokens", r.total_assist_tokens},
                {"rollback_histogram", histogram},
                {"feedback_count", r.feedback_count},
                {"discarded_count", r.discarded_count},
                {"discard_rate", r.discard_rate},
                {"corrupt_lines", r.corrupt_lines},
                {"confidence_samples_path", r.confidence_samples_path}};
}

std::string render_report(const RunReport& r) {
    std::ostringstream out;
    out << "episodes            " << r.episodes << '\n';
    out << "trials              " << r.trials << '\n';
    out << "successes           " << r.successes << '\n';
    out << "failed (error)      " << r.failures << '\n';
    out << "SR (%)              " << format_double(r.success_rate, 1) << '\n';
    out << "reward (%)          " << format_double(r.mean_reward, 1) << '\n';
    out << "avg tokens (K)      " << format_double(r.avg_tokens_k, 3) << '\n';
    out << "avg time (s)        " << format_double(r.avg_time_s, 3) << '\n';
    out << "generator tokens    " << r.total_gen_tokens << '\n';
    out << "assistant tokens    " << r.total_assist_tokens << '\n';
    out << "feedback            " << r.feedback_count << " (" << r.discarded_count << " discarded, "
        << format_double(r.discard_rate * 100.0, 1) << "%)\n";
    out << "rollbacks/episode  ";
    if (r.rollback_histogram.empty()) out << " -";
    for (const auto& [rollbacks, count] : r.rollback_histogram) out << ' ' << rollbacks << ':' << count;
    out << '\n';
    if (r.corrupt_lines > 0) out << "corrupt lines       " << r.corrupt_lines << '\n';
    if (!r.confidence_samples_path.empty()) out << "confidence samples  " << r.confidence_samples_path << '\n';
    return out.str();
}

// --- execution ----------------------------------------------------------------------------------

RunReport execute_plan(const RunPlan& plan) {
    if (!plan.generator || !plan.assistant || !plan.env_factory) throw ConfigError("run plan is incomplete");
    if (plan.parallel < 1) throw ConfigError("parallel must be >= 1");
    plan.controller.validate();
    fs::create_directories(plan.output_dir);

    struct Outcome {
        std::vector<EpisodeResult> trials;
        std::vector<Event> events;
        std::string timestamp;
    };
    std::vector<Outcome> outcomes(plan.tasks.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr config_failure;
    std::mutex failure_mutex;

    auto worker = [&] {
        while (true) {
            const auto i = next.fetch_add(1);
            if (i >= plan.tasks.size()) return;
            auto& outcome = outcomes[i];
            outcome.timestamp = utc_timestamp();
            try {
                auto env = plan.env_factory();
                EpisodeContext ctx;
                ctx.task = &plan.tasks[i];
                ctx.env = env.get();
                ctx.generator = plan.generator;
                ctx.assistant = plan.assistant;
                ctx.config = &plan.controller;
                ctx.prompts = &plan.prompts;
                ctx.clock_ms = plan.clock_ms;
                ctx.events = [&outcome](const Event& e) { outcome.events.push_back(e); };
                outcome.trials = run_trials(ctx);
            } catch (const ConfigError&) {
                std::lock_guard lock(failure_mutex);
                if (!config_failure) config_failure = std::current_exception();
                next = plan.tasks.size();
            } catch (const std::exception& e) {
                // Environment construction failed (e.g. a remote peer is unreachable).
                EpisodeResult failed;
                failed.final_trajectory = Trajectory(plan.tasks[i], {});
                failed.error = e.what();
                outcome.trials = {std::move(failed)};
            }
        }
    };

    const auto threads = std::min(plan.parallel, std::max<std::size_t>(plan.tasks.size(), 1));
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
    if (config_failure) std::rethrow_exception(config_failure);

    // Single writer, task order.
    std::ofstream episodes(plan.output_dir / "episodes.jsonl", std::ios::trunc);
    std::ofstream events(plan.output_dir / "events.jsonl", std::ios::trunc);
    std::ofstream samples(plan.output_dir / "confidence_samples.csv", std::ios::trunc);
    if (!episodes || !events || !samples) throw Error("cannot write to " + plan.output_dir.string());
    samples << "task_id,trial,at_step,confidence,accepted,located\n";
    const auto dump = [](const json& j) { return j.dump(-1, ' ', false, json::error_handler_t::replace); };
    for (std::size_t i = 0; i < plan.tasks.size(); ++i) {
        const auto& task = plan.tasks[i];
        const auto& outcome = outcomes[i];
        for (std::size_t k = 0; k < outcome.trials.size(); ++k) {
            const auto& trial = outcome.trials[k];
            episodes << dump(episode_record(task, trial, k + 1 == outcome.trials.size(), outcome.timestamp)) << '\n';
            for (const auto& s : trial.feedback_samples) {
                samples << task.id << ',' << trial.trial_index << ',' << s.at_step << ',' << fmt::format("{:.17g}", s.confidence)
                        << ',' << (s.accepted ? 1 : 0) << ',' << (s.located ? 1 : 0) << '\n';
            }
        }
        for (const auto& e : outcome.events) {
            auto line = event_to_json(e);
            line["task_id"] = task.id;
            events << dump(line) << '\n';
        }
    }
    episodes.close();
    events.close();
    samples.close();
    if (!plan.config_snapshot.is_null()) std::ofstream(plan.output_dir / "run_config.json") << plan.config_snapshot.dump(2) << '\n';

    auto report = report_from_dir(plan.output_dir);
    std::ofstream(plan.output_dir / "report.json") << report_to_json(report).dump(2) << '\n';
    std::ofstream(plan.output_dir / "summary.txt") << render_report(report);
    return report;
}

RunReport run_benchmark(const RunConfig& cfg) {
    auto prepared = prepare_run(cfg);
    return execute_plan(prepared.plan);
}

// --- threshold sweep ------------------------------------------------------------------------------

std::vector<double> recorded_confidences(const fs::path& run_dir) {
    std::vector<double> out;
    for (const auto& rec : load_records(run_dir).records) {
        for (const auto& s : rec.value("feedback_samples", json::array())) out.push_back(s.at("confidence").get<double>());
    }
    if (out.empty()) throw Error("run " + run_dir.string() + " has no recorded confidence samples");
    return out;
}

std::vector<SweepRow> sweep_threshold(const std::vector<double>& confidences, const std::vector<double>& thetas) {
    if (confidences.empty()) throw Error("no confidence samples to sweep");
    std::vector<double> sorted = confidences;
    std::sort(sorted.begin(), sorted.end());
    std::vector<SweepRow> rows;
    rows.reserve(thetas.size());
    for (double theta : thetas) {
        // accepted iff score >= theta
        auto first = std::lower_bound(sorted.begin(), sorted.end(), theta);
        rows.push_back(SweepRow{theta, static_cast<std::size_t>(sorted.end() - first), std::nullopt});
    }
    return rows;
}

std::vector<double> default_theta_grid(const std::vector<double>& confidences) {
    if (confidences.empty()) throw Error("no confidence samples to sweep");
    auto [lo, hi] = std::minmax_element(confidences.begin(), confidences.end());
    const auto start = static_cast<long>(std::floor(*lo * 100.0 + 1e-9));
    const auto stop = static_cast<long>(std::ceil(*hi * 100.0 - 1e-9));
    std::vector<double> grid;
    for (long i = start; i <= stop; ++i) grid.push_back(static_cast<double>(i) / 100.0);
    return grid;
}

std::vector<SweepRow> sweep_threshold_replay(const fs::path& run_dir, const std::vector<double>& thetas) {
    std::ifstream in(run_dir / "run_config.json");
    if (!in) throw ConfigError("run " + run_dir.string() + " has no run_config.json to replay");
    auto cfg = run_config_from_json(json::parse(in));
    if (cfg.generator.type != "scripted" || cfg.assistant.type != "scripted") {
        throw ConfigError("replay sweeps need scripted backends; use the offline sweep for live runs");
    }
    auto rows = sweep_threshold(recorded_confidences(run_dir), thetas);
    for (auto& row : rows) {
        auto variant = cfg;
        variant.controller.theta = row.theta;
        variant.output_dir = run_dir / "sweep" / fmt::format("theta_{:.2f}", row.theta);
        row.success_rate = run_benchmark(variant).success_rate;
    }
    return rows;
}

std::string render_sweep(const std::vector<SweepRow>& rows) {
    std::ostringstream out;
    out << "theta  accepted  SR(%)\n";
    for (const auto& row : rows) {
        out << format_double(row.theta, 2) << "  " << fmt::format("{:>8}", row.accepted_count) << "  "
            << (row.success_rate ? format_double(*row.success_rate, 1) : std::string("-")) << '\n';
    }
    return out.str();
}

}  // namespace gar
