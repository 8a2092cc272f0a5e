// SPDX-License-Identifier: Apache-2.0
// gar: batch runner, report and sweep tool for GA-Rollback.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <set>

#include <CLI11.hpp>
#include <fmt/core.h>

#include "gar/error.hpp"
#include "gar/game24.hpp"
#include "gar/harness.hpp"
#include "gar/minishop.hpp"

namespace fs = std::filesystem;
using gar::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRunFailure = 1;
constexpr int kExitConfig = 2;

struct RunFlags {
    std::string config;
    std::optional<std::string> env;
    std::optional<std::string> instances;
    std::optional<std::string> catalog;
    std::optional<std::string> remote_tcp;
    std::vector<std::string> remote_command;
    std::optional<std::string> generator_script;
    std::optional<std::string> assistant_script;
    std::optional<std::string> generator_url;
    std::optional<std::string> assistant_url;
    std::optional<std::string> generator_model;
    std::optional<std::string> assistant_model;
    std::optional<double> theta;
    std::optional<std::size_t> wait_info;
    std::optional<std::size_t> max_rollbacks;
    std::optional<std::size_t> rollback_span;
    std::optional<std::size_t> max_steps;
    std::optional<std::string> mode;
    std::optional<std::size_t> trials;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> parallel;
    std::optional<std::size_t> limit;
    std::optional<std::string> output;
};

void apply_backend(gar::BackendSpec& spec, const std::optional<std::string>& script, const std::optional<std::string>& url,
                   const std::optional<std::string>& model) {
    if (script) {
        spec.type = "scripted";
        spec.script = *script;
    }
    if (url) {
        spec.type = "http";
        spec.http.base_url = *url;
    }
    if (model) spec.http.model = *model;
}

gar::RunConfig resolve_config(const RunFlags& f) {
    gar::RunConfig cfg;
    if (!f.config.empty()) {
        std::ifstream in(f.config);
        if (!in) throw gar::ConfigError("cannot open config " + f.config);
        json doc;
        try {
            doc = json::parse(in);
        } catch (const json::exception& e) {
            throw gar::ConfigError("config " + f.config + " is not valid JSON: " + e.what());
        }
        cfg = gar::run_config_from_json(doc);
    }
    if (f.env) cfg.env = *f.env;
    if (f.instances) cfg.instances = *f.instances;
    if (f.catalog) cfg.catalog = *f.catalog;
    if (f.remote_tcp) cfg.remote_tcp = *f.remote_tcp;
    if (!f.remote_command.empty()) cfg.remote_command = f.remote_command;
    apply_backend(cfg.generator, f.generator_script, f.generator_url, f.generator_model);
    apply_backend(cfg.assistant, f.assistant_script, f.assistant_url, f.assistant_model);
    if (f.theta) cfg.controller.theta = *f.theta;
    if (f.wait_info) {
        cfg.controller.wait_info_k = *f.wait_info;
        cfg.wait_info_k_set = true;
    }
    if (f.max_rollbacks) cfg.controller.max_rollback_attempts = *f.max_rollbacks;
    if (f.rollback_span) cfg.controller.max_rollback_span = *f.rollback_span;
    if (f.max_steps) {
        cfg.controller.max_env_steps = *f.max_steps;
        cfg.max_env_steps_set = true;
    }
    if (f.mode) cfg.controller.mode = gar::prompt_mode_from_string(*f.mode);
    if (f.trials) cfg.controller.reflexion_trials = *f.trials;
    if (f.seed) cfg.seed = *f.seed;
    if (f.parallel) cfg.parallel = *f.parallel;
    if (f.limit) cfg.limit = *f.limit;
    if (f.output) cfg.output_dir = *f.output;
    return cfg;
}

int exit_code_for(const gar::RunReport& report) {
    if (report.episodes == 0 || report.failures == report.episodes) return kExitRunFailure;
    return kExitOk;
}

int cmd_run(const RunFlags& flags) {
    auto cfg = resolve_config(flags);
    auto report = gar::run_benchmark(cfg);
    std::cout << gar::render_report(report);
    std::cout << "run directory       " << cfg.output_dir.string() << '\n';
    return exit_code_for(report);
}

int cmd_report(const std::string& run_dir, bool as_json) {
    auto report = gar::report_from_dir(run_dir);
    if (as_json) {
        std::cout << gar::report_to_json(report).dump(2) << '\n';
    } else {
        std::cout << gar::render_report(report);
    }
    return report.episodes == 0 ? kExitRunFailure : kExitOk;
}

int cmd_sweep(const std::string& run_dir, std::vector<double> thetas, bool replay) {
    if (thetas.empty()) thetas = gar::default_theta_grid(gar::recorded_confidences(run_dir));
    auto rows = replay ? gar::sweep_threshold_replay(run_dir, thetas)
                       : gar::sweep_threshold(gar::recorded_confidences(run_dir), thetas);
    std::cout << gar::render_sweep(rows);
    return kExitOk;
}

// Scripted generator that walks the oracle solution one equation per action, plus a
// confident assistant that never flags an error.
json oracle_script(const std::vector<gar::game24::Game24Instance>& instances) {
    json rules = json::array();
    for (const auto& inst : instances) {
        std::array<gar::game24::Rational, 4> nums;
        std::string shown = "Input:";
        for (std::size_t i = 0; i < 4; ++i) {
            nums[i] = gar::game24::Rational(inst.numbers[i]);
            shown += " " + std::to_string(inst.numbers[i]);
        }
        auto steps = gar::game24::solve_24_stepwise(nums);
        if (!steps) continue;
        for (std::size_t k = 0; k < steps->size(); ++k) {
            json probs = json::array();
            for (std::size_t w = 0; w < gar::count_whitespace_tokens((*steps)[k]); ++w) probs.push_back(0.99);
            rules.push_back(json{{"contains", {"Observation 0: " + shown + "\n"}},
                                 {"ends_with", fmt::format("Action {}:", k + 1)},
                                 {"reply", (*steps)[k]},
                                 {"probs", probs}});
        }
    }
    return json{{"rules", rules}};
}

json confident_assistant_script() {
    const std::string reply = "### Conclusion\n** Error Location **: None\n** Explanation **: Every action follows the rules.";
    json probs = json::array();
    for (std::size_t w = 0; w < gar::count_whitespace_tokens(reply); ++w) probs.push_back(0.97);
    return json{{"rules", json::array()}, {"default", {{"reply", reply}, {"probs", probs}}}};
}

int cmd_gen_instances(std::size_t count, std::uint64_t seed, const std::string& out, const std::string& script,
                      const std::string& assistant_script) {
    auto instances = gar::game24::generate_instances(count, seed);
    std::ofstream file;
    std::ostream* sink = &std::cout;
    if (!out.empty() && out != "-") {
        file.open(out);
        if (!file) throw gar::ConfigError("cannot write " + out);
        sink = &file;
    }
    for (const auto& inst : instances) *sink << gar::game24::instance_to_json(inst).dump() << '\n';
    if (!script.empty()) std::ofstream(script) << oracle_script(instances).dump(2) << '\n';
    if (!assistant_script.empty()) std::ofstream(assistant_script) << confident_assistant_script().dump(2) << '\n';
    return kExitOk;
}

int cmd_validate_catalog(const std::string& catalog_path, const std::string& goals_path) {
    auto catalog = gar::minishop::load_catalog(catalog_path);
    std::set<std::string> categories;
    for (const auto& p : catalog.products()) categories.insert(p.category);
    fmt::print("{} products, {} categories\n", catalog.products().size(), categories.size());
    if (goals_path.empty()) return kExitOk;

    auto goals = gar::minishop::load_goals(goals_path);
    std::size_t unreachable = 0;
    for (const auto& goal : goals) {
        // A goal is reachable when some product earns the full reward.
        bool reachable = false;
        for (const auto& p : catalog.products()) {
            gar::minishop::Purchase purchase{p, goal.required_options, p.price};
            if (gar::minishop::compute_reward(goal, purchase) >= 1.0) {
                bool options_exist = true;
                for (const auto& [name, value] : goal.required_options) {
                    auto it = p.options.find(name);
                    if (it == p.options.end() || std::find(it->second.begin(), it->second.end(), value) == it->second.end()) {
                        options_exist = false;
                    }
                }
                if (options_exist) {
                    reachable = true;
                    break;
                }
            }
        }
        if (!reachable) {
            fmt::print("goal {}: no product earns reward 1.0\n", goal.id);
            ++unreachable;
        }
    }
    fmt::print("{} goals, {} unreachable\n", goals.size(), unreachable);
    return unreachable == 0 ? kExitOk : kExitRunFailure;
}

int cmd_serve(const std::string& env_name, const std::string& catalog_path, int port, std::size_t connections) {
    gar::EnvironmentFactory factory;
    if (env_name == "game24") {
        factory = [] { return std::make_unique<gar::game24::Game24Env>(); };
    } else if (env_name == "minishop") {
        if (catalog_path.empty()) throw gar::ConfigError("minishop needs --catalog");
        auto catalog = std::make_shared<const gar::minishop::Catalog>(gar::minishop::load_catalog(catalog_path));
        factory = [catalog] { return std::make_unique<gar::minishop::MiniShopEnv>(catalog); };
    } else {
        throw gar::ConfigError("serve-env-example supports game24 and minishop");
    }
    if (port < 0) {
        auto env = factory();
        gar::FdChannel channel(0, 1, false);
        gar::serve_environment(*env, channel);
        return kExitOk;
    }
    gar::serve_tcp(factory, static_cast<std::uint16_t>(port), connections, [](std::uint16_t bound) {
        fmt::print("listening on 127.0.0.1:{}\n", bound);
        std::fflush(stdout);
    });
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"GA-Rollback agent runner"};
    app.require_subcommand(1);

    RunFlags flags;
    auto* run = app.add_subcommand("run", "Run a batch of episodes");
    run->add_option("--config", flags.config, "JSON run config")->check(CLI::ExistingFile);
    run->add_option("--env", flags.env, "game24 | minishop | remote");
    run->add_option("--instances", flags.instances, "Instance JSONL file");
    run->add_option("--catalog", flags.catalog, "MiniShop catalog JSON");
    run->add_option("--remote-tcp", flags.remote_tcp, "Remote environment at host:port");
    run->add_option("--remote-cmd", flags.remote_command, "Remote environment command line")->expected(1, -1);
    run->add_option("--generator-script", flags.generator_script, "Scripted generator rule file");
    run->add_option("--assistant-script", flags.assistant_script, "Scripted assistant rule file");
    run->add_option("--generator-url", flags.generator_url, "OpenAI-compatible base URL for the generator");
    run->add_option("--assistant-url", flags.assistant_url, "OpenAI-compatible base URL for the assistant");
    run->add_option("--generator-model", flags.generator_model);
    run->add_option("--assistant-model", flags.assistant_model);
    run->add_option("--theta", flags.theta, "Confidence threshold");
    run->add_option("--wait-info", flags.wait_info, "Wait-Info k");
    run->add_option("--max-rollbacks", flags.max_rollbacks, "Rollback budget per episode");
    run->add_option("--rollback-span", flags.rollback_span, "Maximum rollback span");
    run->add_option("--max-steps", flags.max_steps, "Generator actions per episode");
    run->add_option("--mode", flags.mode, "act_only | react")->check(CLI::IsMember({"act_only", "react"}));
    run->add_option("--trials", flags.trials, "Reflexion trials");
    run->add_option("--seed", flags.seed);
    run->add_option("--parallel", flags.parallel, "Worker threads");
    run->add_option("--limit", flags.limit, "Seeded sample of this many instances");
    run->add_option("-o,--output", flags.output, "Run directory");

    std::string run_dir;
    bool report_json = false;
    auto* report = app.add_subcommand("report", "Re-derive the report from a run directory");
    report->add_option("run_dir", run_dir)->required();
    report->add_flag("--json", report_json);

    std::vector<double> thetas;
    bool replay = false;
    auto* sweep = app.add_subcommand("sweep-theta", "Accepted feedback per confidence threshold");
    sweep->add_option("run_dir", run_dir)->required();
    sweep->add_option("--thetas", thetas, "Thresholds (default: 0.01 grid over the samples)")->delimiter(',');
    sweep->add_flag("--replay", replay, "Re-run scripted runs per threshold to get success rates");

    std::size_t count = 10;
    std::uint64_t seed = 0;
    std::string out;
    std::string script;
    std::string assistant_script;
    auto* gen = app.add_subcommand("gen-instances", "Emit seeded solvable Game of 24 instances");
    gen->add_option("-n,--count", count);
    gen->add_option("--seed", seed);
    gen->add_option("-o,--output", out, "Output JSONL (default stdout)");
    gen->add_option("--script", script, "Also write a scripted generator that solves every instance");
    gen->add_option("--assistant-script", assistant_script, "Also write a scripted assistant that never flags errors");

    std::string catalog;
    std::string goals;
    auto* validate = app.add_subcommand("validate-catalog", "Check a MiniShop catalog (and goals)");
    validate->add_option("catalog", catalog)->required();
    validate->add_option("--goals", goals);

    std::string serve_env = "game24";
    std::string serve_catalog;
    int port = -1;
    std::size_t connections = 0;
    auto* serve = app.add_subcommand("serve-env-example", "Serve a built-in environment over the wire protocol");
    serve->add_option("--env", serve_env)->check(CLI::IsMember({"game24", "minishop"}));
    serve->add_option("--catalog", serve_catalog);
    serve->add_option("--port", port, "TCP port on 127.0.0.1 (0 = any); stdio when omitted");
    serve->add_option("--connections", connections, "Stop after this many connections (0 = never)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (*run) return cmd_run(flags);
        if (*report) return cmd_report(run_dir, report_json);
        if (*sweep) return cmd_sweep(run_dir, thetas, replay);
        if (*gen) return cmd_gen_instances(count, seed, out, script, assistant_script);
        if (*validate) return cmd_validate_catalog(catalog, goals);
        if (*serve) return cmd_serve(serve_env, serve_catalog, port, connections);
    } catch (const gar::ConfigError& e) {
        fmt::print(stderr, "config error: {}\n", e.what());
        return kExitConfig;
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return kExitRunFailure;
    }
    return kExitConfig;
}
