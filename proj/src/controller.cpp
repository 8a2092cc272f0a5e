// SPDX-License-Identifier: Apache-2.0
#include "gar/controller.hpp"

#include <chrono>
#include <cstdio>
#include <regex>

#include <fmt/core.h>

#include "gar/error.hpp"

namespace gar {

void ControllerConfig::validate() const {
    if (!(theta >= 0.0 && theta <= 1.0)) throw ConfigError("theta must be in [0, 1]");
    if (max_rollback_span < 1) throw ConfigError("max_rollback_span must be >= 1");
    if (max_env_steps < 1) throw ConfigError("max_env_steps must be >= 1");
    if (reflexion_trials < 1) throw ConfigError("reflexion_trials must be >= 1");
    generator_params.validate();
    assistant_params.validate();
}

std::size_t default_max_env_steps(const std::string& env_name) {
    if (env_name == "game24") return 12;
    if (env_name == "minishop") return 15;
    return 40;
}

std::size_t default_wait_info_k(const std::string& env_name) {
    if (env_name == "game24" || env_name == "minishop") return 0;
    return 6;
}

RollbackTarget compute_rollback_target(std::size_t n, std::size_t t, std::size_t n_bar) {
    if (t < 1 || t > n) {
        throw ContractViolation(fmt::format("error step {} outside trajectory 1..{}", t, n));
    }
    if (n_bar < 1) throw ContractViolation("rollback span bound must be >= 1");
    const std::size_t span = std::min(n - t + 1, n_bar);
    return RollbackTarget{span, n - span};
}

std::size_t restore_environment(Environment& env, const Trajectory& traj, std::size_t target_len) {
    if (target_len > traj.size()) {
        throw ContractViolation(fmt::format("restore target {} beyond trajectory length {}", target_len, traj.size()));
    }
    auto initial = env.reset(traj.task().env_config);
    if (initial != traj.initial_observation()) throw ReplayDivergence(0, traj.initial_observation(), initial);
    for (std::size_t i = 1; i <= target_len; ++i) {
        const auto& recorded = traj.step(i);
        auto replayed = env.step(recorded.action);
        if (replayed.text != recorded.observation) throw ReplayDivergence(i, recorded.observation, replayed.text);
    }
    return target_len;
}

std::string to_string(EventKind kind) {
    switch (kind) {
        case EventKind::step: return "step";
        case EventKind::analysis: return "analysis";
        case EventKind::rollback: return "rollback";
        case EventKind::discard: return "discard";
        case EventKind::done: return "done";
    }
    return "unknown";
}

json event_to_json(const Event& event) {
    return json{{"schema", kEventSchemaVersion},
                {"event", to_string(event.kind)},
                {"trial", event.trial_index},
                {"data", event.payload}};
}

PromptKit builtin_prompt_kit(const std::string& env_name, PromptMode mode) {
    PromptKit kit;
    kit.generator.instructions = builtin_prompt("generator_" + env_name);
    if (env_name != "remote") {
        const auto suffix = mode == PromptMode::react ? "_react" : "";
        kit.generator.exemplars = builtin_prompt("generator_examples_" + env_name + suffix);
    }
    kit.assistant = builtin_assistant_template(env_name);
    kit.reflection_template = builtin_prompt("reflection");
    return kit;
}

std::string extract_action(const std::string& generated) {
    static const std::regex kLabel(R"(^\s*(?:>\s*)?(?:[Aa]ction\s*\d*\s*:)?\s*)");
    std::size_t start = 0;
    while (start <= generated.size()) {
        auto end = generated.find('\n', start);
        if (end == std::string::npos) end = generated.size();
        auto line = generated.substr(start, end - start);
        line = std::regex_replace(line, kLabel, "", std::regex_constants::format_first_only);
        auto last = line.find_last_not_of(" \t\r");
        if (last != std::string::npos) return line.substr(0, last + 1);
        start = end + 1;
    }
    return {};
}

namespace {

constexpr std::size_t kMistakeExcerptLimit = 300;

std::string excerpt(const Feedback& fb) {
    std::string text = fb.explanation.empty() ? fb.raw_text : fb.explanation;
    if (text.size() > kMistakeExcerptLimit) {
        auto cut = text.rfind(' ', kMistakeExcerptLimit);
        text = text.substr(0, cut == std::string::npos ? kMistakeExcerptLimit : cut) + " ...";
    }
    for (auto& c : text) {
        if (c == '\n') c = ' ';
    }
    if (text.empty()) text = fmt::format("Action {} was flagged as wrong.", fb.error_step.value_or(0));
    return text;
}

std::uint64_t steady_ms() {
    return static_cast<std::uint64_t>(
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now().time_since_epoch()).count());
}

json optional_step(const std::optional<std::size_t>& step) { return step ? json(*step) : json(nullptr); }

}  // namespace

EpisodeResult run_episode(const EpisodeContext& ctx, std::size_t trial_index, const std::vector<std::string>& reflections) {
    if (!ctx.task || !ctx.env || !ctx.generator || !ctx.assistant || !ctx.config || !ctx.prompts) {
        throw ContractViolation("episode context is incomplete");
    }
    const auto& cfg = *ctx.config;
    cfg.validate();
    if (!ctx.env->deterministic() && cfg.max_rollback_attempts > 0) {
        throw ConfigError("environment '" + ctx.env->name() +
                          "' is not deterministic; rollback needs replay, so set max_rollback_attempts to 0");
    }

    auto clock = ctx.clock_ms ? ctx.clock_ms : std::function<std::uint64_t()>(steady_ms);
    auto emit = [&](EventKind kind, json payload) {
        if (ctx.events) ctx.events(Event{kind, trial_index, std::move(payload)});
    };

    const auto started = clock();
    EpisodeResult result;
    result.trial_index = trial_index;
    result.reflections = reflections;

    GeneratorPromptContext prompt_context = ctx.prompts->generator;
    prompt_context.reflections = reflections;

    bool finished = false;
    bool warned_probless = false;
    std::optional<std::string> pending_feedback;
    std::optional<MistakeRecord> pending_mistake;
    std::vector<MistakeRecord> mistakes;

    Trajectory traj(*ctx.task, {});
    try {
        traj = Trajectory(*ctx.task, ctx.env->reset(ctx.task->env_config));

        while (result.generator_steps < cfg.max_env_steps) {
            const auto prompt = render_generator_prompt(traj, pending_feedback, mistakes, cfg.mode, prompt_context);
            const auto t0 = clock();
            const auto out = ctx.generator->complete(prompt, cfg.generator_params);
            const auto latency = clock() - t0;
            result.total_gen_tokens += out.completion_tokens;

            // Feedback is shown for exactly one regeneration, then kept only as memory.
            pending_feedback.reset();
            if (pending_mistake) {
                mistakes.push_back(std::move(*pending_mistake));
                pending_mistake.reset();
            }

            auto action = extract_action(out.text);
            if (action.empty()) action = "(no action)";
            const auto obs = ctx.env->step(action);
            ++result.generator_steps;
            traj.append(action, obs.text, StepMeta{is_think_action(action), out.completion_tokens, latency});
            emit(EventKind::step, json{{"index", traj.size()},
                                       {"action", action},
                                       {"observation", obs.text},
                                       {"reward", obs.reward},
                                       {"done", obs.done},
                                       {"valid_action", obs.valid_action}});

            if (obs.done) {
                result.reward = obs.reward;
                finished = true;
                break;
            }

            if (result.rollbacks.size() >= cfg.max_rollback_attempts || !assistant_unlocked(traj.size(), cfg.wait_info_k)) {
                continue;
            }

            const auto review = ctx.assistant->complete(render_assistant_prompt(ctx.prompts->assistant, traj),
                                                        cfg.assistant_params);
            ++result.assistant_calls;
            result.total_assist_tokens += review.completion_tokens;

            auto fb = parse_feedback(review.text, traj.size());
            bool accepted = true;
            if (review.token_probs.empty()) {
                if (ctx.assistant->capabilities().reports_probabilities) {
                    throw MalformedResponse("assistant output carries no token probabilities");
                }
                if (!warned_probless) {
                    fmt::print(stderr, "warning: assistant backend '{}' reports no probabilities; feedback is not gated\n",
                               ctx.assistant->name());
                    warned_probless = true;
                }
                fb.confidence = 1.0;
            } else {
                fb.confidence = confidence_score(review.token_probs);
                result.confidence_samples.push_back(fb.confidence);
                accepted = accept_feedback(fb.confidence, cfg.theta);
            }
            result.feedback_samples.push_back(FeedbackSample{traj.size(), fb.confidence, accepted, fb.error_step.has_value()});
            emit(EventKind::analysis, json{{"at_step", traj.size()},
                                           {"confidence", fb.confidence},
                                           {"accepted", accepted},
                                           {"error_step", optional_step(fb.error_step)}});

            if (!accepted) {
                ++result.discarded_feedback_count;
                emit(EventKind::discard, json{{"at_step", traj.size()}, {"confidence", fb.confidence}, {"theta", cfg.theta}});
                continue;
            }
            if (!fb.error_step) continue;

            const auto n = traj.size();
            const auto target = compute_rollback_target(n, *fb.error_step, cfg.max_rollback_span);
            result.replayed_steps += restore_environment(*ctx.env, traj, target.target_len);
            traj.truncate(target.target_len);

            RollbackEvent event{n, *fb.error_step, n - *fb.error_step + 1, target.span_applied, target.target_len, fb};
            emit(EventKind::rollback, json{{"detected_at", event.detected_at},
                                           {"error_step", event.error_step},
                                           {"span_requested", event.span_requested},
                                           {"span_applied", event.span_applied},
                                           {"target_len", event.target_len}});
            pending_feedback = fb.explanation;
            pending_mistake = MistakeRecord{event.error_step, excerpt(fb)};
            result.rollbacks.push_back(std::move(event));
        }
    } catch (const Error& e) {
        result.error = e.what();
    }

    result.success = finished && !result.error && result.reward >= 1.0;
    result.final_trajectory = std::move(traj);
    result.wall_time_ms = clock() - started;
    emit(EventKind::done, json{{"success", result.success},
                               {"reward", result.reward},
                               {"steps", result.final_trajectory.size()},
                               {"rollbacks", result.rollbacks.size()},
                               {"error", result.error ? json(*result.error) : json(nullptr)}});
    return result;
}

std::vector<EpisodeResult> run_trials(const EpisodeContext& ctx) {
    if (!ctx.config || ctx.config->reflexion_trials < 1) throw ConfigError("reflexion_trials must be >= 1");
    std::vector<EpisodeResult> results;
    std::vector<std::string> reflections;
    for (std::size_t trial = 0; trial < ctx.config->reflexion_trials; ++trial) {
        results.push_back(run_episode(ctx, trial, reflections));
        auto& last = results.back();
        if (last.success || last.error || trial + 1 == ctx.config->reflexion_trials) break;
        try {
            const auto prompt = render_reflection_prompt(ctx.prompts->reflection_template, last.final_trajectory);
            const auto out = ctx.assistant->complete(prompt, ctx.config->assistant_params);
            last.total_assist_tokens += out.completion_tokens;
            auto text = out.text;
            auto first = text.find_first_not_of(" \t\r\n");
            auto end = text.find_last_not_of(" \t\r\n");
            text = first == std::string::npos ? std::string{} : text.substr(first, end - first + 1);
            for (auto& c : text) {
                if (c == '\n') c = ' ';
            }
            reflections.push_back(text.empty() ? "The previous attempt failed." : text);
        } catch (const Error& e) {
            last.error = std::string("reflection failed: ") + e.what();
            break;
        }
    }
    return results;
}

// --- JSON ----------------------------------------------------------------------------

void to_json(json& j, const RollbackEvent& event) {
    j = json{{"detected_at", event.detected_at},
             {"error_step", event.error_step},
             {"span_requested", event.span_requested},
             {"span_applied", event.span_applied},
             {"target_len", event.target_len},
             {"feedback",
              {{"raw_text", event.feedback.raw_text},
               {"error_step", optional_step(event.feedback.error_step)},
               {"explanation", event.feedback.explanation},
               {"confidence", event.feedback.confidence}}}};
}

void from_json(const json& j, RollbackEvent& event) {
    j.at("detected_at").get_to(event.detected_at);
    j.at("error_step").get_to(event.error_step);
    j.at("span_requested").get_to(event.span_requested);
    j.at("span_applied").get_to(event.span_applied);
    j.at("target_len").get_to(event.target_len);
    const auto& fb = j.at("feedback");
    event.feedback.raw_text = fb.value("raw_text", std::string{});
    event.feedback.explanation = fb.value("explanation", std::string{});
    event.feedback.confidence = fb.value("confidence", 0.0);
    if (fb.contains("error_step") && !fb.at("error_step").is_null()) {
        event.feedback.error_step = fb.at("error_step").get<std::size_t>();
    }
}

void to_json(json& j, const FeedbackSample& sample) {
    j = json{{"at_step", sample.at_step}, {"confidence", sample.confidence}, {"accepted", sample.accepted}, {"located", sample.located}};
}

void from_json(const json& j, FeedbackSample& sample) {
    j.at("at_step").get_to(sample.at_step);
    j.at("confidence").get_to(sample.confidence);
    j.at("accepted").get_to(sample.accepted);
    sample.located = j.value("located", false);
}

void to_json(json& j, const EpisodeResult& r) {
    j = json{{"success", r.success},
             {"reward", r.reward},
             {"trial_index", r.trial_index},
             {"rollbacks", r.rollbacks},
             {"discarded_feedback_count", r.discarded_feedback_count},
             {"confidence_samples", r.confidence_samples},
             {"feedback_samples", r.feedback_samples},
             {"total_gen_tokens", r.total_gen_tokens},
             {"total_assist_tokens", r.total_assist_tokens},
             {"generator_steps", r.generator_steps},
             {"replayed_steps", r.replayed_steps},
             {"assistant_calls", r.assistant_calls},
             {"reflections", r.reflections},
             {"error", r.error ? json(*r.error) : json(nullptr)},
             {"wall_time_ms", r.wall_time_ms},
             {"trajectory", r.final_trajectory}};
}

void from_json(const json& j, EpisodeResult& r) {
    r.success = j.at("success").get<bool>();
    r.reward = j.at("reward").get<double>();
    r.trial_index = j.value("trial_index", std::size_t{0});
    r.rollbacks = j.value("rollbacks", std::vector<RollbackEvent>{});
    r.discarded_feedback_count = j.value("discarded_feedback_count", std::size_t{0});
    r.confidence_samples = j.value("confidence_samples", std::vector<double>{});
    r.feedback_samples = j.value("feedback_samples", std::vector<FeedbackSample>{});
    r.total_gen_tokens = j.value("total_gen_tokens", std::uint64_t{0});
    r.total_assist_tokens = j.value("total_assist_tokens", std::uint64_t{0});
    r.generator_steps = j.value("generator_steps", std::size_t{0});
    r.replayed_steps = j.value("replayed_steps", std::size_t{0});
    r.assistant_calls = j.value("assistant_calls", std::size_t{0});
    r.reflections = j.value("reflections", std::vector<std::string>{});
    if (j.contains("error") && !j.at("error").is_null()) r.error = j.at("error").get<std::string>();
    r.wall_time_ms = j.value("wall_time_ms", std::uint64_t{0});
    if (j.contains("trajectory")) r.final_trajectory = j.at("trajectory").get<Trajectory>();
}

void to_json(json& j, const GenerationParams& p) {
    j = json{{"max_new_tokens", p.max_new_tokens}, {"temperature", p.temperature}, {"stop_sequences", p.stop_sequences}};
}

void from_json(const json& j, GenerationParams& p) {
    p.max_new_tokens = j.value("max_new_tokens", p.max_new_tokens);
    p.temperature = j.value("temperature", p.temperature);
    p.stop_sequences = j.value("stop_sequences", p.stop_sequences);
}

void to_json(json& j, const ControllerConfig& c) {
    j = json{{"theta", c.theta},
             {"wait_info_k", c.wait_info_k},
             {"max_rollback_span", c.max_rollback_span},
             {"max_rollback_attempts", c.max_rollback_attempts},
             {"max_env_steps", c.max_env_steps},
             {"reflexion_trials", c.reflexion_trials},
             {"generator_params", c.generator_params},
             {"assistant_params", c.assistant_params},
             {"mode", to_string(c.mode)}};
}

void from_json(const json& j, ControllerConfig& c) {
    c.theta = j.value("theta", c.theta);
    c.wait_info_k = j.value("wait_info_k", c.wait_info_k);
    c.max_rollback_span = j.value("max_rollback_span", c.max_rollback_span);
    c.max_rollback_attempts = j.value("max_rollback_attempts", c.max_rollback_attempts);
    c.max_env_steps = j.value("max_env_steps", c.max_env_steps);
    c.reflexion_trials = j.value("reflexion_trials", c.reflexion_trials);
    if (j.contains("generator_params")) from_json(j.at("generator_params"), c.generator_params);
    if (j.contains("assistant_params")) from_json(j.at("assistant_params"), c.assistant_params);
    if (j.contains("mode")) c.mode = prompt_mode_from_string(j.at("mode").get<std::string>());
}

}  // namespace gar
