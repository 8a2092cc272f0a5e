// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "gar/backend.hpp"
#include "gar/environment.hpp"
#include "gar/feedback.hpp"
#include "gar/trajectory.hpp"

namespace gar {

struct ControllerConfig {
    double theta = 0.93;
    std::size_t wait_info_k = 6;
    std::size_t max_rollback_span = 6;
    std::size_t max_rollback_attempts = 6;
    std::size_t max_env_steps = 12;
    std::size_t reflexion_trials = 2;
    GenerationParams generator_params = default_generator_params();
    GenerationParams assistant_params = default_assistant_params();
    PromptMode mode = PromptMode::act_only;

    /// Throws ConfigError on out-of-range values.
    void validate() const;
};

/// Step caps used when a run does not set one explicitly.
std::size_t default_max_env_steps(const std::string& env_name);

/// Wait-Info k used when a run does not set one: 6 for embodied (remote) environments, 0 otherwise.
std::size_t default_wait_info_k(const std::string& env_name);

struct RollbackEvent {
    std::size_t detected_at = 0;     // n
    std::size_t error_step = 0;      // t
    std::size_t span_requested = 0;  // n - t + 1
    std::size_t span_applied = 0;    // min(span_requested, max span)
    std::size_t target_len = 0;      // n - span_applied
    Feedback feedback;
};

/// One assistant review, whether or not it survived the confidence gate.
struct FeedbackSample {
    std::size_t at_step = 0;
    double confidence = 0.0;
    bool accepted = false;
    bool located = false;  // parse produced an error step
};

struct EpisodeResult {
    bool success = false;
    double reward = 0.0;
    Trajectory final_trajectory;
    std::vector<RollbackEvent> rollbacks;
    std::size_t discarded_feedback_count = 0;
    std::vector<double> confidence_samples;
    std::vector<FeedbackSample> feedback_samples;
    std::uint64_t total_gen_tokens = 0;
    std::uint64_t total_assist_tokens = 0;
    std::uint64_t wall_time_ms = 0;
    std::size_t trial_index = 0;
    std::size_t generator_steps = 0;  // actions issued by the generator
    std::size_t replayed_steps = 0;   // actions re-executed during restoration
    std::size_t assistant_calls = 0;
    std::vector<std::string> reflections;  // memory this trial started with
    std::optional<std::string> error;      // set when the episode aborted
};

struct RollbackTarget {
    std::size_t span_applied = 0;
    std::size_t target_len = 0;

    friend bool operator==(const RollbackTarget&, const RollbackTarget&) = default;
};

/// span = min(n - t + 1, n_bar), target = n - span. Throws ContractViolation unless 1 <= t <= n and n_bar >= 1.
RollbackTarget compute_rollback_target(std::size_t n, std::size_t t, std::size_t n_bar);

/// Wait-Info gate: the assistant may review only once the trajectory holds k actions.
constexpr bool assistant_unlocked(std::size_t traj_len, std::size_t k) noexcept { return traj_len >= k; }

/// Resets `env` to the trajectory's task and replays actions 1..target_len, checking every
/// replayed observation against the recorded one. Returns the number of replayed actions.
/// Throws ReplayDivergence on the first mismatch.
std::size_t restore_environment(Environment& env, const Trajectory& traj, std::size_t target_len);

// --- event stream -----------------------------------------------------------------

inline constexpr int kEventSchemaVersion = 1;

enum class EventKind { step, analysis, rollback, discard, done };

std::string to_string(EventKind kind);

/// Structured controller event. Payload fields per kind:
///   step:     index, action, observation, reward, done, valid_action
///   analysis: at_step, confidence, accepted, error_step (null if none)
///   rollback: detected_at, error_step, span_requested, span_applied, target_len
///   discard:  at_step, confidence, theta
///   done:     success, reward, steps, rollbacks, error (null if none)
struct Event {
    EventKind kind;
    std::size_t trial_index = 0;
    json payload;
};

json event_to_json(const Event& event);

using EventSink = std::function<void(const Event&)>;

/// Per-environment prompt material.
struct PromptKit {
    GeneratorPromptContext generator;  // reflections are filled in by run_trials
    AssistantTemplate assistant;
    std::string reflection_template;
};

/// Built-in prompt kit for "game24", "minishop" or "remote" in the given mode.
PromptKit builtin_prompt_kit(const std::string& env_name, PromptMode mode);

/// Turns raw generator text into an action: first non-blank line, with any
/// leading "Action n:" / "> " label removed.
std::string extract_action(const std::string& generated);

struct EpisodeContext {
    const TaskInstance* task = nullptr;
    Environment* env = nullptr;
    ModelBackend* generator = nullptr;
    ModelBackend* assistant = nullptr;
    const ControllerConfig* config = nullptr;
    const PromptKit* prompts = nullptr;
    EventSink events;
    std::function<std::uint64_t()> clock_ms;  // defaults to steady_clock
};

/// One GA-Rollback episode. Throws ConfigError for invalid configuration (including rollback
/// on a non-deterministic environment); backend and replay failures end the episode with `error` set.
EpisodeResult run_episode(const EpisodeContext& ctx, std::size_t trial_index = 0,
                          const std::vector<std::string>& reflections = {});

/// Reflexion wrapper: up to reflexion_trials episodes, stopping at the first success. After each
/// failed trial (except the last) the assistant writes a reflection carried into later trials.
std::vector<EpisodeResult> run_trials(const EpisodeContext& ctx);

void to_json(json& j, const RollbackEvent& event);
void to_json(json& j, const FeedbackSample& sample);
void to_json(json& j, const EpisodeResult& result);
void from_json(const json& j, RollbackEvent& event);
void from_json(const json& j, FeedbackSample& sample);
void from_json(const json& j, EpisodeResult& result);
void to_json(json& j, const ControllerConfig& cfg);
void from_json(const json& j, ControllerConfig& cfg);
void to_json(json& j, const GenerationParams& params);
void from_json(const json& j, GenerationParams& params);

}  // namespace gar
