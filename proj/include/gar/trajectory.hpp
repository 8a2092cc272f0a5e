// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace gar {

using json = nlohmann::json;

struct TaskInstance {
    std::string id;
    std::string description;
    std::string env_name;
    json env_config = json::object();
};

struct Step {
    std::size_t index = 0;  // 1-based
    std::string action;
    std::string observation;
    bool is_think = false;
    std::uint64_t gen_tokens = 0;
    std::uint64_t latency_ms = 0;
};

/// Per-step bookkeeping attached by the controller when a step is appended.
struct StepMeta {
    bool is_think = false;
    std::uint64_t gen_tokens = 0;
    std::uint64_t latency_ms = 0;
};

/// Past rollback feedback, replayed into later generator prompts.
struct MistakeRecord {
    std::size_t at_step = 0;
    std::string feedback_excerpt;
};

enum class PromptMode { act_only, react };

std::string to_string(PromptMode mode);
PromptMode prompt_mode_from_string(const std::string& text);

/// Task description, initial observation o_0 and the action/observation steps.
/// Step indices are always 1..n; o_0 is not a step.
class Trajectory {
public:
    Trajectory() = default;
    Trajectory(TaskInstance task, std::string initial_observation)
        : task_(std::move(task)), initial_observation_(std::move(initial_observation)) {}

    const TaskInstance& task() const noexcept { return task_; }
    const std::string& initial_observation() const noexcept { return initial_observation_; }
    const std::vector<Step>& steps() const noexcept { return steps_; }
    std::size_t size() const noexcept { return steps_.size(); }
    bool empty() const noexcept { return steps_.empty(); }

    /// 1-based access.
    const Step& step(std::size_t index) const;

    /// Appends in place; returns the new step's index.
    std::size_t append(std::string action, std::string observation, const StepMeta& meta = {});

    /// Drops every step after the first `length`. Throws ContractViolation if length > size().
    void truncate(std::size_t length);

    friend bool operator==(const Trajectory&, const Trajectory&);

private:
    TaskInstance task_;
    std::string initial_observation_;
    std::vector<Step> steps_;
};

bool operator==(const TaskInstance& a, const TaskInstance& b);
bool operator==(const Step& a, const Step& b);

Trajectory append_step(Trajectory traj, std::string action, std::string observation,
                       const StepMeta& meta = {});
Trajectory truncate_to(Trajectory traj, std::size_t length);

/// Actions of steps 1..length, think-actions included.
std::vector<std::string> action_prefix(const Trajectory& traj, std::size_t length);

/// True for ReAct-style "think[...]" pseudo-actions.
bool is_think_action(const std::string& action);

/// Everything a generator prompt needs besides the trajectory itself.
struct GeneratorPromptContext {
    std::string instructions;  // environment-specific header
    std::string exemplars;     // few-shot demonstrations, already formatted
    std::vector<std::string> reflections;  // Reflexion memory from earlier trials
};

/// Maximum number of mistake records rendered into a generator prompt.
inline constexpr std::size_t kMaxRenderedMistakes = 6;

std::string render_generator_prompt(const Trajectory& traj, const std::optional<std::string>& feedback,
                                    const std::vector<MistakeRecord>& mistakes, PromptMode mode,
                                    const GeneratorPromptContext& context = {});

/// "Observation 0: ... / Action 1: ... / Observation 1: ..." block shared by
/// generator, assistant and reflection prompts.
std::string render_trajectory_body(const Trajectory& traj);

void to_json(json& j, const TaskInstance& task);
void from_json(const json& j, TaskInstance& task);
void to_json(json& j, const Step& step);
void from_json(const json& j, Step& step);
void to_json(json& j, const Trajectory& traj);
void from_json(const json& j, Trajectory& traj);
void to_json(json& j, const MistakeRecord& record);

}  // namespace gar
