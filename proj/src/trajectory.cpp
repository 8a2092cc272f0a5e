// SPDX-License-Identifier: Apache-2.0
#include "gar/trajectory.hpp"

#include <algorithm>
#include <sstream>

#include "gar/error.hpp"

namespace gar {

std::string to_string(PromptMode mode) {
    return mode == PromptMode::react ? "react" : "act_only";
}

PromptMode prompt_mode_from_string(const std::string& text) {
    if (text == "act_only") return PromptMode::act_only;
    if (text == "react") return PromptMode::react;
    throw ConfigError("unknown mode '" + text + "' (expected act_only or react)");
}

const Step& Trajectory::step(std::size_t index) const {
    if (index < 1 || index > steps_.size()) {
        throw ContractViolation("step index " + std::to_string(index) + " outside 1.." +
                                std::to_string(steps_.size()));
    }
    return steps_[index - 1];
}

std::size_t Trajectory::append(std::string action, std::string observation, const StepMeta& meta) {
    Step step;
    step.index = steps_.size() + 1;
    step.action = std::move(action);
    step.observation = std::move(observation);
    step.is_think = meta.is_think;
    step.gen_tokens = meta.gen_tokens;
    step.latency_ms = meta.latency_ms;
    steps_.push_back(std::move(step));
    return steps_.size();
}

void Trajectory::truncate(std::size_t length) {
    if (length > steps_.size()) {
        throw ContractViolation("cannot truncate trajectory of length " + std::to_string(steps_.size()) +
                                " to " + std::to_string(length));
    }
    steps_.resize(length);
}

bool operator==(const TaskInstance& a, const TaskInstance& b) {
    return a.id == b.id && a.description == b.description && a.env_name == b.env_name &&
           a.env_config == b.env_config;
}

bool operator==(const Step& a, const Step& b) {
    return a.index == b.index && a.action == b.action && a.observation == b.observation &&
           a.is_think == b.is_think && a.gen_tokens == b.gen_tokens && a.latency_ms == b.latency_ms;
}

bool operator==(const Trajectory& a, const Trajectory& b) {
    return a.task_ == b.task_ && a.initial_observation_ == b.initial_observation_ && a.steps_ == b.steps_;
}

Trajectory append_step(Trajectory traj, std::string action, std::string observation, const StepMeta& meta) {
    traj.append(std::move(action), std::move(observation), meta);
    return traj;
}

Trajectory truncate_to(Trajectory traj, std::size_t length) {
    traj.truncate(length);
    return traj;
}

std::vector<std::string> action_prefix(const Trajectory& traj, std::size_t length) {
    if (length > traj.size()) {
        throw ContractViolation("action prefix of length " + std::to_string(length) +
                                " requested from trajectory of length " + std::to_string(traj.size()));
    }
    std::vector<std::string> actions;
    actions.reserve(length);
    for (std::size_t i = 0; i < length; ++i) actions.push_back(traj.steps()[i].action);
    return actions;
}

bool is_think_action(const std::string& action) {
    auto first = action.find_first_not_of(" \t");
    if (first == std::string::npos) return false;
    if (action.compare(first, 6, "think[") != 0) return false;
    auto last = action.find_last_not_of(" \t\r\n");
    return action[last] == ']';
}

std::string render_trajectory_body(const Trajectory& traj) {
    std::ostringstream out;
    out << "Observation 0: " << traj.initial_observation() << '\n';
    for (const auto& step : traj.steps()) {
        out << "Action " << step.index << ": " << step.action << '\n';
        out << "Observation " << step.index << ": " << step.observation << '\n';
    }
    return out.str();
}

std::string render_generator_prompt(const Trajectory& traj, const std::optional<std::string>& feedback,
                                    const std::vector<MistakeRecord>& mistakes, PromptMode mode,
                                    const GeneratorPromptContext& context) {
    std::ostringstream out;
    if (!context.instructions.empty()) out << context.instructions << '\n';
    if (mode == PromptMode::react) {
        out << "Reply with the next action only. You may instead reply with think[...] to reason "
               "before acting; thoughts are answered with \"OK.\"\n";
    } else {
        out << "Reply with the next action only.\n";
    }

    if (!context.exemplars.empty()) {
        out << "\n# Examples\n" << context.exemplars;
        if (context.exemplars.back() != '\n') out << '\n';
    }

    if (!context.reflections.empty()) {
        out << "\n# Reflections from earlier attempts\n";
        for (std::size_t i = 0; i < context.reflections.size(); ++i) {
            out << "Trial " << (i + 1) << ": " << context.reflections[i] << '\n';
        }
    }

    if (!mistakes.empty()) {
        out << "\n# Mistakes to avoid\n";
        auto begin = mistakes.size() > kMaxRenderedMistakes ? mistakes.end() - kMaxRenderedMistakes
                                                            : mistakes.begin();
        for (auto it = begin; it != mistakes.end(); ++it) {
            out << "- Action " << it->at_step << ": " << it->feedback_excerpt << '\n';
        }
    }

    out << "\n# Here is the task:\n" << traj.task().description << '\n';
    out << render_trajectory_body(traj);

    if (feedback) {
        out << "\n<feedback>\n" << *feedback;
        if (feedback->empty() || feedback->back() != '\n') out << '\n';
        out << "</feedback>\n";
    }

    out << "Action " << traj.size() + 1 << ":";
    return out.str();
}

void to_json(json& j, const TaskInstance& task) {
    j = json{{"id", task.id},
             {"description", task.description},
             {"env_name", task.env_name},
             {"env_config", task.env_config}};
}

void from_json(const json& j, TaskInstance& task) {
    j.at("id").get_to(task.id);
    j.at("description").get_to(task.description);
    task.env_name = j.value("env_name", std::string{});
    task.env_config = j.value("env_config", json::object());
}

void to_json(json& j, const Step& step) {
    j = json{{"index", step.index},           {"action", step.action},
             {"observation", step.observation}, {"is_think", step.is_think},
             {"gen_tokens", step.gen_tokens},   {"latency_ms", step.latency_ms}};
}

void from_json(const json& j, Step& step) {
    j.at("index").get_to(step.index);
    j.at("action").get_to(step.action);
    j.at("observation").get_to(step.observation);
    step.is_think = j.value("is_think", false);
    step.gen_tokens = j.value("gen_tokens", std::uint64_t{0});
    step.latency_ms = j.value("latency_ms", std::uint64_t{0});
}

void to_json(json& j, const Trajectory& traj) {
    j = json{{"task", traj.task()}, {"initial_observation", traj.initial_observation()}, {"steps", traj.steps()}};
}

void from_json(const json& j, Trajectory& traj) {
    Trajectory result(j.at("task").get<TaskInstance>(), j.at("initial_observation").get<std::string>());
    for (const auto& item : j.at("steps")) {
        auto step = item.get<Step>();
        if (step.index != result.size() + 1) {
            throw ContractViolation("trajectory JSON has non-contiguous step index " + std::to_string(step.index));
        }
        result.append(std::move(step.action), std::move(step.observation),
                      StepMeta{step.is_think, step.gen_tokens, step.latency_ms});
    }
    traj = std::move(result);
}

void to_json(json& j, const MistakeRecord& record) {
    j = json{{"at_step", record.at_step}, {"feedback_excerpt", record.feedback_excerpt}};
}

}  // namespace gar
