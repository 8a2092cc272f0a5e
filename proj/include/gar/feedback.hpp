// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "gar/trajectory.hpp"

namespace gar {

/// Parsed assistant review of a trajectory.
struct Feedback {
    std::string raw_text;
    std::optional<std::size_t> error_step;  // 1-based, within [1, trajectory length]
    std::string explanation;
    double confidence = 0.0;
};

/// Mean of the per-token probabilities of the assistant output. Throws NoProbabilities on an empty list.
double confidence_score(std::span<const double> token_probs);

/// Feedback survives the gate iff score >= theta; anything strictly below is discarded.
constexpr bool accept_feedback(double score, double theta) noexcept { return score >= theta; }

/// The last "Error Location" marker decides: "Action <n>" locates step n, anything else
/// (e.g. "None") means no error. Locations outside [1, traj_len] are dropped. The explanation is the text after the last "Explanation" marker, or the whole text.
Feedback parse_feedback(std::string_view raw, std::size_t traj_len);

/// Assistant prompt template: fixed text with {examples} and {trajectory} placeholders.
struct AssistantTemplate {
    std::string body;
    std::string examples;
};

/// Substitutes the placeholders. The trajectory section uses render_trajectory_body
/// preceded by the task description.
std::string render_assistant_prompt(const AssistantTemplate& tmpl, const Trajectory& traj);

/// Prompt asking the assistant to reflect on a failed trial ({trajectory} placeholder).
std::string render_reflection_prompt(std::string_view tmpl, const Trajectory& traj);

/// Built-in prompt text, keyed by file stem under prompts/ (e.g. "assistant_game24").
/// Throws ConfigError for an unknown name.
const std::string& builtin_prompt(std::string_view name);

/// The assistant template for a built-in environment ("game24", "minishop", "remote").
AssistantTemplate builtin_assistant_template(std::string_view env_name);

}  // namespace gar
