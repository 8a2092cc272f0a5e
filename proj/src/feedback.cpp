// SPDX-License-Identifier: Apache-2.0
#include "gar/feedback.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <numeric>
#include <sstream>
#include <vector>

#include "gar/error.hpp"

namespace gar {

double confidence_score(std::span<const double> token_probs) {
    if (token_probs.empty()) throw NoProbabilities();
    // Kahan summation keeps long assistant outputs within a few ulps of the exact mean.
    double sum = 0.0;
    double carry = 0.0;
    for (double p : token_probs) {
        double y = p - carry;
        double t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
    return sum / static_cast<double>(token_probs.size());
}

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

std::vector<std::string_view> split_lines(std::string_view text) {
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        lines.push_back(text.substr(start, end - start));
        start = end + 1;
    }
    return lines;
}

constexpr std::string_view kDecoration = " \t\r*_:-#>`=.";

std::string_view strip_decoration(std::string_view s) {
    auto first = s.find_first_not_of(kDecoration);
    if (first == std::string_view::npos) return {};
    return s.substr(first);
}

// Expects `s` (lower-cased) to start with "action", optionally decorated; returns the step number.
std::optional<std::size_t> leading_action_number(std::string_view s) {
    s = strip_decoration(s);
    constexpr std::string_view kAction = "action";
    if (s.substr(0, kAction.size()) != kAction) return std::nullopt;
    s.remove_prefix(kAction.size());
    auto digits = s.find_first_not_of(" \t*_#:");
    if (digits == std::string_view::npos) return std::nullopt;
    s.remove_prefix(digits);
    std::size_t value = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc{} || ptr == s.data()) return std::nullopt;
    return value;
}

std::string trim(std::string_view s) {
    auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

}  // namespace

Feedback parse_feedback(std::string_view raw, std::size_t traj_len) {
    Feedback fb;
    fb.raw_text = std::string(raw);

    const auto lines = split_lines(raw);
    std::optional<std::size_t> last_match;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const auto line = lower(lines[i]);
        std::size_t from = 0;
        while (true) {
            auto marker = line.find("error", from);
            if (marker == std::string::npos) break;
            from = marker + 1;
            auto rest = std::string_view(line).substr(marker + 5);
            auto loc = rest.find_first_not_of(" \t*_");
            if (loc == std::string_view::npos || rest.substr(loc, 8) != "location") continue;
            rest.remove_prefix(loc + 8);

            auto number = leading_action_number(rest);
            if (!number && strip_decoration(rest).empty()) {
                // Marker alone on its line ("### Error Location"): look at the next non-blank line.
                for (std::size_t j = i + 1; j < lines.size(); ++j) {
                    auto next = lower(lines[j]);
                    if (strip_decoration(next).empty()) continue;
                    number = leading_action_number(next);
                    break;
                }
            }
            // The last marker decides, including an explicit "None".
            last_match = number;
            break;
        }
    }
    if (last_match && *last_match >= 1 && *last_match <= traj_len) fb.error_step = last_match;

    const auto lowered = lower(raw);
    auto pos = lowered.rfind("explanation");
    if (pos != std::string::npos) {
        auto rest = raw.substr(pos + 11);
        auto first = rest.find_first_not_of(" \t*_:-#>=");
        fb.explanation = first == std::string_view::npos ? std::string{} : trim(rest.substr(first));
    }
    if (fb.explanation.empty()) fb.explanation = trim(raw);
    return fb;
}

namespace {

void replace_all(std::string& text, std::string_view key, std::string_view value) {
    std::size_t pos = 0;
    while ((pos = text.find(key, pos)) != std::string::npos) {
        text.replace(pos, key.size(), value);
        pos += value.size();
    }
}

std::string trajectory_section(const Trajectory& traj) {
    // The templates supply the final newline.
    auto body = render_trajectory_body(traj);
    body.pop_back();
    return "# Here is the task:\n" + traj.task().description + "\n" + body;
}

}  // namespace

std::string render_assistant_prompt(const AssistantTemplate& tmpl, const Trajectory& traj) {
    std::string out = tmpl.body;
    // Trajectory first: exemplar text may itself contain the literal "{trajectory}".
    replace_all(out, "{trajectory}", trajectory_section(traj));
    auto pos = out.find("{examples}");
    if (pos != std::string::npos) out.replace(pos, 10, tmpl.examples);
    return out;
}

std::string render_reflection_prompt(std::string_view tmpl, const Trajectory& traj) {
    std::string out(tmpl);
    replace_all(out, "{trajectory}", trajectory_section(traj));
    return out;
}

AssistantTemplate builtin_assistant_template(std::string_view env_name) {
    const std::string env(env_name);
    return AssistantTemplate{builtin_prompt("assistant_" + env), builtin_prompt("assistant_examples_" + env)};
}

}  // namespace gar
