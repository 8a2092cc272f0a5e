// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <regex>

#include "gar/error.hpp"
#include "gar/feedback.hpp"
#include "support.hpp"

using namespace gar;

TEST(Confidence, MeanOfProbabilities) {
    const std::vector<double> p{0.9, 0.8, 1.0, 0.7};
    EXPECT_NEAR(confidence_score(p), 0.85, 1e-15);
    EXPECT_EQ(confidence_score(std::vector<double>{0.42}), 0.42);
}

TEST(Confidence, EmptyThrows) { EXPECT_THROW(confidence_score({}), NoProbabilities); }

TEST(Confidence, MatchesLongDoubleOracle) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> unit(1e-6, 1.0);
    for (int round = 0; round < 300; ++round) {
        std::vector<double> p(1 + rng() % 2000);
        long double exact = 0;
        for (auto& x : p) {
            x = unit(rng);
            exact += x;
        }
        exact /= static_cast<long double>(p.size());
        EXPECT_NEAR(confidence_score(p), static_cast<double>(exact), 1e-13);
    }
}

TEST(Gate, BoundaryIsInclusive) {
    EXPECT_TRUE(accept_feedback(0.93, 0.93));
    EXPECT_FALSE(accept_feedback(std::nextafter(0.93, 0.0), 0.93));
    EXPECT_TRUE(accept_feedback(0.95, 0.93));
    EXPECT_FALSE(accept_feedback(0.90, 0.93));
    static_assert(accept_feedback(1.0, 1.0));
    static_assert(!accept_feedback(0.0, 0.01));
}

// --- parsing ---------------------------------------------------------------------------

namespace {

// Independent oracle: regex over lines, last marker decides.
std::optional<std::size_t> oracle_location(const std::string& raw, std::size_t traj_len) {
    std::vector<std::string> lines;
    std::istringstream in(raw);
    for (std::string line; std::getline(in, line);) {
        std::transform(line.begin(), line.end(), line.begin(), [](unsigned char c) { return std::tolower(c); });
        lines.push_back(line);
    }
    static const std::regex marker(R"(error[ \t*_]*location(.*))");
    static const std::regex action(R"(^[ \t\r*_:\-#>`=.]*action[ \t*_#:]*(\d+))");
    static const std::regex blank(R"(^[ \t\r*_:\-#>`=.]*$)");
    std::optional<std::size_t> last;
    bool seen = false;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        std::smatch m;
        if (!std::regex_search(lines[i], m, marker)) continue;
        seen = true;
        std::string tail = m[1].str();
        if (std::regex_match(tail, blank)) {
            tail.clear();
            for (std::size_t j = i + 1; j < lines.size(); ++j) {
                if (std::regex_match(lines[j], blank)) continue;
                tail = lines[j];
                break;
            }
        }
        std::smatch a;
        last = std::regex_search(tail, a, action) ? std::optional<std::size_t>(std::stoul(a[1].str())) : std::nullopt;
    }
    if (!seen || !last || *last < 1 || *last > traj_len) return std::nullopt;
    return last;
}

struct Case {
    const char* name;
    std::string text;
    std::size_t traj_len;
    std::optional<std::size_t> expected;
    std::string explanation;
};

std::vector<Case> cases() {
    return {
        {"plain", "### Conclusion\nError Location: Action 2\nExplanation: The agent should click the product.", 5, 2,
         "The agent should click the product."},
        {"bold", "**Error Location**: Action 3\n**Explanation**: wrong operand", 5, 3, "wrong operand"},
        {"spaced_bold", test::review("Action 4", "4 * 6 = 24 is better."), 6, 4, "4 * 6 = 24 is better."},
        {"none", test::review("None", "Everything is fine."), 6, std::nullopt, "Everything is fine."},
        {"header_then_line", "### Error Location\n\nAction 5\n### Explanation\nStop searching.", 6, 5, "Stop searching."},
        {"last_wins", "I first thought error location: Action 1.\n### Conclusion\nError Location: Action 3\nExplanation: x", 4,
         3, "x"},
        {"out_of_range", "Error Location: Action 9\nExplanation: y", 4, std::nullopt, "y"},
        {"lowercase_decorated", "error location - action #2.\nexplanation - redo it", 3, 2, "redo it"},
        {"no_marker", "Action 2 is wrong, please try again.", 3, std::nullopt, "Action 2 is wrong, please try again."},
        {"later_none_overrides", "Error Location: Action 2\n...\n### Conclusion\nError Location: None\nExplanation: ok", 3,
         std::nullopt, "ok"},
        {"zero", "Error Location: Action 0", 3, std::nullopt, "Error Location: Action 0"},
    };
}

}  // namespace

TEST(ParseFeedback, SyntheticTextsAgainstOracle) {
    for (const auto& c : cases()) {
        SCOPED_TRACE(c.name);
        auto fb = parse_feedback(c.text, c.traj_len);
        EXPECT_EQ(fb.error_step, c.expected);
        EXPECT_EQ(fb.error_step, oracle_location(c.text, c.traj_len));
        EXPECT_EQ(fb.explanation, c.explanation);
        EXPECT_EQ(fb.raw_text, c.text);
    }
}

TEST(ParseFeedback, RandomDecorationsAgainstOracle) {
    const std::vector<std::string> pre{"", "### ", "**", "- ", "> "};
    const std::vector<std::string> mid{": ", "**: ", " ** : ", " - ", ":\n", "\n\n"};
    const std::vector<std::string> loc{"Action 1", "action 7", "Action 12", "None", "ACTION 3", "step 2"};
    std::mt19937_64 rng(17);
    for (int round = 0; round < 2000; ++round) {
        std::string text;
        const auto markers = 1 + rng() % 3;
        for (std::size_t k = 0; k < markers; ++k) {
            text += "analysis line " + std::to_string(rng() % 100) + "\n";
            text += pre[rng() % pre.size()] + (rng() % 2 ? "Error Location" : "error location") + mid[rng() % mid.size()] +
                    loc[rng() % loc.size()] + "\n";
        }
        const std::size_t len = rng() % 12;
        EXPECT_EQ(parse_feedback(text, len).error_step, oracle_location(text, len)) << text;
    }
}

TEST(AssistantPrompt, BuiltinTemplatesSubstitutePlaceholders) {
    Trajectory t(test::game24_task("x", {4, 4, 6, 8}), "Input: 4 4 6 8");
    t.append("4 + 8 = 12", "numbers left: 4 6 12");
    for (const char* env : {"game24", "minishop", "remote"}) {
        SCOPED_TRACE(env);
        auto tmpl = builtin_assistant_template(env);
        auto prompt = render_assistant_prompt(tmpl, t);
        EXPECT_EQ(prompt.find("{trajectory}"), std::string::npos);
        EXPECT_EQ(prompt.find("{examples}"), std::string::npos);
        EXPECT_NE(prompt.find("** Error Location **: Action <step number>"), std::string::npos);
        EXPECT_NE(prompt.find(tmpl.examples), std::string::npos);
        EXPECT_TRUE(prompt.ends_with("Action 1: 4 + 8 = 12\nObservation 1: numbers left: 4 6 12\n"));
    }
}

TEST(AssistantPrompt, ExamplesParseToTheirOwnConclusion) {
    // Each built-in exemplar ends with a conclusion the parser must understand.
    EXPECT_EQ(parse_feedback(builtin_prompt("assistant_examples_game24"), 2).error_step, 1u);
    EXPECT_TRUE(parse_feedback(builtin_prompt("assistant_examples_minishop"), 10).error_step.has_value());
    EXPECT_TRUE(parse_feedback(builtin_prompt("assistant_examples_remote"), 20).error_step.has_value());
}

TEST(AssistantPrompt, ReflectionTemplate) {
    Trajectory t(test::game24_task("x", {1, 1, 1, 1}), "Input: 1 1 1 1");
    auto prompt = render_reflection_prompt(builtin_prompt("reflection"), t);
    EXPECT_NE(prompt.find("Observation 0: Input: 1 1 1 1"), std::string::npos);
    EXPECT_TRUE(prompt.ends_with("Reflection:") || prompt.ends_with("Reflection:\n"));
}

TEST(AssistantPrompt, UnknownBuiltinIsConfigError) { EXPECT_THROW(builtin_prompt("no_such_prompt"), ConfigError); }
