// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "gar/environment.hpp"

namespace gar::game24 {

/// Exact rational with a positive denominator, always in lowest terms.
/// Arithmetic throws gar::Error on int64 overflow.
class Rational {
public:
    constexpr Rational() = default;
    Rational(std::int64_t num, std::int64_t den = 1);

    std::int64_t num() const noexcept { return num_; }
    std::int64_t den() const noexcept { return den_; }
    bool is_zero() const noexcept { return num_ == 0; }

    friend Rational operator+(Rational a, Rational b);
    friend Rational operator-(Rational a, Rational b);
    friend Rational operator*(Rational a, Rational b);
    /// Throws gar::ContractViolation on division by zero.
    friend Rational operator/(Rational a, Rational b);

    friend bool operator==(const Rational&, const Rational&) = default;
    friend std::strong_ordering operator<=>(const Rational& a, const Rational& b);

    /// "7", "-3", "5/2".
    std::string str() const;

private:
    std::int64_t num_ = 0;
    std::int64_t den_ = 1;
};

/// Parses "7", "-3" or "5/2".
std::optional<Rational> parse_rational(std::string_view text);

struct Game24State {
    std::array<Rational, 4> input_numbers{};
    std::vector<Rational> remaining;  // kept sorted
    std::vector<std::string> history;
    bool done = false;

    friend bool operator==(const Game24State&, const Game24State&) = default;
};

/// Result of parsing an answer expression.
struct ExpressionValue {
    Rational value;
    std::vector<Rational> literals;
};

/// Evaluates an infix expression over + - * / and parentheses with exact arithmetic.
/// nullopt on a parse error or division by zero.
std::optional<ExpressionValue> evaluate_expression(std::string_view expr);

/// "numbers left: 1 2 3" over the sorted multiset.
std::string format_numbers_left(const std::vector<Rational>& remaining);

/// The Game of 24 environment. Actions are equations "a op b = c" over the numbers
/// left, or a final "answer: <expr> = 24".
class Game24Env final : public Environment {
public:
    Game24Env() = default;

    /// Config: {"numbers": [1, 2, 10, 13]}.
    std::string reset(const json& task_config) override;
    EnvObservation step(const std::string& action) override;
    bool deterministic() const override { return true; }
    std::string name() const override { return "game24"; }
    std::string state_digest() const override;
    std::vector<std::string> available_actions() const override;

    const Game24State& state() const noexcept { return state_; }

    EnvObservation step_equation(std::string_view action);
    EnvObservation step_answer(std::string_view action);

private:
    Game24State state_;
    bool started_ = false;
};

/// Exhaustive search over operand orders, operators and parenthesizations.
/// Returns one fully parenthesized expression evaluating to 24, or nullopt.
std::optional<std::string> brute_force_24(const std::array<Rational, 4>& numbers);

/// The same search as a sequence of actions: three equations followed by the answer.
std::optional<std::vector<std::string>> solve_24_stepwise(const std::array<Rational, 4>& numbers);

struct Game24Instance {
    std::string id;
    std::array<int, 4> numbers{};
};

/// Seeded sample of distinct-or-not 4-tuples from [1, 13], filtered to solvable ones.
std::vector<Game24Instance> generate_instances(std::size_t count, std::uint64_t seed);

json instance_to_json(const Game24Instance& inst);
Game24Instance instance_from_json(const json& j);

/// Task description shared by every Game of 24 instance.
std::string task_description();

}  // namespace gar::game24
