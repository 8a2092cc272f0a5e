// SPDX-License-Identifier: Apache-2.0
#include "gar/game24.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <numeric>
#include <regex>
#include <sstream>

#include <fmt/core.h>

#include "gar/error.hpp"

namespace gar::game24 {

namespace {

std::int64_t checked_mul(std::int64_t a, std::int64_t b) {
    std::int64_t r;
    if (__builtin_mul_overflow(a, b, &r)) throw Error("rational overflow");
    return r;
}

std::int64_t checked_add(std::int64_t a, std::int64_t b) {
    std::int64_t r;
    if (__builtin_add_overflow(a, b, &r)) throw Error("rational overflow");
    return r;
}

}  // namespace

Rational::Rational(std::int64_t num, std::int64_t den) {
    if (den == 0) throw ContractViolation("rational with zero denominator");
    if (den < 0) {
        num = -num;
        den = -den;
    }
    auto g = std::gcd(num, den);
    if (g == 0) g = 1;
    num_ = num / g;
    den_ = den / g;
}

Rational operator+(Rational a, Rational b) {
    return Rational(checked_add(checked_mul(a.num_, b.den_), checked_mul(b.num_, a.den_)), checked_mul(a.den_, b.den_));
}

Rational operator-(Rational a, Rational b) {
    return Rational(checked_add(checked_mul(a.num_, b.den_), -checked_mul(b.num_, a.den_)), checked_mul(a.den_, b.den_));
}

Rational operator*(Rational a, Rational b) {
    return Rational(checked_mul(a.num_, b.num_), checked_mul(a.den_, b.den_));
}

Rational operator/(Rational a, Rational b) {
    if (b.num_ == 0) throw ContractViolation("division by zero");
    return Rational(checked_mul(a.num_, b.den_), checked_mul(a.den_, b.num_));
}

std::strong_ordering operator<=>(const Rational& a, const Rational& b) {
    return checked_mul(a.num_, b.den_) <=> checked_mul(b.num_, a.den_);
}

std::string Rational::str() const {
    if (den_ == 1) return std::to_string(num_);
    return std::to_string(num_) + "/" + std::to_string(den_);
}

std::optional<Rational> parse_rational(std::string_view text) {
    auto parse_int = [](std::string_view s) -> std::optional<std::int64_t> {
        std::int64_t v = 0;
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
        return v;
    };
    auto slash = text.find('/');
    if (slash == std::string_view::npos) {
        auto v = parse_int(text);
        if (!v) return std::nullopt;
        return Rational(*v);
    }
    auto n = parse_int(text.substr(0, slash));
    auto d = parse_int(text.substr(slash + 1));
    if (!n || !d || *d == 0) return std::nullopt;
    return Rational(*n, *d);
}

// --- expression evaluation -------------------------------------------------------

namespace {

class ExpressionParser {
public:
    explicit ExpressionParser(std::string_view text) : text_(text) {}

    std::optional<ExpressionValue> parse() {
        ExpressionValue result;
        auto value = parse_sum(result.literals);
        skip_space();
        if (!value || pos_ != text_.size()) return std::nullopt;
        result.value = *value;
        return result;
    }

private:
    void skip_space() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    bool eat(char c) {
        skip_space();
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    std::optional<Rational> parse_sum(std::vector<Rational>& lits) {
        auto lhs = parse_product(lits);
        while (lhs) {
            if (eat('+')) {
                auto rhs = parse_product(lits);
                if (!rhs) return std::nullopt;
                lhs = *lhs + *rhs;
            } else if (eat('-')) {
                auto rhs = parse_product(lits);
                if (!rhs) return std::nullopt;
                lhs = *lhs - *rhs;
            } else {
                break;
            }
        }
        return lhs;
    }

    std::optional<Rational> parse_product(std::vector<Rational>& lits) {
        auto lhs = parse_primary(lits);
        while (lhs) {
            if (eat('*')) {
                auto rhs = parse_primary(lits);
                if (!rhs) return std::nullopt;
                lhs = *lhs * *rhs;
            } else if (eat('/')) {
                auto rhs = parse_primary(lits);
                if (!rhs || rhs->is_zero()) return std::nullopt;
                lhs = *lhs / *rhs;
            } else {
                break;
            }
        }
        return lhs;
    }

    std::optional<Rational> parse_primary(std::vector<Rational>& lits) {
        if (eat('(')) {
            auto inner = parse_sum(lits);
            if (!inner || !eat(')')) return std::nullopt;
            return inner;
        }
        skip_space();
        auto start = pos_;
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
        if (pos_ == start) return std::nullopt;
        auto literal = parse_rational(text_.substr(start, pos_ - start));
        if (!literal) return std::nullopt;
        lits.push_back(*literal);
        return literal;
    }

    std::string_view text_;
    std::size_t pos_ = 0;
};

std::string trim(std::string_view s) {
    auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

std::string join(const std::vector<Rational>& values) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out += ' ';
        out += values[i].str();
    }
    return out;
}

bool starts_with_ci(std::string_view text, std::string_view prefix) {
    if (text.size() < prefix.size()) return false;
    for (std::size_t i = 0; i < prefix.size(); ++i) {
        if (std::tolower(static_cast<unsigned char>(text[i])) != prefix[i]) return false;
    }
    return true;
}

}  // namespace

std::optional<ExpressionValue> evaluate_expression(std::string_view expr) {
    try {
        return ExpressionParser(expr).parse();
    } catch (const Error&) {
        return std::nullopt;  // overflow
    }
}

std::string format_numbers_left(const std::vector<Rational>& remaining) {
    return "numbers left: " + join(remaining);
}

// --- environment ----------------------------------------------------------------------

std::string task_description() {
    return "Use the four input numbers and basic arithmetic operations (+ - * /) to obtain 24.";
}

std::string Game24Env::reset(const json& task_config) {
    const auto& nums = task_config.at("numbers");
    if (!nums.is_array() || nums.size() != 4) throw ConfigError("game24 config needs exactly four numbers");
    state_ = Game24State{};
    for (std::size_t i = 0; i < 4; ++i) {
        const auto& n = nums.at(i);
        if (n.is_number_integer()) {
            state_.input_numbers[i] = Rational(n.get<std::int64_t>());
        } else {
            auto parsed = parse_rational(n.is_string() ? n.get<std::string>() : n.dump());
            if (!parsed) throw ConfigError("game24 number is not an integer or p/q: " + n.dump());
            state_.input_numbers[i] = *parsed;
        }
    }
    state_.remaining.assign(state_.input_numbers.begin(), state_.input_numbers.end());
    std::sort(state_.remaining.begin(), state_.remaining.end());
    started_ = true;

    std::vector<Rational> shown(state_.input_numbers.begin(), state_.input_numbers.end());
    return "Input: " + join(shown);
}

EnvObservation Game24Env::step(const std::string& action) {
    if (!started_) throw ContractViolation("step() before reset()");
    if (state_.done) return EnvObservation{std::string(kNothingHappens), 0.0, true, false};
    auto text = trim(action);
    if (starts_with_ci(text, "answer")) return step_answer(text);
    if (text.find('=') != std::string::npos) return step_equation(text);
    return EnvObservation{std::string(kNothingHappens), 0.0, false, false};
}

EnvObservation Game24Env::step_equation(std::string_view action) {
    auto invalid = [this](const std::string& why) {
        return EnvObservation{"Invalid action: " + why + ". " + format_numbers_left(state_.remaining), 0.0, false,
                              false};
    };

    std::string text = trim(action);
    // Tolerate a trailing "(left: 1 2 3)" annotation.
    if (auto paren = text.find('('); paren != std::string::npos && text.find('=') < paren) text = trim(text.substr(0, paren));

    static const std::regex kEquation(R"(^\s*(-?\d+(?:/\d+)?)\s*([-+*/])\s*(-?\d+(?:/\d+)?)\s*=\s*(-?\d+(?:/\d+)?)\s*$)");
    std::smatch m;
    if (!std::regex_match(text, m, kEquation)) return invalid("expected an equation of the form \"a op b = c\"");

    auto a = parse_rational(m[1].str());
    auto b = parse_rational(m[3].str());
    auto c = parse_rational(m[4].str());
    if (!a || !b || !c) return invalid("could not read the numbers");
    const char op = m[2].str()[0];

    std::vector<Rational> pool = state_.remaining;
    auto take = [&pool](const Rational& v) {
        auto it = std::find(pool.begin(), pool.end(), v);
        if (it == pool.end()) return false;
        pool.erase(it);
        return true;
    };
    if (!take(*a)) return invalid(a->str() + " is not among the numbers left");
    if (!take(*b)) return invalid(b->str() + " is not among the numbers left");

    Rational result;
    try {
        switch (op) {
            case '+': result = *a + *b; break;
            case '-': result = *a - *b; break;
            case '*': result = *a * *b; break;
            default:
                if (b->is_zero()) return invalid("division by zero");
                result = *a / *b;
        }
    } catch (const Error&) {
        return invalid("numbers too large");
    }
    if (result != *c) return invalid(fmt::format("{} {} {} is {}, not {}", a->str(), op, b->str(), result.str(), c->str()));

    pool.push_back(result);
    std::sort(pool.begin(), pool.end());
    state_.remaining = std::move(pool);
    state_.history.push_back(fmt::format("{} {} {} = {}", a->str(), op, b->str(), c->str()));
    return EnvObservation{format_numbers_left(state_.remaining), 0.0, false, true};
}

EnvObservation Game24Env::step_answer(std::string_view action) {
    state_.done = true;
    auto fail = [](const std::string& why) { return EnvObservation{"Incorrect: " + why + ".", 0.0, true, true}; };

    std::string text = trim(action);
    auto colon = text.find(':');
    std::string body = colon == std::string::npos ? trim(std::string_view(text).substr(6)) : trim(std::string_view(text).substr(colon + 1));
    std::string expr = body;
    if (auto eq = body.rfind('='); eq != std::string::npos) {
        expr = trim(std::string_view(body).substr(0, eq));
        auto rhs = parse_rational(trim(std::string_view(body).substr(eq + 1)));
        if (!rhs || *rhs != Rational(24)) return fail("the answer must end with \"= 24\"");
    }
    auto value = evaluate_expression(expr);
    if (!value) return fail("could not parse the expression \"" + expr + "\"");

    auto literals = value->literals;
    std::vector<Rational> inputs(state_.input_numbers.begin(), state_.input_numbers.end());
    std::sort(literals.begin(), literals.end());
    std::sort(inputs.begin(), inputs.end());
    if (literals != inputs) return fail("the expression must use exactly the input numbers " + join(inputs));
    if (value->value != Rational(24)) return fail(expr + " evaluates to " + value->value.str() + ", not 24");

    state_.history.push_back("answer: " + expr + " = 24");
    return EnvObservation{"Correct! " + expr + " = 24", 1.0, true, true};
}

std::string Game24Env::state_digest() const {
    std::vector<Rational> inputs(state_.input_numbers.begin(), state_.input_numbers.end());
    std::string out = "input=" + join(inputs) + ";remaining=" + join(state_.remaining) + ";history=";
    for (const auto& h : state_.history) out += h + "|";
    out += state_.done ? ";done=1" : ";done=0";
    return out;
}

std::vector<std::string> Game24Env::available_actions() const {
    std::vector<std::string> actions;
    if (state_.done) return actions;
    const auto& r = state_.remaining;
    for (std::size_t i = 0; i < r.size(); ++i) {
        for (std::size_t j = 0; j < r.size(); ++j) {
            if (i == j) continue;
            const auto& a = r[i];
            const auto& b = r[j];
            try {
                if (i < j) {
                    actions.push_back(fmt::format("{} + {} = {}", a.str(), b.str(), (a + b).str()));
                    actions.push_back(fmt::format("{} * {} = {}", a.str(), b.str(), (a * b).str()));
                }
                actions.push_back(fmt::format("{} - {} = {}", a.str(), b.str(), (a - b).str()));
                if (!b.is_zero()) actions.push_back(fmt::format("{} / {} = {}", a.str(), b.str(), (a / b).str()));
            } catch (const Error&) {
            }
        }
    }
    std::sort(actions.begin(), actions.end());
    actions.erase(std::unique(actions.begin(), actions.end()), actions.end());
    return actions;
}

// --- oracle -------------------------------------------------------------------------------

namespace {

struct Term {
    Rational value;
    std::string text;
    bool atomic;
};

std::string wrap(const Term& t) { return t.atomic ? t.text : "(" + t.text + ")"; }

struct Candidate {
    Term term;
    std::string equation;
};

std::optional<std::string> search(std::vector<Term>& terms, std::vector<std::string>& steps) {
    if (terms.size() == 1) {
        if (terms[0].value == Rational(24)) return terms[0].text;
        return std::nullopt;
    }
    for (std::size_t i = 0; i < terms.size(); ++i) {
        for (std::size_t j = i + 1; j < terms.size(); ++j) {
            const Term a = terms[i];
            const Term b = terms[j];
            auto eq = [](const Term& x, char op, const Term& y, const Rational& r) {
                return fmt::format("{} {} {} = {}", x.value.str(), op, y.value.str(), r.str());
            };
            std::vector<Candidate> candidates;
            try {
                auto add = [&](const Term& x, char op, const Term& y, Rational r) {
                    candidates.push_back({{r, wrap(x) + " " + op + " " + wrap(y), false}, eq(x, op, y, r)});
                };
                add(a, '+', b, a.value + b.value);
                add(a, '*', b, a.value * b.value);
                add(a, '-', b, a.value - b.value);
                add(b, '-', a, b.value - a.value);
                if (!b.value.is_zero()) add(a, '/', b, a.value / b.value);
                if (!a.value.is_zero()) add(b, '/', a, b.value / a.value);
            } catch (const Error&) {
                continue;
            }
            std::vector<Term> rest;
            for (std::size_t k = 0; k < terms.size(); ++k) {
                if (k != i && k != j) rest.push_back(terms[k]);
            }
            for (auto& c : candidates) {
                rest.push_back(c.term);
                steps.push_back(c.equation);
                if (auto found = search(rest, steps)) return found;
                steps.pop_back();
                rest.pop_back();
            }
        }
    }
    return std::nullopt;
}

}  // namespace

std::optional<std::string> brute_force_24(const std::array<Rational, 4>& numbers) {
    std::vector<Term> terms;
    for (const auto& n : numbers) terms.push_back({n, n.str(), true});
    std::vector<std::string> steps;
    return search(terms, steps);
}

std::optional<std::vector<std::string>> solve_24_stepwise(const std::array<Rational, 4>& numbers) {
    std::vector<Term> terms;
    for (const auto& n : numbers) terms.push_back({n, n.str(), true});
    std::vector<std::string> steps;
    auto expr = search(terms, steps);
    if (!expr) return std::nullopt;
    steps.push_back("answer: " + *expr + " = 24");
    return steps;
}

std::vector<Game24Instance> generate_instances(std::size_t count, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> dist(1, 13);
    std::vector<Game24Instance> out;
    while (out.size() < count) {
        std::array<int, 4> nums{dist(rng), dist(rng), dist(rng), dist(rng)};
        std::sort(nums.begin(), nums.end());
        std::array<Rational, 4> rats{Rational(nums[0]), Rational(nums[1]), Rational(nums[2]), Rational(nums[3])};
        if (!brute_force_24(rats)) continue;
        out.push_back(Game24Instance{fmt::format("g24-{:04d}", out.size() + 1), nums});
    }
    return out;
}

json instance_to_json(const Game24Instance& inst) {
    return json{{"id", inst.id}, {"numbers", inst.numbers}};
}

Game24Instance instance_from_json(const json& j) {
    Game24Instance inst;
    j.at("id").get_to(inst.id);
    const auto nums = j.at("numbers").get<std::vector<int>>();
    if (nums.size() != 4) throw ConfigError("game24 instance " + inst.id + " must have four numbers");
    std::copy(nums.begin(), nums.end(), inst.numbers.begin());
    return inst;
}

}  // namespace gar::game24
