// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <numeric>
#include <random>

#include "gar/error.hpp"
#include "gar/game24.hpp"

using namespace gar;
using namespace gar::game24;

namespace {

json numbers(std::array<int, 4> n) { return json{{"numbers", n}}; }

// Independent oracle: plain fractions in long long, pairwise combination search.
struct Frac {
    long long n, d;
};

Frac norm(long long n, long long d) {
    if (d < 0) n = -n, d = -d;
    const long long g = std::gcd(n < 0 ? -n : n, d);
    return {n / g, d / g};
}

bool reaches_24(std::vector<Frac> v) {
    if (v.size() == 1) return v[0].n == 24 && v[0].d == 1;
    for (std::size_t i = 0; i < v.size(); ++i) {
        for (std::size_t j = 0; j < v.size(); ++j) {
            if (i == j) continue;
            const Frac a = v[i], b = v[j];
            std::vector<Frac> rest;
            for (std::size_t k = 0; k < v.size(); ++k)
                if (k != i && k != j) rest.push_back(k == i ? a : v[k]);
            std::vector<Frac> outs{norm(a.n * b.d + b.n * a.d, a.d * b.d), norm(a.n * b.d - b.n * a.d, a.d * b.d),
                                   norm(a.n * b.n, a.d * b.d)};
            if (b.n != 0) outs.push_back(norm(a.n * b.d, a.d * b.n));
            for (const auto& r : outs) {
                auto next = rest;
                next.push_back(r);
                if (reaches_24(next)) return true;
            }
        }
    }
    return false;
}

std::array<Rational, 4> rationals(std::array<int, 4> n) { return {Rational(n[0]), Rational(n[1]), Rational(n[2]), Rational(n[3])}; }

}  // namespace

TEST(Rational, NormalizesAndOrders) {
    EXPECT_EQ(Rational(6, -4), Rational(-3, 2));
    EXPECT_EQ(Rational(6, -4).str(), "-3/2");
    EXPECT_EQ(Rational(8, 4).str(), "2");
    EXPECT_LT(Rational(1, 3), Rational(1, 2));
    EXPECT_EQ(Rational(1, 3) + Rational(1, 6), Rational(1, 2));
    EXPECT_THROW(Rational(1) / Rational(0), ContractViolation);
    EXPECT_EQ(parse_rational("5/2"), Rational(5, 2));
    EXPECT_EQ(parse_rational("-7"), Rational(-7));
    EXPECT_FALSE(parse_rational("x"));
    EXPECT_FALSE(parse_rational("1/0"));
}

TEST(Rational, DivisionIsExact) {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 2000; ++i) {
        Rational a(static_cast<std::int64_t>(rng() % 2001) - 1000, 1 + static_cast<std::int64_t>(rng() % 500));
        Rational b(1 + static_cast<std::int64_t>(rng() % 1000), 1 + static_cast<std::int64_t>(rng() % 500));
        if (rng() % 2) b = Rational(0) - b;
        EXPECT_EQ((a / b) * b, a);
    }
}

TEST(Rational, OverflowThrows) {
    const Rational big(std::int64_t{1} << 62);
    EXPECT_THROW(big * big, Error);
}

TEST(Expression, EvaluatesWithPrecedence) {
    auto v = evaluate_expression("(13 - 1) + 2 + 10");
    ASSERT_TRUE(v);
    EXPECT_EQ(v->value, Rational(24));
    EXPECT_EQ(evaluate_expression("2 + 3 * 4")->value, Rational(14));
    EXPECT_EQ(evaluate_expression("8 / (3 - 8 / 3)")->value, Rational(24));
    EXPECT_EQ(evaluate_expression("1 - 2 - 3")->value, Rational(-4));
    EXPECT_FALSE(evaluate_expression("1 / (2 - 2)"));
    EXPECT_FALSE(evaluate_expression("(1 + 2"));
    EXPECT_FALSE(evaluate_expression("1 +"));
    EXPECT_EQ(evaluate_expression("3 * (8 - 4) * 2")->literals.size(), 4u);
}

TEST(Game24Env, WorkedExampleObservations) {
    Game24Env env;
    EXPECT_EQ(env.reset(numbers({1, 2, 10, 13})), "Input: 1 2 10 13");
    auto o1 = env.step("13 - 10 = 3");
    EXPECT_EQ(o1, (EnvObservation{"numbers left: 1 2 3", 0.0, false, true}));
    auto o2 = env.step("3 * 2 = 6");
    EXPECT_EQ(o2.text, "numbers left: 1 6");
    EXPECT_EQ(env.state().remaining.size(), 2u);
}

TEST(Game24Env, WorkedAnswerAccepted) {
    Game24Env env;
    env.reset(numbers({1, 2, 10, 13}));
    auto o = env.step("answer: (13 - 1) + 2 + 10 = 24");
    EXPECT_TRUE(o.done);
    EXPECT_EQ(o.reward, 1.0);
}

TEST(Game24Env, InvalidEquations) {
    Game24Env env;
    env.reset(numbers({1, 2, 10, 13}));
    const auto before = env.state();
    for (const char* bad : {"5 + 5 = 10", "13 - 10 = 4", "1 / 0 = 0", "13 -- 10 = 3", "1 + 1 = 2", "hello = there"}) {
        SCOPED_TRACE(bad);
        auto o = env.step(bad);
        EXPECT_FALSE(o.valid_action);
        EXPECT_FALSE(o.done);
        EXPECT_NE(o.text.find("numbers left: 1 2 10 13"), std::string::npos);
        EXPECT_EQ(env.state(), before);
    }
    auto o = env.step("look around");
    EXPECT_EQ(o.text, kNothingHappens);
    EXPECT_FALSE(o.valid_action);
}

TEST(Game24Env, WrongAnswersEndTheEpisode) {
    for (const char* bad : {"answer: 12 * 2 = 24", "answer: (10 - 13) * (1 - 2) * 8 = 24", "answer: 1 + 2 + 10 + 13 = 24",
                            "answer: (13 - 1) + 2 + 10 = 25", "answer: ((13 - 1) + 2 = 24"}) {
        SCOPED_TRACE(bad);
        Game24Env env;
        env.reset(numbers({1, 2, 10, 13}));
        auto o = env.step(bad);
        EXPECT_TRUE(o.done);
        EXPECT_EQ(o.reward, 0.0);
        EXPECT_FALSE(o.text.empty());
        EXPECT_EQ(env.step("1 + 2 = 3").text, kNothingHappens);
    }
}

TEST(Game24Env, FractionsAreCanonical) {
    Game24Env env;
    env.reset(numbers({3, 3, 8, 8}));
    EXPECT_EQ(env.step("8 / 3 = 8/3").text, "numbers left: 8/3 3 8");
    EXPECT_EQ(env.step("3 - 8/3 = 1/3").text, "numbers left: 1/3 8");
    EXPECT_EQ(env.step("8 / 1/3 = 24").text, "numbers left: 24");
    EXPECT_TRUE(env.step("answer: 8 / (3 - 8 / 3) = 24").reward == 1.0);
}

TEST(Game24Env, ValidStepRemovesExactlyOneNumber) {
    std::mt19937_64 rng(2);
    Game24Env env;
    for (int round = 0; round < 300; ++round) {
        env.reset(numbers({1 + int(rng() % 13), 1 + int(rng() % 13), 1 + int(rng() % 13), 1 + int(rng() % 13)}));
        for (int s = 0; s < 3; ++s) {
            auto acts = env.available_actions();
            ASSERT_FALSE(acts.empty());
            const auto before = env.state().remaining.size();
            ASSERT_TRUE(env.step(acts[rng() % acts.size()]).valid_action);
            EXPECT_EQ(env.state().remaining.size(), before - 1);
        }
    }
}

TEST(Oracle, KnownInstances) {
    EXPECT_TRUE(brute_force_24(rationals({1, 2, 10, 13})));
    EXPECT_FALSE(brute_force_24(rationals({1, 1, 1, 1})));
    auto zeros = brute_force_24(rationals({4, 6, 0, 0}));
    ASSERT_TRUE(zeros);
    Game24Env env;
    env.reset(numbers({4, 6, 0, 0}));
    EXPECT_EQ(env.step("answer: " + *zeros + " = 24").reward, 1.0);
}

TEST(Oracle, SoundAndCompleteAgainstIndependentSearch) {
    std::mt19937_64 rng(24);
    Game24Env env;
    for (int round = 0; round < 200; ++round) {
        std::array<int, 4> n{1 + int(rng() % 13), 1 + int(rng() % 13), 1 + int(rng() % 13), 1 + int(rng() % 13)};
        auto expr = brute_force_24(rationals(n));
        std::vector<Frac> v;
        for (int x : n) v.push_back({x, 1});
        ASSERT_EQ(expr.has_value(), reaches_24(v)) << n[0] << " " << n[1] << " " << n[2] << " " << n[3];
        if (!expr) continue;
        env.reset(numbers(n));
        EXPECT_EQ(env.step("answer: " + *expr + " = 24").reward, 1.0) << *expr;
    }
}

TEST(Oracle, StepwiseSolutionReplaysInTheEnvironment) {
    for (const auto& inst : generate_instances(40, 9)) {
        auto steps = solve_24_stepwise(rationals(inst.numbers));
        ASSERT_TRUE(steps);
        ASSERT_EQ(steps->size(), 4u);
        Game24Env env;
        env.reset(numbers(inst.numbers));
        for (std::size_t i = 0; i < 3; ++i) ASSERT_TRUE(env.step((*steps)[i]).valid_action) << (*steps)[i];
        EXPECT_EQ(env.state().remaining, std::vector<Rational>{Rational(24)});
        EXPECT_EQ(env.step((*steps)[3]).reward, 1.0) << (*steps)[3];
    }
    EXPECT_FALSE(solve_24_stepwise(rationals({1, 1, 1, 1})));
}

TEST(Instances, SeededAndSolvable) {
    auto a = generate_instances(30, 77);
    auto b = generate_instances(30, 77);
    ASSERT_EQ(a.size(), 30u);
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].id, b[i].id);
        EXPECT_EQ(a[i].numbers, b[i].numbers);
        EXPECT_TRUE(brute_force_24(rationals(a[i].numbers)));
        for (int x : a[i].numbers) EXPECT_TRUE(x >= 1 && x <= 13);
        auto round = instance_from_json(instance_to_json(a[i]));
        EXPECT_EQ(round.numbers, a[i].numbers);
    }
    auto c = generate_instances(30, 78);
    bool differs = false;
    for (std::size_t i = 0; i < a.size(); ++i) differs = differs || c[i].numbers != a[i].numbers;
    EXPECT_TRUE(differs);
}

TEST(Game24Env, BadConfigIsConfigError) {
    Game24Env env;
    EXPECT_THROW(env.reset(json{{"numbers", {1, 2}}}), ConfigError);
    EXPECT_THROW(env.reset(json{{"numbers", {1, 2, 3, "x"}}}), ConfigError);
    Game24Env fresh;
    EXPECT_THROW(fresh.step("1 + 2 = 3"), ContractViolation);
}
