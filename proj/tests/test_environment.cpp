// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <sys/socket.h>

#include <future>
#include <random>
#include <thread>

#include "gar/environment.hpp"
#include "gar/error.hpp"
#include "gar/game24.hpp"
#include "scenarios.hpp"

using namespace gar;
using namespace std::chrono_literals;

namespace {

std::pair<std::unique_ptr<FdChannel>, std::unique_ptr<FdChannel>> channel_pair() {
    int fds[2];
    if (::socketpair(AF_UNIX, SOCK_STREAM, 0, fds) != 0) throw std::runtime_error("socketpair");
    return {std::make_unique<FdChannel>(fds[0], fds[0]), std::make_unique<FdChannel>(fds[1], fds[1])};
}

// Serves a real environment on one end of a socketpair.
struct LoopbackEnv {
    std::unique_ptr<Environment> remote;
    std::thread server;
    std::unique_ptr<Environment> served;

    explicit LoopbackEnv(std::unique_ptr<Environment> env) : served(std::move(env)) {
        auto [a, b] = channel_pair();
        server = std::thread([this, ch = std::shared_ptr<FdChannel>(std::move(b))] { serve_environment(*served, *ch); });
        remote = remote_env(std::move(a), 5s);
    }
    ~LoopbackEnv() {
        remote.reset();  // sends close
        server.join();
    }
};

// A peer that answers each request line with the next canned reply.
struct CannedPeer {
    std::thread thread;
    std::unique_ptr<FdChannel> client;

    explicit CannedPeer(std::vector<std::string> replies) {
        auto [a, b] = channel_pair();
        client = std::move(a);
        thread = std::thread([replies, ch = std::shared_ptr<FdChannel>(std::move(b))] {
            try {
                for (const auto& reply : replies) {
                    if (!ch->read_line(5s)) return;
                    if (reply == "<hang>") {
                        std::this_thread::sleep_for(600ms);
                        return;
                    }
                    if (reply == "<eof>") return;
                    ch->write_line(reply);
                }
                while (auto line = ch->read_line(5s)) {
                    if (line->find("\"close\"") != std::string::npos) ch->write_line(R"({"ok": true})");
                }
            } catch (const ConnectionError&) {
            }
        });
    }
    ~CannedPeer() { thread.join(); }
};

const std::string kHello = R"({"hello": {"env": "canned", "deterministic": true}})";

}  // namespace

TEST(ThinkWrapper, AnswersThoughtsWithoutTouchingTheEnvironment) {
    auto env = think_wrapper(std::make_unique<game24::Game24Env>());
    env->reset(json{{"numbers", {4, 4, 6, 8}}});
    const auto before = env->state_digest();
    auto obs = env->step("think[4 + 8 makes 12]");
    EXPECT_EQ(obs, (EnvObservation{"OK.", 0.0, false, true}));
    EXPECT_EQ(env->state_digest(), before);
    EXPECT_EQ(env->step("4 + 8 = 12").text, "numbers left: 4 6 12");
}

TEST(Remote, MatchesLocalEnvironmentOverRandomWalks) {
    LoopbackEnv loop(std::make_unique<game24::Game24Env>());
    EXPECT_TRUE(loop.remote->deterministic());
    EXPECT_EQ(loop.remote->name(), "game24");
    std::mt19937_64 rng(5);
    game24::Game24Env local;
    game24::Game24Env planner;
    for (int round = 0; round < 50; ++round) {
        const json cfg{{"numbers", {1 + rng() % 13, 1 + rng() % 13, 1 + rng() % 13, 1 + rng() % 13}}};
        auto actions = test::random_walk(planner, cfg, 6, rng);
        ASSERT_EQ(loop.remote->reset(cfg), local.reset(cfg));
        for (const auto& a : actions) ASSERT_EQ(loop.remote->step(a), local.step(a));
    }
}

TEST(Remote, ServerErrorBecomesProtocolError) {
    LoopbackEnv loop(std::make_unique<game24::Game24Env>());
    try {
        loop.remote->reset(json{{"numbers", {1, 2}}});
        FAIL();
    } catch (const ProtocolError& e) {
        EXPECT_EQ(e.line(), 2u);
    }
}

TEST(Remote, MalformedLineIsProtocolErrorWithLineNumber) {
    CannedPeer peer({kHello, R"({"observation": "o0"})", "this is not json"});
    RemoteEnvironment env(std::move(peer.client), 2s);
    EXPECT_EQ(env.reset({}), "o0");
    try {
        env.step("x");
        FAIL();
    } catch (const ProtocolError& e) {
        EXPECT_EQ(e.line(), 3u);
    }
}

TEST(Remote, HandshakeMustDeclareDeterminism) {
    CannedPeer peer({R"({"hello": {"env": "x", "deterministic": "yes"}})"});
    EXPECT_THROW(RemoteEnvironment(std::move(peer.client), 2s), ProtocolError);
}

TEST(Remote, RewardOutsideUnitIntervalIsRejected) {
    CannedPeer peer({kHello, R"({"observation": "o"})", R"({"observation": "x", "reward": 3.0, "done": true})"});
    RemoteEnvironment env(std::move(peer.client), 2s);
    env.reset({});
    EXPECT_THROW(env.step("a"), ProtocolError);
}

TEST(Remote, SilentPeerTimesOut) {
    CannedPeer peer({kHello, "<hang>"});
    RemoteEnvironment env(std::move(peer.client), 200ms);
    EXPECT_THROW(env.reset({}), ConnectionError);
}

TEST(Remote, ClosedPeerIsConnectionError) {
    CannedPeer peer({kHello, "<eof>"});
    RemoteEnvironment env(std::move(peer.client), 2s);
    EXPECT_THROW(env.reset({}), ConnectionError);
}

TEST(Remote, NonDeterministicPeerRefusesRollback) {
    CannedPeer peer({R"({"hello": {"env": "live", "deterministic": false}})"});
    RemoteEnvironment env(std::move(peer.client), 2s);
    EXPECT_FALSE(env.deterministic());
    ScriptedBackend gen({}, ScriptDefault{"go", {}});
    ScriptedBackend asst({}, ScriptDefault{"x", {0.99}});
    ControllerConfig cfg;
    auto kit = builtin_prompt_kit("remote", PromptMode::act_only);
    TaskInstance task{"r", "do it", "remote", {}};
    EpisodeContext ctx;
    ctx.task = &task;
    ctx.env = &env;
    ctx.generator = &gen;
    ctx.assistant = &asst;
    ctx.config = &cfg;
    ctx.prompts = &kit;
    EXPECT_THROW(run_episode(ctx), ConfigError);
}

TEST(Remote, SpawnedProcessOverStdio) {
    auto env = remote_env(spawn_process({GAR_CLI_PATH, "serve-env-example", "--env", "game24"}), 10s);
    EXPECT_EQ(env->reset(json{{"numbers", {1, 2, 10, 13}}}), "Input: 1 2 10 13");
    EXPECT_EQ(env->step("13 - 10 = 3").text, "numbers left: 1 2 3");
    auto done = env->step("answer: (13 - 1) + 2 + 10 = 24");
    EXPECT_TRUE(done.done);
    EXPECT_EQ(done.reward, 1.0);
}

TEST(Remote, MissingExecutableFailsCleanly) {
    EXPECT_THROW(remote_env(spawn_process({"/nonexistent/gar-env"}), 2s), Error);
}

TEST(Remote, TcpLoopback) {
    std::promise<std::uint16_t> bound;
    auto ready = bound.get_future();
    std::thread server([&bound] {
        serve_tcp([] { return std::make_unique<game24::Game24Env>(); }, 0, 1,
                  [&bound](std::uint16_t port) { bound.set_value(port); });
    });
    const auto port = ready.get();
    {
        auto env = remote_env(connect_tcp("127.0.0.1", port), 5s);
        EXPECT_EQ(env->reset(json{{"numbers", {4, 4, 6, 8}}}), "Input: 4 4 6 8");
        EXPECT_EQ(env->step("4 + 8 = 12").text, "numbers left: 4 6 12");
    }
    server.join();
}
