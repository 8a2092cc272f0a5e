// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace gar {

using json = nlohmann::json;

/// Default observation for actions an environment cannot carry out.
inline constexpr std::string_view kNothingHappens = "Nothing happens.";

struct EnvObservation {
    std::string text;
    double reward = 0.0;
    bool done = false;
    bool valid_action = true;

    friend bool operator==(const EnvObservation&, const EnvObservation&) = default;
};

/// Gym-style text environment. Deterministic environments must answer identical
/// action sequences after reset() with identical observations; rollback relies on it.
class Environment {
public:
    virtual ~Environment() = default;

    /// Starts a new episode and returns the initial observation o_0.
    virtual std::string reset(const json& task_config) = 0;
    virtual EnvObservation step(const std::string& action) = 0;
    virtual bool deterministic() const = 0;
    virtual std::string name() const = 0;

    /// Opaque fingerprint of the full internal state. Empty when the environment cannot expose one.
    virtual std::string state_digest() const { return {}; }

    /// A sample of actions that are valid in the current state. May be empty.
    virtual std::vector<std::string> available_actions() const { return {}; }
};

using EnvironmentFactory = std::function<std::unique_ptr<Environment>()>;

/// Answers think[...] actions with a constant "OK." and forwards everything else.
class ThinkWrapper final : public Environment {
public:
    explicit ThinkWrapper(std::unique_ptr<Environment> inner);

    std::string reset(const json& task_config) override { return inner_->reset(task_config); }
    EnvObservation step(const std::string& action) override;
    bool deterministic() const override { return inner_->deterministic(); }
    std::string name() const override { return inner_->name(); }
    std::string state_digest() const override { return inner_->state_digest(); }
    std::vector<std::string> available_actions() const override { return inner_->available_actions(); }

    Environment& inner() noexcept { return *inner_; }

private:
    std::unique_ptr<Environment> inner_;
};

std::unique_ptr<Environment> think_wrapper(std::unique_ptr<Environment> inner);

// --- JSON-lines wire protocol -------------------------------------------------

/// Bidirectional newline-delimited message stream.
class LineChannel {
public:
    virtual ~LineChannel() = default;
    virtual void write_line(std::string_view line) = 0;
    /// nullopt on orderly EOF. Throws ConnectionError on timeout or I/O failure.
    virtual std::optional<std::string> read_line(std::chrono::milliseconds timeout) = 0;
};

/// Channel over a pair of file descriptors (pipes or a socket). Owns and closes them.
class FdChannel : public LineChannel {
public:
    FdChannel(int read_fd, int write_fd, bool owns = true);
    ~FdChannel() override;
    FdChannel(const FdChannel&) = delete;
    FdChannel& operator=(const FdChannel&) = delete;

    void write_line(std::string_view line) override;
    std::optional<std::string> read_line(std::chrono::milliseconds timeout) override;

protected:
    void close_fds();

private:
    int read_fd_;
    int write_fd_;
    bool owns_;
    std::string buffer_;
};

/// Spawns argv[0] with stdin/stdout connected to the returned channel.
std::unique_ptr<LineChannel> spawn_process(const std::vector<std::string>& argv);

/// Connects to host:port over TCP.
std::unique_ptr<LineChannel> connect_tcp(const std::string& host, std::uint16_t port);

/// Serves one environment over a channel until "close" or EOF.
void serve_environment(Environment& env, LineChannel& channel);

/// Listens on 127.0.0.1:port (0 picks a free port) and serves each connection with a fresh
/// environment from `factory` on its own thread. `on_listening` receives the bound port.
/// Returns after `max_connections` connections have been served (0 = forever).
void serve_tcp(const EnvironmentFactory& factory, std::uint16_t port, std::size_t max_connections,
               const std::function<void(std::uint16_t)>& on_listening = {});

/// EnvContract implementation backed by a remote process speaking the wire protocol.
class RemoteEnvironment final : public Environment {
public:
    explicit RemoteEnvironment(std::unique_ptr<LineChannel> channel,
                               std::chrono::milliseconds timeout = std::chrono::seconds(60));
    ~RemoteEnvironment() override;

    std::string reset(const json& task_config) override;
    EnvObservation step(const std::string& action) override;
    bool deterministic() const override { return deterministic_; }
    std::string name() const override { return name_; }

private:
    json request(const json& message);

    std::unique_ptr<LineChannel> channel_;
    std::chrono::milliseconds timeout_;
    std::size_t lines_received_ = 0;
    bool deterministic_ = false;
    bool closed_ = false;
    std::string name_ = "remote";
};

std::unique_ptr<Environment> remote_env(std::unique_ptr<LineChannel> channel,
                                        std::chrono::milliseconds timeout = std::chrono::seconds(60));

}  // namespace gar
