// SPDX-License-Identifier: Apache-2.0
#include "gar/environment.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <thread>

#include "gar/error.hpp"
#include "gar/trajectory.hpp"

namespace gar {

// --- think wrapper -------------------------------------------------------------

ThinkWrapper::ThinkWrapper(std::unique_ptr<Environment> inner) : inner_(std::move(inner)) {
    if (!inner_) throw ContractViolation("think wrapper needs an inner environment");
}

EnvObservation ThinkWrapper::step(const std::string& action) {
    if (is_think_action(action)) return EnvObservation{"OK.", 0.0, false, true};
    return inner_->step(action);
}

std::unique_ptr<Environment> think_wrapper(std::unique_ptr<Environment> inner) {
    return std::make_unique<ThinkWrapper>(std::move(inner));
}

// --- fd channel ------------------------------------------------------------------

FdChannel::FdChannel(int read_fd, int write_fd, bool owns) : read_fd_(read_fd), write_fd_(write_fd), owns_(owns) {}

FdChannel::~FdChannel() { close_fds(); }

void FdChannel::close_fds() {
    if (!owns_) return;
    if (read_fd_ >= 0) ::close(read_fd_);
    if (write_fd_ >= 0 && write_fd_ != read_fd_) ::close(write_fd_);
    read_fd_ = write_fd_ = -1;
}

void FdChannel::write_line(std::string_view line) {
    std::string data(line);
    data.push_back('\n');
    std::size_t written = 0;
    while (written < data.size()) {
        // send() avoids SIGPIPE on sockets; pipes fall back to write().
        ssize_t n = ::send(write_fd_, data.data() + written, data.size() - written, MSG_NOSIGNAL);
        if (n < 0 && errno == ENOTSOCK) n = ::write(write_fd_, data.data() + written, data.size() - written);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw ConnectionError(std::string("write to peer failed: ") + std::strerror(errno));
        }
        written += static_cast<std::size_t>(n);
    }
}

std::optional<std::string> FdChannel::read_line(std::chrono::milliseconds timeout) {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    while (true) {
        auto nl = buffer_.find('\n');
        if (nl != std::string::npos) {
            std::string line = buffer_.substr(0, nl);
            buffer_.erase(0, nl + 1);
            if (!line.empty() && line.back() == '\r') line.pop_back();
            return line;
        }
        auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
        if (remaining.count() <= 0) throw ConnectionError("timed out waiting for peer");

        pollfd pfd{read_fd_, POLLIN, 0};
        int ready = ::poll(&pfd, 1, static_cast<int>(remaining.count()));
        if (ready < 0) {
            if (errno == EINTR) continue;
            throw ConnectionError(std::string("poll failed: ") + std::strerror(errno));
        }
        if (ready == 0) throw ConnectionError("timed out waiting for peer");

        char chunk[4096];
        ssize_t n = ::read(read_fd_, chunk, sizeof chunk);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw ConnectionError(std::string("read from peer failed: ") + std::strerror(errno));
        }
        if (n == 0) {
            if (buffer_.empty()) return std::nullopt;
            std::string line = std::move(buffer_);
            buffer_.clear();
            return line;
        }
        buffer_.append(chunk, static_cast<std::size_t>(n));
    }
}

namespace {

class ProcessChannel final : public FdChannel {
public:
    ProcessChannel(int read_fd, int write_fd, pid_t pid) : FdChannel(read_fd, write_fd), pid_(pid) {}

    ~ProcessChannel() override {
        close_fds();
        for (int i = 0; i < 100; ++i) {
            if (::waitpid(pid_, nullptr, WNOHANG) != 0) return;
            std::this_thread::sleep_for(std::chrono::milliseconds(10));
        }
        ::kill(pid_, SIGKILL);
        ::waitpid(pid_, nullptr, 0);
    }

private:
    pid_t pid_;
};

}  // namespace

std::unique_ptr<LineChannel> spawn_process(const std::vector<std::string>& argv) {
    if (argv.empty()) throw ConfigError("remote environment command is empty");
    ::signal(SIGPIPE, SIG_IGN);

    int to_child[2];
    int from_child[2];
    if (::pipe(to_child) != 0) throw ConnectionError("pipe() failed");
    if (::pipe(from_child) != 0) {
        ::close(to_child[0]);
        ::close(to_child[1]);
        throw ConnectionError("pipe() failed");
    }

    std::vector<char*> args;
    for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
    args.push_back(nullptr);

    pid_t pid = ::fork();
    if (pid < 0) throw ConnectionError("fork() failed");
    if (pid == 0) {
        ::dup2(to_child[0], STDIN_FILENO);
        ::dup2(from_child[1], STDOUT_FILENO);
        ::close(to_child[0]);
        ::close(to_child[1]);
        ::close(from_child[0]);
        ::close(from_child[1]);
        ::execvp(args[0], args.data());
        ::_exit(127);
    }
    ::close(to_child[0]);
    ::close(from_child[1]);
    return std::make_unique<ProcessChannel>(from_child[0], to_child[1], pid);
}

std::unique_ptr<LineChannel> connect_tcp(const std::string& host, std::uint16_t port) {
    ::signal(SIGPIPE, SIG_IGN);
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* found = nullptr;
    if (::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &found) != 0) {
        throw ConnectionError("cannot resolve " + host);
    }
    int fd = -1;
    for (auto* ai = found; ai != nullptr; ai = ai->ai_next) {
        fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
        if (fd < 0) continue;
        if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
        ::close(fd);
        fd = -1;
    }
    ::freeaddrinfo(found);
    if (fd < 0) throw ConnectionError("cannot connect to " + host + ":" + std::to_string(port));
    return std::make_unique<FdChannel>(fd, fd);
}

// --- server side -------------------------------------------------------------------

namespace {

std::string dump_line(const json& j) { return j.dump(-1, ' ', false, json::error_handler_t::replace); }

}  // namespace

void serve_environment(Environment& env, LineChannel& channel) {
    while (true) {
        auto line = channel.read_line(std::chrono::hours(24));
        if (!line) return;
        if (line->empty()) continue;
        json reply;
        try {
            auto msg = json::parse(*line);
            const auto cmd = msg.at("cmd").get<std::string>();
            if (cmd == "hello") {
                reply = {{"hello", {{"env", env.name()}, {"deterministic", env.deterministic()}}}};
            } else if (cmd == "reset") {
                auto obs = env.reset(msg.value("config", json::object()));
                reply = {{"observation", obs}, {"done", false}};
            } else if (cmd == "step") {
                auto obs = env.step(msg.at("action").get<std::string>());
                reply = {{"observation", obs.text},
                         {"reward", obs.reward},
                         {"done", obs.done},
                         {"valid_action", obs.valid_action}};
            } else if (cmd == "close") {
                channel.write_line(dump_line(json{{"ok", true}}));
                return;
            } else {
                reply = {{"error", "unknown cmd '" + cmd + "'"}};
            }
        } catch (const std::exception& e) {
            reply = {{"error", e.what()}};
        }
        channel.write_line(dump_line(reply));
    }
}

void serve_tcp(const EnvironmentFactory& factory, std::uint16_t port, std::size_t max_connections,
               const std::function<void(std::uint16_t)>& on_listening) {
    ::signal(SIGPIPE, SIG_IGN);
    int listener = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listener < 0) throw ConnectionError("socket() failed");
    int yes = 1;
    ::setsockopt(listener, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = htons(port);
    if (::bind(listener, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(listener, 16) != 0) {
        ::close(listener);
        throw ConnectionError("cannot listen on port " + std::to_string(port));
    }
    socklen_t len = sizeof addr;
    ::getsockname(listener, reinterpret_cast<sockaddr*>(&addr), &len);
    if (on_listening) on_listening(ntohs(addr.sin_port));

    std::vector<std::thread> workers;
    for (std::size_t served = 0; max_connections == 0 || served < max_connections; ++served) {
        int fd = ::accept(listener, nullptr, nullptr);
        if (fd < 0) {
            if (errno == EINTR) continue;
            break;
        }
        workers.emplace_back([fd, &factory] {
            FdChannel channel(fd, fd);
            auto env = factory();
            try {
                serve_environment(*env, channel);
            } catch (const std::exception&) {
                // connection dropped; nothing to report to
            }
        });
    }
    ::close(listener);
    for (auto& w : workers) w.join();
}

// --- remote adapter --------------------------------------------------------------------

RemoteEnvironment::RemoteEnvironment(std::unique_ptr<LineChannel> channel, std::chrono::milliseconds timeout)
    : channel_(std::move(channel)), timeout_(timeout) {
    if (!channel_) throw ContractViolation("remote environment needs a channel");
    auto hello = request(json{{"cmd", "hello"}});
    if (!hello.contains("hello") || !hello.at("hello").is_object()) {
        throw ProtocolError("handshake reply lacks a \"hello\" object", lines_received_);
    }
    const auto& info = hello.at("hello");
    const auto det = info.find("deterministic");
    if (det == info.end() || !det->is_boolean()) {
        throw ProtocolError("handshake must declare \"deterministic\" as a boolean", lines_received_);
    }
    deterministic_ = det->get<bool>();
    if (info.contains("env") && info.at("env").is_string()) name_ = info.at("env").get<std::string>();
}

RemoteEnvironment::~RemoteEnvironment() {
    if (closed_) return;
    try {
        channel_->write_line(dump_line(json{{"cmd", "close"}}));
        channel_->read_line(std::chrono::seconds(2));
    } catch (...) {
        // peer already gone
    }
}

json RemoteEnvironment::request(const json& message) {
    channel_->write_line(dump_line(message));
    auto line = channel_->read_line(timeout_);
    if (!line) throw ConnectionError("remote environment closed the connection");
    ++lines_received_;
    json reply;
    try {
        reply = json::parse(*line);
    } catch (const json::exception& e) {
        throw ProtocolError(std::string("malformed JSON: ") + e.what(), lines_received_);
    }
    if (!reply.is_object()) throw ProtocolError("reply is not a JSON object", lines_received_);
    if (reply.contains("error")) {
        throw ProtocolError("remote error: " + reply.at("error").dump(), lines_received_);
    }
    return reply;
}

std::string RemoteEnvironment::reset(const json& task_config) {
    auto reply = request(json{{"cmd", "reset"}, {"config", task_config}});
    auto it = reply.find("observation");
    if (it == reply.end() || !it->is_string()) {
        throw ProtocolError("reset reply lacks a string \"observation\"", lines_received_);
    }
    return it->get<std::string>();
}

EnvObservation RemoteEnvironment::step(const std::string& action) {
    auto reply = request(json{{"cmd", "step"}, {"action", action}});
    EnvObservation obs;
    try {
        obs.text = reply.at("observation").get<std::string>();
        obs.reward = reply.value("reward", 0.0);
        obs.done = reply.value("done", false);
        obs.valid_action = reply.value("valid_action", true);
    } catch (const json::exception& e) {
        throw ProtocolError(std::string("bad step reply: ") + e.what(), lines_received_);
    }
    if (obs.reward < 0.0 || obs.reward > 1.0) throw ProtocolError("reward outside [0, 1]", lines_received_);
    return obs;
}

std::unique_ptr<Environment> remote_env(std::unique_ptr<LineChannel> channel, std::chrono::milliseconds timeout) {
    return std::make_unique<RemoteEnvironment>(std::move(channel), timeout);
}

}  // namespace gar
