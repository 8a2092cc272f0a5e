// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gar {

/// Base class for every recoverable failure raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A precondition was violated by the caller (bad index, bad argument).
class ContractViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Invalid run / controller configuration. Detected before any episode starts.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Network-level failure talking to a model service, after all retries.
class TransportError : public Error {
public:
    TransportError(const std::string& what, int attempts)
        : Error(what + " (after " + std::to_string(attempts) + " attempt(s))"), attempts_(attempts) {}

    int attempts() const noexcept { return attempts_; }

private:
    int attempts_;
};

/// The model service answered, but the body could not be interpreted.
class MalformedResponse : public Error {
public:
    using Error::Error;
};

/// Confidence was requested from an empty probability list.
class NoProbabilities : public Error {
public:
    NoProbabilities() : Error("no probabilities") {}
};

/// A scripted backend received a prompt none of its rules cover.
class UnscriptedPrompt : public Error {
public:
    explicit UnscriptedPrompt(std::string prompt_hash)
        : Error("unscripted prompt (hash " + prompt_hash + ")"), hash_(std::move(prompt_hash)) {}

    const std::string& prompt_hash() const noexcept { return hash_; }

private:
    std::string hash_;
};

/// Remote environment broke the JSON-lines wire protocol.
class ProtocolError : public Error {
public:
    ProtocolError(const std::string& what, std::size_t line)
        : Error("protocol violation at line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Remote peer timed out or the connection was lost.
class ConnectionError : public Error {
public:
    using Error::Error;
};

/// Replaying the action prefix produced an observation different from the recorded one.
class ReplayDivergence : public Error {
public:
    ReplayDivergence(std::size_t step, const std::string& recorded, const std::string& replayed)
        : Error("replay diverged at step " + std::to_string(step) + ": recorded \"" + recorded +
                "\" but replay produced \"" + replayed + "\""),
          step_(step) {}

    /// 0 means the reset observation differed.
    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

}  // namespace gar
