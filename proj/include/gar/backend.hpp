// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace gar {

using json = nlohmann::json;

struct GenerationParams {
    int max_new_tokens = 100;
    double temperature = 0.1;
    std::vector<std::string> stop_sequences;

    /// Throws ConfigError when max_new_tokens < 1 or temperature < 0.
    void validate() const;
};

/// Generator defaults: 100 new tokens, temperature 0.1, one action per line.
GenerationParams default_generator_params();
/// Assistant defaults: 500 new tokens, temperature 0.1.
GenerationParams default_assistant_params();

struct ModelOutput {
    std::string text;
    std::vector<double> token_probs;  // P(y_i | y_<i, X), aligned with emitted tokens
    std::uint64_t prompt_tokens = 0;
    std::uint64_t completion_tokens = 0;

    friend bool operator==(const ModelOutput&, const ModelOutput&) = default;
};

struct BackendCapabilities {
    bool reports_probabilities = true;
};

/// Text generation contract shared by generator and assistant roles.
class ModelBackend {
public:
    virtual ~ModelBackend() = default;

    /// Throws ContractViolation on an empty prompt.
    virtual ModelOutput complete(const std::string& prompt, const GenerationParams& params) = 0;
    virtual BackendCapabilities capabilities() const = 0;
    virtual std::string name() const = 0;
};

/// Index of the earliest occurrence of any stop sequence, or npos.
std::size_t find_stop(const std::string& text, const std::vector<std::string>& stops);

/// FNV-1a 64 of the prompt bytes, as 16 hex digits.
std::string prompt_hash(const std::string& prompt);

/// Approximate token count used by the scripted backend: whitespace-delimited words.
std::uint64_t count_whitespace_tokens(const std::string& text);

// --- scripted backend -------------------------------------------------------

/// A rule matches when every condition that is set holds.
struct ScriptRule {
    std::vector<std::string> contains;   // all substrings must occur
    std::string ends_with;               // prompt suffix, ignoring trailing whitespace
    std::string regex;                   // ECMAScript, searched anywhere
    std::string reply;
    std::vector<double> probs;

    bool matches(const std::string& prompt) const;
};

struct ScriptDefault {
    std::string reply;
    std::vector<double> probs;
};

/// Deterministic first-match-wins backend for tests and offline runs.
/// Read-only after construction, safe to share across threads.
class ScriptedBackend final : public ModelBackend {
public:
    explicit ScriptedBackend(std::vector<ScriptRule> rules, std::optional<ScriptDefault> fallback = std::nullopt,
                             BackendCapabilities caps = {});

    ModelOutput complete(const std::string& prompt, const GenerationParams& params) override;
    BackendCapabilities capabilities() const override { return caps_; }
    std::string name() const override { return "scripted"; }

    const std::vector<ScriptRule>& rules() const noexcept { return rules_; }

private:
    ModelOutput make_output(const std::string& prompt, const std::string& reply, const std::vector<double>& probs,
                            const GenerationParams& params) const;

    std::vector<ScriptRule> rules_;
    std::optional<ScriptDefault> fallback_;
    BackendCapabilities caps_;
};

/// Builds a scripted backend from the rule-file JSON:
///   [{"pattern": "...", "reply": "...", "probs": [..]}, ...]
/// or {"rules": [...], "default": {"reply": ..., "probs": [..]}, "reports_probabilities": true}.
/// Besides "pattern", rules accept "contains" (list), "ends_with" and "regex".
std::unique_ptr<ScriptedBackend> scripted_backend_from_json(const json& doc);
std::unique_ptr<ScriptedBackend> load_scripted_backend(const std::filesystem::path& path);

// --- HTTP backend -------------------------------------------------------------

struct HttpBackendConfig {
    std::string base_url;  // e.g. http://localhost:8000/v1
    std::string api_key;
    std::string model;
    std::chrono::milliseconds timeout{120'000};
    int max_retries = 3;
    std::chrono::milliseconds backoff_base{1'000};
    std::uint64_t jitter_seed = 0;

    /// Fills unset fields from GAR_BASE_URL / OPENAI_BASE_URL, GAR_API_KEY / OPENAI_API_KEY, GAR_MODEL.
    static HttpBackendConfig from_environment(HttpBackendConfig base);
    static HttpBackendConfig from_environment();
};

/// Request body for an OpenAI-compatible chat/completions call with log-probabilities.
json build_chat_request(const std::string& model, const std::string& prompt, const GenerationParams& params);

/// Extracts text, exp(logprob) probabilities and usage from a chat/completions response.
/// Applies stop sequences and the token cap client-side as well. Throws MalformedResponse.
ModelOutput parse_chat_response(const json& body, const GenerationParams& params);

/// OpenAI-compatible chat/completions client. Each call is independent; the handle is thread-safe.
class HttpBackend final : public ModelBackend {
public:
    using Sleeper = std::function<void(std::chrono::milliseconds)>;

    explicit HttpBackend(HttpBackendConfig config, Sleeper sleeper = {});

    ModelOutput complete(const std::string& prompt, const GenerationParams& params) override;
    BackendCapabilities capabilities() const override { return {true}; }
    std::string name() const override { return "http:" + config_.model; }

private:
    std::chrono::milliseconds backoff_delay(int attempt);

    HttpBackendConfig config_;
    Sleeper sleeper_;
    std::mutex rng_mutex_;
    std::uint64_t rng_state_;
};

/// Decorator recording every prompt sent to the wrapped backend. Thread-safe.
class RecordingBackend final : public ModelBackend {
public:
    explicit RecordingBackend(ModelBackend& inner) : inner_(inner) {}

    ModelOutput complete(const std::string& prompt, const GenerationParams& params) override;
    BackendCapabilities capabilities() const override { return inner_.capabilities(); }
    std::string name() const override { return inner_.name(); }

    std::vector<std::string> prompts() const;
    std::size_t call_count() const;

private:
    ModelBackend& inner_;
    mutable std::mutex mutex_;
    std::vector<std::string> prompts_;
};

}  // namespace gar
