// SPDX-License-Identifier: Apache-2.0
#include "gar/backend.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <regex>
#include <sstream>
#include <thread>

#include <fmt/core.h>
#include <httplib.h>

#include "gar/error.hpp"

namespace gar {

void GenerationParams::validate() const {
    if (max_new_tokens < 1) throw ConfigError("max_new_tokens must be >= 1");
    if (!(temperature >= 0.0)) throw ConfigError("temperature must be >= 0");
}

GenerationParams default_generator_params() {
    return GenerationParams{100, 0.1, {"\n"}};
}

GenerationParams default_assistant_params() {
    return GenerationParams{500, 0.1, {}};
}

std::size_t find_stop(const std::string& text, const std::vector<std::string>& stops) {
    std::size_t best = std::string::npos;
    for (const auto& stop : stops) {
        if (stop.empty()) continue;
        auto pos = text.find(stop);
        if (pos != std::string::npos && (best == std::string::npos || pos < best)) best = pos;
    }
    return best;
}

std::string prompt_hash(const std::string& prompt) {
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (unsigned char c : prompt) {
        hash ^= c;
        hash *= 0x100000001b3ULL;
    }
    return fmt::format("{:016x}", hash);
}

std::uint64_t count_whitespace_tokens(const std::string& text) {
    std::istringstream in(text);
    std::uint64_t count = 0;
    std::string word;
    while (in >> word) ++count;
    return count;
}

namespace {

std::string rtrim(std::string_view s) {
    auto end = s.find_last_not_of(" \t\r\n");
    return end == std::string_view::npos ? std::string{} : std::string(s.substr(0, end + 1));
}

// Keeps the first `n` whitespace-delimited words, preserving the original spacing between them.
std::string first_words(const std::string& text, std::size_t n) {
    std::size_t pos = 0;
    std::size_t seen = 0;
    std::size_t end = 0;
    while (seen < n) {
        auto start = text.find_first_not_of(" \t\r\n", pos);
        if (start == std::string::npos) break;
        auto stop = text.find_first_of(" \t\r\n", start);
        end = stop == std::string::npos ? text.size() : stop;
        pos = end;
        ++seen;
    }
    return text.substr(0, end);
}

void check_probs(const std::vector<double>& probs, const std::string& where) {
    for (double p : probs) {
        if (!(p > 0.0 && p <= 1.0)) {
            throw ConfigError(fmt::format("{}: probability {} outside (0, 1]", where, p));
        }
    }
}

}  // namespace

// --- scripted --------------------------------------------------------------

bool ScriptRule::matches(const std::string& prompt) const {
    for (const auto& needle : contains) {
        if (prompt.find(needle) == std::string::npos) return false;
    }
    if (!ends_with.empty()) {
        auto trimmed = rtrim(prompt);
        auto suffix = rtrim(ends_with);
        if (trimmed.size() < suffix.size() || trimmed.compare(trimmed.size() - suffix.size(), suffix.size(), suffix) != 0) {
            return false;
        }
    }
    if (!regex.empty() && !std::regex_search(prompt, std::regex(regex))) return false;
    return true;
}

ScriptedBackend::ScriptedBackend(std::vector<ScriptRule> rules, std::optional<ScriptDefault> fallback,
                                 BackendCapabilities caps)
    : rules_(std::move(rules)), fallback_(std::move(fallback)), caps_(caps) {
    for (std::size_t i = 0; i < rules_.size(); ++i) {
        check_probs(rules_[i].probs, fmt::format("script rule {}", i));
        if (!rules_[i].regex.empty()) {
            try {
                std::regex probe(rules_[i].regex);
            } catch (const std::regex_error& e) {
                throw ConfigError(fmt::format("script rule {}: bad regex: {}", i, e.what()));
            }
        }
    }
    if (fallback_) check_probs(fallback_->probs, "script default");
}

ModelOutput ScriptedBackend::complete(const std::string& prompt, const GenerationParams& params) {
    if (prompt.empty()) throw ContractViolation("prompt must be non-empty");
    for (const auto& rule : rules_) {
        if (rule.matches(prompt)) return make_output(prompt, rule.reply, rule.probs, params);
    }
    if (fallback_) return make_output(prompt, fallback_->reply, fallback_->probs, params);
    throw UnscriptedPrompt(prompt_hash(prompt));
}

ModelOutput ScriptedBackend::make_output(const std::string& prompt, const std::string& reply,
                                         const std::vector<double>& probs, const GenerationParams& params) const {
    ModelOutput out;
    out.text = reply;
    auto stop = find_stop(out.text, params.stop_sequences);
    if (stop != std::string::npos) out.text.resize(stop);

    const auto cap = static_cast<std::size_t>(std::max(params.max_new_tokens, 1));
    if (count_whitespace_tokens(out.text) > cap) out.text = first_words(out.text, cap);

    if (caps_.reports_probabilities) {
        out.token_probs = probs;
        if (out.token_probs.size() > cap) out.token_probs.resize(cap);
    }
    out.prompt_tokens = count_whitespace_tokens(prompt);
    out.completion_tokens = out.token_probs.empty() ? count_whitespace_tokens(out.text) : out.token_probs.size();
    return out;
}

namespace {

ScriptRule rule_from_json(const json& item) {
    ScriptRule rule;
    if (item.contains("pattern")) rule.contains.push_back(item.at("pattern").get<std::string>());
    if (item.contains("contains")) {
        for (const auto& c : item.at("contains")) rule.contains.push_back(c.get<std::string>());
    }
    rule.ends_with = item.value("ends_with", std::string{});
    rule.regex = item.value("regex", std::string{});
    rule.reply = item.at("reply").get<std::string>();
    rule.probs = item.value("probs", std::vector<double>{});
    return rule;
}

}  // namespace

std::unique_ptr<ScriptedBackend> scripted_backend_from_json(const json& doc) {
    try {
        std::vector<ScriptRule> rules;
        std::optional<ScriptDefault> fallback;
        BackendCapabilities caps;
        const json* list = &doc;
        if (doc.is_object()) {
            list = &doc.at("rules");
            if (doc.contains("default") && !doc.at("default").is_null()) {
                const auto& d = doc.at("default");
                fallback = ScriptDefault{d.at("reply").get<std::string>(), d.value("probs", std::vector<double>{})};
            }
            caps.reports_probabilities = doc.value("reports_probabilities", true);
        }
        if (!list->is_array()) throw ConfigError("script rules must be a JSON array");
        for (const auto& item : *list) rules.push_back(rule_from_json(item));
        return std::make_unique<ScriptedBackend>(std::move(rules), std::move(fallback), caps);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid script file: ") + e.what());
    }
}

std::unique_ptr<ScriptedBackend> load_scripted_backend(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open script file " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError("script file " + path.string() + " is not valid JSON: " + e.what());
    }
    return scripted_backend_from_json(doc);
}

// --- HTTP ------------------------------------------------------------------

HttpBackendConfig HttpBackendConfig::from_environment() { return from_environment(HttpBackendConfig{}); }

HttpBackendConfig HttpBackendConfig::from_environment(HttpBackendConfig base) {
    auto env = [](const char* a, const char* b) -> std::string {
        for (const char* name : {a, b}) {
            if (name == nullptr) continue;
            if (const char* v = std::getenv(name); v != nullptr && *v != '\0') return v;
        }
        return {};
    };
    if (base.base_url.empty()) base.base_url = env("GAR_BASE_URL", "OPENAI_BASE_URL");
    if (base.api_key.empty()) base.api_key = env("GAR_API_KEY", "OPENAI_API_KEY");
    if (base.model.empty()) base.model = env("GAR_MODEL", nullptr);
    return base;
}

json build_chat_request(const std::string& model, const std::string& prompt, const GenerationParams& params) {
    json body{{"model", model},
              {"messages", json::array({json{{"role", "user"}, {"content", prompt}}})},
              {"max_tokens", params.max_new_tokens},
              {"temperature", params.temperature},
              {"logprobs", true},
              {"stream", false}};
    if (!params.stop_sequences.empty()) body["stop"] = params.stop_sequences;
    return body;
}

namespace {

double prob_from_logprob(const json& value) {
    if (!value.is_number()) throw MalformedResponse("log-probability is not a number");
    double lp = value.get<double>();
    if (std::isnan(lp)) throw MalformedResponse("log-probability is NaN");
    if (lp >= 0.0) return 1.0;
    return std::max(std::exp(lp), DBL_MIN);
}

}  // namespace

ModelOutput parse_chat_response(const json& body, const GenerationParams& params) {
    try {
        const auto& choices = body.at("choices");
        if (!choices.is_array() || choices.empty()) throw MalformedResponse("response has no choices");
        const auto& choice = choices.at(0);

        ModelOutput out;
        if (choice.contains("message")) {
            const auto& content = choice.at("message").at("content");
            out.text = content.is_null() ? std::string{} : content.get<std::string>();
        } else {
            out.text = choice.at("text").get<std::string>();
        }

        std::vector<std::string> tokens;
        const auto logprobs = choice.value("logprobs", json{});
        if (logprobs.is_object() && logprobs.contains("content") && logprobs.at("content").is_array()) {
            for (const auto& entry : logprobs.at("content")) {
                out.token_probs.push_back(prob_from_logprob(entry.at("logprob")));
                tokens.push_back(entry.value("token", std::string{}));
            }
        } else if (logprobs.is_object() && logprobs.contains("token_logprobs")) {
            for (const auto& lp : logprobs.at("token_logprobs")) out.token_probs.push_back(prob_from_logprob(lp));
            if (logprobs.contains("tokens")) tokens = logprobs.at("tokens").get<std::vector<std::string>>();
        } else {
            throw MalformedResponse("response carries no per-token log-probabilities");
        }

        // Cut at stop sequences / the token cap even if the server did not.
        const bool have_token_text = tokens.size() == out.token_probs.size();
        auto stop = find_stop(out.text, params.stop_sequences);
        if (stop != std::string::npos) {
            out.text.resize(stop);
            if (have_token_text) {
                std::size_t consumed = 0;
                std::size_t keep = 0;
                while (keep < tokens.size() && consumed < stop) consumed += tokens[keep++].size();
                out.token_probs.resize(keep);
                tokens.resize(keep);
            }
        }
        const auto cap = static_cast<std::size_t>(params.max_new_tokens);
        if (out.token_probs.size() > cap) {
            out.token_probs.resize(cap);
            if (have_token_text) {
                tokens.resize(cap);
                std::string joined;
                for (const auto& t : tokens) joined += t;
                if (joined.size() < out.text.size()) out.text = joined;
            }
        }

        out.completion_tokens = out.token_probs.size();
        if (body.contains("usage") && body.at("usage").is_object()) {
            out.prompt_tokens = body.at("usage").value("prompt_tokens", std::uint64_t{0});
        }
        return out;
    } catch (const json::exception& e) {
        throw MalformedResponse(std::string("malformed chat response: ") + e.what());
    }
}

namespace {

struct SplitUrl {
    std::string origin;  // scheme://host[:port]
    std::string path;    // prefix without trailing slash
};

SplitUrl split_url(const std::string& url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw ConfigError("base URL must start with http:// or https://: " + url);
    auto path_start = url.find('/', scheme_end + 3);
    SplitUrl split;
    split.origin = url.substr(0, path_start);
    split.path = path_start == std::string::npos ? std::string{} : url.substr(path_start);
    while (!split.path.empty() && split.path.back() == '/') split.path.pop_back();
    return split;
}

bool retryable_status(int status) { return status == 408 || status == 429 || status >= 500; }

}  // namespace

HttpBackend::HttpBackend(HttpBackendConfig config, Sleeper sleeper)
    : config_(std::move(config)), sleeper_(std::move(sleeper)), rng_state_(config_.jitter_seed ^ 0x9e3779b97f4a7c15ULL) {
    if (config_.base_url.empty()) throw ConfigError("HTTP backend needs a base URL (GAR_BASE_URL / OPENAI_BASE_URL)");
    if (config_.model.empty()) throw ConfigError("HTTP backend needs a model name (GAR_MODEL)");
    if (config_.max_retries < 0) throw ConfigError("max_retries must be >= 0");
    split_url(config_.base_url);
    if (!sleeper_) sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

std::chrono::milliseconds HttpBackend::backoff_delay(int attempt) {
    std::uint64_t r;
    {
        std::lock_guard lock(rng_mutex_);
        // splitmix64
        rng_state_ += 0x9e3779b97f4a7c15ULL;
        r = rng_state_;
        r = (r ^ (r >> 30)) * 0xbf58476d1ce4e5b9ULL;
        r = (r ^ (r >> 27)) * 0x94d049bb133111ebULL;
        r ^= r >> 31;
    }
    const double jitter = 0.5 + static_cast<double>(r >> 11) / static_cast<double>(1ULL << 53);  // [0.5, 1.5)
    const auto base = static_cast<double>(config_.backoff_base.count()) * std::ldexp(1.0, attempt - 1);
    return std::chrono::milliseconds(static_cast<std::int64_t>(base * jitter));
}

ModelOutput HttpBackend::complete(const std::string& prompt, const GenerationParams& params) {
    if (prompt.empty()) throw ContractViolation("prompt must be non-empty");
    params.validate();

    const auto url = split_url(config_.base_url);
    const auto body = build_chat_request(config_.model, prompt, params).dump();
    httplib::Headers headers;
    if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

    const int attempts = 1 + config_.max_retries;
    std::string last_error;
    for (int attempt = 1; attempt <= attempts; ++attempt) {
        httplib::Client client(url.origin);
        const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
        const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - secs);
        client.set_connection_timeout(secs.count(), usecs.count());
        client.set_read_timeout(secs.count(), usecs.count());
        client.set_write_timeout(secs.count(), usecs.count());

        auto res = client.Post(url.path + "/chat/completions", headers, body, "application/json");
        if (res && res->status == 200) {
            json parsed;
            try {
                parsed = json::parse(res->body);
            } catch (const json::exception& e) {
                throw MalformedResponse(std::string("response body is not JSON: ") + e.what());
            }
            return parse_chat_response(parsed, params);
        }
        if (res && !retryable_status(res->status)) {
            throw TransportError(fmt::format("HTTP {} from {}: {}", res->status, config_.base_url,
                                             res->body.substr(0, 200)),
                                 attempt);
        }
        last_error = res ? fmt::format("HTTP {}", res->status) : httplib::to_string(res.error());
        if (attempt < attempts) sleeper_(backoff_delay(attempt));
    }
    throw TransportError("request to " + config_.base_url + " failed: " + last_error, attempts);
}

// --- recording ---------------------------------------------------------------

ModelOutput RecordingBackend::complete(const std::string& prompt, const GenerationParams& params) {
    {
        std::lock_guard lock(mutex_);
        prompts_.push_back(prompt);
    }
    return inner_.complete(prompt, params);
}

std::vector<std::string> RecordingBackend::prompts() const {
    std::lock_guard lock(mutex_);
    return prompts_;
}

std::size_t RecordingBackend::call_count() const {
    std::lock_guard lock(mutex_);
    return prompts_.size();
}

}  // namespace gar
