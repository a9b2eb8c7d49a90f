#include "selfrefine/backends.hpp"

#include <chrono>
#include <cstdlib>
#include <map>
#include <sstream>
#include <thread>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>
#include <json.hpp>

#include "selfrefine/error.hpp"

namespace selfrefine {

namespace {

using nlohmann::json;

long now_ms() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

long count_words(const std::string& text) {
    long n = 0;
    bool in_word = false;
    for (unsigned char c : text) {
        bool ws = std::isspace(c);
        if (!ws && !in_word) ++n;
        in_word = !ws;
    }
    return n;
}

// Process-wide per-key request spacing. 60000/rpm milliseconds between
// acquisitions under the same key.
class RateLimiter {
public:
    explicit RateLimiter(int per_minute) : interval_ms_(per_minute > 0 ? 60000 / per_minute : 0) {}

    void acquire() {
        if (interval_ms_ <= 0) return;
        long wait = 0;
        {
            std::lock_guard<std::mutex> lock(mutex_);
            long now = now_ms();
            long earliest = last_ms_ + interval_ms_;
            if (earliest > now) wait = earliest - now;
            last_ms_ = now + wait;
        }
        if (wait > 0) std::this_thread::sleep_for(std::chrono::milliseconds(wait));
    }

private:
    long interval_ms_;
    std::mutex mutex_;
    long last_ms_ = 0;
};

RateLimiter& limiter_for(const std::string& key, int per_minute) {
    static std::mutex registry_mutex;
    static std::map<std::string, std::unique_ptr<RateLimiter>> registry;
    std::lock_guard<std::mutex> lock(registry_mutex);
    auto it = registry.find(key);
    if (it == registry.end()) {
        it = registry.emplace(key, std::make_unique<RateLimiter>(per_minute)).first;
    }
    return *it->second;
}

HttpResponseSpec default_transport(const BackendProfile& profile, const HttpRequestSpec& request) {
    httplib::Client client(profile.endpoint);
    client.set_connection_timeout(30, 0);
    client.set_read_timeout(120, 0);
    httplib::Headers headers;
    for (const auto& [k, v] : request.headers) headers.emplace(k, v);
    auto result = client.Post(request.path, headers, request.body, "application/json");
    if (!result) {
        std::ostringstream err;
        err << "connection to " << profile.endpoint << " failed: " << httplib::to_string(result.error());
        return {0, "", err.str()};
    }
    return {result->status, result->body, ""};
}

} // namespace

const char* api_style_name(ApiStyle style) {
    switch (style) {
        case ApiStyle::ChatCompletions: return "chat_completions";
        case ApiStyle::TextCompletions: return "text_completions";
        case ApiStyle::Scripted: return "scripted";
    }
    return "unknown";
}

ApiStyle api_style_from_name(const std::string& name) {
    if (name == "chat_completions" || name == "chat") return ApiStyle::ChatCompletions;
    if (name == "text_completions" || name == "text") return ApiStyle::TextCompletions;
    if (name == "scripted") return ApiStyle::Scripted;
    throw config_error("unknown api style '" + name + "'");
}

std::string BackendProfile::default_path() const {
    return api_style == ApiStyle::TextCompletions ? "/v1/completions" : "/v1/chat/completions";
}

ScriptedBackend::ScriptedBackend(std::vector<std::string> replies, BackendProfile profile)
    : profile_(std::move(profile)), replies_(std::move(replies)) {}

BackendProfile ScriptedBackend::scripted_profile() {
    BackendProfile p;
    p.name = "scripted";
    p.model = "scripted";
    p.api_style = ApiStyle::Scripted;
    p.temperature = 0.0;
    return p;
}

CompletionResponse ScriptedBackend::complete(const CompletionRequest& request) {
    std::lock_guard<std::mutex> lock(mutex_);
    prompts_.push_back(request.prompt);
    if (next_ >= replies_.size()) {
        throw transport_error("scripted backend '" + profile_.name + "' exhausted after " +
                              std::to_string(replies_.size()) + " replies");
    }
    CompletionResponse response;
    response.text = replies_[next_++];
    response.usage.prompt_tokens = count_words(request.prompt);
    response.usage.completion_tokens = count_words(response.text);
    response.finish_reason = "stop";
    response.latency_ms = 0;
    return response;
}

std::vector<std::string> ScriptedBackend::seen_prompts() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return prompts_;
}

std::size_t ScriptedBackend::remaining() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return replies_.size() - next_;
}

HttpBackend::HttpBackend(BackendProfile profile, HttpTransport transport)
    : profile_(std::move(profile)), transport_(transport ? std::move(transport) : default_transport) {
    if (profile_.endpoint.empty()) throw config_error("backend '" + profile_.name + "' has no endpoint");
    if (profile_.api_style == ApiStyle::Scripted) {
        throw config_error("scripted profiles cannot back an HTTP client");
    }
}

CompletionResponse HttpBackend::complete(const CompletionRequest& request) {
    json payload;
    payload["model"] = profile_.model;
    payload["temperature"] = request.temperature.value_or(profile_.temperature);
    payload["max_tokens"] = request.max_tokens.value_or(profile_.max_tokens);
    if (profile_.api_style == ApiStyle::ChatCompletions) {
        json messages = json::array();
        if (request.system && !request.system->empty()) {
            messages.push_back({{"role", "system"}, {"content", *request.system}});
        }
        messages.push_back({{"role", "user"}, {"content", request.prompt}});
        payload["messages"] = messages;
    } else {
        payload["prompt"] = request.prompt;
    }

    HttpRequestSpec spec;
    spec.path = profile_.path.empty() ? profile_.default_path() : profile_.path;
    spec.body = payload.dump();
    if (!profile_.auth_env.empty()) {
        const char* token = std::getenv(profile_.auth_env.c_str());
        if (token == nullptr || *token == '\0') {
            throw auth_error("backend '" + profile_.name + "': env var " + profile_.auth_env +
                             " is not set");
        }
        spec.headers.emplace_back("Authorization", std::string("Bearer ") + token);
    }

    const int max_attempts = std::max(1, profile_.retry.max_attempts);
    std::string last_failure;
    long started = now_ms();

    for (int attempt = 1; attempt <= max_attempts; ++attempt) {
        limiter_for(profile_.name, profile_.rate_limit_per_minute).acquire();
        HttpResponseSpec wire = transport_(profile_, spec);

        if (wire.status == 401 || wire.status == 403) {
            throw auth_error("backend '" + profile_.name + "' rejected credentials (HTTP " +
                             std::to_string(wire.status) + ")");
        }
        bool retryable = wire.status == 0 || wire.status == 429 || wire.status >= 500;
        if (retryable) {
            last_failure = wire.status == 0 ? wire.error : "HTTP " + std::to_string(wire.status);
            if (attempt < max_attempts) {
                long backoff = profile_.retry.base_backoff_ms;
                for (int i = 1; i < attempt; ++i) backoff *= 2;
                if (backoff > 0) std::this_thread::sleep_for(std::chrono::milliseconds(backoff));
            }
            continue;
        }
        if (wire.status != 200) {
            throw protocol_error("backend '" + profile_.name + "' returned HTTP " +
                                 std::to_string(wire.status) + ": " + wire.body.substr(0, 200));
        }

        json doc = json::parse(wire.body, nullptr, false);
        if (doc.is_discarded() || !doc.contains("choices") || !doc["choices"].is_array() ||
            doc["choices"].empty()) {
            throw protocol_error("backend '" + profile_.name + "' returned a malformed completion payload");
        }
        const json& choice = doc["choices"][0];
        CompletionResponse response;
        if (profile_.api_style == ApiStyle::ChatCompletions) {
            if (!choice.contains("message") || !choice["message"].contains("content")) {
                throw protocol_error("backend '" + profile_.name + "': chat choice has no message content");
            }
            response.text = choice["message"]["content"].is_null()
                                ? std::string()
                                : choice["message"]["content"].get<std::string>();
        } else {
            if (!choice.contains("text")) {
                throw protocol_error("backend '" + profile_.name + "': text choice has no text");
            }
            response.text = choice["text"].is_null() ? std::string() : choice["text"].get<std::string>();
        }
        response.finish_reason = choice.value("finish_reason", "stop");
        if (doc.contains("usage") && doc["usage"].is_object()) {
            response.usage.prompt_tokens = doc["usage"].value("prompt_tokens", 0L);
            response.usage.completion_tokens = doc["usage"].value("completion_tokens", 0L);
        }
        response.latency_ms = now_ms() - started;
        response.attempts = attempt;
        return response;
    }

    throw transport_error("backend '" + profile_.name + "' failed after " +
                          std::to_string(max_attempts) + " attempts: " + last_failure);
}

std::shared_ptr<Backend> make_backend(const BackendProfile& profile) {
    if (profile.api_style == ApiStyle::Scripted) {
        throw config_error("scripted backends need a reply list; build a ScriptedBackend directly");
    }
    return std::make_shared<HttpBackend>(profile);
}

} // namespace selfrefine
