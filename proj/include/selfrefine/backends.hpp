#pragma once

#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace selfrefine {

enum class ApiStyle { ChatCompletions, TextCompletions, Scripted };

const char* api_style_name(ApiStyle style);
ApiStyle api_style_from_name(const std::string& name);

struct RetryPolicy {
    int max_attempts = 3;
    int base_backoff_ms = 250;   // doubles per attempt
};

struct BackendProfile {
    std::string name = "default";
    std::string endpoint;        // scheme://host[:port]
    std::string path;            // empty => default for the api style
    std::string model;
    double temperature = 0.7;
    int max_tokens = 512;
    ApiStyle api_style = ApiStyle::ChatCompletions;
    std::string auth_env;        // env var holding the bearer token; empty => unauthenticated
    RetryPolicy retry;
    int rate_limit_per_minute = 0;   // 0 = unlimited; enforced process-wide per profile name

    std::string default_path() const;
};

struct CompletionRequest {
    std::string prompt;
    std::optional<std::string> system;      // chat style only: system message
    std::optional<double> temperature;      // overrides the profile
    std::optional<int> max_tokens;
};

struct TokenUsage {
    long prompt_tokens = 0;
    long completion_tokens = 0;
};

struct CompletionResponse {
    std::string text;
    TokenUsage usage;
    std::string finish_reason = "stop";   // "length" when the reply was cut off
    long latency_ms = 0;
    int attempts = 1;
    bool from_cache = false;
};

class Backend {
public:
    virtual ~Backend() = default;
    virtual CompletionResponse complete(const CompletionRequest& request) = 0;
    virtual const BackendProfile& profile() const = 0;
};

// Deterministic replay backend: pops one reply per call and records every
// prompt it saw. Exhausting the queue raises TransportError so runaway loops
// surface as backend failures. Thread-safe.
class ScriptedBackend : public Backend {
public:
    explicit ScriptedBackend(std::vector<std::string> replies, BackendProfile profile = scripted_profile());

    CompletionResponse complete(const CompletionRequest& request) override;
    const BackendProfile& profile() const override { return profile_; }

    std::vector<std::string> seen_prompts() const;
    std::size_t remaining() const;

    static BackendProfile scripted_profile();

private:
    BackendProfile profile_;
    mutable std::mutex mutex_;
    std::vector<std::string> replies_;
    std::size_t next_ = 0;
    std::vector<std::string> prompts_;
};

struct HttpRequestSpec {
    std::string path;
    std::string body;
    std::vector<std::pair<std::string, std::string>> headers;
};

struct HttpResponseSpec {
    int status = 0;        // 0 => transport failure, see error
    std::string body;
    std::string error;
};

// Injectable wire layer so retry/backoff behavior is testable without sockets.
using HttpTransport = std::function<HttpResponseSpec(const BackendProfile&, const HttpRequestSpec&)>;

// Chat-completions / text-completions client with bearer auth from the
// environment, bounded exponential-backoff retries on transport failures,
// 429 and 5xx, and per-profile request spacing.
class HttpBackend : public Backend {
public:
    explicit HttpBackend(BackendProfile profile, HttpTransport transport = nullptr);

    CompletionResponse complete(const CompletionRequest& request) override;
    const BackendProfile& profile() const override { return profile_; }

private:
    BackendProfile profile_;
    HttpTransport transport_;
};

std::shared_ptr<Backend> make_backend(const BackendProfile& profile);

} // namespace selfrefine
