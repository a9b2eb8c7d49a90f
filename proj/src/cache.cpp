#include "selfrefine/cache.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "selfrefine/digest.hpp"
#include "selfrefine/error.hpp"

namespace selfrefine {

namespace {

using nlohmann::json;

std::string canonical_double(double value) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.10g", value);
    return buf;
}

} // namespace

ResponseCache::ResponseCache(std::filesystem::path dir, bool read_only)
    : dir_(std::move(dir)), read_only_(read_only) {
    std::error_code ec;
    if (!read_only_) {
        std::filesystem::create_directories(dir_, ec);
        if (ec) throw io_error("cannot create cache directory " + dir_.string() + ": " + ec.message());
    }
}

std::string ResponseCache::key_for(const BackendProfile& profile, const CompletionRequest& request) {
    std::ostringstream material;
    material << profile.model << '\x1f'
             << canonical_double(request.temperature.value_or(profile.temperature)) << '\x1f'
             << request.max_tokens.value_or(profile.max_tokens) << '\x1f'
             << request.system.value_or("") << '\x1f'
             << request.prompt;
    return sha256_hex(material.str());
}

std::optional<CompletionResponse> ResponseCache::lookup(const std::string& key) const {
    std::filesystem::path entry = dir_ / (key + ".json");
    std::ifstream in(entry, std::ios::binary);
    if (!in) return std::nullopt;
    std::stringstream buffer;
    buffer << in.rdbuf();
    json doc = json::parse(buffer.str(), nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) return std::nullopt;
    if (doc.value("key", "") != key) return std::nullopt;   // corruption: stored under the wrong digest
    if (!doc.contains("response") || !doc["response"].is_object()) return std::nullopt;
    const json& r = doc["response"];
    if (!r.contains("text") || !r["text"].is_string()) return std::nullopt;

    CompletionResponse response;
    response.text = r["text"].get<std::string>();
    response.finish_reason = r.value("finish_reason", "stop");
    response.usage.prompt_tokens = r.value("prompt_tokens", 0L);
    response.usage.completion_tokens = r.value("completion_tokens", 0L);
    response.latency_ms = 0;
    response.attempts = 0;
    response.from_cache = true;
    return response;
}

void ResponseCache::store(const std::string& key, const BackendProfile& profile,
                          const CompletionRequest& request, const CompletionResponse& response) {
    if (read_only_) {
        throw cache_error("read-only cache: refusing to store entry " + key);
    }
    json doc;
    doc["key"] = key;
    doc["request"] = {
        {"model", profile.model},
        {"temperature", request.temperature.value_or(profile.temperature)},
        {"max_tokens", request.max_tokens.value_or(profile.max_tokens)},
        {"system", request.system.value_or("")},
        {"prompt", request.prompt},
    };
    doc["response"] = {
        {"text", response.text},
        {"finish_reason", response.finish_reason},
        {"prompt_tokens", response.usage.prompt_tokens},
        {"completion_tokens", response.usage.completion_tokens},
    };

    std::lock_guard<std::mutex> lock(write_mutex_);
    std::filesystem::path final_path = dir_ / (key + ".json");
    std::filesystem::path tmp_path = dir_ / (key + ".tmp");
    {
        std::ofstream out(tmp_path, std::ios::binary | std::ios::trunc);
        if (!out) throw io_error("cannot write cache entry " + tmp_path.string());
        out << doc.dump(2) << '\n';
        if (!out.good()) throw io_error("short write on cache entry " + tmp_path.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp_path, final_path, ec);
    if (ec) throw io_error("cannot publish cache entry " + final_path.string() + ": " + ec.message());
}

CompletionResponse cached_complete(ResponseCache* cache, Backend& backend,
                                   const CompletionRequest& request) {
    if (cache == nullptr) return backend.complete(request);
    std::string key = ResponseCache::key_for(backend.profile(), request);
    if (auto hit = cache->lookup(key)) return *hit;
    if (cache->read_only()) {
        throw cache_error("read-only cache miss for key " + key);
    }
    CompletionResponse response = backend.complete(request);
    cache->store(key, backend.profile(), request, response);
    return response;
}

} // namespace selfrefine
