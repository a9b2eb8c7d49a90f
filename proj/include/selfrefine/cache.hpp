#pragma once

#include <filesystem>
#include <mutex>
#include <optional>
#include <string>

#include "selfrefine/backends.hpp"

namespace selfrefine {

// Content-addressed response store: one JSON file per completed request,
// named by the SHA-256 of (model, temperature, max_tokens, system, prompt).
// Writes go to a temp file in the same directory and are renamed into place,
// so concurrent readers never observe a partial entry. Corrupt entries
// (unreadable JSON or a digest that no longer matches) count as misses and
// get overwritten by the next store.
class ResponseCache {
public:
    explicit ResponseCache(std::filesystem::path dir, bool read_only = false);

    static std::string key_for(const BackendProfile& profile, const CompletionRequest& request);

    std::optional<CompletionResponse> lookup(const std::string& key) const;
    void store(const std::string& key, const BackendProfile& profile,
               const CompletionRequest& request, const CompletionResponse& response);

    bool read_only() const { return read_only_; }
    const std::filesystem::path& dir() const { return dir_; }

private:
    std::filesystem::path dir_;
    bool read_only_;
    mutable std::mutex write_mutex_;
};

// Serves from the cache when possible; otherwise calls the backend and
// stores the result. A read-only cache turns misses into Cache errors
// instead of silently spending upstream calls.
CompletionResponse cached_complete(ResponseCache* cache, Backend& backend,
                                   const CompletionRequest& request);

} // namespace selfrefine
