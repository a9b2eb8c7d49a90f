#pragma once

#include <string>
#include <string_view>

namespace selfrefine {

// Hex-encoded SHA-256 of the input bytes. Used for cache keys and config
// fingerprints; never for secrets.
std::string sha256_hex(std::string_view data);

} // namespace selfrefine
