#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "selfrefine/engine.hpp"

namespace selfrefine {

nlohmann::json trace_to_json(const Trace& trace);
Trace trace_from_json(const nlohmann::json& doc);

// One compact JSON object per line; the file is append-only so batch runs
// stream and partial progress survives a crash.
void append_trace_line(const std::filesystem::path& file, const Trace& trace);
std::vector<Trace> read_trace_file(const std::filesystem::path& file);

// Copy with wall-clock fields removed (timing, per-record latency). Two runs
// of the same configuration against the same scripted backend or warm cache
// agree on this form byte for byte.
nlohmann::json without_volatile(nlohmann::json doc);

} // namespace selfrefine
