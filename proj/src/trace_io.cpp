#include "selfrefine/trace_io.hpp"

#include <fstream>

#include "selfrefine/error.hpp"

namespace selfrefine {

using nlohmann::json;

json trace_to_json(const Trace& trace) {
    json doc;
    doc["task_id"] = trace.task_id;
    doc["input"] = trace.input;
    doc["records"] = json::array();
    for (const auto& record : trace.records) {
        json r;
        r["index"] = record.index;
        r["candidate"] = record.candidate;
        if (record.raw_feedback) r["raw_feedback"] = *record.raw_feedback;
        if (record.parsed_feedback) {
            const auto& parsed = *record.parsed_feedback;
            json p;
            p["aspects"] = json::array();
            for (const auto& aspect : parsed.aspects) {
                p["aspects"].push_back(
                    {{"name", aspect.name}, {"score", aspect.score}, {"max", aspect.max_points}});
            }
            if (parsed.total) p["total"] = *parsed.total;
            p["stop"] = parsed.stop;
            p["rubric_aspects"] = parsed.rubric_aspect_count;
            r["parsed"] = std::move(p);
        }
        r["latency_ms"] = record.latency_ms;
        r["usage"] = {{"prompt_tokens", record.usage.prompt_tokens},
                      {"completion_tokens", record.usage.completion_tokens}};
        doc["records"].push_back(std::move(r));
    }
    doc["termination"] = termination_name(trace.termination);
    if (trace.selected_index) doc["selected_index"] = *trace.selected_index;
    doc["config_fingerprint"] = trace.config_fingerprint;
    if (trace.termination == Termination::Error) doc["error"] = trace.error;
    doc["usage"] = {{"calls", trace.total_calls},
                    {"prompt_tokens", trace.usage.prompt_tokens},
                    {"completion_tokens", trace.usage.completion_tokens}};
    doc["timing"] = {{"started_at", trace.started_at}, {"elapsed_ms", trace.elapsed_ms}};
    return doc;
}

namespace {

const json& require(const json& doc, const char* key, const char* where) {
    auto it = doc.find(key);
    if (it == doc.end()) {
        throw parse_error(std::string(where) + " is missing '" + key + "'");
    }
    return *it;
}

} // namespace

Trace trace_from_json(const json& doc) {
    if (!doc.is_object()) throw parse_error("trace line is not a JSON object");
    Trace trace;
    trace.task_id = require(doc, "task_id", "trace").get<std::string>();
    trace.input = require(doc, "input", "trace").get<std::string>();
    const json& records = require(doc, "records", "trace");
    if (!records.is_array()) throw parse_error("trace 'records' is not an array");
    for (const auto& r : records) {
        IterationRecord record;
        record.index = require(r, "index", "record").get<int>();
        record.candidate = require(r, "candidate", "record").get<std::string>();
        if (r.contains("raw_feedback")) record.raw_feedback = r["raw_feedback"].get<std::string>();
        if (r.contains("parsed")) {
            const json& p = r["parsed"];
            FeedbackReport parsed;
            for (const auto& a : require(p, "aspects", "parsed feedback")) {
                parsed.aspects.push_back({require(a, "name", "aspect").get<std::string>(),
                                          require(a, "score", "aspect").get<int>(),
                                          require(a, "max", "aspect").get<int>()});
            }
            if (p.contains("total")) parsed.total = p["total"].get<int>();
            parsed.stop = p.value("stop", false);
            parsed.rubric_aspect_count = p.value("rubric_aspects", std::size_t{0});
            if (record.raw_feedback) parsed.rationale = *record.raw_feedback;
            record.parsed_feedback = std::move(parsed);
        }
        record.latency_ms = r.value("latency_ms", 0L);
        if (r.contains("usage")) {
            record.usage.prompt_tokens = r["usage"].value("prompt_tokens", 0L);
            record.usage.completion_tokens = r["usage"].value("completion_tokens", 0L);
        }
        trace.records.push_back(std::move(record));
    }
    trace.termination =
        termination_from_name(require(doc, "termination", "trace").get<std::string>());
    if (doc.contains("selected_index")) {
        trace.selected_index = doc["selected_index"].get<std::size_t>();
    }
    trace.config_fingerprint = doc.value("config_fingerprint", "");
    trace.error = doc.value("error", "");
    if (doc.contains("usage")) {
        trace.total_calls = doc["usage"].value("calls", 0L);
        trace.usage.prompt_tokens = doc["usage"].value("prompt_tokens", 0L);
        trace.usage.completion_tokens = doc["usage"].value("completion_tokens", 0L);
    }
    if (doc.contains("timing")) {
        trace.started_at = doc["timing"].value("started_at", "");
        trace.elapsed_ms = doc["timing"].value("elapsed_ms", 0L);
    }
    return trace;
}

void append_trace_line(const std::filesystem::path& file, const Trace& trace) {
    std::ofstream out(file, std::ios::app | std::ios::binary);
    if (!out) throw io_error("cannot open trace file " + file.string());
    out << trace_to_json(trace).dump() << '\n';
    if (!out) throw io_error("failed writing trace file " + file.string());
}

std::vector<Trace> read_trace_file(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw io_error("cannot open trace file " + file.string());
    std::vector<Trace> traces;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json doc = json::parse(line, nullptr, false);
        if (doc.is_discarded()) {
            throw parse_error(file.string() + " line " + std::to_string(line_no) +
                              ": invalid JSON");
        }
        try {
            traces.push_back(trace_from_json(doc));
        } catch (const Error& e) {
            throw parse_error(file.string() + " line " + std::to_string(line_no) + ": " +
                              e.what());
        }
    }
    return traces;
}

json without_volatile(json doc) {
    doc.erase("timing");
    if (doc.contains("records")) {
        for (auto& record : doc["records"]) record.erase("latency_ms");
    }
    return doc;
}

} // namespace selfrefine
