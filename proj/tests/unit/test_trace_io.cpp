#include <doctest.h>

#include <filesystem>
#include <fstream>

#include <unistd.h>

#include "selfrefine/error.hpp"
#include "selfrefine/trace_io.hpp"

using namespace selfrefine;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

Trace sample_trace() {
    Trace trace;
    trace.task_id = "acronym_generation";
    trace.input = "Title: Some System";
    trace.termination = Termination::StopSignal;
    trace.config_fingerprint = "fp-123";
    trace.total_calls = 4;
    trace.usage.prompt_tokens = 100;
    trace.usage.completion_tokens = 40;
    trace.elapsed_ms = 87;
    trace.started_at = "2026-08-14T10:00:00Z";

    IterationRecord first;
    first.index = 0;
    first.candidate = "SS";
    first.raw_feedback = "* Quality: 3/5\n\nTotal score: 3/5";
    FeedbackReport report;
    report.aspects = {{"Quality", 3, 5}};
    report.total = 3;
    report.rubric_aspect_count = 1;
    report.rationale = *first.raw_feedback;
    first.parsed_feedback = report;
    first.usage = {60, 25};
    first.latency_ms = 41;
    trace.records.push_back(first);

    IterationRecord second;
    second.index = 1;
    second.candidate = "SOSY";
    second.usage = {40, 15};
    second.latency_ms = 46;
    trace.records.push_back(second);

    trace.selected_index = 0;
    return trace;
}

fs::path temp_trace_path(const std::string& stem) {
    static int counter = 0;
    return fs::temp_directory_path() /
           (stem + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++) + ".jsonl");
}

} // namespace

TEST_CASE("traces survive a json round-trip, scores and selection included") {
    Trace original = sample_trace();
    json doc = trace_to_json(original);
    Trace restored = trace_from_json(doc);

    CHECK(restored.task_id == original.task_id);
    CHECK(restored.input == original.input);
    CHECK(restored.termination == Termination::StopSignal);
    CHECK(restored.config_fingerprint == "fp-123");
    CHECK(restored.selected_index == 0);
    CHECK(restored.total_calls == 4);
    CHECK(restored.usage.prompt_tokens == 100);
    CHECK(restored.usage.completion_tokens == 40);
    CHECK(restored.elapsed_ms == 87);
    CHECK(restored.started_at == "2026-08-14T10:00:00Z");

    REQUIRE(restored.records.size() == 2);
    const auto& first = restored.records[0];
    CHECK(first.candidate == "SS");
    CHECK(first.raw_feedback == original.records[0].raw_feedback);
    REQUIRE(first.parsed_feedback.has_value());
    CHECK(first.parsed_feedback->aspects.size() == 1);
    CHECK(first.parsed_feedback->aspects[0].name == "Quality");
    CHECK(first.parsed_feedback->aspects[0].score == 3);
    CHECK(first.parsed_feedback->aspects[0].max_points == 5);
    CHECK(first.parsed_feedback->total == 3);
    CHECK(first.parsed_feedback->rubric_aspect_count == 1);
    // the restored report scores identically, so selection reproduces
    CHECK(first.parsed_feedback->all_aspects_parsed());
    CHECK(first.parsed_feedback->effective_total() == 3);
    // rationale is rebuilt from the raw critique
    CHECK(first.parsed_feedback->rationale == *first.raw_feedback);
    CHECK(first.usage.prompt_tokens == 60);
    CHECK(first.latency_ms == 41);

    CHECK_FALSE(restored.records[1].raw_feedback.has_value());
    CHECK_FALSE(restored.records[1].parsed_feedback.has_value());
}

TEST_CASE("optional trace fields appear only when meaningful") {
    Trace trace = sample_trace();
    json ok = trace_to_json(trace);
    CHECK_FALSE(ok.contains("error"));
    CHECK(ok.contains("selected_index"));

    trace.termination = Termination::Error;
    trace.error = "backend failed";
    trace.records.clear();
    trace.selected_index.reset();
    json failed = trace_to_json(trace);
    CHECK(failed["error"] == "backend failed");
    CHECK_FALSE(failed.contains("selected_index"));

    Trace restored = trace_from_json(failed);
    CHECK(restored.termination == Termination::Error);
    CHECK(restored.error == "backend failed");
    CHECK_FALSE(restored.selected_index.has_value());
    CHECK(restored.records.empty());
}

TEST_CASE("missing keys are named in parse errors") {
    json doc = trace_to_json(sample_trace());
    doc.erase("task_id");
    try {
        trace_from_json(doc);
        FAIL("expected a parse error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::Parse);
        CHECK(std::string(e.what()).find("task_id") != std::string::npos);
    }

    json bad_record = trace_to_json(sample_trace());
    bad_record["records"][0].erase("candidate");
    CHECK_THROWS_AS(trace_from_json(bad_record), Error);

    CHECK_THROWS_AS(trace_from_json(json::array()), Error);
}

TEST_CASE("trace files append one line per run and read back in order") {
    fs::path file = temp_trace_path("traces");
    Trace first = sample_trace();
    Trace second = sample_trace();
    second.input = "Title: Another System";

    append_trace_line(file, first);
    append_trace_line(file, second);

    auto traces = read_trace_file(file);
    REQUIRE(traces.size() == 2);
    CHECK(traces[0].input == "Title: Some System");
    CHECK(traces[1].input == "Title: Another System");

    // blank lines are tolerated; appends continue after them
    {
        std::ofstream out(file, std::ios::app);
        out << "\n";
    }
    append_trace_line(file, first);
    CHECK(read_trace_file(file).size() == 3);
    fs::remove(file);
}

TEST_CASE("unreadable trace files fail with the line number") {
    fs::path file = temp_trace_path("broken");
    {
        std::ofstream out(file);
        out << trace_to_json(sample_trace()).dump() << "\n";
        out << "{ truncated\n";
    }
    try {
        read_trace_file(file);
        FAIL("expected a parse error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::Parse);
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
    fs::remove(file);

    CHECK_THROWS_AS(read_trace_file("/nonexistent/traces.jsonl"), Error);
}

TEST_CASE("schema errors inside a line also carry the line number") {
    fs::path file = temp_trace_path("schema");
    {
        std::ofstream out(file);
        json doc = trace_to_json(sample_trace());
        doc.erase("records");
        out << doc.dump() << "\n";
    }
    try {
        read_trace_file(file);
        FAIL("expected a parse error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::Parse);
        CHECK(std::string(e.what()).find("line 1") != std::string::npos);
        CHECK(std::string(e.what()).find("records") != std::string::npos);
    }
    fs::remove(file);
}

TEST_CASE("stripping volatile fields removes exactly the wall-clock data") {
    Trace trace = sample_trace();
    json doc = trace_to_json(trace);
    json stable = without_volatile(doc);

    CHECK_FALSE(stable.contains("timing"));
    for (const auto& record : stable["records"]) {
        CHECK_FALSE(record.contains("latency_ms"));
    }
    // everything else is untouched
    CHECK(stable["task_id"] == doc["task_id"]);
    CHECK(stable["usage"] == doc["usage"]);
    CHECK(stable["records"][0]["candidate"] == doc["records"][0]["candidate"]);

    // two runs differing only in timing agree after stripping
    Trace later = sample_trace();
    later.started_at = "2026-08-14T11:11:11Z";
    later.elapsed_ms = 9001;
    later.records[0].latency_ms = 1;
    CHECK(without_volatile(trace_to_json(later)) == stable);
}
