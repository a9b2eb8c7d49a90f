#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include <unistd.h>

#include <json.hpp>

#include "selfrefine/error.hpp"
#include "selfrefine/runner.hpp"
#include "selfrefine/trace_io.hpp"

using namespace selfrefine;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path project_root() {
    if (const char* root = std::getenv("SELFREFINE_ROOT")) return fs::path(root);
    for (fs::path dir = fs::current_path(); !dir.empty(); dir = dir.parent_path()) {
        if (fs::exists(dir / "assets" / "prompts")) return dir;
        if (dir == dir.root_path()) break;
    }
    FAIL("cannot locate the project root; set SELFREFINE_ROOT");
    return {};
}

fs::path temp_path(const std::string& stem, const std::string& ext) {
    static int counter = 0;
    return fs::temp_directory_path() / (stem + "-" + std::to_string(::getpid()) + "-" +
                                        std::to_string(counter++) + ext);
}

fs::path write_file(const std::string& stem, const std::string& ext, const std::string& content) {
    fs::path file = temp_path(stem, ext);
    std::ofstream out(file, std::ios::binary);
    out << content;
    return file;
}

// the checked-in three-instance concept fixture with matching reply rows
RunConfig constrained_config(const fs::path& trace_path) {
    fs::path root = project_root();
    RunConfig config;
    config.task_id = "constrained_generation";
    config.input_path = root / "tests" / "fixtures" / "constrained_small.jsonl";
    std::string script =
        "scripted:" + (root / "tests" / "fixtures" / "constrained_replies.json").string();
    config.backend_init = script;
    config.backend_feedback = script;
    config.backend_refine = script;
    config.prompt_dir = root / "assets" / "prompts";
    config.trace_path = trace_path;
    return config;
}

const std::string kAcronymCsv = "title\nDeep Association Networks\n";

// one instance: low-scoring draft, then a refinement that hits 25/25 and stops
const char* kAcronymReplies = R"([[
  "Acronym: DAN",
  "* Ease of pronunciation: DAN is easy. 4/5\n* Ease of spelling: 4/5\n* Relation to title: 3/5\n* Positive connotation: 2/5\n* Well-known: 2/5\n\n* Total score: 15/25",
  "Acronym: DEEPNET",
  "* Ease of pronunciation: 5/5\n* Ease of spelling: 5/5\n* Relation to title: 5/5\n* Positive connotation: 5/5\n* Well-known: 5/5\n\n* Total score: 25/25"
]])";

RunConfig acronym_config(const fs::path& trace_path) {
    RunConfig config;
    config.task_id = "acronym_generation";
    config.input_path = write_file("acronym", ".csv", kAcronymCsv);
    std::string script = "scripted:" + write_file("acronym-replies", ".json", kAcronymReplies).string();
    config.backend_init = script;
    config.backend_feedback = script;
    config.backend_refine = script;
    config.prompt_dir = project_root() / "assets" / "prompts";
    config.trace_path = trace_path;
    config.max_iterations = 2;
    return config;
}

ErrorCode code_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    return ErrorCode::Ok;
}

} // namespace

TEST_CASE("a batch run writes one trace per instance, in dataset order") {
    fs::path trace_path = temp_path("batch", ".jsonl");
    RunConfig config = constrained_config(trace_path);
    config.workers = 4;   // per-instance reply rows allow parallelism

    RunOutcome outcome = run_batch(config);
    CHECK(outcome.instances == 3);
    CHECK(outcome.errors == 0);
    CHECK(outcome.fingerprint.size() == 64);

    auto traces = read_trace_file(trace_path);
    REQUIRE(traces.size() == 3);
    CHECK(traces[0].input == "['dog', 'frisbee', 'catch', 'throw']");
    CHECK(traces[1].input == "['horse', 'carriage', 'ride']");
    CHECK(traces[2].input == "['chef', 'knife', 'chop', 'onion']");
    for (const auto& trace : traces) {
        CHECK(trace.termination == Termination::StopSignal);
        CHECK(trace.config_fingerprint == outcome.fingerprint);
        CHECK(trace.records.size() == 2);
        CHECK(trace.selected_index == 1);
    }
    fs::remove(trace_path);
}

TEST_CASE("a shared reply queue caps the worker pool at one") {
    fs::path script = write_file("global", ".json", R"(["a", "b", "c", "d"])");
    fs::path trace_path = temp_path("global-run", ".jsonl");
    RunConfig config = constrained_config(trace_path);
    config.backend_init = "scripted:" + script.string();
    config.backend_feedback = "scripted:" + script.string();
    config.backend_refine = "scripted:" + script.string();
    config.workers = 2;

    CHECK(code_of([&] { run_batch(config); }) == ErrorCode::Config);
    CHECK_FALSE(fs::exists(trace_path));   // refused before any work
}

TEST_CASE("per-instance reply scripts must cover the whole dataset") {
    fs::path script = write_file("short", ".json", R"([["only one row"]])");
    fs::path trace_path = temp_path("short-run", ".jsonl");
    RunConfig config = constrained_config(trace_path);
    config.backend_init = "scripted:" + script.string();
    config.backend_feedback = "scripted:" + script.string();
    config.backend_refine = "scripted:" + script.string();

    try {
        run_batch(config);
        FAIL("expected a config error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::Config);
        CHECK(std::string(e.what()).find("covers 1 instance") != std::string::npos);
    }
}

TEST_CASE("basic run configuration mistakes are rejected up front") {
    fs::path trace_path = temp_path("invalid", ".jsonl");

    RunConfig unknown = constrained_config(trace_path);
    unknown.task_id = "no_such_task";
    CHECK(code_of([&] { run_batch(unknown); }) == ErrorCode::Config);

    RunConfig no_trace = constrained_config("");
    CHECK(code_of([&] { run_batch(no_trace); }) == ErrorCode::Config);

    RunConfig no_workers = constrained_config(trace_path);
    no_workers.workers = 0;
    CHECK(code_of([&] { run_batch(no_workers); }) == ErrorCode::Config);

    RunConfig bad_profile = constrained_config(trace_path);
    bad_profile.backend_init = "missing_profile";
    bad_profile.profiles_path = write_file("profiles", ".json", "{}");
    CHECK(code_of([&] { run_batch(bad_profile); }) == ErrorCode::Config);
}

TEST_CASE("a failing instance becomes an error trace without sinking the batch") {
    // instance 2's reply row is empty, so its first call already fails
    fs::path script = write_file(
        "partial", ".json",
        R"([["Sentence: The dog catches and throws a frisbee.", "Everything looks good."],
            [],
            ["Sentence: A chef chops an onion with a knife.", "Everything looks good."]])");
    fs::path trace_path = temp_path("partial-run", ".jsonl");
    RunConfig config = constrained_config(trace_path);
    config.backend_init = "scripted:" + script.string();
    config.backend_feedback = "scripted:" + script.string();
    config.backend_refine = "scripted:" + script.string();

    RunOutcome outcome = run_batch(config);
    CHECK(outcome.instances == 3);
    CHECK(outcome.errors == 1);

    auto traces = read_trace_file(trace_path);
    REQUIRE(traces.size() == 3);
    CHECK(traces[0].termination == Termination::StopSignal);
    CHECK(traces[1].termination == Termination::Error);
    CHECK_FALSE(traces[1].error.empty());
    CHECK(traces[2].termination == Termination::StopSignal);
    fs::remove(trace_path);
}

TEST_CASE("config fingerprints are stable and sensitive to the loop setup") {
    fs::path trace_a = temp_path("fp-a", ".jsonl");
    fs::path trace_b = temp_path("fp-b", ".jsonl");
    RunConfig a = constrained_config(trace_a);
    RunConfig b = constrained_config(trace_b);   // different output path only

    RunOutcome first = run_batch(a);
    RunOutcome second = run_batch(b);
    CHECK(first.fingerprint == second.fingerprint);

    RunConfig tweaked_budget = constrained_config(temp_path("fp-c", ".jsonl"));
    tweaked_budget.max_iterations = 1;
    CHECK(run_batch(tweaked_budget).fingerprint != first.fingerprint);

    RunConfig tweaked_seed = constrained_config(temp_path("fp-d", ".jsonl"));
    tweaked_seed.seed_label = "7";
    CHECK(run_batch(tweaked_seed).fingerprint != first.fingerprint);

    RunConfig tweaked_mode = constrained_config(temp_path("fp-e", ".jsonl"));
    tweaked_mode.feedback_mode = FeedbackMode::None;
    CHECK(run_batch(tweaked_mode).fingerprint != first.fingerprint);

    fs::remove(trace_a);
    fs::remove(trace_b);
}

TEST_CASE("profiles resolve endpoints, styles, and retry settings") {
    json doc = {{"endpoint", "https://api.example.com"},
                {"model", "big-model"},
                {"temperature", 0.1},
                {"max_tokens", 128},
                {"api_style", "text_completions"},
                {"auth_env", "EXAMPLE_KEY"},
                {"retry", {{"max_attempts", 5}, {"base_backoff_ms", 10}}},
                {"rate_limit_per_minute", 30}};
    BackendProfile profile = profile_from_json("primary", doc);
    CHECK(profile.name == "primary");
    CHECK(profile.endpoint == "https://api.example.com");
    CHECK(profile.model == "big-model");
    CHECK(profile.api_style == ApiStyle::TextCompletions);
    CHECK(profile.path == "/v1/completions");
    CHECK(profile.auth_env == "EXAMPLE_KEY");
    CHECK(profile.retry.max_attempts == 5);
    CHECK(profile.retry.base_backoff_ms == 10);
    CHECK(profile.rate_limit_per_minute == 30);

    CHECK(code_of([] { profile_from_json("p", json{{"model", "m"}}); }) == ErrorCode::Config);
    CHECK(code_of([] { profile_from_json("p", json::array()); }) == ErrorCode::Config);
}

TEST_CASE("wilson eval mode reports the interval for explicit counts") {
    EvalConfig config;
    config.mode = "wilson";
    config.successes = 88;
    config.trials = 1000;
    json report = run_eval(config);
    CHECK(report["mode"] == "wilson");
    CHECK(report["successes"] == 88);
    CHECK(report["n"] == 1000);
    CHECK(report["rate"].get<double>() == doctest::Approx(0.088));
    CHECK(report["ci_low"].get<double>() == doctest::Approx(0.071980730985).epsilon(1e-9));
    CHECK(report["ci_high"].get<double>() == doctest::Approx(0.107172633450).epsilon(1e-9));

    std::string table = render_report_table(report);
    CHECK(table.find("successes | n | rate") != std::string::npos);
    CHECK(table.find("0.0720") != std::string::npos);

    EvalConfig missing;
    missing.mode = "wilson";
    CHECK(code_of([&] { run_eval(missing); }) == ErrorCode::Config);
}

TEST_CASE("coverage eval scores base and selected drafts per trace") {
    fs::path trace_path = temp_path("cov", ".jsonl");
    run_batch(constrained_config(trace_path));

    EvalConfig config;
    config.mode = "coverage";
    config.trace_files = {trace_path};
    config.prompt_dir = project_root() / "assets" / "prompts";
    json report = run_eval(config);

    CHECK(report["task"] == "constrained_generation");
    CHECK(report["n"] == 3);
    REQUIRE(report["rows"].size() == 3);
    CHECK(report["rows"][0]["base"].get<double>() == doctest::Approx(0.5));
    CHECK(report["rows"][0]["selected"].get<double>() == doctest::Approx(0.75));
    CHECK(report["rows"][1]["base"].get<double>() == doctest::Approx(2.0 / 3.0));
    CHECK(report["rows"][1]["selected"].get<double>() == doctest::Approx(1.0));
    CHECK(report["base_mean"].get<double>() ==
          doctest::Approx((0.5 + 2.0 / 3.0 + 0.5) / 3.0));
    CHECK(report["selected_mean"].get<double>() == doctest::Approx((0.75 + 1.0 + 1.0) / 3.0));
    CHECK(report["selected_interval"]["ci_low"].get<double>() > 0.0);

    std::string table = render_report_table(report);
    CHECK(table.find("index | base | selected") != std::string::npos);
    CHECK(table.find("selected mean 0.9167") != std::string::npos);

    // metric mismatch: these are coverage traces, not rubric ones
    EvalConfig wrong;
    wrong.mode = "rubric";
    wrong.trace_files = {trace_path};
    wrong.prompt_dir = config.prompt_dir;
    CHECK(code_of([&] { run_eval(wrong); }) == ErrorCode::Config);
    fs::remove(trace_path);
}

TEST_CASE("mixed fingerprints are refused unless explicitly allowed") {
    fs::path trace_path = temp_path("mixed", ".jsonl");
    RunConfig first = constrained_config(trace_path);
    run_batch(first);
    RunConfig second = constrained_config(trace_path);   // appends to the same file
    second.seed_label = "other";
    run_batch(second);

    EvalConfig config;
    config.mode = "coverage";
    config.trace_files = {trace_path};
    config.prompt_dir = project_root() / "assets" / "prompts";
    try {
        run_eval(config);
        FAIL("expected a config error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::Config);
        CHECK(std::string(e.what()).find("allow-mixed") != std::string::npos);
    }

    config.allow_mixed = true;
    json report = run_eval(config);
    CHECK(report["n"] == 6);
    fs::remove(trace_path);
}

TEST_CASE("delta eval tracks the per-iteration score curve") {
    fs::path trace_path = temp_path("deltas", ".jsonl");
    run_batch(constrained_config(trace_path));

    EvalConfig config;
    config.mode = "deltas";
    config.trace_files = {trace_path};
    config.prompt_dir = project_root() / "assets" / "prompts";
    json report = run_eval(config);

    REQUIRE(report["means"].size() == 2);
    CHECK(report["means"][0].get<double>() == doctest::Approx((0.5 + 2.0 / 3.0 + 0.5) / 3.0));
    CHECK(report["means"][1].get<double>() == doctest::Approx((0.75 + 1.0 + 1.0) / 3.0));
    CHECK(report["counts"] == json::array({3, 3}));
    REQUIRE(report["deltas"].size() == 1);
    CHECK(report["deltas"][0].get<double>() > 0.0);

    std::string table = render_report_table(report);
    CHECK(table.find("t | n | mean | delta") != std::string::npos);
    fs::remove(trace_path);
}

TEST_CASE("report eval emits base and refined rows per task") {
    fs::path trace_path = temp_path("report", ".jsonl");
    run_batch(constrained_config(trace_path));

    EvalConfig config;
    config.mode = "report";
    config.trace_files = {trace_path};
    config.prompt_dir = project_root() / "assets" / "prompts";
    json report = run_eval(config);

    REQUIRE(report["rows"].size() == 2);
    CHECK(report["rows"][0]["task"] == "constrained_generation");
    CHECK(report["rows"][0]["condition"] == "Base");
    CHECK(report["rows"][1]["condition"] == "+SelfRefine");
    CHECK(report["rows"][0]["n"] == 3);
    CHECK(report["rows"][0]["rate"].get<double>() ==
          doctest::Approx((0.5 + 2.0 / 3.0 + 0.5) / 3.0));
    CHECK(report["rows"][1]["successes"] == 3);   // lround(0.75 + 1 + 1)

    std::string table = render_report_table(report);
    CHECK(table.find("task | condition | n") != std::string::npos);
    fs::remove(trace_path);
}

TEST_CASE("ab eval judges base against selected with order swapping") {
    fs::path trace_path = temp_path("ab", ".jsonl");
    RunOutcome outcome = run_batch(acronym_config(trace_path));
    CHECK(outcome.errors == 0);

    auto traces = read_trace_file(trace_path);
    REQUIRE(traces.size() == 1);
    CHECK(traces[0].termination == Termination::StopSignal);
    REQUIRE(traces[0].records.size() == 2);
    CHECK(traces[0].records[0].candidate == "DAN");
    CHECK(traces[0].records[1].candidate == "DEEPNET");
    CHECK(traces[0].selected_index == 1);

    // forward call sees (base, refined); the swapped call sees (refined, base)
    fs::path judge = write_file("judge", ".json",
                                R"(["The better acronym is B", "The better acronym is A"])");
    EvalConfig config;
    config.mode = "ab";
    config.trace_files = {trace_path};
    config.prompt_dir = project_root() / "assets" / "prompts";
    config.evaluator = "scripted:" + judge.string();
    json report = run_eval(config);

    CHECK(report["n"] == 1);
    CHECK(report["refined_wins"] == 1);
    CHECK(report["base_wins"] == 0);
    CHECK(report["both"] == 0);
    CHECK(report["unparseable"] == 0);
    REQUIRE(report["rows"].size() == 2);
    CHECK(report["rows"][1]["condition"] == "+SelfRefine");
    CHECK(report["rows"][1]["successes"] == 1);

    std::string table = render_report_table(report);
    CHECK(table.find("refined_wins=1") != std::string::npos);
    fs::remove(trace_path);
}

TEST_CASE("ab eval can count draws as wins for both sides") {
    fs::path trace_path = temp_path("ab-both", ".jsonl");
    run_batch(acronym_config(trace_path));

    // a position-biased judge: always the first presented, averaging to Both
    fs::path judge = write_file("judge-both", ".json",
                                R"(["The better acronym is A", "The better acronym is A"])");
    EvalConfig config;
    config.mode = "ab";
    config.trace_files = {trace_path};
    config.prompt_dir = project_root() / "assets" / "prompts";
    config.evaluator = "scripted:" + judge.string();
    config.both_wins = true;
    json report = run_eval(config);

    CHECK(report["both"] == 1);
    CHECK(report["rows"][0]["successes"] == 1);   // base: 0 wins + 1 both
    CHECK(report["rows"][1]["successes"] == 1);
    fs::remove(trace_path);
}

TEST_CASE("sentiment judging demands an explicit target context") {
    fs::path trace_path = temp_path("sentiment", ".jsonl");
    Trace trace;
    trace.task_id = "sentiment_reversal";
    trace.input = "The food was cold and the service was slow.";
    trace.termination = Termination::StopSignal;
    trace.config_fingerprint = "fp";
    IterationRecord base;
    base.index = 0;
    base.candidate = "The food was cold.";
    trace.records.push_back(base);
    IterationRecord refined;
    refined.index = 1;
    refined.candidate = "The food was delightfully warm.";
    trace.records.push_back(refined);
    trace.selected_index = 1;
    append_trace_line(trace_path, trace);

    fs::path judge = write_file(
        "judge-sentiment", ".json",
        R"(["The more aligned review is Review B", "The more aligned review is Review A"])");
    EvalConfig config;
    config.mode = "ab";
    config.trace_files = {trace_path};
    config.prompt_dir = project_root() / "assets" / "prompts";
    config.evaluator = "scripted:" + judge.string();

    CHECK(code_of([&] { run_eval(config); }) == ErrorCode::Config);

    config.target_context = "very positive";
    json report = run_eval(config);
    CHECK(report["refined_wins"] == 1);
    fs::remove(trace_path);
}

TEST_CASE("one_vs_k eval matches samples by input and requires strict sweeps") {
    fs::path trace_path = temp_path("ovk", ".jsonl");
    run_batch(acronym_config(trace_path));

    fs::path samples = write_file(
        "samples", ".jsonl",
        R"({"input": "Deep Association Networks", "samples": ["DN", "ASSOC"]})" "\n");
    // per sample: refined wins forward (A) and swapped (surface B, corrected A)
    fs::path judge = write_file("judge-ovk", ".json",
                                R"(["The better acronym is A", "The better acronym is B",
                                    "The better acronym is A", "The better acronym is B"])");
    EvalConfig config;
    config.mode = "one_vs_k";
    config.trace_files = {trace_path};
    config.prompt_dir = project_root() / "assets" / "prompts";
    config.evaluator = "scripted:" + judge.string();
    config.samples_path = samples;
    json report = run_eval(config);

    CHECK(report["n"] == 1);
    CHECK(report["k"] == 2);
    CHECK(report["preferred"] == 1);
    CHECK(report["rate"].get<double>() == doctest::Approx(1.0));

    // a missing input key is a hard error, not a silent skip
    fs::path unmatched = write_file("samples-miss", ".jsonl",
                                    R"({"input": "Some Other Title", "samples": ["X"]})" "\n");
    config.samples_path = unmatched;
    CHECK(code_of([&] { run_eval(config); }) == ErrorCode::Config);

    config.samples_path.clear();
    CHECK(code_of([&] { run_eval(config); }) == ErrorCode::Config);
    fs::remove(trace_path);
}

TEST_CASE("eval rejects unknown modes, empty inputs, and array judge scripts") {
    EvalConfig config;
    config.mode = "nonsense";
    config.trace_files = {temp_path("none", ".jsonl")};
    CHECK(code_of([&] { run_eval(config); }) != ErrorCode::Ok);

    EvalConfig no_traces;
    no_traces.mode = "coverage";
    no_traces.prompt_dir = project_root() / "assets" / "prompts";
    CHECK(code_of([&] { run_eval(no_traces); }) == ErrorCode::Config);

    fs::path trace_path = temp_path("judge-shape", ".jsonl");
    run_batch(acronym_config(trace_path));
    EvalConfig bad_judge;
    bad_judge.mode = "ab";
    bad_judge.trace_files = {trace_path};
    bad_judge.prompt_dir = project_root() / "assets" / "prompts";
    bad_judge.evaluator =
        "scripted:" + write_file("judge-nested", ".json", R"([["nested"]])").string();
    CHECK(code_of([&] { run_eval(bad_judge); }) == ErrorCode::Config);

    bad_judge.evaluator.clear();
    CHECK(code_of([&] { run_eval(bad_judge); }) == ErrorCode::Config);
    fs::remove(trace_path);
}
