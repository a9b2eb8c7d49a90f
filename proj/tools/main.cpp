#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "selfrefine.h"

using nlohmann::json;

namespace {

int exit_code_for(sr_status status) {
    switch (status) {
        case SR_OK:
            return 0;
        case SR_ERR_INVALID_ARGUMENT:
        case SR_ERR_TEMPLATE:
        case SR_ERR_PARSE:
        case SR_ERR_DOMAIN:
        case SR_ERR_IO:
        case SR_ERR_CONFIG:
            return 1;   // bad usage or bad inputs
        default:
            return 2;   // runtime failure, partial output may exist
    }
}

int fail(sr_status status) {
    std::fprintf(stderr, "error: %s\n", sr_last_error());
    return exit_code_for(status);
}

struct OwnedString {
    char* value = nullptr;
    ~OwnedString() { sr_string_free(value); }
};

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"self-refine loop runner and evaluation harness"};
    app.require_subcommand(1);

    // --- run ---
    std::string run_task, run_input, run_trace;
    std::string backend_init, backend_feedback, backend_refine;
    std::string profiles, prompt_dir = "assets/prompts";
    std::string feedback_mode = "specific", generic_feedback, seed;
    std::string cache_dir;
    int max_iters = -1, min_total = -1, workers = 1;
    bool cache_read_only = false, exec_oracle = false;

    CLI::App* run = app.add_subcommand("run", "run a task over a dataset, appending traces");
    run->add_option("--task", run_task, "task id")->required();
    run->add_option("--input", run_input, "dataset file")->required();
    run->add_option("--trace", run_trace, "trace output file (JSONL, appended)")->required();
    run->add_option("--backend-init", backend_init, "profile name or scripted:FILE")->required();
    run->add_option("--backend-feedback", backend_feedback, "profile name or scripted:FILE")
        ->required();
    run->add_option("--backend-refine", backend_refine, "profile name or scripted:FILE")
        ->required();
    run->add_option("--profiles", profiles, "JSON file of named backend profiles");
    run->add_option("--prompt-dir", prompt_dir, "prompt asset directory");
    run->add_option("--max-iters", max_iters, "iteration budget override");
    run->add_option("--min-total", min_total, "score threshold override");
    run->add_option("--feedback-mode", feedback_mode, "specific | generic | none")
        ->check(CLI::IsMember({"specific", "generic", "none"}));
    run->add_option("--generic-feedback", generic_feedback, "generic feedback text override");
    run->add_option("--workers", workers, "parallel sessions");
    run->add_option("--cache", cache_dir, "response cache directory");
    run->add_flag("--cache-read-only", cache_read_only, "fail on cache misses");
    run->add_flag("--exec-oracle", exec_oracle, "run candidate programs for the stop oracle");
    run->add_option("--seed", seed, "label folded into the config fingerprint");

    // --- eval / report ---
    std::string eval_mode;
    std::vector<std::string> trace_files;
    std::string evaluator, samples, context;
    double z = 1.96;
    long successes = -1, trials = -1;
    bool allow_mixed = false, both_wins = false, as_json = false;

    CLI::App* eval = app.add_subcommand("eval", "evaluate traces or compute intervals");
    eval->add_option("--mode", eval_mode, "coverage|rubric|ab|wilson|deltas|one_vs_k|report")
        ->required()
        ->check(CLI::IsMember(
            {"coverage", "rubric", "ab", "wilson", "deltas", "one_vs_k", "report"}));
    eval->add_option("--traces", trace_files, "trace files (JSONL)");
    eval->add_flag("--allow-mixed", allow_mixed, "accept traces with mixed fingerprints");
    eval->add_option("--z", z, "critical value for the confidence interval");
    eval->add_option("--successes", successes, "wilson mode: success count");
    eval->add_option("--n", trials, "wilson mode: trial count");
    eval->add_option("--evaluator", evaluator, "judge backend: profile name or scripted:FILE");
    eval->add_option("--profiles", profiles, "JSON file of named backend profiles");
    eval->add_option("--prompt-dir", prompt_dir, "prompt asset directory");
    eval->add_option("--samples", samples, "one_vs_k: JSONL of {input, samples:[..]}");
    eval->add_option("--cache", cache_dir, "response cache directory");
    eval->add_flag("--cache-read-only", cache_read_only, "fail on cache misses");
    eval->add_flag("--both-wins", both_wins, "ab mode: Both counts as a win for both sides");
    eval->add_option("--context", context, "sentiment judging: target sentiment");
    eval->add_flag("--json", as_json, "print the machine-readable report");

    std::vector<std::string> report_traces;
    double report_z = 1.96;
    bool report_allow_mixed = false, report_json = false;
    std::string report_prompt_dir = "assets/prompts";
    CLI::App* report = app.add_subcommand("report", "base vs refined table over traces");
    report->add_option("--traces", report_traces, "trace files (JSONL)")->required();
    report->add_option("--z", report_z, "critical value for the confidence interval");
    report->add_flag("--allow-mixed", report_allow_mixed,
                     "accept traces with mixed fingerprints");
    report->add_option("--prompt-dir", report_prompt_dir, "prompt asset directory");
    report->add_flag("--json", report_json, "print the machine-readable report");

    CLI::App* tasks = app.add_subcommand("tasks", "list built-in tasks");
    std::string tasks_prompt_dir = "assets/prompts";
    tasks->add_option("--prompt-dir", tasks_prompt_dir, "prompt asset directory");

    CLI11_PARSE(app, argc, argv);

    if (run->parsed()) {
        json config;
        config["task"] = run_task;
        config["input"] = run_input;
        config["trace"] = run_trace;
        config["backend_init"] = backend_init;
        config["backend_feedback"] = backend_feedback;
        config["backend_refine"] = backend_refine;
        if (!profiles.empty()) config["profiles"] = profiles;
        config["prompt_dir"] = prompt_dir;
        if (max_iters >= 0) config["max_iterations"] = max_iters;
        if (min_total >= 0) config["min_total_score"] = min_total;
        config["feedback_mode"] = feedback_mode;
        if (!generic_feedback.empty()) config["generic_feedback"] = generic_feedback;
        config["exec_oracle"] = exec_oracle;
        config["workers"] = workers;
        if (!cache_dir.empty()) config["cache_dir"] = cache_dir;
        config["cache_read_only"] = cache_read_only;
        if (!seed.empty()) config["seed"] = seed;

        OwnedString outcome;
        sr_status status = sr_run_batch(config.dump().c_str(), &outcome.value);
        if (status != SR_OK) return fail(status);
        json parsed = json::parse(outcome.value);
        std::printf("instances %ld errors %ld fingerprint %s\n",
                    parsed["instances"].get<long>(), parsed["errors"].get<long>(),
                    parsed["fingerprint"].get<std::string>().c_str());
        return parsed["errors"].get<long>() > 0 ? 2 : 0;
    }

    auto run_eval_command = [&](const std::string& mode, const std::vector<std::string>& files,
                                double z_value, bool mixed, const std::string& prompts,
                                bool raw_json) {
        json config;
        config["mode"] = mode;
        config["traces"] = files;
        config["allow_mixed"] = mixed;
        config["z"] = z_value;
        if (successes >= 0) config["successes"] = successes;
        if (trials >= 0) config["n"] = trials;
        if (!evaluator.empty()) config["evaluator"] = evaluator;
        if (!profiles.empty()) config["profiles"] = profiles;
        config["prompt_dir"] = prompts;
        if (!samples.empty()) config["samples"] = samples;
        if (!cache_dir.empty()) config["cache_dir"] = cache_dir;
        config["cache_read_only"] = cache_read_only;
        config["both_wins"] = both_wins;
        if (!context.empty()) config["context"] = context;

        OwnedString out;
        sr_status status = sr_eval(config.dump().c_str(), &out.value);
        if (status != SR_OK) return fail(status);
        if (raw_json) {
            std::printf("%s\n", out.value);
            return 0;
        }
        OwnedString table;
        status = sr_render_table(out.value, &table.value);
        if (status != SR_OK) return fail(status);
        std::fputs(table.value, stdout);
        return 0;
    };

    if (eval->parsed()) {
        return run_eval_command(eval_mode, trace_files, z, allow_mixed, prompt_dir, as_json);
    }
    if (report->parsed()) {
        return run_eval_command("report", report_traces, report_z, report_allow_mixed,
                                report_prompt_dir, report_json);
    }
    if (tasks->parsed()) {
        sr_registry* registry = nullptr;
        sr_status status = sr_registry_open(tasks_prompt_dir.c_str(), &registry);
        if (status != SR_OK) return fail(status);
        OwnedString ids;
        status = sr_registry_task_ids(registry, &ids.value);
        if (status != SR_OK) {
            sr_registry_close(registry);
            return fail(status);
        }
        for (const auto& id : json::parse(ids.value)) {
            OwnedString info;
            status = sr_registry_task(registry, id.get<std::string>().c_str(), &info.value);
            if (status != SR_OK) {
                sr_registry_close(registry);
                return fail(status);
            }
            json doc = json::parse(info.value);
            std::printf("%-24s %-28s metric=%s max_iters=%d\n",
                        doc["id"].get<std::string>().c_str(),
                        doc["display_name"].get<std::string>().c_str(),
                        doc["metric"].get<std::string>().c_str(),
                        doc["max_iterations"].get<int>());
        }
        sr_registry_close(registry);
        return 0;
    }
    return 1;
}
