#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "selfrefine/session.hpp"

namespace selfrefine {

// One batch invocation: a task, a dataset, one backend spec per role.
// Backend specs are either "scripted:FILE" or a profile name resolved from
// the profiles document.
struct RunConfig {
    std::string task_id;
    std::filesystem::path input_path;
    std::string backend_init;
    std::string backend_feedback;
    std::string backend_refine;
    std::filesystem::path profiles_path;
    std::filesystem::path prompt_dir = "assets/prompts";

    std::optional<int> max_iterations;
    std::optional<int> min_total_score;
    FeedbackMode feedback_mode = FeedbackMode::Specific;
    std::optional<std::string> generic_feedback;
    bool exec_oracle = false;   // math only: run candidate programs for the stop oracle

    int workers = 1;
    std::filesystem::path cache_dir;
    bool cache_read_only = false;
    std::filesystem::path trace_path;
    std::string seed_label;   // folded into the config fingerprint
};

struct RunOutcome {
    long instances = 0;
    long errors = 0;   // traces that ended with termination Error
    std::string fingerprint;
};

// Runs every dataset instance on a bounded worker pool and appends one trace
// line per instance, in dataset order, flushing as soon as each line's turn
// comes. Backend failures become Error traces, not exceptions.
RunOutcome run_batch(const RunConfig& config);

struct EvalConfig {
    std::string mode;   // coverage | rubric | ab | wilson | deltas | one_vs_k | report
    std::vector<std::filesystem::path> trace_files;
    bool allow_mixed = false;   // accept traces with differing config fingerprints
    double z = 1.96;

    long successes = -1;   // wilson mode
    long trials = -1;

    std::string evaluator;   // backend spec, ab / one_vs_k modes
    std::filesystem::path profiles_path;
    std::filesystem::path prompt_dir = "assets/prompts";
    std::filesystem::path samples_path;   // one_vs_k: {"input", "samples": […]} per line
    std::filesystem::path cache_dir;
    bool cache_read_only = false;
    bool both_wins = false;   // ab: a Both verdict counts as a win for both sides
    std::string target_context;   // sentiment judging: the target sentiment
};

// Machine-readable report for the requested mode.
nlohmann::json run_eval(const EvalConfig& config);

// Delimited console rendering of a run_eval report.
std::string render_report_table(const nlohmann::json& report);

// Internals shared with the C API and tests.
BackendProfile profile_from_json(const std::string& name, const nlohmann::json& doc);
std::string config_fingerprint_for(const RunConfig& config, const TaskSpec& task,
                                   const StopPolicy& policy);

} // namespace selfrefine
