#include "selfrefine.h"

#include <cstdlib>
#include <cstring>
#include <optional>
#include <string>

#include <json.hpp>

#include "selfrefine/digest.hpp"
#include "selfrefine/error.hpp"
#include "selfrefine/eval.hpp"
#include "selfrefine/runner.hpp"
#include "selfrefine/session.hpp"
#include "selfrefine/tasks.hpp"
#include "selfrefine/trace_io.hpp"

using nlohmann::json;
using namespace selfrefine;

namespace {

thread_local std::string t_last_error = "no error";

sr_status status_for(ErrorCode code) {
    // ErrorCode values are pinned to sr_status, see error.hpp.
    return static_cast<sr_status>(static_cast<int>(code));
}

char* dup_string(const std::string& text) {
    char* out = static_cast<char*>(std::malloc(text.size() + 1));
    if (!out) return nullptr;
    std::memcpy(out, text.c_str(), text.size() + 1);
    return out;
}

template <typename Fn>
sr_status guarded(Fn&& fn) {
    try {
        return fn();
    } catch (const Error& e) {
        t_last_error = e.what();
        return status_for(e.code());
    } catch (const json::exception& e) {
        t_last_error = e.what();
        return SR_ERR_PARSE;
    } catch (const std::exception& e) {
        t_last_error = e.what();
        return SR_ERR_INTERNAL;
    }
}

sr_status require_arg(bool ok, const char* message) {
    if (ok) return SR_OK;
    t_last_error = message;
    return SR_ERR_INVALID_ARGUMENT;
}

json parse_json_arg(const char* text, const char* what) {
    json doc = json::parse(text, nullptr, false);
    if (doc.is_discarded()) throw parse_error(std::string(what) + " is not valid JSON");
    return doc;
}

sr_status emit(char** out, const std::string& text) {
    *out = dup_string(text);
    if (!*out) {
        t_last_error = "out of memory";
        return SR_ERR_INTERNAL;
    }
    return SR_OK;
}

} // namespace

struct sr_registry {
    TaskRegistry impl;
};

extern "C" {

const char* sr_version(void) { return "1.0.0"; }

const char* sr_last_error(void) { return t_last_error.c_str(); }

void sr_string_free(char* s) { std::free(s); }

sr_status sr_registry_open(const char* prompt_dir, sr_registry** out) {
    if (sr_status s = require_arg(prompt_dir && out, "prompt_dir and out must be non-NULL"))
        return s;
    *out = nullptr;
    return guarded([&]() {
        *out = new sr_registry{TaskRegistry(prompt_dir)};
        return SR_OK;
    });
}

void sr_registry_close(sr_registry* registry) { delete registry; }

sr_status sr_registry_task_ids(sr_registry* registry, char** json_out) {
    if (sr_status s = require_arg(registry && json_out, "registry and json_out must be non-NULL"))
        return s;
    return guarded([&]() {
        json ids = json::array();
        for (const auto& id : TaskRegistry::task_ids()) ids.push_back(id);
        return emit(json_out, ids.dump());
    });
}

sr_status sr_registry_task(sr_registry* registry, const char* task_id, char** json_out) {
    if (sr_status s = require_arg(registry && task_id && json_out,
                                  "registry, task_id and json_out must be non-NULL"))
        return s;
    return guarded([&]() {
        const TaskSpec& task = registry->impl.get(task_id);
        json doc;
        doc["id"] = task.id;
        doc["display_name"] = task.display_name;
        doc["metric"] = metric_name(task.metric);
        doc["max_iterations"] = task.stop_policy.max_iterations;
        doc["stop_phrases"] = task.stop_policy.stop_phrases;
        doc["use_oracle"] = task.stop_policy.use_oracle;
        if (task.stop_policy.min_total_score) {
            doc["min_total_score"] = *task.stop_policy.min_total_score;
        }
        if (task.rubric) {
            json aspects = json::array();
            for (const auto& aspect : task.rubric->aspects) {
                aspects.push_back({{"name", aspect.name}, {"max", aspect.max_points}});
            }
            doc["rubric"] = std::move(aspects);
        }
        doc["identity_init"] = task.identity_init;
        doc["generic_feedback"] = task.generic_feedback;
        return emit(json_out, doc.dump());
    });
}

sr_status sr_run_session(const char* session_json, char** trace_json_out) {
    if (sr_status s = require_arg(session_json && trace_json_out,
                                  "session_json and trace_json_out must be non-NULL"))
        return s;
    return guarded([&]() {
        json doc = parse_json_arg(session_json, "session config");
        if (!doc.is_object()) throw config_error("session config must be a JSON object");
        if (!doc.contains("task")) throw config_error("session config needs 'task'");
        if (!doc.contains("input")) throw config_error("session config needs 'input'");

        TaskRegistry registry(doc.value("prompt_dir", std::string("assets/prompts")));
        const TaskSpec& task = registry.get(doc["task"].get<std::string>());

        Instance instance;
        instance.id = doc.value("id", "0");
        instance.input = doc["input"].get<std::string>();
        if (doc.contains("concepts")) {
            instance.concepts = doc["concepts"].get<std::vector<std::string>>();
        }
        instance.gold_answer = doc.value("gold_answer", "");

        // A single shared reply queue serves all three roles; endpoint-backed
        // sessions go through sr_run_batch, which resolves named profiles.
        if (!doc.contains("replies") || !doc["replies"].is_array()) {
            throw config_error("session config needs a 'replies' array");
        }
        RoleBackends backends;
        auto shared =
            std::make_shared<ScriptedBackend>(doc["replies"].get<std::vector<std::string>>());
        backends.init = backends.feedback = backends.refine = shared;

        SessionOptions options;
        if (doc.contains("feedback_mode")) {
            options.feedback_mode =
                feedback_mode_from_name(doc["feedback_mode"].get<std::string>());
        }
        if (doc.contains("generic_feedback")) {
            options.generic_feedback = doc["generic_feedback"].get<std::string>();
        }
        StopPolicy policy = task.stop_policy;
        bool policy_touched = false;
        if (doc.contains("max_iterations")) {
            policy.max_iterations = doc["max_iterations"].get<int>();
            policy_touched = true;
        }
        if (doc.contains("min_total_score")) {
            policy.min_total_score = doc["min_total_score"].get<int>();
            policy_touched = true;
        }
        if (policy_touched) options.stop_policy = policy;

        std::optional<ResponseCache> cache;
        if (doc.contains("cache_dir")) {
            cache.emplace(doc["cache_dir"].get<std::string>(),
                          doc.value("cache_read_only", false));
            options.cache = &*cache;
        }

        Trace trace = run_session(task, instance, backends, options);
        return emit(trace_json_out, trace_to_json(trace).dump());
    });
}

sr_status sr_run_batch(const char* config_json, char** outcome_json_out) {
    if (sr_status s = require_arg(config_json && outcome_json_out,
                                  "config_json and outcome_json_out must be non-NULL"))
        return s;
    return guarded([&]() {
        json doc = parse_json_arg(config_json, "run config");
        if (!doc.is_object()) throw config_error("run config must be a JSON object");
        RunConfig config;
        config.task_id = doc.value("task", "");
        config.input_path = doc.value("input", "");
        config.backend_init = doc.value("backend_init", "");
        config.backend_feedback = doc.value("backend_feedback", "");
        config.backend_refine = doc.value("backend_refine", "");
        config.profiles_path = doc.value("profiles", "");
        config.prompt_dir = doc.value("prompt_dir", std::string("assets/prompts"));
        if (doc.contains("max_iterations")) config.max_iterations = doc["max_iterations"].get<int>();
        if (doc.contains("min_total_score")) {
            config.min_total_score = doc["min_total_score"].get<int>();
        }
        if (doc.contains("feedback_mode")) {
            config.feedback_mode = feedback_mode_from_name(doc["feedback_mode"].get<std::string>());
        }
        if (doc.contains("generic_feedback")) {
            config.generic_feedback = doc["generic_feedback"].get<std::string>();
        }
        config.exec_oracle = doc.value("exec_oracle", false);
        config.workers = doc.value("workers", 1);
        config.cache_dir = doc.value("cache_dir", "");
        config.cache_read_only = doc.value("cache_read_only", false);
        config.trace_path = doc.value("trace", "");
        config.seed_label = doc.value("seed", "");

        RunOutcome outcome = run_batch(config);
        json result = {{"instances", outcome.instances},
                       {"errors", outcome.errors},
                       {"fingerprint", outcome.fingerprint}};
        return emit(outcome_json_out, result.dump());
    });
}

sr_status sr_eval(const char* config_json, char** report_json_out) {
    if (sr_status s = require_arg(config_json && report_json_out,
                                  "config_json and report_json_out must be non-NULL"))
        return s;
    return guarded([&]() {
        json doc = parse_json_arg(config_json, "eval config");
        if (!doc.is_object()) throw config_error("eval config must be a JSON object");
        EvalConfig config;
        config.mode = doc.value("mode", "");
        if (doc.contains("traces")) {
            for (const auto& item : doc["traces"]) {
                config.trace_files.emplace_back(item.get<std::string>());
            }
        }
        config.allow_mixed = doc.value("allow_mixed", false);
        config.z = doc.value("z", 1.96);
        config.successes = doc.value("successes", -1L);
        config.trials = doc.value("n", -1L);
        config.evaluator = doc.value("evaluator", "");
        config.profiles_path = doc.value("profiles", "");
        config.prompt_dir = doc.value("prompt_dir", std::string("assets/prompts"));
        config.samples_path = doc.value("samples", "");
        config.cache_dir = doc.value("cache_dir", "");
        config.cache_read_only = doc.value("cache_read_only", false);
        config.both_wins = doc.value("both_wins", false);
        config.target_context = doc.value("context", "");

        json report = run_eval(config);
        return emit(report_json_out, report.dump());
    });
}

sr_status sr_render_table(const char* report_json, char** table_out) {
    if (sr_status s =
            require_arg(report_json && table_out, "report_json and table_out must be non-NULL"))
        return s;
    return guarded([&]() {
        json report = parse_json_arg(report_json, "report");
        return emit(table_out, render_report_table(report));
    });
}

sr_status sr_wilson_interval(long successes, long trials, double z, double* low_out,
                             double* high_out) {
    if (sr_status s = require_arg(low_out && high_out, "low_out and high_out must be non-NULL"))
        return s;
    return guarded([&]() {
        Interval interval = wilson_interval(successes, trials, z);
        *low_out = interval.low;
        *high_out = interval.high;
        return SR_OK;
    });
}

sr_status sr_coverage(const char* concepts_json, const char* sentence, double* coverage_out) {
    if (sr_status s = require_arg(concepts_json && sentence && coverage_out,
                                  "concepts_json, sentence and coverage_out must be non-NULL"))
        return s;
    return guarded([&]() {
        json doc = parse_json_arg(concepts_json, "concepts");
        if (!doc.is_array()) throw invalid_argument_error("concepts must be a JSON array");
        *coverage_out = coverage(doc.get<std::vector<std::string>>(), sentence);
        return SR_OK;
    });
}

sr_status sr_readability_metrics(const char* source, double* comments_per_line_out,
                                 int* function_units_out, int* non_blank_lines_out,
                                 int* comment_count_out) {
    if (sr_status s = require_arg(source != nullptr, "source must be non-NULL")) return s;
    return guarded([&]() {
        ReadabilityMetrics metrics = readability_metrics(source);
        if (comments_per_line_out) *comments_per_line_out = metrics.comments_per_line;
        if (function_units_out) *function_units_out = metrics.function_units;
        if (non_blank_lines_out) *non_blank_lines_out = metrics.non_blank_lines;
        if (comment_count_out) *comment_count_out = metrics.comment_count;
        return SR_OK;
    });
}

sr_status sr_detect_stop_phrase(const char* text, const char* phrases_json, int* found_out) {
    if (sr_status s = require_arg(text && found_out, "text and found_out must be non-NULL"))
        return s;
    return guarded([&]() {
        std::vector<std::string> phrases;
        if (phrases_json) {
            json doc = parse_json_arg(phrases_json, "phrases");
            if (!doc.is_array()) throw invalid_argument_error("phrases must be a JSON array");
            phrases = doc.get<std::vector<std::string>>();
        } else {
            phrases = default_stop_phrases();
        }
        *found_out = detect_stop_phrase(text, phrases) ? 1 : 0;
        return SR_OK;
    });
}

sr_status sr_parse_preference_verdict(const char* text, const char* label_a, const char* label_b,
                                      char** verdict_out, int* unparseable_out) {
    if (sr_status s = require_arg(text && verdict_out && unparseable_out,
                                  "text, verdict_out and unparseable_out must be non-NULL"))
        return s;
    return guarded([&]() {
        std::pair<std::string, std::string> labels{label_a ? label_a : "A",
                                                   label_b ? label_b : "B"};
        VerdictParse parsed = parse_preference_verdict(text, labels);
        *unparseable_out = parsed.unparseable ? 1 : 0;
        const char* name = verdict_name(parsed.verdict);
        return emit(verdict_out, name);
    });
}

sr_status sr_parse_scored_feedback(const char* text, const char* rubric_json,
                                   char** report_json_out) {
    if (sr_status s = require_arg(text && rubric_json && report_json_out,
                                  "text, rubric_json and report_json_out must be non-NULL"))
        return s;
    return guarded([&]() {
        json doc = parse_json_arg(rubric_json, "rubric");
        if (!doc.is_array()) throw invalid_argument_error("rubric must be a JSON array");
        Rubric rubric;
        for (const auto& item : doc) {
            if (!item.is_object() || !item.contains("name") || !item.contains("max")) {
                throw invalid_argument_error("rubric entries need 'name' and 'max'");
            }
            rubric.aspects.push_back(
                {item["name"].get<std::string>(), item["max"].get<int>()});
        }
        rubric.validate();
        FeedbackReport parsed = parse_scored_feedback(text, rubric);
        json out;
        out["aspects"] = json::array();
        for (const auto& aspect : parsed.aspects) {
            out["aspects"].push_back(
                {{"name", aspect.name}, {"score", aspect.score}, {"max", aspect.max_points}});
        }
        if (parsed.total) out["total"] = *parsed.total;
        out["stop"] = parsed.stop;
        out["all_parsed"] = parsed.all_aspects_parsed();
        if (auto total = parsed.effective_total()) out["effective_total"] = *total;
        out["inconsistent_total"] = parsed.inconsistent_total;
        return emit(report_json_out, out.dump());
    });
}

} // extern "C"
