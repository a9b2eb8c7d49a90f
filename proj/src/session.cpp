#include "selfrefine/session.hpp"

#include <chrono>
#include <ctime>

#include "selfrefine/error.hpp"

namespace selfrefine {

namespace {

std::string utc_now_iso8601() {
    auto now = std::chrono::system_clock::now();
    std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string trimmed(const std::string& text) {
    auto begin = text.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    auto end = text.find_last_not_of(" \t\r\n");
    return text.substr(begin, end - begin + 1);
}

} // namespace

const char* feedback_mode_name(FeedbackMode mode) {
    switch (mode) {
        case FeedbackMode::Specific: return "specific";
        case FeedbackMode::Generic: return "generic";
        case FeedbackMode::None: return "none";
    }
    return "unknown";
}

FeedbackMode feedback_mode_from_name(const std::string& name) {
    if (name == "specific") return FeedbackMode::Specific;
    if (name == "generic") return FeedbackMode::Generic;
    if (name == "none") return FeedbackMode::None;
    throw config_error("unknown feedback mode '" + name + "'");
}

std::string candidate_from_reply(const std::string& reply, const TaskSpec& task) {
    try {
        return extract_final_answer(reply, task);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::Extraction) throw;
        return trimmed(reply);
    }
}

Trace run_session(const TaskSpec& task, const Instance& instance, const RoleBackends& backends,
                  const SessionOptions& options) {
    if (!task.identity_init && !backends.init) {
        throw config_error("task '" + task.id + "' needs an init backend");
    }
    if (options.feedback_mode == FeedbackMode::Specific && !backends.feedback) {
        throw config_error("specific feedback mode needs a feedback backend");
    }
    if (!backends.refine) throw config_error("run_session needs a refine backend");

    const StopPolicy policy = options.stop_policy.value_or(task.stop_policy);
    const HistoryLimits limits = options.history_limits.value_or(task.history_limits);
    const std::string generic_text = options.generic_feedback.value_or(task.generic_feedback);

    Trace trace;
    trace.task_id = task.id;
    trace.input = instance.input;
    trace.config_fingerprint = options.config_fingerprint;
    trace.started_at = utc_now_iso8601();
    auto wall_start = std::chrono::steady_clock::now();

    auto complete = [&](Backend& backend, const std::string& prompt) {
        CompletionRequest request;
        request.prompt = prompt;
        CompletionResponse response = cached_complete(options.cache, backend, request);
        trace.usage.prompt_tokens += response.usage.prompt_tokens;
        trace.usage.completion_tokens += response.usage.completion_tokens;
        ++trace.total_calls;
        return response;
    };

    try {
        {
            IterationRecord first;
            first.index = 0;
            if (task.identity_init) {
                first.candidate = instance.input;
            } else {
                auto response =
                    complete(*backends.init, render_initial(task.init_template, instance.input));
                first.candidate = candidate_from_reply(response.text, task);
                first.usage = response.usage;
                first.latency_ms = response.latency_ms;
            }
            trace.records.push_back(std::move(first));
        }

        for (int t = 0;; ++t) {
            // Budget gate before the next critique: keeps total calls within
            // 1 + 2 * max_iterations and leaves the cut record without
            // feedback, which is how budget stops are recognizable in traces.
            if (should_stop(std::nullopt, "", t, policy, false)) {
                trace.termination = Termination::BudgetExhausted;
                break;
            }

            IterationRecord& current = trace.records.back();
            std::string raw_feedback;
            switch (options.feedback_mode) {
                case FeedbackMode::Specific: {
                    auto response = complete(
                        *backends.feedback,
                        render_feedback(task.feedback_template, instance.input, current.candidate));
                    raw_feedback = response.text;
                    current.usage.prompt_tokens += response.usage.prompt_tokens;
                    current.usage.completion_tokens += response.usage.completion_tokens;
                    current.latency_ms += response.latency_ms;
                    break;
                }
                case FeedbackMode::Generic:
                    raw_feedback = generic_text;
                    break;
                case FeedbackMode::None:
                    break;
            }

            if (options.feedback_mode != FeedbackMode::None) {
                current.raw_feedback = raw_feedback;
                if (task.rubric) {
                    FeedbackReport report = parse_scored_feedback(raw_feedback, *task.rubric);
                    // the report's stop flag reflects this session's phrase
                    // list, not the built-in default
                    report.stop = detect_stop_phrase(raw_feedback, policy.stop_phrases);
                    if (report.scored() || report.stop) {
                        current.parsed_feedback = std::move(report);
                    }
                }
            }

            bool oracle_correct =
                policy.use_oracle && options.oracle && options.oracle(instance, current.candidate);
            auto fired = stop_classification(current.parsed_feedback, raw_feedback, t, policy,
                                             oracle_correct);
            if (fired) {
                trace.termination = *fired;
                break;
            }

            std::vector<HistoryEntry> history;
            history.reserve(trace.records.size());
            for (const auto& record : trace.records) {
                history.push_back({record.candidate, record.raw_feedback});
            }
            history = trim_history(history, limits);

            auto response = complete(
                *backends.refine, render_refine(task.refine_template, instance.input, history));
            IterationRecord next;
            next.index = t + 1;
            next.candidate = candidate_from_reply(response.text, task);
            next.usage = response.usage;
            next.latency_ms = response.latency_ms;
            trace.records.push_back(std::move(next));
        }
    } catch (const Error& e) {
        trace.termination = Termination::Error;
        trace.error = e.what();
    }

    if (!trace.records.empty()) {
        trace.selected_index = select_best(trace, task.exclude_initial_from_selection);
    }
    trace.elapsed_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                           std::chrono::steady_clock::now() - wall_start)
                           .count();
    return trace;
}

} // namespace selfrefine
