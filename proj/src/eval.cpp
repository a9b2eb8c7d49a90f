#include "selfrefine/eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "selfrefine/error.hpp"

namespace selfrefine {

Interval wilson_interval_mean(double mean, long trials, double z) {
    if (trials <= 0) throw domain_error("wilson interval needs at least one trial");
    if (z <= 0.0) throw domain_error("wilson interval needs z > 0");
    if (mean < 0.0 || mean > 1.0) throw domain_error("proportion outside [0,1]");
    double n = static_cast<double>(trials);
    double denom = 1.0 + z * z / n;
    double center = (mean + z * z / (2.0 * n)) / denom;
    double half = z * std::sqrt(mean * (1.0 - mean) / n + z * z / (4.0 * n * n)) / denom;
    Interval interval;
    interval.low = std::max(0.0, center - half);
    interval.high = std::min(1.0, center + half);
    // center-half and center+half are algebraically 0 and 1 at the
    // boundaries; pin them so rounding noise cannot leak through.
    if (mean == 0.0) interval.low = 0.0;
    if (mean == 1.0) interval.high = 1.0;
    return interval;
}

Interval wilson_interval(long successes, long trials, double z) {
    if (trials <= 0) throw domain_error("wilson interval needs at least one trial");
    if (successes < 0 || successes > trials) {
        throw domain_error("successes must lie in [0, trials]");
    }
    return wilson_interval_mean(static_cast<double>(successes) / static_cast<double>(trials),
                                trials, z);
}

namespace {

std::string replace_slot(std::string text, const std::string& slot, const std::string& value,
                         const std::string& where) {
    std::string needle = "{" + slot + "}";
    std::size_t pos = text.find(needle);
    if (pos == std::string::npos) {
        throw template_error(where + " template has no {" + slot + "} slot");
    }
    while (pos != std::string::npos) {
        text.replace(pos, needle.size(), value);
        pos = text.find(needle, pos + value.size());
    }
    return text;
}

struct JudgeSlots {
    const char* context;
    const char* a;
    const char* b;
};

JudgeSlots judge_slots(const TaskSpec& task) {
    switch (task.judge_kind) {
        case JudgeKind::Sentiment: return {"target_sentiment", "review_a", "review_b"};
        case JudgeKind::Acronym: return {"title", "acronym_a", "acronym_b"};
        case JudgeKind::Dialogue: return {"context", "response_a", "response_b"};
        case JudgeKind::None: break;
    }
    throw config_error("task '" + task.id + "' has no pairwise judge");
}

} // namespace

std::string render_judge_prompt(const TaskSpec& task, const std::string& context,
                                const std::string& a, const std::string& b) {
    if (task.evaluator_template.empty()) {
        throw config_error("task '" + task.id + "' has no evaluator template");
    }
    JudgeSlots slots = judge_slots(task);
    std::string prompt = task.evaluator_template;
    prompt = replace_slot(std::move(prompt), slots.context, context, "judge");
    prompt = replace_slot(std::move(prompt), slots.a, a, "judge");
    prompt = replace_slot(std::move(prompt), slots.b, b, "judge");
    return prompt;
}

VerdictParse judge_once(Backend& evaluator, const TaskSpec& task, const std::string& context,
                        const std::string& a, const std::string& b, bool swap,
                        ResponseCache* cache) {
    CompletionRequest request;
    request.prompt = swap ? render_judge_prompt(task, context, b, a)
                          : render_judge_prompt(task, context, a, b);
    CompletionResponse response = cached_complete(cache, evaluator, request);
    VerdictParse parsed = parse_preference_verdict(response.text, task.judge_labels);
    if (swap) {
        if (parsed.verdict == Verdict::A) parsed.verdict = Verdict::B;
        else if (parsed.verdict == Verdict::B) parsed.verdict = Verdict::A;
    }
    return parsed;
}

Verdict swap_average(Verdict forward, Verdict reversed) {
    if (forward == reversed) return forward;
    if (forward == Verdict::Neither || reversed == Verdict::Neither) return Verdict::Neither;
    return Verdict::Both;
}

PreferenceResult ab_preference(Backend& evaluator, const TaskSpec& task,
                               const std::string& context, const std::string& a,
                               const std::string& b, ResponseCache* cache) {
    VerdictParse forward = judge_once(evaluator, task, context, a, b, false, cache);
    VerdictParse reversed = judge_once(evaluator, task, context, a, b, true, cache);
    PreferenceResult result;
    result.forward = forward.verdict;
    result.reversed = reversed.verdict;
    result.unparseable = forward.unparseable || reversed.unparseable;
    result.verdict = swap_average(forward.verdict, reversed.verdict);
    return result;
}

bool one_vs_k(Backend& evaluator, const TaskSpec& task, const std::string& context,
              const std::string& refined, const std::vector<std::string>& samples,
              ResponseCache* cache) {
    if (samples.empty()) throw invalid_argument_error("one_vs_k needs at least one sample");
    for (const auto& sample : samples) {
        PreferenceResult result = ab_preference(evaluator, task, context, refined, sample, cache);
        if (result.verdict != Verdict::A) return false;
    }
    return true;
}

AbSummary summarize_preferences(const std::vector<PreferenceResult>& results) {
    AbSummary summary;
    summary.n = static_cast<long>(results.size());
    for (const auto& result : results) {
        switch (result.verdict) {
            case Verdict::A: ++summary.a_wins; break;
            case Verdict::B: ++summary.b_wins; break;
            case Verdict::Both: ++summary.both; break;
            case Verdict::Neither: ++summary.neither; break;
        }
    }
    return summary;
}

std::optional<double> record_score(const TaskSpec& task, const Trace& trace,
                                   const IterationRecord& record) {
    switch (task.metric) {
        case Metric::Coverage: {
            auto concepts = parse_concept_list(trace.input);
            if (concepts.empty()) return std::nullopt;
            return coverage(concepts, record.candidate);
        }
        case Metric::RubricTotal: {
            if (!record.parsed_feedback) return std::nullopt;
            auto total = record.parsed_feedback->effective_total();
            if (!total) return std::nullopt;
            return static_cast<double>(*total);
        }
        case Metric::ReadabilityHeuristics:
            return readability_metrics(record.candidate).comments_per_line;
        case Metric::PreferenceOnly:
        case Metric::ExternalSolveRate:
        case Metric::ExternalOptRate:
            return std::nullopt;
    }
    return std::nullopt;
}

std::optional<double> normalized_record_score(const TaskSpec& task, const Trace& trace,
                                              const IterationRecord& record) {
    auto raw = record_score(task, trace, record);
    if (!raw) return std::nullopt;
    double value = *raw;
    if (task.metric == Metric::RubricTotal) {
        value /= static_cast<double>(task.rubric->total_max());
    }
    return std::clamp(value, 0.0, 1.0);
}

IterationDeltas iteration_deltas(const std::vector<Trace>& traces, const RecordScorer& scorer) {
    for (const auto& trace : traces) {
        if (trace.task_id != traces.front().task_id) {
            throw invalid_argument_error("iteration deltas need traces from one task");
        }
    }
    std::size_t longest = 0;
    for (const auto& trace : traces) longest = std::max(longest, trace.records.size());

    IterationDeltas result;
    for (std::size_t t = 0; t < longest; ++t) {
        double sum = 0.0;
        long count = 0;
        for (const auto& trace : traces) {
            if (trace.records.size() <= t) continue;
            if (auto score = scorer(trace, trace.records[t])) {
                sum += *score;
                ++count;
            }
        }
        if (count == 0) break;   // nothing scorable this deep; stop the table here
        result.means.push_back(sum / static_cast<double>(count));
        result.counts.push_back(count);
    }
    for (std::size_t t = 0; t + 1 < result.means.size(); ++t) {
        result.deltas.push_back(result.means[t + 1] - result.means[t]);
    }
    return result;
}

std::vector<ReportRow> build_report(const TaskRegistry& registry,
                                    const std::vector<Trace>& traces, double z) {
    struct Accumulator {
        double base_sum = 0.0;
        double refined_sum = 0.0;
        long n = 0;
    };
    std::map<std::string, Accumulator> by_task;
    for (const auto& trace : traces) {
        if (!registry.has(trace.task_id)) {
            throw config_error("trace references unknown task '" + trace.task_id + "'");
        }
        const TaskSpec& task = registry.get(trace.task_id);
        if (trace.records.empty() || !trace.selected_index) continue;
        auto base = normalized_record_score(task, trace, trace.records.front());
        auto refined = normalized_record_score(task, trace, trace.records[*trace.selected_index]);
        if (!base || !refined) continue;
        auto& acc = by_task[trace.task_id];
        acc.base_sum += *base;
        acc.refined_sum += *refined;
        ++acc.n;
    }

    std::vector<ReportRow> rows;
    for (const auto& [task_id, acc] : by_task) {
        if (acc.n == 0) continue;
        for (bool refined : {false, true}) {
            ReportRow row;
            row.task = task_id;
            row.condition = refined ? "+SelfRefine" : "Base";
            row.n = acc.n;
            double sum = refined ? acc.refined_sum : acc.base_sum;
            row.rate = sum / static_cast<double>(acc.n);
            row.successes = std::lround(sum);
            Interval interval = wilson_interval_mean(row.rate, acc.n, z);
            row.ci_low = interval.low;
            row.ci_high = interval.high;
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

} // namespace selfrefine
