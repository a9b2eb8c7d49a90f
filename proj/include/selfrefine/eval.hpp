#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "selfrefine/backends.hpp"
#include "selfrefine/cache.hpp"
#include "selfrefine/engine.hpp"
#include "selfrefine/feedback.hpp"
#include "selfrefine/tasks.hpp"

namespace selfrefine {

struct Interval {
    double low = 0.0;
    double high = 0.0;
};

// Wilson score interval for a binomial proportion, clamped to [0,1]; exact
// 0/1 endpoints at the zero- and all-success boundaries.
Interval wilson_interval(long successes, long trials, double z);

// Same center/width formula with a real-valued proportion, for rates that
// are means of fractional per-instance scores.
Interval wilson_interval_mean(double mean, long trials, double z);

// Both orderings of one candidate pair, reduced to a single verdict in the
// caller's (a, b) frame.
struct PreferenceResult {
    Verdict verdict = Verdict::Neither;
    Verdict forward = Verdict::Neither;    // judged as (a, b)
    Verdict reversed = Verdict::Neither;   // judged as (b, a), frame-corrected
    bool unparseable = false;              // either reply failed to parse
};

std::string render_judge_prompt(const TaskSpec& task, const std::string& context,
                                const std::string& a, const std::string& b);

// One judgment. swap presents (b, a) and frame-corrects the parsed verdict,
// so the result always speaks in the caller's frame.
VerdictParse judge_once(Backend& evaluator, const TaskSpec& task, const std::string& context,
                        const std::string& a, const std::string& b, bool swap,
                        ResponseCache* cache = nullptr);

// Order-mixing rule: unanimity wins, any Neither poisons the pair, every
// other disagreement collapses to Both. Identical candidates can never come
// out with a strict winner.
Verdict swap_average(Verdict forward, Verdict reversed);

PreferenceResult ab_preference(Backend& evaluator, const TaskSpec& task,
                               const std::string& context, const std::string& a,
                               const std::string& b, ResponseCache* cache = nullptr);

// True iff `refined` is strictly preferred over every sample (Both and
// Neither both count against it). Issues 2k judgments.
bool one_vs_k(Backend& evaluator, const TaskSpec& task, const std::string& context,
              const std::string& refined, const std::vector<std::string>& samples,
              ResponseCache* cache = nullptr);

struct AbSummary {
    long n = 0;
    long a_wins = 0;
    long b_wins = 0;
    long both = 0;
    long neither = 0;
};

AbSummary summarize_preferences(const std::vector<PreferenceResult>& results);

// Intrinsic per-record score in the task's native unit (coverage fraction,
// rubric total, comment density); absent when the record carries no score.
std::optional<double> record_score(const TaskSpec& task, const Trace& trace,
                                   const IterationRecord& record);

// Same, squeezed into [0,1] for success-rate style reporting.
std::optional<double> normalized_record_score(const TaskSpec& task, const Trace& trace,
                                              const IterationRecord& record);

struct IterationDeltas {
    std::vector<double> means;    // mean score of y_t over traces reaching t
    std::vector<long> counts;     // traces contributing at each t
    std::vector<double> deltas;   // means[t+1] - means[t]
};

using RecordScorer = std::function<std::optional<double>(const Trace&, const IterationRecord&)>;

// Shorter traces drop out of later iterations; they are not forward-filled.
IterationDeltas iteration_deltas(const std::vector<Trace>& traces, const RecordScorer& scorer);

struct ReportRow {
    std::string task;
    std::string condition;   // "Base" | "+SelfRefine"
    long n = 0;
    long successes = 0;
    double rate = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
};

// Two rows per task present in the traces: the initial draft versus the
// selected record, scored by the task's own metric and wrapped in Wilson
// intervals at the given z.
std::vector<ReportRow> build_report(const TaskRegistry& registry,
                                    const std::vector<Trace>& traces, double z);

} // namespace selfrefine
