#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "selfrefine/backends.hpp"
#include "selfrefine/feedback.hpp"

namespace selfrefine {

enum class Termination { StopSignal, BudgetExhausted, OracleCorrect, Error };

const char* termination_name(Termination t);
Termination termination_from_name(const std::string& name);

struct StopPolicy {
    int max_iterations = 4;
    std::vector<std::string> stop_phrases;
    std::optional<int> min_total_score;   // stop once the parsed total reaches this
    bool use_oracle = false;              // consult the external correctness hook
};

// One loop step. Outside the no-feedback ablation, raw_feedback is absent
// only on a final record cut off by the iteration budget before its feedback
// call; parsed_feedback is absent when the critique carried no scores, no
// total and no stop phrase.
struct IterationRecord {
    int index = 0;
    std::string candidate;
    std::optional<std::string> raw_feedback;
    std::optional<FeedbackReport> parsed_feedback;
    TokenUsage usage;
    long latency_ms = 0;
};

struct Trace {
    std::string task_id;
    std::string input;
    std::vector<IterationRecord> records;
    Termination termination = Termination::Error;
    std::optional<std::size_t> selected_index;   // absent only when records are empty
    std::string config_fingerprint;
    std::string error;          // diagnostic, only when termination == Error
    TokenUsage usage;           // totals across all calls
    long total_calls = 0;
    long elapsed_ms = 0;
    std::string started_at;     // wall clock, excluded from determinism comparisons
};

// t counts completed feedback rounds. Stops when one more round would exceed
// the budget, when the critique contains a stop phrase, when its score meets
// min_total_score, or when the oracle already judged the candidate correct.
bool should_stop(const std::optional<FeedbackReport>& parsed, std::string_view raw_feedback,
                 int t, const StopPolicy& policy, bool oracle_correct = false);

// Same predicate, but reports which clause fired (oracle wins over the
// others for classification; budget is checked before phrase/score).
std::optional<Termination> stop_classification(const std::optional<FeedbackReport>& parsed,
                                               std::string_view raw_feedback, int t,
                                               const StopPolicy& policy, bool oracle_correct);

// Earliest record with the maximum effective total among scored records;
// falls back to the last record when nothing is scored. exclude_initial
// removes record 0 from score-based consideration.
std::size_t select_best(const Trace& trace, bool exclude_initial = false);

} // namespace selfrefine
