#include "selfrefine/engine.hpp"

#include "selfrefine/error.hpp"

namespace selfrefine {

const char* termination_name(Termination t) {
    switch (t) {
        case Termination::StopSignal: return "stop_signal";
        case Termination::BudgetExhausted: return "budget_exhausted";
        case Termination::OracleCorrect: return "oracle_correct";
        case Termination::Error: return "error";
    }
    return "error";
}

Termination termination_from_name(const std::string& name) {
    if (name == "stop_signal") return Termination::StopSignal;
    if (name == "budget_exhausted") return Termination::BudgetExhausted;
    if (name == "oracle_correct") return Termination::OracleCorrect;
    if (name == "error") return Termination::Error;
    throw parse_error("unknown termination '" + name + "'");
}

std::optional<Termination> stop_classification(const std::optional<FeedbackReport>& parsed,
                                               std::string_view raw_feedback, int t,
                                               const StopPolicy& policy, bool oracle_correct) {
    if (policy.use_oracle && oracle_correct) return Termination::OracleCorrect;
    if (t + 1 > policy.max_iterations) return Termination::BudgetExhausted;
    if (detect_stop_phrase(raw_feedback, policy.stop_phrases)) return Termination::StopSignal;
    if (policy.min_total_score && parsed) {
        auto total = parsed->effective_total();
        if (total && *total >= *policy.min_total_score) return Termination::StopSignal;
    }
    return std::nullopt;
}

bool should_stop(const std::optional<FeedbackReport>& parsed, std::string_view raw_feedback,
                 int t, const StopPolicy& policy, bool oracle_correct) {
    return stop_classification(parsed, raw_feedback, t, policy, oracle_correct).has_value();
}

std::size_t select_best(const Trace& trace, bool exclude_initial) {
    if (trace.records.empty()) {
        throw invalid_argument_error("select_best: trace has no records");
    }
    std::optional<std::size_t> best;
    std::optional<int> best_total;
    std::size_t first = exclude_initial ? 1 : 0;
    for (std::size_t i = first; i < trace.records.size(); ++i) {
        const auto& rec = trace.records[i];
        if (!rec.parsed_feedback) continue;
        auto total = rec.parsed_feedback->effective_total();
        if (!total) continue;
        if (!best_total || *total > *best_total) {
            best = i;
            best_total = total;
        }
    }
    return best ? *best : trace.records.size() - 1;
}

} // namespace selfrefine
