#pragma once

#include <optional>
#include <string>
#include <vector>

namespace selfrefine {

enum class Role { Init, Feedback, Refine, Evaluator };

const char* role_name(Role role);

// One few-shot demonstration. feedback is required by Feedback/Refine templates,
// refined only by Refine templates.
struct Exemplar {
    std::string input;
    std::string output;
    std::optional<std::string> feedback;
    std::optional<std::string> refined;
};

// A prompt is a list of segments joined by `separator`: preamble (if any),
// one segment per exemplar, the query blocks for the role, then `suffix`
// (if any). Block formats use the slots {input}, {output}, {feedback};
// a slot that cannot be resolved for the role raises TemplateError.
struct PromptTemplate {
    Role role = Role::Init;
    std::string preamble;
    std::vector<Exemplar> exemplars;
    std::string separator = "\n\n###\n\n";
    std::string exemplar_joiner = "\n\n";
    std::string input_format = "{input}";
    std::string output_format = "{output}";
    std::string feedback_format = "{feedback}";
    std::string refined_format;   // empty => output_format
    std::string transition;       // placed after each feedback block in refine prompts
    std::string suffix;           // trailing cue segment, e.g. a question for the critic
    bool include_input = true;    // false for tasks whose candidate subsumes the input

    // Instruction-style alternative: when non-empty, the whole prompt is this
    // text with slots substituted ({input}, {output}, {feedback}; refine uses
    // the most recent history entry). The segment fields above are ignored.
    std::string master;
};

// One loop step as seen by the refine prompt. feedback is absent when the
// run was configured to refine without feedback.
struct HistoryEntry {
    std::string candidate;
    std::optional<std::string> feedback;
};

// 0 means unlimited. window keeps only the most recent N entries (window=1
// reproduces latest-pair-only refinement); char_budget drops oldest entries
// until the history text fits, but never drops the most recent entry.
struct HistoryLimits {
    std::size_t window = 0;
    std::size_t char_budget = 0;
};

std::string render_initial(const PromptTemplate& tmpl, const std::string& input);
std::string render_feedback(const PromptTemplate& tmpl, const std::string& input,
                            const std::string& candidate);
std::string render_refine(const PromptTemplate& tmpl, const std::string& input,
                          const std::vector<HistoryEntry>& history);

std::vector<HistoryEntry> trim_history(const std::vector<HistoryEntry>& history,
                                       const HistoryLimits& limits);

} // namespace selfrefine
