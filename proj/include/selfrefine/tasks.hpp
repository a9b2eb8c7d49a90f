#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "selfrefine/engine.hpp"
#include "selfrefine/feedback.hpp"
#include "selfrefine/prompting.hpp"

namespace selfrefine {

enum class Metric {
    Coverage,
    RubricTotal,
    PreferenceOnly,
    ExternalSolveRate,
    ExternalOptRate,
    ReadabilityHeuristics,
};

const char* metric_name(Metric metric);

enum class AnswerRule { WholeText, AfterLastMarker, PythonBlock };

// Which pairwise judge template applies to a task's outputs.
enum class JudgeKind { None, Sentiment, Acronym, Dialogue };

struct TaskSpec {
    std::string id;
    std::string display_name;
    Metric metric = Metric::PreferenceOnly;

    PromptTemplate init_template;
    PromptTemplate feedback_template;
    PromptTemplate refine_template;
    std::optional<Rubric> rubric;        // present exactly for RubricTotal tasks
    StopPolicy stop_policy;

    bool exclude_initial_from_selection = false;
    bool identity_init = false;          // y_0 = input; no generation call
    HistoryLimits history_limits;

    AnswerRule answer_rule = AnswerRule::WholeText;
    std::string answer_marker;

    std::string generic_feedback = "Improve the output.";

    JudgeKind judge_kind = JudgeKind::None;
    std::pair<std::string, std::string> judge_labels = {"A", "B"};
    std::string evaluator_template;   // pairwise judge prompt with {…_a}/{…_b} slots

    std::string dataset_format = "jsonl";   // "jsonl" | "csv"
    std::string dataset_field = "input";    // jsonl key / csv column

    void validate() const;
};

// One dataset row, normalized across formats.
struct Instance {
    std::string id;
    std::string input;
    std::vector<std::string> concepts;   // constrained generation only
    std::string gold_answer;             // math only
};

std::vector<Instance> load_dataset(const TaskSpec& task, const std::filesystem::path& file);

// The seven built-in tasks, with prompt bodies loaded from one text file per
// (task, role) under prompt_dir/<task_id>/<role>.txt.
class TaskRegistry {
public:
    explicit TaskRegistry(std::filesystem::path prompt_dir);

    static const std::vector<std::string>& task_ids();
    bool has(const std::string& id) const { return tasks_.count(id) > 0; }
    const TaskSpec& get(const std::string& id) const;
    const std::filesystem::path& prompt_dir() const { return prompt_dir_; }

private:
    std::filesystem::path prompt_dir_;
    std::map<std::string, TaskSpec> tasks_;
};

// --- metric primitives ---

// Lightweight fixed stemmer: strips one plural/verb suffix (es, s, ing, ed)
// then a trailing 'e', so create/creating, ride/rides, horse/horses collide.
std::string stem(std::string_view word);

// Lowercased alphanumeric runs.
std::vector<std::string> tokenize(std::string_view text);

// Fraction of concepts whose stem equals the stem of some sentence token.
// Monotone in the sentence's token set; order-invariant.
double coverage(const std::vector<std::string>& concepts, const std::string& sentence);

struct ReadabilityMetrics {
    double comments_per_line = 0.0;   // comment pieces / non-blank lines
    int function_units = 0;           // 'def' definitions
    int non_blank_lines = 0;
    int comment_count = 0;
};

ReadabilityMetrics readability_metrics(const std::string& source);

std::string extract_final_answer(const std::string& text, const TaskSpec& task);

// Numeric comparison after normalization (commas, currency signs, trailing
// zeros); falls back to case-insensitive string equality.
bool answers_match(const std::string& produced, const std::string& gold);

// Recovers a concept list from its rendered bracket form, e.g.
// "['create', 'ferry']" -> {create, ferry}.
std::vector<std::string> parse_concept_list(const std::string& text);

// Bracket form used when rendering concepts into prompts.
std::string render_concept_list(const std::vector<std::string>& concepts);

// External correctness hook (math oracle mode): judges a candidate for an
// input. Supplied by the embedding program; the engine never reads labels.
using OraclePredicate = std::function<bool(const Instance&, const std::string& candidate)>;

} // namespace selfrefine
