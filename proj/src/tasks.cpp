#include "selfrefine/tasks.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "selfrefine/error.hpp"

namespace selfrefine {

namespace {

using nlohmann::json;

std::string read_text_file(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw io_error("cannot read prompt asset " + file.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    std::string text = buffer.str();
    while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();
    return text;
}

std::string replace_all(std::string text, const std::string& from, const std::string& to) {
    std::size_t pos = 0;
    while ((pos = text.find(from, pos)) != std::string::npos) {
        text.replace(pos, from.size(), to);
        pos += to.size();
    }
    return text;
}

Rubric acronym_rubric() {
    return Rubric{{
        {"Ease of pronunciation", 5},
        {"Ease of spelling", 5},
        {"Relation to title", 5},
        {"Positive connotation", 5},
        {"Well-known", 5},
    }};
}

Rubric dialogue_rubric() {
    return Rubric{{
        {"Relevant", 3},
        {"Informative", 3},
        {"Interesting", 3},
        {"Consistent", 3},
        {"Helpful", 3},
        {"Engaging", 3},
        {"Specific", 3},
        {"Safe", 3},
        {"User understanding", 3},
        {"Fluent", 3},
    }};
}

} // namespace

const char* metric_name(Metric metric) {
    switch (metric) {
        case Metric::Coverage: return "coverage";
        case Metric::RubricTotal: return "rubric_total";
        case Metric::PreferenceOnly: return "preference_only";
        case Metric::ExternalSolveRate: return "external_solve_rate";
        case Metric::ExternalOptRate: return "external_opt_rate";
        case Metric::ReadabilityHeuristics: return "readability_heuristics";
    }
    return "unknown";
}

void TaskSpec::validate() const {
    if (id.empty()) throw config_error("task has no id");
    bool needs_rubric = metric == Metric::RubricTotal;
    if (needs_rubric && !rubric) {
        throw config_error("task '" + id + "' scores by rubric but has none");
    }
    if (!needs_rubric && rubric) {
        throw config_error("task '" + id + "' has a rubric its metric never uses");
    }
    if (rubric) rubric->validate();
    if (stop_policy.max_iterations < 0) {
        throw config_error("task '" + id + "' has a negative iteration budget");
    }
    if (answer_rule == AnswerRule::AfterLastMarker && answer_marker.empty()) {
        throw config_error("task '" + id + "' extracts by marker but no marker is set");
    }
}

const std::vector<std::string>& TaskRegistry::task_ids() {
    static const std::vector<std::string> ids = {
        "sentiment_reversal", "dialogue_response", "code_optimization", "code_readability",
        "math_reasoning",     "acronym_generation", "constrained_generation",
    };
    return ids;
}

TaskRegistry::TaskRegistry(std::filesystem::path prompt_dir) : prompt_dir_(std::move(prompt_dir)) {
    auto asset = [&](const std::string& task, const char* role) {
        return read_text_file(prompt_dir_ / task / (std::string(role) + ".txt"));
    };
    auto judge_asset = [&](TaskSpec& t) { t.evaluator_template = asset(t.id, "evaluator"); };

    {
        TaskSpec t;
        t.id = "sentiment_reversal";
        t.display_name = "Sentiment Reversal";
        t.metric = Metric::PreferenceOnly;
        t.judge_kind = JudgeKind::Sentiment;
        t.judge_labels = {"Review A", "Review B"};
        judge_asset(t);
        t.answer_rule = AnswerRule::AfterLastMarker;
        t.answer_marker = "The rewrite is:";
        t.stop_policy.max_iterations = 4;
        t.stop_policy.stop_phrases = {"no further changes are needed", "everything looks good"};

        t.init_template.role = Role::Init;
        t.init_template.preamble = asset(t.id, "init");
        t.init_template.separator = "\n\n";
        t.init_template.suffix = "Answer:";

        t.feedback_template.role = Role::Feedback;
        t.feedback_template.preamble = asset(t.id, "feedback");
        t.feedback_template.separator = "\n\n";
        t.feedback_template.output_format = "{output}";
        t.feedback_template.suffix = "Why is this review not the desired sentiment?\n\nFeedback:";

        t.refine_template.role = Role::Refine;
        t.refine_template.preamble = asset(t.id, "refine");
        t.refine_template.separator = "\n\n";
        t.refine_template.feedback_format = "Feedback: {feedback}";
        t.refine_template.transition =
            "Okay, let's try again. Rewrite this review using the feedback above.";
        tasks_[t.id] = t;
    }

    {
        TaskSpec t;
        t.id = "dialogue_response";
        t.display_name = "Dialogue Response Generation";
        t.metric = Metric::RubricTotal;
        t.rubric = dialogue_rubric();
        t.judge_kind = JudgeKind::Dialogue;
        t.judge_labels = {"Response A", "Response B"};
        judge_asset(t);
        t.exclude_initial_from_selection = true;
        t.answer_rule = AnswerRule::AfterLastMarker;
        t.answer_marker = "Response:";
        t.stop_policy.max_iterations = 3;
        t.stop_policy.stop_phrases = default_stop_phrases();
        t.stop_policy.min_total_score = t.rubric->total_max();

        t.init_template.role = Role::Init;
        t.init_template.preamble = asset(t.id, "init");
        t.init_template.input_format = "Conversation history:\n{input}";

        t.feedback_template.role = Role::Feedback;
        t.feedback_template.preamble = asset(t.id, "feedback");
        t.feedback_template.separator = "\n";
        t.feedback_template.input_format = "Conversation history:\n{input}";
        t.feedback_template.output_format = "Response: {output}";
        t.feedback_template.suffix = "Scores:";

        t.refine_template.role = Role::Refine;
        t.refine_template.preamble = asset(t.id, "refine");
        t.refine_template.separator = "\n\n";
        t.refine_template.input_format = "Conversation history:\n{input}";
        t.refine_template.output_format = "Response: {output}";
        t.refine_template.feedback_format = "Scores:\n{feedback}";
        t.refine_template.transition = "Okay, let's use this feedback to improve the response.";
        tasks_[t.id] = t;
    }

    {
        TaskSpec t;
        t.id = "code_optimization";
        t.display_name = "Code Optimization";
        t.metric = Metric::ExternalOptRate;
        t.generic_feedback = "Improve the efficiency of the code.";
        t.stop_policy.max_iterations = 4;
        t.stop_policy.stop_phrases = default_stop_phrases();

        t.init_template.role = Role::Init;
        t.init_template.preamble = asset(t.id, "init");
        t.init_template.separator = "\n\n\n";
        t.init_template.input_format =
            "# slower version:\n\n{input}\n\n\n# optimized version of the same code:";

        t.feedback_template.role = Role::Feedback;
        t.feedback_template.preamble = asset(t.id, "feedback");
        t.feedback_template.separator = "\n\n\n";
        t.feedback_template.include_input = false;
        t.feedback_template.suffix = "# Why is this code slow?";

        t.refine_template.role = Role::Refine;
        t.refine_template.preamble = asset(t.id, "refine");
        t.refine_template.separator = "\n\n\n";
        t.refine_template.include_input = false;
        t.refine_template.feedback_format = "# Why is this code slow?\n\n{feedback}";
        t.refine_template.transition = "# Improved version:";
        tasks_[t.id] = t;
    }

    {
        TaskSpec t;
        t.id = "code_readability";
        t.display_name = "Code Readability Improvement";
        t.metric = Metric::ReadabilityHeuristics;
        t.identity_init = true;
        t.history_limits.window = 1;   // critique and fix always target the latest code only
        t.stop_policy.max_iterations = 5;
        t.stop_policy.stop_phrases = default_stop_phrases();

        t.init_template.role = Role::Init;   // unused: identity_init

        t.feedback_template.role = Role::Feedback;
        t.feedback_template.master =
            replace_all(asset(t.id, "feedback"), "{code}", "{output}");

        t.refine_template.role = Role::Refine;
        t.refine_template.master = replace_all(
            replace_all(asset(t.id, "refine"), "{code}", "{output}"), "{suggestion}", "{feedback}");
        tasks_[t.id] = t;
    }

    {
        TaskSpec t;
        t.id = "math_reasoning";
        t.display_name = "Math Reasoning";
        t.metric = Metric::ExternalSolveRate;
        t.answer_rule = AnswerRule::PythonBlock;
        t.dataset_field = "question";
        t.stop_policy.max_iterations = 4;
        t.stop_policy.stop_phrases = {"everything looks good"};
        t.stop_policy.use_oracle = true;

        t.init_template.role = Role::Init;
        t.init_template.preamble = asset(t.id, "init");
        t.init_template.separator = "\n\n\n";
        t.init_template.input_format = "# Q: {input}\n# solution using Python:";

        t.feedback_template.role = Role::Feedback;
        t.feedback_template.preamble = asset(t.id, "feedback");
        t.feedback_template.separator = "\n\n\n";
        t.feedback_template.include_input = false;
        t.feedback_template.suffix =
            "# There is an error in the code above because of lack of understanding of the "
            "question. What is the error? To find the error, go through semantically complete "
            "blocks of the code, and check if everything looks good.\n\n"
            "# Let us go through the error and check step-by-step";

        t.refine_template.role = Role::Refine;
        t.refine_template.preamble = asset(t.id, "refine");
        t.refine_template.separator = "\n\n\n";
        t.refine_template.include_input = false;
        t.refine_template.feedback_format =
            "# There is an error in the code above because of lack of understanding of the "
            "question. What is the error? To find the error, go through semantically complete "
            "blocks of the code, and check if everything looks good.\n\n{feedback}";
        t.refine_template.transition = "Okay! Here is the rewrite:";
        tasks_[t.id] = t;
    }

    {
        TaskSpec t;
        t.id = "acronym_generation";
        t.display_name = "Acronym Generation";
        t.metric = Metric::RubricTotal;
        t.rubric = acronym_rubric();
        t.judge_kind = JudgeKind::Acronym;
        judge_asset(t);
        t.answer_rule = AnswerRule::AfterLastMarker;
        t.answer_marker = "Acronym:";
        t.dataset_format = "csv";
        t.dataset_field = "title";
        t.stop_policy.max_iterations = 4;
        t.stop_policy.stop_phrases = default_stop_phrases();
        t.stop_policy.min_total_score = t.rubric->total_max();

        t.init_template.role = Role::Init;
        t.init_template.preamble = asset(t.id, "init");
        t.init_template.separator = "\n\n";
        t.init_template.input_format = "Title: {input}";

        t.feedback_template.role = Role::Feedback;
        t.feedback_template.preamble = asset(t.id, "feedback");
        t.feedback_template.separator = "\n\n";
        t.feedback_template.input_format = "Title: {input}";
        t.feedback_template.output_format = "Acronym: {output}";
        t.feedback_template.suffix = "Scores:";

        t.refine_template.role = Role::Refine;
        t.refine_template.preamble = asset(t.id, "refine");
        t.refine_template.separator = "\n\n";
        t.refine_template.input_format = "Title: {input}";
        t.refine_template.output_format = "Acronym: {output}";
        t.refine_template.feedback_format = "Scores:\n\n{feedback}";
        t.refine_template.transition = "Okay, let's use this feedback to improve the acronym.";
        tasks_[t.id] = t;
    }

    {
        TaskSpec t;
        t.id = "constrained_generation";
        t.display_name = "Constrained Generation";
        t.metric = Metric::Coverage;
        t.answer_rule = AnswerRule::AfterLastMarker;
        t.answer_marker = "Sentence:";
        t.dataset_field = "concepts";
        t.stop_policy.max_iterations = 4;
        t.stop_policy.stop_phrases = default_stop_phrases();

        t.init_template.role = Role::Init;
        t.init_template.preamble = asset(t.id, "init");
        t.init_template.separator = "\n\n";
        t.init_template.input_format = "Concepts: {input}";

        t.feedback_template.role = Role::Feedback;
        t.feedback_template.preamble = asset(t.id, "feedback");
        t.feedback_template.separator = "\n\n";
        t.feedback_template.input_format = "Concepts: {input}";
        t.feedback_template.output_format = "Sentence: {output}";
        t.feedback_template.suffix =
            "what concepts from the concept list are missing from the sentence and does the "
            "sentence make sense?";

        t.refine_template.role = Role::Refine;
        t.refine_template.preamble = asset(t.id, "refine");
        t.refine_template.separator = "\n\n";
        t.refine_template.input_format = "Concepts: {input}";
        t.refine_template.output_format = "Sentence: {output}";
        t.refine_template.feedback_format =
            "what concepts from the concept list are missing from the sentence and does the "
            "sentence make sense?\n\n{feedback}";
        t.refine_template.transition = "Okay, impove the sentence using the feedback:";
        tasks_[t.id] = t;
    }

    for (auto& [id, task] : tasks_) task.validate();
}

const TaskSpec& TaskRegistry::get(const std::string& id) const {
    auto it = tasks_.find(id);
    if (it == tasks_.end()) {
        throw config_error("unknown task '" + id + "'");
    }
    return it->second;
}

namespace {

// Minimal CSV reader: header row, quoted fields with embedded commas and
// doubled quotes.
std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool quoted = false;
    auto end_field = [&]() {
        row.push_back(field);
        field.clear();
    };
    auto end_row = [&]() {
        end_field();
        bool all_empty = true;
        for (const auto& f : row) {
            if (!f.empty()) {
                all_empty = false;
                break;
            }
        }
        if (!all_empty) rows.push_back(row);
        row.clear();
    };
    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            end_field();
        } else if (c == '\n') {
            if (!field.empty() && field.back() == '\r') field.pop_back();
            end_row();
        } else {
            field.push_back(c);
        }
    }
    if (!field.empty() || !row.empty()) end_row();
    return rows;
}

std::string lower_copy(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

} // namespace

std::vector<Instance> load_dataset(const TaskSpec& task, const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw io_error("cannot open dataset " + file.string());
    std::vector<Instance> instances;

    if (task.dataset_format == "csv") {
        std::stringstream buffer;
        buffer << in.rdbuf();
        auto rows = parse_csv(buffer.str());
        if (rows.empty()) throw config_error("dataset " + file.string() + " is empty");
        std::size_t column = rows[0].size();
        for (std::size_t i = 0; i < rows[0].size(); ++i) {
            if (lower_copy(rows[0][i]) == lower_copy(task.dataset_field)) {
                column = i;
                break;
            }
        }
        if (column == rows[0].size()) {
            throw config_error("dataset " + file.string() + " has no '" + task.dataset_field +
                               "' column");
        }
        for (std::size_t r = 1; r < rows.size(); ++r) {
            if (column >= rows[r].size()) {
                throw parse_error(file.string() + " line " + std::to_string(r + 1) +
                                  ": row is too short");
            }
            Instance instance;
            instance.id = std::to_string(instances.size());
            instance.input = rows[r][column];
            instances.push_back(std::move(instance));
        }
        return instances;
    }

    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json doc = json::parse(line, nullptr, false);
        if (doc.is_discarded() || !doc.is_object()) {
            throw parse_error(file.string() + " line " + std::to_string(line_no) +
                              ": not a JSON object");
        }
        Instance instance;
        instance.id = doc.value("id", std::to_string(instances.size()));

        if (task.id == "constrained_generation") {
            if (!doc.contains("concepts") || !doc["concepts"].is_array()) {
                throw parse_error(file.string() + " line " + std::to_string(line_no) +
                                  ": expected a 'concepts' array");
            }
            for (const auto& c : doc["concepts"]) {
                if (!c.is_string()) {
                    throw parse_error(file.string() + " line " + std::to_string(line_no) +
                                      ": concepts must be strings");
                }
                std::string item = lower_copy(c.get<std::string>());
                if (std::find(instance.concepts.begin(), instance.concepts.end(), item) ==
                    instance.concepts.end()) {
                    instance.concepts.push_back(item);
                }
            }
            if (instance.concepts.empty()) {
                throw parse_error(file.string() + " line " + std::to_string(line_no) +
                                  ": concept list is empty");
            }
            instance.input = render_concept_list(instance.concepts);
        } else if (task.id == "math_reasoning") {
            if (!doc.contains("question") || !doc["question"].is_string()) {
                throw parse_error(file.string() + " line " + std::to_string(line_no) +
                                  ": expected a 'question' string");
            }
            instance.input = doc["question"].get<std::string>();
            if (doc.contains("answer")) {
                instance.gold_answer = doc["answer"].is_string()
                                           ? doc["answer"].get<std::string>()
                                           : doc["answer"].dump();
            }
        } else {
            if (!doc.contains(task.dataset_field) || !doc[task.dataset_field].is_string()) {
                throw parse_error(file.string() + " line " + std::to_string(line_no) +
                                  ": expected a '" + task.dataset_field + "' string");
            }
            instance.input = doc[task.dataset_field].get<std::string>();
        }
        instances.push_back(std::move(instance));
    }
    if (instances.empty()) throw config_error("dataset " + file.string() + " is empty");
    return instances;
}

} // namespace selfrefine
