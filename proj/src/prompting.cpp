#include "selfrefine/prompting.hpp"

#include <map>

#include "selfrefine/error.hpp"

namespace selfrefine {

namespace {

// Replaces {slot} occurrences. Known slot names missing from `slots` raise
// TemplateError (this is how e.g. {output} inside an Init query gets caught);
// unknown names in braces are left untouched so prompt text may contain
// literal braces.
std::string format_block(const std::string& fmt, const std::map<std::string, const std::string*>& slots,
                         Role role) {
    static const char* known[] = {"input", "output", "feedback"};
    std::string out;
    out.reserve(fmt.size() + 64);
    std::size_t i = 0;
    while (i < fmt.size()) {
        if (fmt[i] == '{') {
            std::size_t close = fmt.find('}', i + 1);
            if (close != std::string::npos) {
                std::string name = fmt.substr(i + 1, close - i - 1);
                auto it = slots.find(name);
                if (it != slots.end() && it->second != nullptr) {
                    out += *it->second;
                    i = close + 1;
                    continue;
                }
                for (const char* k : known) {
                    if (name == k) {
                        throw template_error("slot {" + name + "} is not available for role " +
                                             role_name(role));
                    }
                }
            }
        }
        out.push_back(fmt[i]);
        ++i;
    }
    return out;
}

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i > 0) out += sep;
        out += parts[i];
    }
    return out;
}

std::string render_exemplar(const PromptTemplate& t, const Exemplar& ex) {
    std::vector<std::string> blocks;
    blocks.push_back(format_block(t.input_format, {{"input", &ex.input}}, t.role));
    blocks.push_back(format_block(t.output_format, {{"input", &ex.input}, {"output", &ex.output}}, t.role));
    if (t.role == Role::Feedback || t.role == Role::Refine) {
        if (!ex.feedback) {
            throw template_error(std::string("exemplar for role ") + role_name(t.role) +
                                 " is missing its feedback text");
        }
        blocks.push_back(format_block(t.feedback_format,
                                      {{"input", &ex.input}, {"output", &ex.output}, {"feedback", &*ex.feedback}},
                                      t.role));
    }
    if (t.role == Role::Refine) {
        if (!ex.refined) {
            throw template_error("refine exemplar is missing its refined output");
        }
        if (!t.transition.empty()) blocks.push_back(t.transition);
        const std::string& fmt = t.refined_format.empty() ? t.output_format : t.refined_format;
        blocks.push_back(format_block(fmt, {{"input", &ex.input}, {"output", &*ex.refined}}, t.role));
    }
    return join(blocks, t.exemplar_joiner);
}

// preamble (if non-empty), exemplars, query blocks, suffix (if non-empty),
// all joined by the template separator. Query blocks are kept even when
// empty so the prompt structure stays positional.
std::string assemble(const PromptTemplate& t, const std::vector<std::string>& query_blocks) {
    std::vector<std::string> segments;
    if (!t.preamble.empty()) segments.push_back(t.preamble);
    for (const auto& ex : t.exemplars) segments.push_back(render_exemplar(t, ex));
    for (const auto& q : query_blocks) segments.push_back(q);
    if (!t.suffix.empty()) segments.push_back(t.suffix);
    return join(segments, t.separator);
}

} // namespace

const char* role_name(Role role) {
    switch (role) {
        case Role::Init: return "init";
        case Role::Feedback: return "feedback";
        case Role::Refine: return "refine";
        case Role::Evaluator: return "evaluator";
    }
    return "unknown";
}

std::string render_initial(const PromptTemplate& t, const std::string& input) {
    if (t.role != Role::Init) throw template_error("render_initial requires an init template");
    if (!t.master.empty()) return format_block(t.master, {{"input", &input}}, t.role);
    return assemble(t, {format_block(t.input_format, {{"input", &input}}, t.role)});
}

std::string render_feedback(const PromptTemplate& t, const std::string& input,
                            const std::string& candidate) {
    if (t.role != Role::Feedback && t.role != Role::Evaluator) {
        throw template_error("render_feedback requires a feedback template");
    }
    if (!t.master.empty()) {
        return format_block(t.master, {{"input", &input}, {"output", &candidate}}, t.role);
    }
    std::vector<std::string> q;
    if (t.include_input) q.push_back(format_block(t.input_format, {{"input", &input}}, t.role));
    q.push_back(format_block(t.output_format, {{"input", &input}, {"output", &candidate}}, t.role));
    return assemble(t, q);
}

std::string render_refine(const PromptTemplate& t, const std::string& input,
                          const std::vector<HistoryEntry>& history) {
    if (t.role != Role::Refine) throw template_error("render_refine requires a refine template");
    if (history.empty()) {
        throw Error(ErrorCode::InvalidArgument, "render_refine: history is empty");
    }
    if (!t.master.empty()) {
        const HistoryEntry& last = history.back();
        std::map<std::string, const std::string*> slots = {{"input", &input}, {"output", &last.candidate}};
        if (last.feedback) slots.emplace("feedback", &*last.feedback);
        return format_block(t.master, slots, t.role);
    }
    std::vector<std::string> q;
    if (t.include_input) q.push_back(format_block(t.input_format, {{"input", &input}}, t.role));
    for (const auto& entry : history) {
        q.push_back(format_block(t.output_format, {{"input", &input}, {"output", &entry.candidate}}, t.role));
        if (entry.feedback) {
            q.push_back(format_block(t.feedback_format,
                                     {{"input", &input}, {"output", &entry.candidate}, {"feedback", &*entry.feedback}},
                                     t.role));
            if (!t.transition.empty()) q.push_back(t.transition);
        }
    }
    return assemble(t, q);
}

std::vector<HistoryEntry> trim_history(const std::vector<HistoryEntry>& history,
                                       const HistoryLimits& limits) {
    std::size_t begin = 0;
    if (limits.window > 0 && history.size() > limits.window) {
        begin = history.size() - limits.window;
    }
    if (limits.char_budget > 0) {
        auto entry_size = [](const HistoryEntry& e) {
            return e.candidate.size() + (e.feedback ? e.feedback->size() : 0);
        };
        std::size_t total = 0;
        for (std::size_t i = begin; i < history.size(); ++i) total += entry_size(history[i]);
        while (total > limits.char_budget && begin + 1 < history.size()) {
            total -= entry_size(history[begin]);
            ++begin;
        }
    }
    return std::vector<HistoryEntry>(history.begin() + static_cast<std::ptrdiff_t>(begin), history.end());
}

} // namespace selfrefine
