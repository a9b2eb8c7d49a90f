#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "selfrefine/error.hpp"
#include "selfrefine/tasks.hpp"

namespace selfrefine {

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

bool ends_with(std::string_view s, std::string_view suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

} // namespace

std::string stem(std::string_view word) {
    std::string w = lower(word);
    if (ends_with(w, "es") && w.size() > 3) {
        w.resize(w.size() - 2);
    } else if (ends_with(w, "s") && w.size() > 2) {
        w.resize(w.size() - 1);
    } else if (ends_with(w, "ing") && w.size() > 4) {
        w.resize(w.size() - 3);
    } else if (ends_with(w, "ed") && w.size() > 3) {
        w.resize(w.size() - 2);
    }
    if (ends_with(w, "e") && w.size() > 2) w.resize(w.size() - 1);
    return w;
}

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    for (unsigned char c : text) {
        if (std::isalnum(c)) {
            current.push_back(static_cast<char>(std::tolower(c)));
        } else if (!current.empty()) {
            tokens.push_back(current);
            current.clear();
        }
    }
    if (!current.empty()) tokens.push_back(current);
    return tokens;
}

double coverage(const std::vector<std::string>& concepts, const std::string& sentence) {
    if (concepts.empty()) throw invalid_argument_error("coverage: concept list is empty");
    std::unordered_set<std::string> stems;
    for (const auto& token : tokenize(sentence)) stems.insert(stem(token));
    std::size_t hit = 0;
    for (const auto& item : concepts) {
        if (stems.count(stem(item)) > 0) ++hit;
    }
    return static_cast<double>(hit) / static_cast<double>(concepts.size());
}

ReadabilityMetrics readability_metrics(const std::string& source) {
    ReadabilityMetrics m;
    std::istringstream lines(source);
    std::string line;
    while (std::getline(lines, line)) {
        bool blank = true;
        for (unsigned char c : line) {
            if (!std::isspace(c)) {
                blank = false;
                break;
            }
        }
        if (blank) continue;
        ++m.non_blank_lines;

        // one comment piece per line at most; '#' inside a string literal
        // doesn't count (single/double quotes tracked, no triple-quote support)
        char quote = '\0';
        for (std::size_t i = 0; i < line.size(); ++i) {
            char c = line[i];
            if (quote != '\0') {
                if (c == '\\') {
                    ++i;
                } else if (c == quote) {
                    quote = '\0';
                }
                continue;
            }
            if (c == '\'' || c == '"') {
                quote = c;
            } else if (c == '#') {
                ++m.comment_count;
                break;
            }
        }

        std::size_t first = line.find_first_not_of(" \t");
        if (first != std::string::npos && line.compare(first, 4, "def ") == 0) {
            ++m.function_units;
        }
    }
    if (m.non_blank_lines > 0) {
        m.comments_per_line = static_cast<double>(m.comment_count) / m.non_blank_lines;
    }
    return m;
}

namespace {

std::string trim_copy(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::string extract_python_block(const std::string& text) {
    std::vector<std::string> lines;
    {
        std::istringstream in(text);
        std::string line;
        while (std::getline(in, line)) lines.push_back(line);
    }
    std::size_t start = lines.size();
    for (std::size_t i = 0; i < lines.size(); ++i) {
        std::size_t first = lines[i].find_first_not_of(" \t");
        if (first != std::string::npos && lines[i].compare(first, 4, "def ") == 0) {
            start = i;
            break;
        }
    }
    if (start == lines.size()) {
        throw extraction_error("no function definition found in the output");
    }
    std::size_t end = start + 1;
    for (; end < lines.size(); ++end) {
        const std::string& line = lines[end];
        std::size_t first = line.find_first_not_of(" \t");
        if (first == std::string::npos) continue;        // blank lines stay inside the block
        if (first == 0) break;                           // dedented: block over
    }
    // drop trailing blank lines
    while (end > start + 1) {
        std::size_t first = lines[end - 1].find_first_not_of(" \t");
        if (first != std::string::npos) break;
        --end;
    }
    std::string block;
    for (std::size_t i = start; i < end; ++i) {
        if (i > start) block += '\n';
        block += lines[i];
    }
    return block;
}

} // namespace

std::string extract_final_answer(const std::string& text, const TaskSpec& task) {
    switch (task.answer_rule) {
        case AnswerRule::PythonBlock:
            return extract_python_block(text);
        case AnswerRule::AfterLastMarker: {
            if (task.answer_marker.empty()) {
                throw config_error("task '" + task.id + "' has no answer marker");
            }
            std::size_t pos = text.rfind(task.answer_marker);
            if (pos == std::string::npos) {
                throw extraction_error("marker '" + task.answer_marker + "' not found in the output");
            }
            std::string tail = trim_copy(text.substr(pos + task.answer_marker.size()));
            if (tail.empty()) throw extraction_error("nothing follows the answer marker");
            return tail;
        }
        case AnswerRule::WholeText: {
            std::string trimmed = trim_copy(text);
            if (trimmed.empty()) throw extraction_error("output is empty");
            return trimmed;
        }
    }
    throw extraction_error("unhandled answer rule");
}

bool answers_match(const std::string& produced, const std::string& gold) {
    auto normalize = [](const std::string& s) {
        std::string out;
        for (char c : s) {
            if (c == ',' || c == '$' || c == ' ' || c == '\t' || c == '\r' || c == '\n') continue;
            out.push_back(c);
        }
        return out;
    };
    std::string a = normalize(produced);
    std::string b = normalize(gold);
    if (a.empty() || b.empty()) return a == b;
    try {
        std::size_t ia = 0, ib = 0;
        double da = std::stod(a, &ia);
        double db = std::stod(b, &ib);
        if (ia == a.size() && ib == b.size()) {
            double tol = 1e-6 * std::max({1.0, std::fabs(da), std::fabs(db)});
            return std::fabs(da - db) <= tol;
        }
    } catch (const std::exception&) {
    }
    return lower(a) == lower(b);
}

std::vector<std::string> parse_concept_list(const std::string& text) {
    std::vector<std::string> concepts;
    auto push = [&](std::string value) {
        value = trim_copy(value);
        if (value.empty()) return;
        std::string low = lower(value);
        if (std::find(concepts.begin(), concepts.end(), low) == concepts.end()) {
            concepts.push_back(low);
        }
    };
    bool saw_quote = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (c == '\'' || c == '"') {
            std::size_t close = text.find(c, i + 1);
            if (close == std::string::npos) break;
            saw_quote = true;
            push(text.substr(i + 1, close - i - 1));
            i = close;
        }
    }
    if (!saw_quote) {
        // fall back to a bare comma-separated list, brackets optional
        std::string body = text;
        std::size_t open = body.find('[');
        std::size_t close = body.rfind(']');
        if (open != std::string::npos && close != std::string::npos && close > open) {
            body = body.substr(open + 1, close - open - 1);
        }
        std::istringstream in(body);
        std::string item;
        while (std::getline(in, item, ',')) push(item);
    }
    return concepts;
}

std::string render_concept_list(const std::vector<std::string>& concepts) {
    std::string out = "[";
    for (std::size_t i = 0; i < concepts.size(); ++i) {
        if (i > 0) out += ", ";
        out += "'" + concepts[i] + "'";
    }
    out += "]";
    return out;
}

} // namespace selfrefine
