#include "selfrefine/feedback.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <sstream>

#include "selfrefine/error.hpp"

namespace selfrefine {

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

// Collapses every whitespace run to a single space; lowercases.
std::string normalize_ws(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool in_ws = false;
    for (char raw : s) {
        unsigned char c = static_cast<unsigned char>(raw);
        if (std::isspace(c)) {
            in_ws = true;
            continue;
        }
        if (in_ws && !out.empty()) out.push_back(' ');
        in_ws = false;
        out.push_back(static_cast<char>(std::tolower(c)));
    }
    return out;
}

// Last "s/m" fraction on the line, if any.
std::optional<std::pair<int, int>> last_fraction(const std::string& line) {
    std::optional<std::pair<int, int>> found;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] != '/') continue;
        std::size_t ne = i;
        while (ne > 0 && std::isdigit(static_cast<unsigned char>(line[ne - 1]))) --ne;
        std::size_t de = i + 1;
        while (de < line.size() && std::isdigit(static_cast<unsigned char>(line[de]))) ++de;
        if (ne == i || de == i + 1) continue;
        // guard against dates like 3/4/5 and overly long numbers
        if (i - ne > 6 || de - i - 1 > 6) continue;
        try {
            int num = std::stoi(line.substr(ne, i - ne));
            int den = std::stoi(line.substr(i + 1, de - i - 1));
            found = {num, den};
        } catch (const std::exception&) {
        }
    }
    return found;
}

std::string strip_bullet(const std::string& line) {
    std::size_t b = 0;
    while (b < line.size() && std::isspace(static_cast<unsigned char>(line[b]))) ++b;
    if (b < line.size() && (line[b] == '*' || line[b] == '-')) {
        ++b;
        while (b < line.size() && std::isspace(static_cast<unsigned char>(line[b]))) ++b;
    }
    return line.substr(b);
}

} // namespace

int Rubric::total_max() const {
    int sum = 0;
    for (const auto& a : aspects) sum += a.max_points;
    return sum;
}

void Rubric::validate() const {
    if (aspects.empty()) throw invalid_argument_error("rubric has no aspects");
    std::vector<std::string> seen;
    for (const auto& a : aspects) {
        if (a.name.empty()) throw invalid_argument_error("rubric aspect with empty name");
        if (a.max_points <= 0) {
            throw invalid_argument_error("rubric aspect '" + a.name + "' has non-positive cap");
        }
        std::string key = lower(a.name);
        if (std::find(seen.begin(), seen.end(), key) != seen.end()) {
            throw invalid_argument_error("rubric aspect '" + a.name + "' duplicated");
        }
        seen.push_back(key);
    }
}

std::optional<int> FeedbackReport::effective_total() const {
    if (all_aspects_parsed()) {
        int sum = 0;
        for (const auto& a : aspects) sum += a.score;
        return sum;
    }
    return total;
}

FeedbackReport parse_scored_feedback(const std::string& text, const Rubric& rubric) {
    rubric.validate();

    FeedbackReport report;
    report.rationale = text;
    report.rubric_aspect_count = rubric.aspects.size();
    report.stop = detect_stop_phrase(text, default_stop_phrases());

    // keyed by rubric position so repeated lines overwrite (keep-last)
    std::map<std::size_t, AspectScore> by_aspect;

    std::istringstream lines(text);
    std::string raw_line;
    while (std::getline(lines, raw_line)) {
        std::string line = strip_bullet(raw_line);
        std::size_t colon = line.find(':');
        if (colon == std::string::npos) continue;
        std::string head = normalize_ws(std::string_view(line).substr(0, colon));
        if (head.empty()) continue;

        auto fraction = last_fraction(line.substr(colon + 1));
        if (!fraction) continue;

        if (head == "total" || head == "total score" || head == "overall score") {
            report.total = fraction->first;
            if (fraction->second != rubric.total_max()) report.inconsistent_total = true;
            continue;
        }

        for (std::size_t i = 0; i < rubric.aspects.size(); ++i) {
            std::string name = normalize_ws(rubric.aspects[i].name);
            if (head == name || head == name + " score") {
                AspectScore entry;
                entry.name = rubric.aspects[i].name;
                entry.score = fraction->first;
                entry.max_points = rubric.aspects[i].max_points;
                if (fraction->second != rubric.aspects[i].max_points) report.inconsistent_total = true;
                if (entry.score > entry.max_points) {
                    entry.score = entry.max_points;
                    report.clamped = true;
                }
                if (entry.score < 0) {
                    entry.score = 0;
                    report.clamped = true;
                }
                by_aspect[i] = entry;
                break;
            }
        }
    }

    for (auto& [idx, entry] : by_aspect) report.aspects.push_back(entry);

    if (report.total && report.all_aspects_parsed()) {
        int sum = 0;
        for (const auto& a : report.aspects) sum += a.score;
        if (sum != *report.total) report.inconsistent_total = true;
    }
    return report;
}

std::string render_scored_feedback(const FeedbackReport& report, const Rubric& rubric) {
    std::ostringstream out;
    int sum = 0;
    for (const auto& a : report.aspects) {
        out << "* " << a.name << ": " << a.score << "/" << a.max_points << "\n";
        sum += a.score;
    }
    if (report.total) {
        out << "* Total score: " << *report.total << "/" << rubric.total_max() << "\n";
    } else if (!report.aspects.empty()) {
        out << "* Total score: " << sum << "/" << rubric.total_max() << "\n";
    }
    return out.str();
}

const std::vector<std::string>& default_stop_phrases() {
    static const std::vector<std::string> phrases = {
        "everything looks good",
        "no further changes are needed",
    };
    return phrases;
}

bool detect_stop_phrase(std::string_view text, const std::vector<std::string>& phrases) {
    std::string haystack = normalize_ws(text);
    for (const auto& phrase : phrases) {
        std::string needle = normalize_ws(phrase);
        if (needle.empty()) continue;
        if (haystack.find(needle) != std::string::npos) return true;
    }
    return false;
}

const char* verdict_name(Verdict verdict) {
    switch (verdict) {
        case Verdict::A: return "A";
        case Verdict::B: return "B";
        case Verdict::Both: return "both";
        case Verdict::Neither: return "neither";
    }
    return "neither";
}

namespace {

// Finds the first standalone choice token after `pos`, looking only at the
// next few words. Returns nullopt when the tail is not a choice.
std::optional<Verdict> choice_after(const std::string& text, std::size_t pos,
                                    const std::string& label_a, const std::string& label_b) {
    std::string tail = text.substr(pos, 48);
    // strip leading filler
    for (const char* filler : {" the", " option", " choice"}) {
        if (tail.rfind(filler, 0) == 0) tail = tail.substr(std::string(filler).size());
    }
    std::size_t i = 0;
    while (i < tail.size() && std::isspace(static_cast<unsigned char>(tail[i]))) ++i;
    tail = tail.substr(i);

    auto starts_word = [&](const std::string& word) {
        if (word.empty() || tail.size() < word.size() || tail.compare(0, word.size(), word) != 0) return false;
        return tail.size() == word.size() ||
               !std::isalnum(static_cast<unsigned char>(tail[word.size()]));
    };

    if (starts_word("both")) return Verdict::Both;
    if (starts_word("neither")) return Verdict::Neither;
    if (!label_a.empty() && starts_word(label_a)) return Verdict::A;
    if (!label_b.empty() && starts_word(label_b)) return Verdict::B;
    if (starts_word("a")) return Verdict::A;
    if (starts_word("b")) return Verdict::B;
    return std::nullopt;
}

} // namespace

VerdictParse parse_preference_verdict(const std::string& text,
                                      const std::pair<std::string, std::string>& labels) {
    std::string haystack = normalize_ws(text);
    std::string label_a = normalize_ws(labels.first);
    std::string label_b = normalize_ws(labels.second);

    static const char* triggers[] = {
        "better response is",
        "more aligned review is",
        "better acronym is",
        "better output is",
    };

    std::optional<Verdict> best;
    std::size_t best_pos = 0;

    for (const char* trigger : triggers) {
        std::string t(trigger);
        std::size_t pos = haystack.find(t);
        while (pos != std::string::npos) {
            auto v = choice_after(haystack, pos + t.size(), label_a, label_b);
            if (v && (!best || pos >= best_pos)) {
                best = v;
                best_pos = pos;
            }
            pos = haystack.find(t, pos + 1);
        }
    }

    struct Sentence {
        const char* text;
        Verdict verdict;
    };
    static const Sentence sentences[] = {
        {"the acronyms are equally good", Verdict::Both},
        {"acronyms are equally good", Verdict::Both},
        {"neither acronym is good", Verdict::Neither},
        {"both responses are equally good", Verdict::Both},
        {"neither response is good", Verdict::Neither},
    };
    for (const auto& s : sentences) {
        std::size_t pos = haystack.rfind(s.text);
        if (pos != std::string::npos && (!best || pos >= best_pos)) {
            best = s.verdict;
            best_pos = pos;
        }
    }

    if (!best) return {Verdict::Neither, true};
    return {*best, false};
}

} // namespace selfrefine
