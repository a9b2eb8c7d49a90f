#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace selfrefine {

struct RubricAspect {
    std::string name;
    int max_points = 0;
};

// Named aspects with point caps. total_max is always the sum of the caps.
struct Rubric {
    std::vector<RubricAspect> aspects;

    int total_max() const;
    void validate() const;   // non-empty, positive caps, unique names (case-insensitive)
};

struct AspectScore {
    std::string name;
    int score = 0;
    int max_points = 0;
};

// Result of parsing one critique. Parsing never throws: an unrecognizable
// text yields a report with no aspects and no total, which callers treat as
// an unscored record.
struct FeedbackReport {
    std::vector<AspectScore> aspects;
    std::optional<int> total;          // the reported "Total score" line, if any
    bool stop = false;                 // a stop phrase was detected
    std::string rationale;             // the full raw critique text
    bool inconsistent_total = false;   // reported total disagreed with the aspect sum,
                                       // or an aspect line used a cap unlike the rubric's
    bool clamped = false;              // some aspect score exceeded its cap and was clamped
    std::size_t rubric_aspect_count = 0;

    bool all_aspects_parsed() const {
        return rubric_aspect_count > 0 && aspects.size() == rubric_aspect_count;
    }
    // Score used for stopping and selection: the recomputed sum when every
    // rubric aspect parsed, otherwise the reported total.
    std::optional<int> effective_total() const;
    bool scored() const { return effective_total().has_value(); }
};

// Line-oriented: a line of the shape "<aspect name>: ... s/m" (leading bullet
// optional, names case-insensitive, last fraction on the line wins) scores
// that aspect; repeated aspect lines keep the last occurrence. "Total score:
// S/M" (or "Total: S/M") sets the reported total.
FeedbackReport parse_scored_feedback(const std::string& text, const Rubric& rubric);

// Canonical surface form for a report; parse_scored_feedback inverts it.
std::string render_scored_feedback(const FeedbackReport& report, const Rubric& rubric);

// Case-insensitive full-phrase containment after whitespace normalization.
// Empty phrases never match.
bool detect_stop_phrase(std::string_view text, const std::vector<std::string>& phrases);

// {"everything looks good", "no further changes are needed"}
const std::vector<std::string>& default_stop_phrases();

enum class Verdict { A, B, Both, Neither };

const char* verdict_name(Verdict verdict);

struct VerdictParse {
    Verdict verdict = Verdict::Neither;
    bool unparseable = false;   // no verdict sentence found; verdict forced to Neither
};

// Scans for the judge's verdict sentence ("The better response is A",
// "The more aligned review is both", "The better acronym is B",
// "The acronyms are equally good", "Neither acronym is good"); the last
// occurrence in the text wins. labels optionally supply the pair's surface
// labels (e.g. "Review A"/"Review B") accepted in place of bare A/B.
VerdictParse parse_preference_verdict(const std::string& text,
                                      const std::pair<std::string, std::string>& labels = {"A", "B"});

} // namespace selfrefine
