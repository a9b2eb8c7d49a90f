#include <doctest.h>

#include "selfrefine/error.hpp"
#include "selfrefine/feedback.hpp"

using namespace selfrefine;

namespace {

Rubric acronym_rubric() {
    return Rubric{{{"Ease of pronunciation", 5},
                   {"Ease of spelling", 5},
                   {"Relation to title", 5},
                   {"Positive connotation", 5},
                   {"Well-known", 5}}};
}

Rubric dialogue_rubric() {
    return Rubric{{{"Relevant", 3},
                   {"Informative", 3},
                   {"Interesting", 3},
                   {"Consistent", 3},
                   {"Helpful", 3},
                   {"Engaging", 3},
                   {"Specific", 3},
                   {"Safe", 3},
                   {"User understanding", 3},
                   {"Fluent", 3}}};
}

// Verbatim scored critique for the acronym UBPA, trailing spaces included.
const char* kAcronymBlock =
    "Scores:\n"
    "\n"
    "* Ease of pronunciation: UBPA is pronounced \"uhb-puh\". This is an easy acronym to "
    "pronounce. 4/5\n"
    "* Ease of spelling: UBPA is easy to spell. 4/5 \n"
    "* Relation to title: UBPA stands for \"Underwater Breathing Product for no Accessories\" "
    "which is related to the title. 5/5\n"
    "* Positive connotation: UBPA is a positive acronym. 5/5 \n"
    "* Well-known: UBPA is not a well-known acronym. 1/5\n"
    "\n"
    "* Total score: 19/25\n";

const char* kDialogueBlock =
    "* Relevant: The response is relevant to the user's input and shows interest in the user's "
    "hobby. 3/3\n"
    "* Informative: The response does not provide any information about table tennis or how to "
    "play it. 1/3\n"
    "* Interesting: The response is not very interesting or intriguing. 1/3\n"
    "* Consistent: The response is consistent with the tone and context of the conversation. "
    "3/3\n"
    "* Helpful: The response is not particularly helpful as it does not provide any information "
    "or suggest any actions. 1/3\n"
    "* Engaging: The response is somewhat engaging. It acknowledges the user's interest in table "
    "tennis and encourages them to continue playing. 2/3\n"
    "* Specific: The response is not specific, as it does not address the topic of table tennis "
    "in any particular way. 1/3\n"
    "* Safe: The response is safe and does not contain any offensive, toxic or harmful content "
    "and does not touch on any sensitive topics or share any personal information. 3/3\n"
    "* User understanding: The response shows some understanding of the user's input and "
    "acknowledges their interest in table tennis. 2/3\n"
    "* Fluent: The response is fluent in terms of grammar and flow of words. 3/3\n"
    "* Total score: 20/30\n";

} // namespace

TEST_CASE("acronym critique parses to its per-aspect scores and total") {
    FeedbackReport report = parse_scored_feedback(kAcronymBlock, acronym_rubric());
    REQUIRE(report.aspects.size() == 5);
    int expected[5] = {4, 4, 5, 5, 1};
    for (std::size_t i = 0; i < 5; ++i) {
        CHECK(report.aspects[i].score == expected[i]);
        CHECK(report.aspects[i].max_points == 5);
    }
    REQUIRE(report.total.has_value());
    CHECK(*report.total == 19);
    CHECK(report.all_aspects_parsed());
    CHECK(*report.effective_total() == 19);
    CHECK_FALSE(report.inconsistent_total);
    CHECK_FALSE(report.clamped);
    CHECK_FALSE(report.stop);
}

TEST_CASE("dialogue critique parses all ten aspects and the 20/30 total") {
    FeedbackReport report = parse_scored_feedback(kDialogueBlock, dialogue_rubric());
    REQUIRE(report.aspects.size() == 10);
    int expected[10] = {3, 1, 1, 3, 1, 2, 1, 3, 2, 3};
    for (std::size_t i = 0; i < 10; ++i) CHECK(report.aspects[i].score == expected[i]);
    CHECK(*report.total == 20);
    CHECK(*report.effective_total() == 20);
    CHECK_FALSE(report.inconsistent_total);
}

TEST_CASE("aspects come back in rubric order regardless of text order") {
    Rubric rubric{{{"Alpha", 5}, {"Beta", 5}}};
    FeedbackReport report = parse_scored_feedback("Beta: fine 3/5\nAlpha: rough 2/5", rubric);
    REQUIRE(report.aspects.size() == 2);
    CHECK(report.aspects[0].name == "Alpha");
    CHECK(report.aspects[0].score == 2);
    CHECK(report.aspects[1].name == "Beta");
    CHECK(report.aspects[1].score == 3);
}

TEST_CASE("repeated aspect lines keep the last occurrence") {
    Rubric rubric{{{"Alpha", 5}}};
    FeedbackReport report =
        parse_scored_feedback("Alpha: first try 2/5\nAlpha: on reflection 4/5", rubric);
    REQUIRE(report.aspects.size() == 1);
    CHECK(report.aspects[0].score == 4);
}

TEST_CASE("the last fraction on a line wins and long digit runs are ignored") {
    Rubric rubric{{{"Alpha", 5}}};
    FeedbackReport report =
        parse_scored_feedback("Alpha: improved from 1/5 in round 2 to 4/5", rubric);
    REQUIRE(report.aspects.size() == 1);
    CHECK(report.aspects[0].score == 4);

    report = parse_scored_feedback("Alpha: id 12345678/5 only", rubric);
    CHECK(report.aspects.empty());
}

TEST_CASE("scores above the cap clamp and set the flag") {
    Rubric rubric{{{"Alpha", 5}}};
    FeedbackReport report = parse_scored_feedback("Alpha: generous 7/5", rubric);
    REQUIRE(report.aspects.size() == 1);
    CHECK(report.aspects[0].score == 5);
    CHECK(report.clamped);
}

TEST_CASE("foreign denominators and disagreeing totals set the inconsistency flag") {
    Rubric rubric{{{"Alpha", 5}, {"Beta", 5}}};
    FeedbackReport wrong_cap = parse_scored_feedback("Alpha: odd 3/10", rubric);
    CHECK(wrong_cap.inconsistent_total);

    FeedbackReport wrong_total =
        parse_scored_feedback("Alpha: 3/5\nBeta: 3/5\nTotal score: 9/10", rubric);
    CHECK(wrong_total.inconsistent_total);
    // recomputed sum beats the reported total once every aspect parsed
    CHECK(*wrong_total.effective_total() == 6);
}

TEST_CASE("reported total stands in when aspects are incomplete") {
    Rubric rubric{{{"Alpha", 5}, {"Beta", 5}}};
    FeedbackReport report = parse_scored_feedback("Alpha: 3/5\nTotal score: 7/10", rubric);
    CHECK_FALSE(report.all_aspects_parsed());
    CHECK(*report.effective_total() == 7);

    FeedbackReport unscored = parse_scored_feedback("Looks weak overall.", rubric);
    CHECK_FALSE(unscored.scored());
    CHECK_FALSE(unscored.effective_total().has_value());
}

TEST_CASE("total heads accept Total, Total score and Overall score") {
    Rubric rubric{{{"Alpha", 5}}};
    CHECK(*parse_scored_feedback("Total: 3/5", rubric).total == 3);
    CHECK(*parse_scored_feedback("total SCORE: 3/5", rubric).total == 3);
    CHECK(*parse_scored_feedback("Overall score: 3/5", rubric).total == 3);
}

TEST_CASE("aspect names match case-insensitively, with or without a score suffix") {
    Rubric rubric{{{"User understanding", 3}}};
    CHECK(parse_scored_feedback("USER UNDERSTANDING: 2/3", rubric).aspects.size() == 1);
    CHECK(parse_scored_feedback("User understanding score: 2/3", rubric).aspects.size() == 1);
    CHECK(parse_scored_feedback("Understanding: 2/3", rubric).aspects.empty());
}

TEST_CASE("rendered reports parse back to the same scores") {
    Rubric rubric = acronym_rubric();
    FeedbackReport report;
    report.rubric_aspect_count = rubric.aspects.size();
    int scores[5] = {4, 4, 5, 5, 1};
    for (std::size_t i = 0; i < 5; ++i) {
        report.aspects.push_back(
            {rubric.aspects[i].name, scores[i], rubric.aspects[i].max_points});
    }
    report.total = 19;
    FeedbackReport round = parse_scored_feedback(render_scored_feedback(report, rubric), rubric);
    REQUIRE(round.aspects.size() == report.aspects.size());
    for (std::size_t i = 0; i < 5; ++i) CHECK(round.aspects[i].score == scores[i]);
    CHECK(*round.total == 19);
    CHECK_FALSE(round.inconsistent_total);
}

TEST_CASE("rubric validation rejects duplicates, empty names and non-positive caps") {
    CHECK_THROWS_AS(Rubric{{}}.validate(), Error);
    CHECK_THROWS_AS((Rubric{{{"A", 5}, {"a", 3}}}.validate()), Error);
    CHECK_THROWS_AS((Rubric{{{"", 5}}}.validate()), Error);
    CHECK_THROWS_AS((Rubric{{{"A", 0}}}.validate()), Error);
}

TEST_CASE("stop phrases match case- and whitespace-insensitively") {
    CHECK(detect_stop_phrase("Everything   LOOKS\n good!", default_stop_phrases()));
    CHECK(detect_stop_phrase("I think no further CHANGES are needed.", default_stop_phrases()));
    CHECK_FALSE(detect_stop_phrase("Everything looks bad.", default_stop_phrases()));
    CHECK_FALSE(detect_stop_phrase("anything", {""}));
    CHECK(parse_scored_feedback("Everything looks good", Rubric{{{"A", 5}}}).stop);
}

TEST_CASE("verdict sentences parse across all judge surfaces") {
    auto verdict = [](const char* text) { return parse_preference_verdict(text).verdict; };
    CHECK(verdict("Response A stays on topic. The better response is A") == Verdict::A);
    CHECK(verdict("The better response is B. STOP") == Verdict::B);
    CHECK(verdict("The more aligned review is both") == Verdict::Both);
    CHECK(verdict("The more aligned review is neither. STOP") == Verdict::Neither);
    CHECK(verdict("Clear and catchy. The better acronym is A. STOP") == Verdict::A);
    CHECK(verdict("The acronyms are equally good. STOP.") == Verdict::Both);
    CHECK(verdict("Neither acronym is good. STOP") == Verdict::Neither);
    CHECK(verdict("The better output is b") == Verdict::B);
}

TEST_CASE("surface labels substitute for bare letters") {
    std::pair<std::string, std::string> labels{"Review A", "Review B"};
    CHECK(parse_preference_verdict("The more aligned review is Review B", labels).verdict ==
          Verdict::B);
    CHECK(parse_preference_verdict("The better response is Response A",
                                   {"Response A", "Response B"})
              .verdict == Verdict::A);
    // filler words between the trigger and the choice
    CHECK(parse_preference_verdict("The better response is the option B").verdict == Verdict::B);
}

TEST_CASE("the last verdict in the text wins") {
    CHECK(parse_preference_verdict(
              "The better response is A... wait, on reflection the better response is B")
              .verdict == Verdict::B);
    CHECK(parse_preference_verdict(
              "The better acronym is A. Actually the acronyms are equally good.")
              .verdict == Verdict::Both);
}

TEST_CASE("texts without a verdict sentence flag as unparseable Neither") {
    VerdictParse parsed = parse_preference_verdict("I cannot decide between these.");
    CHECK(parsed.verdict == Verdict::Neither);
    CHECK(parsed.unparseable);

    // a trigger with no recognizable choice keeps scanning, then gives up
    parsed = parse_preference_verdict("The better response is hard to say.");
    CHECK(parsed.verdict == Verdict::Neither);
    CHECK(parsed.unparseable);
}

TEST_CASE("verdict letters only match as standalone words") {
    // "B." with punctuation is a word boundary, "Brilliant" is not
    CHECK(parse_preference_verdict("The better response is B.").verdict == Verdict::B);
    CHECK(parse_preference_verdict("The better response is Brilliant").unparseable);
}
