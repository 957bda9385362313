#include <gtest/gtest.h>

#include "attrib/citeparse.hpp"
#include "attrib/corpus.hpp"
#include "support/fixtures.hpp"

using namespace attrib;
using namespace attrib::cite;

namespace {

std::vector<std::string> texts(std::string_view s) {
    std::vector<std::string> out;
    for (const auto& x : segment_sentences(s)) out.push_back(x.text);
    return out;
}

ExplanationRecord record(const std::string& text, IndexSet universe = {}) {
    return make_explanation("c", "g", EvidenceSource::kHuman, std::move(universe), text);
}

}  // namespace

TEST(Segment, TwoSentences) {
    EXPECT_EQ(texts("It is false [9]. Such posts are scams [10]."),
              (std::vector<std::string>{"It is false [9].", "Such posts are scams [10]."}));
}

TEST(Segment, AbbreviationProtected) {
    EXPECT_EQ(texts("The U.S. debt rose [3]."), (std::vector<std::string>{"The U.S. debt rose [3]."}));
    EXPECT_EQ(texts("Dr. Smith said so. Mr. Jones did not."),
              (std::vector<std::string>{"Dr. Smith said so.", "Mr. Jones did not."}));
}

TEST(Segment, MarkerAfterTerminalStaysWithSentence) {
    EXPECT_EQ(texts("It is false. [9] Such posts are scams."),
              (std::vector<std::string>{"It is false. [9]", "Such posts are scams."}));
}

TEST(Segment, QuotesAndOtherTerminals) {
    EXPECT_EQ(texts("He said \"no.\" Then left! Why? Because."),
              (std::vector<std::string>{"He said \"no.\"", "Then left!", "Why?", "Because."}));
    EXPECT_EQ(texts("See No. 5 on the list. It was no. Done."),
              (std::vector<std::string>{"See No. 5 on the list.", "It was no.", "Done."}));
    EXPECT_EQ(texts("Costs rose 3.5 percent. Next."), (std::vector<std::string>{"Costs rose 3.5 percent.", "Next."}));
}

TEST(Segment, SpansCoverTextMinusWhitespace) {
    const std::string t = "  First one [1].  Second\none [2][3].\n";
    const auto s = segment_sentences(t);
    ASSERT_EQ(s.size(), 2u);
    for (const auto& x : s) EXPECT_EQ(t.substr(x.span.begin, x.span.size()), x.text);
    EXPECT_EQ(s[0].span.begin, 2u);
    EXPECT_EQ(s[1].text, "Second\none [2][3].");
}

TEST(Segment, DonationSentenceCountMatchesHandCount) {
    // four terminal full stops, none inside an abbreviation
    EXPECT_EQ(segment_sentences(fixtures::donation_explanation()).size(), 4u);
}

TEST(CitationMap, Forms) {
    EXPECT_EQ(record("It may receive [9].").citation_map.entries,
              (std::map<std::size_t, std::vector<EvidenceIndex>>{{0, {9}}}));
    EXPECT_EQ(record("wrong [1][2][3].").citation_map.entries,
              (std::map<std::size_t, std::vector<EvidenceIndex>>{{0, {1, 2, 3}}}));
    EXPECT_EQ(record("wrong [3, 1,2].").citation_map.entries,
              (std::map<std::size_t, std::vector<EvidenceIndex>>{{0, {3, 1, 2}}}));
    EXPECT_TRUE(record("no citation here.").citation_map.entries.empty());
    EXPECT_TRUE(record("see [a] or [] or [1,] here.").citation_map.entries.empty());
}

TEST(CitationMap, OutOfUniverseRecordedAndFlagged) {
    const auto r = record("Copied [1][2][3]. Fine [9].", {9, 10, 11});
    EXPECT_EQ(r.citation_map.out_of_universe, (IndexSet{1, 2, 3}));
    EXPECT_EQ(r.citation_map.cited(), (IndexSet{1, 2, 3, 9}));
    EXPECT_EQ(r.citation_map.markers.size(), 4u);
}

TEST(Mask, WorkedExample) {
    const auto m = mask_citation(record("you are wrong [6]"), 6);
    EXPECT_EQ(m.masked_text, "you are wrong");
    EXPECT_EQ(m.ground_truth, IndexSet{0});
}

TEST(Mask, PartialMarkers) {
    EXPECT_EQ(mask_citation(record("a [6][7]."), 6).masked_text, "a [7].");
    EXPECT_EQ(mask_citation(record("a [6][7]."), 7).masked_text, "a [6].");
    EXPECT_EQ(mask_citation(record("a [6, 7]."), 6).masked_text, "a [7].");
    EXPECT_EQ(mask_citation(record("a [6,7,8]."), 7).masked_text, "a [6,8].");
    EXPECT_EQ(mask_citation(record("a [6, 7]."), 7).masked_text, "a [6].");
}

TEST(Mask, WhitespaceNormalised) {
    EXPECT_EQ(mask_citation(record("one [2] two."), 2).masked_text, "one two.");
    EXPECT_EQ(mask_citation(record("one [2]. Two [3]."), 2).masked_text, "one. Two [3].");
    EXPECT_EQ(mask_citation(record("One. [2] Two."), 2).masked_text, "One. Two.");
    EXPECT_EQ(mask_citation(record("[2] One two."), 2).masked_text, "One two.");
}

TEST(Mask, DonationOnlyTargetRemoved) {
    const auto r = fixtures::donation_record();
    const auto m = mask_citation(r, 9);
    EXPECT_EQ(m.ground_truth, IndexSet{1});
    ASSERT_EQ(m.removal_log.size(), 1u);
    EXPECT_EQ(m.removal_log[0].removed, " [9]");
    EXPECT_NE(m.masked_text.find("[10]"), std::string::npos);
    EXPECT_NE(m.masked_text.find("[11]"), std::string::npos);
    EXPECT_EQ(m.masked_sentences[2], r.sentences[2].text);
    EXPECT_EQ(m.masked_sentences[1].back(), '.');
    EXPECT_EQ(restore_original(m.masked_text, m.removal_log), r.raw_text);
}

TEST(Mask, EveryCitingSentenceMasked) {
    const auto r = record("A [4]. B [5]. C [4][5]. D [5,4].");
    const auto m = mask_citation(r, 4);
    EXPECT_EQ(m.ground_truth, (IndexSet{0, 2, 3}));
    EXPECT_EQ(m.masked_text, "A. B [5]. C [5]. D [5].");
    EXPECT_EQ(restore_original(m.masked_text, m.removal_log), r.raw_text);
}

TEST(Mask, UncitedIsAnError) {
    EXPECT_THROW(mask_citation(record("Nothing [1]."), 2), PreconditionError);
}

TEST(Mask, FuzzRoundTrip) {
    fixtures::ExplanationFuzzer fuzz(99);
    int checked = 0;
    for (int i = 0; i < 300; ++i) {
        const auto r = record(fuzz.next());
        const auto cited = r.citation_map.cited();
        for (int idx : cited) {
            const auto m = mask_citation(r, idx);
            ASSERT_EQ(restore_original(m.masked_text, m.removal_log), r.raw_text);
            auto expect = r.citation_map.entries;
            for (auto it = expect.begin(); it != expect.end();) {
                std::erase(it->second, idx);
                it = it->second.empty() ? expect.erase(it) : std::next(it);
            }
            const auto again = record(m.masked_text);
            ASSERT_EQ(again.citation_map.entries, expect) << r.raw_text << "\n--\n" << m.masked_text;
            ASSERT_EQ(again.sentences.size(), r.sentences.size());
            // masking never introduces a double space
            auto doubles = [](const std::string& t) {
                std::size_t n = 0;
                for (std::size_t k = 0; k + 1 < t.size(); ++k) n += t[k] == ' ' && t[k + 1] == ' ';
                return n;
            };
            ASSERT_LE(doubles(m.masked_text), doubles(r.raw_text)) << r.raw_text << "\n--\n" << m.masked_text;
            ++checked;
        }
    }
    EXPECT_GT(checked, 300);
}

TEST(Validate, IssueKinds) {
    const auto r = record("Copied [1][2][3]. See https://example.com/x now [9]. Again [9].", {9, 10, 11});
    const auto issues = validate_citations(r.citation_map, {9, 10, 11}, r.sentences);
    auto count = [&](IssueKind k) {
        return std::count_if(issues.begin(), issues.end(), [&](const auto& i) { return i.kind == k; });
    };
    EXPECT_EQ(count(IssueKind::kOutOfUniverse), 3);
    EXPECT_EQ(count(IssueKind::kUrl), 1);
    EXPECT_EQ(count(IssueKind::kUncited), 2);
    EXPECT_EQ(count(IssueKind::kCitedMoreThanOnce), 1);
    EXPECT_EQ(validate_citations(r.citation_map, {9, 10, 11}, r.sentences, false).size(), issues.size() - 1);
}
