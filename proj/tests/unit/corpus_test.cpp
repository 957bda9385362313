#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "attrib/corpus.hpp"
#include "attrib/run_store.hpp"
#include "support/fixtures.hpp"
#include "support/tempdir.hpp"

using namespace attrib;

namespace {

std::string line_of(const ClaimRecord& c) {
    return to_json(c).dump() + "\n";
}

std::vector<ClaimRecord> parse(const std::string& s) {
    std::istringstream in(s);
    return parse_corpus(in);
}

}  // namespace

TEST(Corpus, LoadsDonationInstance) {
    const auto claims = load_corpus(fixtures::data_dir() / "donation_claim.jsonl");
    ASSERT_EQ(claims.size(), 1u);
    EXPECT_EQ(claims[0].gold_evidence_sets, (std::vector<IndexSet>{{9, 10, 11}}));
    EXPECT_EQ(claims[0], fixtures::donation_claim());
}

TEST(Corpus, EmptyFile) {
    EXPECT_TRUE(parse("").empty());
}

TEST(Corpus, RejectsGoldOutsideUniverse) {
    auto c = fixtures::donation_claim();
    c.gold_evidence_sets = {{9, 99}};
    EXPECT_THROW(parse(line_of(c)), ParseError);
}

TEST(Corpus, ErrorsNameTheLine) {
    const auto good = line_of(fixtures::donation_claim());
    try {
        parse(good + "{not json\n");
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
    }
    try {
        parse(good + good);
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_NE(std::string(e.what()).find("duplicate"), std::string::npos) << e.what();
    }
}

TEST(Corpus, InvariantViolations) {
    auto dup = fixtures::donation_claim();
    dup.evidence.push_back({9, "again"});
    EXPECT_THROW(validate(dup), ParseError);
    auto blank = fixtures::donation_claim();
    blank.claim = "  \t";
    EXPECT_THROW(validate(blank), ParseError);
    auto blank_passage = fixtures::donation_claim();
    blank_passage.evidence[0].text = " ";
    EXPECT_THROW(validate(blank_passage), ParseError);
}

TEST(Corpus, RoundTripIsByteIdentical) {
    std::ifstream in(fixtures::data_dir() / "e2e" / "corpus.jsonl", std::ios::binary);
    std::stringstream raw;
    raw << in.rdbuf();
    std::istringstream again(raw.str());
    const auto claims = parse_corpus(again);
    std::ostringstream out;
    write_corpus(out, claims);
    EXPECT_EQ(out.str(), raw.str());
}

TEST(GoldSubset, Choice) {
    auto c = fixtures::donation_claim();
    c.gold_evidence_sets = {{8, 10}};
    EXPECT_EQ(choose_gold_subset(c, 1), (IndexSet{8, 10}));
    c.gold_evidence_sets = {{8, 10}, {9, 11}};
    std::set<IndexSet> seen;
    for (std::uint64_t seed = 0; seed < 64; ++seed) {
        const auto s = choose_gold_subset(c, seed);
        EXPECT_EQ(s, choose_gold_subset(c, seed));
        seen.insert(s);
    }
    EXPECT_EQ(seen.size(), 2u);
    c.gold_evidence_sets.clear();
    try {
        choose_gold_subset(c, 1);
        FAIL();
    } catch (const PreconditionError& e) {
        EXPECT_NE(std::string(e.what()).find("no human-selected evidence"), std::string::npos);
    }
}

TEST(Explanation, SentencesReproduceRawText) {
    const auto r = fixtures::donation_record();
    std::string rebuilt;
    std::size_t at = 0;
    for (const auto& s : r.sentences) {
        rebuilt += r.raw_text.substr(at, s.span.begin - at) + s.text;
        at = s.span.end;
    }
    rebuilt += r.raw_text.substr(at);
    EXPECT_EQ(rebuilt, r.raw_text);
    EXPECT_EQ(r.citation_map.sentences_citing(10), IndexSet{2});
}

TEST(Explanation, JsonRoundTrip) {
    auto r = make_explanation("c1", "gen", EvidenceSource::kMachine, {1, 4}, "A [1]. See www.x.org [7]. B [4][4].");
    r.issues = cite::validate_citations(r.citation_map, {1, 4}, r.sentences);
    r.selection_output = "[1, 4]";
    const auto j = to_json(r);
    const auto back = explanation_from_json(j);
    EXPECT_EQ(back, r);
    EXPECT_EQ(to_json(back).dump(), j.dump());

    auto tampered = j;
    tampered["citations"] = ordered_json::array();
    EXPECT_THROW(explanation_from_json(tampered), ParseError);
}

TEST(Stats, WhitespaceTokens) {
    ClaimRecord c = fixtures::donation_claim();
    c.claim = "a b c";
    const std::vector<ClaimRecord> claims{c};
    auto s = corpus_stats(claims, {});
    EXPECT_DOUBLE_EQ(s.mean_claim_tokens, 3.0);
    EXPECT_TRUE(s.groups.empty());
    EXPECT_EQ(WhitespaceTokenizer{}.count("  a b　c\n"), 3u);
}

TEST(Stats, GroupMeansEqualBruteForce) {
    const auto claims = load_corpus(fixtures::data_dir() / "e2e" / "corpus.jsonl");
    std::vector<ExplanationRecord> ex;
    for (std::size_t i = 0; i < claims.size(); ++i) {
        ex.push_back(make_explanation(claims[i].id, i % 2 ? "g1" : "g2", EvidenceSource::kHuman,
                                      {claims[i].evidence.front().index},
                                      std::string(i + 1, 'x') + " word [" +
                                          std::to_string(claims[i].evidence.front().index) + "]."));
    }
    const auto s = corpus_stats(claims, ex);
    ASSERT_EQ(s.groups.size(), 2u);
    for (const auto& g : s.groups) {
        double claim_tokens = 0, expl_tokens = 0, n = 0;
        for (std::size_t i = 0; i < claims.size(); ++i) {
            if ((i % 2 ? "g1" : "g2") != g.generator_id) continue;
            std::istringstream in(claims[i].claim);
            std::string w;
            while (in >> w) ++claim_tokens;
            expl_tokens += 3;
            ++n;
        }
        EXPECT_NEAR(g.mean_claim_tokens, claim_tokens / n, 1e-12);
        EXPECT_NEAR(g.mean_explanation_tokens, expl_tokens / n, 1e-12);
        EXPECT_NEAR(g.mean_evidence_size, 1.0, 1e-12);
        EXPECT_EQ(g.explanations, static_cast<std::size_t>(n));
    }
}

TEST(RunStore, CreateOpenAndConflicts) {
    testing_support::TempDir tmp;
    RunManifest m;
    m.run_id = "r1";
    m.seed = 7;
    m.setting = Setting::kFull;
    auto store = RunStore::create(tmp.path(), m);
    EXPECT_TRUE(RunStore::exists(tmp.path(), "r1"));
    EXPECT_FALSE(store.manifest().created_at.empty());

    auto same = RunStore::create(tmp.path(), m);
    EXPECT_EQ(same.manifest().seed, 7u);
    m.seed = 8;
    EXPECT_THROW(RunStore::create(tmp.path(), m), PreconditionError);
    EXPECT_THROW(RunStore::open(tmp.path(), "nope"), Error);
}

TEST(RunStore, AppendsDeduplicateAndRereadIdentically) {
    testing_support::TempDir tmp;
    RunManifest m;
    m.run_id = "r";
    auto store = RunStore::create(tmp.path(), m);
    const std::vector<ClaimRecord> claims{fixtures::donation_claim()};
    store.write_corpus(claims);
    EXPECT_EQ(store.corpus(), claims);

    const std::vector<ExplanationRecord> ex{fixtures::donation_record()};
    EXPECT_EQ(store.append_explanations(ex), 1u);
    EXPECT_EQ(store.append_explanations(ex), 0u);

    recovery::AnnotationRecord a;
    a.task_id = "t";
    a.annotator_id = "h1";
    a.prediction = {1};
    const std::vector<recovery::AnnotationRecord> one{a};
    EXPECT_EQ(store.append_annotations(one), 1u);
    EXPECT_EQ(store.append_annotations(one), 0u);

    auto file = [&](const char* name) {
        std::ifstream in(store.dir() / name, std::ios::binary);
        std::stringstream s;
        s << in.rdbuf();
        return s.str();
    };
    const auto before = file("explanations.jsonl");
    const auto reopened = RunStore::open(tmp.path(), "r");
    EXPECT_EQ(reopened.explanations(), ex);
    std::vector<ExplanationRecord> back = reopened.explanations();
    EXPECT_EQ(to_json(back[0]).dump() + "\n", before);
    EXPECT_EQ(reopened.annotations(), one);
}
