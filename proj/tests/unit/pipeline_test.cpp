#include <gtest/gtest.h>

#include <atomic>
#include <cstdlib>
#include <thread>

#include <httplib.h>

#include "attrib/genpipe.hpp"
#include "attrib/prompts.hpp"
#include "attrib/recovery.hpp"
#include "attrib/transport.hpp"
#include "support/fake_llm.hpp"
#include "support/fixtures.hpp"
#include "support/tempdir.hpp"

using namespace attrib;
using llm::ChatMessage;
using json = nlohmann::json;

namespace {

/// httplib server on an ephemeral port, stopped on destruction.
class StubServer {
public:
    StubServer() = default;
    ~StubServer() {
        server.stop();
        if (thread_.joinable()) thread_.join();
    }
    void start() {
        port_ = server.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server.listen_after_bind(); });
        server.wait_until_ready();
    }
    std::string url(const std::string& path = "") const { return "http://127.0.0.1:" + std::to_string(port_) + path; }

    httplib::Server server;

private:
    int port_ = 0;
    std::thread thread_;
};

llm::RetryPolicy fast_retry() {
    llm::RetryPolicy p;
    p.initial_backoff = std::chrono::milliseconds(1);
    return p;
}

}  // namespace

TEST(Prompts, RenderAndUnknownPlaceholder) {
    EXPECT_EQ(prompts::render("a {x} b {y}", {{"x", "1"}, {"y", "{x}"}}), "a 1 b {x}");
    EXPECT_THROW(prompts::render("a {z}", {}), Error);
    EXPECT_THROW(prompts::template_text("nope"), Error);
}

TEST(Prompts, Shapes) {
    const auto c = fixtures::donation_claim();
    const auto sel = prompts::evidence_selection(c);
    ASSERT_EQ(sel.size(), 1u);
    EXPECT_NE(sel[0].content.find("Reason [9]: Facebook does not"), std::string::npos);
    EXPECT_TRUE(sel[0].content.ends_with("Claim: " + c.claim + "\nVeracity: false\nExtracted Reasons:"));

    const auto gen = prompts::explanation_generation(c, c.passages({9, 10}));
    EXPECT_NE(gen[0].content.find("Reason [10] The post"), std::string::npos);
    EXPECT_EQ(gen[0].content.find("Reason [11]"), std::string::npos);
    EXPECT_TRUE(gen[0].content.ends_with("Explanation:"));

    const std::vector<std::string> sentences{"First.", "Second."};
    const auto rec = prompts::citation_recovery("evidence text", sentences, 1);
    EXPECT_NE(rec[0].content.find("Reason Sentence:\nevidence text\n"), std::string::npos);
    EXPECT_NE(rec[0].content.find("1. First.\n2. Second.\n"), std::string::npos);
}

TEST(Transport, PromptKeyDependsOnRoleAndContent) {
    const std::vector<ChatMessage> a{{"user", "x"}}, b{{"system", "x"}}, c{{"user", "x"}, {"user", ""}};
    EXPECT_EQ(llm::prompt_key(a), llm::prompt_key(a));
    EXPECT_EQ(llm::prompt_key(a).size(), 16u);
    EXPECT_NE(llm::prompt_key(a), llm::prompt_key(b));
    EXPECT_NE(llm::prompt_key(a), llm::prompt_key(c));
}

TEST(Transport, RecordThenReplay) {
    testing_support::TempDir tmp;
    auto fake = fake::transport();
    llm::RecordingTransport rec(fake, tmp.path());
    const std::vector<ChatMessage> m{{"user", "hello"}};
    const auto first = rec.complete(m, {});
    llm::ScriptedTransport replay(tmp.path());
    EXPECT_EQ(replay.complete(m, {}), first);
    try {
        replay.complete({{"user", "other"}}, {});
        FAIL();
    } catch (const llm::TransportError& e) {
        EXPECT_FALSE(e.retryable());
    }
}

TEST(Transport, RetryOnlyRetryable) {
    int calls = 0;
    llm::CallbackTransport flaky([&](const auto&, const auto&) -> std::string {
        if (++calls < 3) throw llm::TransportError("busy");
        return "ok";
    });
    EXPECT_EQ(llm::complete_with_retry(flaky, {}, {}, fast_retry()), "ok");
    EXPECT_EQ(calls, 3);

    calls = 0;
    llm::CallbackTransport fatal([&](const auto&, const auto&) -> std::string {
        ++calls;
        throw llm::TransportError("bad request", false);
    });
    EXPECT_THROW(llm::complete_with_retry(fatal, {}, {}, fast_retry()), llm::TransportError);
    EXPECT_EQ(calls, 1);
}

TEST(Transport, HttpChatAgainstStub) {
    StubServer stub;
    std::atomic<int> hits{0};
    stub.server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        if (++hits == 1) {
            res.status = 503;
            return;
        }
        if (req.get_header_value("Authorization") != "Bearer k3y") {
            res.status = 401;
            return;
        }
        const auto body = json::parse(req.body);
        json reply{{"choices", {{{"message", {{"role", "assistant"},
                                              {"content", body["model"].get<std::string>() + ":" +
                                                              body["messages"][0]["content"].get<std::string>()}}}}}}};
        res.set_content(reply.dump(), "application/json");
    });
    stub.start();

    llm::HttpChatTransport t(stub.url("/v1"), "k3y");
    llm::CompletionParams p;
    p.model_id = "m1";
    EXPECT_EQ(llm::complete_with_retry(t, {{"user", "hi"}}, p, fast_retry()), "m1:hi");
    EXPECT_EQ(hits.load(), 2);

    llm::HttpChatTransport wrong(stub.url("/v1"), "nope");
    try {
        wrong.complete({{"user", "hi"}}, p);
        FAIL();
    } catch (const llm::TransportError& e) {
        EXPECT_FALSE(e.retryable());
    }
}

TEST(Transport, MissingKey) {
    ::unsetenv("ATTRIB_EVAL_API_KEY");
    EXPECT_THROW(llm::HttpChatTransport::from_env("http://127.0.0.1:1"), llm::TransportError);
}

TEST(Transport, ParseResponse) {
    EXPECT_EQ(llm::parse_chat_response(R"({"choices":[{"message":{"content":"x"}}]})"), "x");
    EXPECT_THROW(llm::parse_chat_response("{}"), llm::TransportError);
    EXPECT_THROW(llm::parse_chat_response("nope"), llm::TransportError);
}

TEST(Selection, Parse) {
    const IndexSet u{1, 2, 3, 5};
    EXPECT_EQ(gen::parse_selection_output("Extracted Reasons: [3,5]\nJustification: [1]", u), (IndexSet{3, 5}));
    EXPECT_EQ(gen::parse_selection_output("[ 1 , 2, 99 ]", u), (IndexSet{1, 2}));
    EXPECT_THROW(gen::parse_selection_output("reasons 1 and 2", u), ParseError);
}

TEST(Selection, RepromptsOnUnparseableReply) {
    auto c = fixtures::donation_claim();
    std::vector<std::size_t> sizes;
    llm::CallbackTransport t([&](const std::vector<ChatMessage>& m, const auto&) -> std::string {
        sizes.push_back(m.size());
        return m.size() == 1 ? "no idea" : "[9, 11]";
    });
    gen::GenerationConfig cfg;
    cfg.generator_id = "g";
    const auto s = gen::select_evidence(c, t, cfg);
    EXPECT_EQ(s.indices, (IndexSet{9, 11}));
    EXPECT_EQ(s.raw_output, "[9, 11]");
    EXPECT_EQ(sizes, (std::vector<std::size_t>{1, 3}));

    llm::CallbackTransport never([](const auto&, const auto&) { return std::string("none"); });
    EXPECT_THROW(gen::select_evidence(c, never, cfg), ParseError);
}

TEST(Generation, HumanAndMachineRuns) {
    const auto claims = load_corpus(fixtures::data_dir() / "e2e" / "corpus.jsonl");
    auto fake = fake::transport();
    gen::GenerationConfig cfg;
    cfg.generator_id = "fake";
    std::map<std::string, IndexSet> gold;
    const auto human = gen::run_generation(claims, EvidenceSource::kHuman, 7, fake, cfg, 3, &gold);
    ASSERT_EQ(human.size(), claims.size());
    for (std::size_t i = 0; i < claims.size(); ++i) {
        EXPECT_EQ(human[i].claim_id, claims[i].id);
        if (claims[i].gold_evidence_sets.empty()) {
            EXPECT_FALSE(human[i].explanation);
            continue;
        }
        ASSERT_TRUE(human[i].explanation) << human[i].error;
        EXPECT_EQ(human[i].explanation->selected_evidence, choose_gold_subset(claims[i], 7));
        EXPECT_EQ(gold.at(claims[i].id), choose_gold_subset(claims[i], 7));
        EXPECT_FALSE(human[i].explanation->selection_output);
    }

    const auto machine = gen::run_generation(claims, EvidenceSource::kMachine, 7, fake, cfg, 1);
    for (const auto& o : machine) {
        ASSERT_TRUE(o.explanation) << o.error;
        EXPECT_TRUE(o.explanation->selection_output);
        EXPECT_FALSE(o.explanation->selected_evidence.empty());
    }
}

TEST(Generation, EmptyCompletionFails) {
    llm::CallbackTransport empty([](const auto&, const auto&) { return std::string("  \n"); });
    gen::GenerationConfig cfg;
    cfg.retry = fast_retry();
    const auto c = fixtures::donation_claim();
    EXPECT_THROW(gen::generate_explanation(c, {9}, EvidenceSource::kHuman, empty, cfg), llm::TransportError);
}

TEST(RecoveryParse, Forms) {
    using recovery::parse_recovery_output;
    EXPECT_EQ(parse_recovery_output("0,2", 4).positions, (IndexSet{0, 2}));
    EXPECT_EQ(parse_recovery_output(" 1 ", 4).positions, (IndexSet{1}));
    EXPECT_EQ(parse_recovery_output("-1", 4).positions, IndexSet{});
    EXPECT_EQ(parse_recovery_output("Answer: -1", 4).positions, IndexSet{});
    EXPECT_EQ(parse_recovery_output("Let me think.\nSentences 1 and 3\n1, 3", 4).positions, (IndexSet{1, 3}));
    const auto dropped = parse_recovery_output("0, 9", 4);
    EXPECT_EQ(dropped.positions, IndexSet{0});
    EXPECT_EQ(dropped.dropped, std::vector<int>{9});
    EXPECT_EQ(parse_recovery_output("1,2", 2, 1).positions, (IndexSet{0, 1}));
    EXPECT_THROW(parse_recovery_output("none of them", 4), ParseError);
}

TEST(Tasks, DonationFullAndSample) {
    const auto claim = fixtures::donation_claim();
    const auto ex = fixtures::donation_record();
    const auto full = recovery::build_tasks(ex, claim, Setting::kFull, 3);
    ASSERT_EQ(full.size(), 3u);
    EXPECT_EQ(full[0].masked_evidence_idx, 9);
    EXPECT_EQ(full[1].masked_evidence_idx, 10);
    EXPECT_EQ(full[2].masked_evidence_idx, 11);
    EXPECT_EQ(full[1].ground_truth, IndexSet{2});
    EXPECT_EQ(full[1].evidence_text, claim.find_passage(10)->text);
    EXPECT_EQ(full[0].task_id, "politihop-facebook-donation.e9");

    std::set<int> chosen;
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        const auto s = recovery::build_tasks(ex, claim, Setting::kSample, seed);
        ASSERT_EQ(s.size(), 1u);
        EXPECT_EQ(s, recovery::build_tasks(ex, claim, Setting::kSample, seed));
        chosen.insert(s[0].masked_evidence_idx);
    }
    EXPECT_EQ(chosen, (std::set<int>{9, 10, 11}));
}

TEST(Tasks, OutOfCorpusCitationsAreNotMasked) {
    const auto claim = fixtures::donation_claim();
    const auto ex = make_explanation(claim.id, "g", EvidenceSource::kHuman, {9}, "Copied [1][2]. Real [9].");
    const auto full = recovery::build_tasks(ex, claim, Setting::kFull, 1);
    ASSERT_EQ(full.size(), 1u);
    EXPECT_EQ(full[0].masked_evidence_idx, 9);
    const auto none = make_explanation(claim.id, "g", EvidenceSource::kHuman, {9}, "Nothing cited.");
    EXPECT_THROW(recovery::build_tasks(none, claim, Setting::kFull, 1), PreconditionError);
}

TEST(Tasks, Controls) {
    const auto claim = fixtures::donation_claim();
    const auto ex = fixtures::donation_record();
    const auto pos = recovery::make_control_task(ex, claim, ControlKind::kPositive, 5);
    EXPECT_TRUE(pos.is_control());
    EXPECT_EQ(pos.ground_truth.size(), 1u);
    EXPECT_NE(pos.masked.masked_text, ex.raw_text);
    EXPECT_EQ(cite::restore_original(pos.masked.masked_text, pos.masked.removal_log), ex.raw_text);
    EXPECT_TRUE(recovery::control_answer_correct(pos, pos.ground_truth, false));
    EXPECT_FALSE(recovery::control_answer_correct(pos, {0}, false));
    EXPECT_FALSE(recovery::control_answer_correct(pos, {}, true));

    const auto neg = recovery::make_control_task(ex, claim, ControlKind::kNegative, 5);
    EXPECT_TRUE(neg.ground_truth.empty());
    EXPECT_EQ(neg.sentence_count(), 3u);
    EXPECT_EQ(neg.masked.masked_text.find("[" + std::to_string(neg.masked_evidence_idx) + "]"), std::string::npos);
    EXPECT_EQ(restore_original(neg.masked.masked_text, neg.masked.removal_log), ex.raw_text);
    EXPECT_TRUE(recovery::control_answer_correct(neg, {}, true));
    EXPECT_FALSE(recovery::control_answer_correct(neg, {1}, false));
    EXPECT_EQ(neg, recovery::make_control_task(ex, claim, ControlKind::kNegative, 5));
}

TEST(Tasks, JsonRoundTrip) {
    const auto claim = fixtures::donation_claim();
    for (const auto& t : recovery::build_tasks(fixtures::donation_record(), claim, Setting::kFull, 1)) {
        EXPECT_EQ(recovery::task_from_json(recovery::to_json(t)), t);
    }
    recovery::AnnotationRecord a{"t", "h", AnnotatorKind::kHuman, {1}, false, 55.5, std::nullopt, false,
                                 "2024-01-01T00:00:00Z"};
    EXPECT_EQ(recovery::annotation_from_json(recovery::to_json(a)), a);
    auto bad = recovery::to_json(a);
    bad["utility"] = 101;
    EXPECT_THROW(recovery::annotation_from_json(bad), ParseError);
}

TEST(LlmAnnotator, RecoversAndFallsBackToEmpty) {
    const auto claim = fixtures::donation_claim();
    const auto tasks = recovery::build_tasks(fixtures::donation_record(), claim, Setting::kFull, 1);
    auto fake = fake::transport();
    recovery::LlmAnnotatorConfig cfg;
    cfg.model_id = "fake";
    const auto a = recovery::annotate_with_llm(tasks[0], fake, cfg);
    EXPECT_EQ(a.annotator_id, "llm:fake");
    EXPECT_EQ(a.annotator_kind, AnnotatorKind::kLlm);
    EXPECT_EQ(a.prediction, IndexSet{1});
    EXPECT_FALSE(a.parse_failed);

    int calls = 0;
    llm::CallbackTransport chatty([&](const auto&, const auto&) {
        ++calls;
        return std::string("I think it is the second one.");
    });
    const auto b = recovery::annotate_with_llm(tasks[0], chatty, cfg);
    EXPECT_TRUE(b.parse_failed);
    EXPECT_TRUE(b.prediction.empty());
    EXPECT_EQ(calls, 1 + cfg.parse_retries);
}

TEST(Nli, JudgeOverHttp) {
    StubServer stub;
    stub.server.Post("/entail", [](const httplib::Request& req, httplib::Response& res) {
        const auto body = json::parse(req.body);
        const bool yes = body["hypothesis"].get<std::string>().find("donations") != std::string::npos;
        res.set_content(json{{"label", yes ? "entailment" : "neutral"}}.dump(), "application/json");
    });
    stub.start();

    const auto claim = fixtures::donation_claim();
    const auto tasks = recovery::build_tasks(fixtures::donation_record(), claim, Setting::kFull, 1);
    recovery::HttpEntailmentJudge judge(stub.url("/entail"));
    const auto a = recovery::annotate_with_nli(tasks[0], judge, "nli:stub");
    EXPECT_EQ(a.annotator_kind, AnnotatorKind::kNli);
    EXPECT_EQ(a.prediction, IndexSet{1});

    EXPECT_TRUE(recovery::parse_entailment_reply(json{{"entailed", true}}));
    EXPECT_FALSE(recovery::parse_entailment_reply(json{{"label", "contradiction"}}));
    EXPECT_THROW(recovery::parse_entailment_reply(json{{"x", 1}}), ParseError);
}
