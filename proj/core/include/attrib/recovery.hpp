#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "attrib/citeparse.hpp"
#include "attrib/corpus.hpp"
#include "attrib/prompts.hpp"
#include "attrib/transport.hpp"

namespace attrib::recovery {

/// One masked-citation instance.
struct RecoveryTask {
    std::string task_id;
    std::string claim_id;
    std::string generator_id;
    EvidenceSource evidence_source = EvidenceSource::kHuman;
    EvidenceIndex masked_evidence_idx = 0;
    std::string evidence_text;
    cite::MaskedExplanation masked;
    /// Number shown for the first sentence. Always 0 for now.
    int numbering_base = 0;
    ControlKind control_kind = ControlKind::kNone;
    /// Hidden answer: positions in masked.masked_sentences.
    IndexSet ground_truth;

    std::size_t sentence_count() const { return masked.masked_sentences.size(); }
    bool is_control() const { return control_kind != ControlKind::kNone; }

    bool operator==(const RecoveryTask&) const = default;
};

/// One annotator's answer to one task.
struct AnnotationRecord {
    std::string task_id;
    std::string annotator_id;
    AnnotatorKind annotator_kind = AnnotatorKind::kHuman;
    IndexSet prediction;
    /// The explicit "no sentence" choice (human tasks).
    bool none_selected = false;
    std::optional<double> utility;
    std::optional<std::string> raw_output;
    bool parse_failed = false;
    std::optional<std::string> timestamp;

    bool operator==(const AnnotationRecord&) const = default;
};

nlohmann::ordered_json to_json(const RecoveryTask& task);
RecoveryTask task_from_json(const nlohmann::ordered_json& j);
nlohmann::ordered_json to_json(const AnnotationRecord& record);
AnnotationRecord annotation_from_json(const nlohmann::ordered_json& j);

/// "<claim>.e<idx>", with ".pos"/".neg" for controls.
std::string task_id_for(std::string_view claim_id, EvidenceIndex idx, ControlKind kind = ControlKind::kNone);

/// Sample: one task for a seeded choice among the cited indices.
/// Full: one task per cited index. Indices without a corpus passage are
/// skipped with a warning. Throws PreconditionError("nothing to mask").
std::vector<RecoveryTask> build_tasks(const ExplanationRecord& explanation,
                                      const ClaimRecord& claim,
                                      Setting setting,
                                      std::uint64_t seed);

/// Positive: an index cited by exactly one sentence, ground truth of size 1.
/// Negative: the sentences citing the chosen index are also deleted, ground
/// truth empty. The index is a seeded choice among qualifying ones.
/// Throws PreconditionError when nothing qualifies.
RecoveryTask make_control_task(const ExplanationRecord& explanation,
                               const ClaimRecord& claim,
                               ControlKind kind,
                               std::uint64_t seed);

/// Whether a control answer is correct: negatives require the explicit empty
/// answer, positives the exact singleton.
bool control_answer_correct(const RecoveryTask& task, const IndexSet& prediction, bool none_selected);

struct RecoveryParse {
    IndexSet positions;
    /// Values outside [0, n_sentences).
    std::vector<int> dropped;
};

/// A standalone "-1" anywhere means the empty set. Otherwise integers are read
/// from the last line containing digits, shifted by `numbering_base`, range
/// filtered and deduplicated. Throws ParseError if there are no integers.
RecoveryParse parse_recovery_output(std::string_view text, std::size_t n_sentences, int numbering_base = 0);

struct LlmAnnotatorConfig {
    std::string model_id;
    double temperature = 0.0;
    int max_tokens = 64;
    std::chrono::milliseconds timeout{60000};
    llm::RetryPolicy retry;
    int parse_retries = 2;
    std::string template_id{prompts::kCitationRecovery};
};

/// Annotator id used for LLM records: "llm:<model_id>".
std::string llm_annotator_id(std::string_view model_id);

/// Throws TransportError when the transport gives up. Unparseable replies
/// after the re-prompts yield an empty prediction with parse_failed set.
AnnotationRecord annotate_with_llm(const RecoveryTask& task,
                                   llm::ChatTransport& transport,
                                   const LlmAnnotatorConfig& config);

class EntailmentJudge {
public:
    virtual ~EntailmentJudge() = default;
    virtual bool entails(std::string_view premise, std::string_view hypothesis) = 0;
};

/// POST {premise, hypothesis} and read {label} or {entailed}.
class HttpEntailmentJudge final : public EntailmentJudge {
public:
    explicit HttpEntailmentJudge(std::string url, std::chrono::milliseconds timeout = std::chrono::seconds(60));
    bool entails(std::string_view premise, std::string_view hypothesis) override;

private:
    std::string url_;
    std::chrono::milliseconds timeout_;
};

/// Interprets an NLI reply body. Throws ParseError for unknown shapes.
bool parse_entailment_reply(const nlohmann::json& reply);

/// Judges every masked sentence against the evidence passage. Any judge
/// failure propagates; no partial record is produced.
AnnotationRecord annotate_with_nli(const RecoveryTask& task, EntailmentJudge& judge, std::string annotator_id);

}  // namespace attrib::recovery
