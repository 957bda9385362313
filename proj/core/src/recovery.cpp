#include "attrib/recovery.hpp"

#include <algorithm>
#include <cctype>
#include <limits>
#include <regex>

#include <fmt/format.h>
#include <fmt/ranges.h>
#include <spdlog/spdlog.h>

#include "attrib/rng.hpp"

namespace attrib::recovery {
namespace {

using json = nlohmann::ordered_json;

template <typename T>
T require(const json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end()) throw ParseError(fmt::format("missing field '{}'", key));
    try {
        return it->template get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ParseError(fmt::format("field '{}' has the wrong type", key));
    }
}

json index_array(const IndexSet& s) {
    json a = json::array();
    for (int v : s) a.push_back(v);
    return a;
}

IndexSet index_set(const json& a) {
    IndexSet out;
    for (const auto& v : a) out.insert(v.get<int>());
    return out;
}

bool is_space(char c) {
    return std::isspace(static_cast<unsigned char>(c)) != 0;
}

/// Byte offsets of each masked sentence inside the masked text.
std::vector<Span> locate_sentences(const cite::MaskedExplanation& m) {
    std::vector<Span> spans;
    std::size_t pos = 0;
    for (const auto& s : m.masked_sentences) {
        while (pos < m.masked_text.size() && is_space(m.masked_text[pos]) &&
               m.masked_text.compare(pos, s.size(), s) != 0) {
            ++pos;
        }
        if (m.masked_text.compare(pos, s.size(), s) != 0) throw Error("masked sentences do not match masked text");
        spans.push_back({pos, pos + s.size()});
        pos += s.size();
    }
    return spans;
}

/// Cited indices that have a corpus passage, in ascending order.
std::vector<EvidenceIndex> maskable_indices(const ExplanationRecord& explanation, const ClaimRecord& claim) {
    std::vector<EvidenceIndex> out;
    for (int idx : explanation.citation_map.cited()) {
        if (claim.find_passage(idx) == nullptr) {
            spdlog::warn("claim '{}': cited index {} has no evidence passage; not masked", claim.id, idx);
            continue;
        }
        out.push_back(idx);
    }
    return out;
}

RecoveryTask make_task(const ExplanationRecord& explanation,
                       const ClaimRecord& claim,
                       EvidenceIndex idx,
                       ControlKind kind) {
    RecoveryTask t;
    t.task_id = task_id_for(explanation.claim_id, idx, kind);
    t.claim_id = explanation.claim_id;
    t.generator_id = explanation.generator_id;
    t.evidence_source = explanation.evidence_source;
    t.masked_evidence_idx = idx;
    t.evidence_text = claim.find_passage(idx)->text;
    t.masked = mask_citation(explanation, idx);
    t.control_kind = kind;
    t.ground_truth = t.masked.ground_truth;
    return t;
}

/// Deletes the sentences in `positions` from a masked explanation, logging
/// each deletion so the original stays recoverable.
void delete_sentences(cite::MaskedExplanation& m, const IndexSet& positions) {
    const auto spans = locate_sentences(m);
    for (auto it = positions.rbegin(); it != positions.rend(); ++it) {
        const auto i = static_cast<std::size_t>(*it);
        std::size_t begin = spans[i].begin;
        std::size_t end = spans[i].end;
        if (i > 0) {
            begin = spans[i - 1].end;
        } else {
            while (end < m.masked_text.size() && is_space(m.masked_text[end])) ++end;
        }
        // Earlier sentences in this loop are untouched, so `spans` stays valid
        // for every position still to be deleted.
        m.removal_log.push_back({begin, m.masked_text.substr(begin, end - begin)});
        m.masked_text.erase(begin, end - begin);
        m.masked_sentences.erase(m.masked_sentences.begin() + static_cast<std::ptrdiff_t>(i));
    }
    m.ground_truth.clear();
}

}  // namespace

std::string task_id_for(std::string_view claim_id, EvidenceIndex idx, ControlKind kind) {
    switch (kind) {
        case ControlKind::kPositive:
            return fmt::format("{}.e{}.pos", claim_id, idx);
        case ControlKind::kNegative:
            return fmt::format("{}.e{}.neg", claim_id, idx);
        case ControlKind::kNone:
            break;
    }
    return fmt::format("{}.e{}", claim_id, idx);
}

std::vector<RecoveryTask> build_tasks(const ExplanationRecord& explanation,
                                      const ClaimRecord& claim,
                                      Setting setting,
                                      std::uint64_t seed) {
    if (explanation.claim_id != claim.id) {
        throw PreconditionError(fmt::format("explanation for '{}' paired with claim '{}'", explanation.claim_id, claim.id));
    }
    const auto indices = maskable_indices(explanation, claim);
    if (indices.empty()) throw PreconditionError(fmt::format("nothing to mask in explanation for '{}'", claim.id));

    std::vector<RecoveryTask> tasks;
    if (setting == Setting::kSample) {
        auto engine = substream(seed, "masking", claim.id);
        tasks.push_back(make_task(explanation, claim, indices[uniform_index(engine, indices.size())], ControlKind::kNone));
    } else {
        for (int idx : indices) tasks.push_back(make_task(explanation, claim, idx, ControlKind::kNone));
    }
    return tasks;
}

RecoveryTask make_control_task(const ExplanationRecord& explanation,
                               const ClaimRecord& claim,
                               ControlKind kind,
                               std::uint64_t seed) {
    if (kind == ControlKind::kNone) throw PreconditionError("control kind must be positive or negative");
    std::vector<EvidenceIndex> qualifying;
    const auto n_sentences = explanation.sentences.size();
    for (int idx : maskable_indices(explanation, claim)) {
        const auto citing = explanation.citation_map.sentences_citing(idx);
        if (kind == ControlKind::kPositive ? citing.size() == 1 : citing.size() < n_sentences) {
            qualifying.push_back(idx);
        }
    }
    if (qualifying.empty()) {
        throw PreconditionError(fmt::format("no evidence index qualifies for a {} control in '{}'", to_string(kind),
                                            claim.id));
    }
    auto engine = substream(seed, "control", fmt::format("{}/{}", claim.id, to_string(kind)));
    RecoveryTask t = make_task(explanation, claim, qualifying[uniform_index(engine, qualifying.size())], kind);
    if (kind == ControlKind::kNegative) {
        delete_sentences(t.masked, t.masked.ground_truth);
        t.ground_truth.clear();
    }
    return t;
}

bool control_answer_correct(const RecoveryTask& task, const IndexSet& prediction, bool none_selected) {
    switch (task.control_kind) {
        case ControlKind::kNegative:
            return none_selected && prediction.empty();
        case ControlKind::kPositive:
            return !none_selected && prediction == task.ground_truth;
        case ControlKind::kNone:
            break;
    }
    throw PreconditionError(fmt::format("task '{}' is not a control task", task.task_id));
}

RecoveryParse parse_recovery_output(std::string_view text, std::size_t n_sentences, int numbering_base) {
    if (n_sentences == 0) throw PreconditionError("recovery task has no sentences");
    static const std::regex integer(R"(-?\d+)");
    static const std::regex none(R"((^|[^\d-])-1(?!\d))");
    const std::string s(text);
    if (std::regex_search(s, none)) return {};

    std::string last_line;
    std::size_t start = 0;
    while (start <= s.size()) {
        auto end = s.find('\n', start);
        if (end == std::string::npos) end = s.size();
        const auto line = s.substr(start, end - start);
        if (std::any_of(line.begin(), line.end(), [](unsigned char c) { return std::isdigit(c); })) last_line = line;
        start = end + 1;
    }
    if (last_line.empty()) throw ParseError(fmt::format("no sentence numbers in reply: {}", text));

    RecoveryParse out;
    for (auto it = std::sregex_iterator(last_line.begin(), last_line.end(), integer); it != std::sregex_iterator(); ++it) {
        long long value = 0;
        try {
            value = std::stoll(it->str()) - numbering_base;
        } catch (const std::out_of_range&) {
            value = -1;
        }
        if (value < 0 || value >= static_cast<long long>(n_sentences)) {
            out.dropped.push_back(static_cast<int>(std::clamp<long long>(value + numbering_base, std::numeric_limits<int>::min(),
                                                                     std::numeric_limits<int>::max())));
        } else {
            out.positions.insert(static_cast<int>(value));
        }
    }
    if (!out.dropped.empty()) {
        spdlog::warn("recovery reply names sentences outside [0, {}): {}", n_sentences, fmt::join(out.dropped, ", "));
    }
    return out;
}

std::string llm_annotator_id(std::string_view model_id) {
    return fmt::format("llm:{}", model_id);
}

AnnotationRecord annotate_with_llm(const RecoveryTask& task,
                                   llm::ChatTransport& transport,
                                   const LlmAnnotatorConfig& config) {
    AnnotationRecord record;
    record.task_id = task.task_id;
    record.annotator_id = llm_annotator_id(config.model_id);
    record.annotator_kind = AnnotatorKind::kLlm;

    auto messages =
        prompts::citation_recovery(task.evidence_text, task.masked.masked_sentences, task.numbering_base, config.template_id);
    const llm::CompletionParams params{config.model_id, config.temperature, config.max_tokens, config.timeout};
    for (int attempt = 0; attempt <= config.parse_retries; ++attempt) {
        std::string reply = llm::complete_with_retry(transport, messages, params, config.retry);
        try {
            record.prediction = parse_recovery_output(reply, task.sentence_count(), task.numbering_base).positions;
            record.raw_output = std::move(reply);
            return record;
        } catch (const ParseError&) {
            spdlog::warn("task '{}': unparseable recovery reply (attempt {})", task.task_id, attempt + 1);
        }
        messages.push_back({"assistant", reply});
        messages.push_back({"user", "Only return the sentence number(s) separated by comma, or -1."});
        record.raw_output = std::move(reply);
    }
    record.prediction.clear();
    record.parse_failed = true;
    return record;
}

HttpEntailmentJudge::HttpEntailmentJudge(std::string url, std::chrono::milliseconds timeout)
    : url_(std::move(url)), timeout_(timeout) {}

bool parse_entailment_reply(const nlohmann::json& reply) {
    if (auto it = reply.find("entailed"); it != reply.end() && it->is_boolean()) return it->get<bool>();
    if (auto it = reply.find("label"); it != reply.end() && it->is_string()) {
        const auto label = it->get<std::string>();
        if (label == "entailment") return true;
        if (label == "neutral" || label == "contradiction") return false;
        throw ParseError(fmt::format("unknown NLI label '{}'", label));
    }
    throw ParseError(fmt::format("unrecognised NLI reply: {}", reply.dump()));
}

bool HttpEntailmentJudge::entails(std::string_view premise, std::string_view hypothesis) {
    const nlohmann::json body{{"premise", premise}, {"hypothesis", hypothesis}};
    return parse_entailment_reply(llm::post_json(url_, body, "", timeout_));
}

AnnotationRecord annotate_with_nli(const RecoveryTask& task, EntailmentJudge& judge, std::string annotator_id) {
    AnnotationRecord record;
    record.task_id = task.task_id;
    record.annotator_id = std::move(annotator_id);
    record.annotator_kind = AnnotatorKind::kNli;
    const auto& sentences = task.masked.masked_sentences;
    for (std::size_t i = 0; i < sentences.size(); ++i) {
        if (judge.entails(task.evidence_text, sentences[i])) record.prediction.insert(static_cast<int>(i));
    }
    return record;
}

json to_json(const RecoveryTask& t) {
    json log = json::array();
    for (const auto& r : t.masked.removal_log) log.push_back(json{{"offset", r.offset}, {"removed", r.removed}});
    return json{{"task_id", t.task_id},
                {"claim_id", t.claim_id},
                {"generator_id", t.generator_id},
                {"evidence_source", to_string(t.evidence_source)},
                {"masked_evidence_idx", t.masked_evidence_idx},
                {"evidence_text", t.evidence_text},
                {"control_kind", to_string(t.control_kind)},
                {"numbering_base", t.numbering_base},
                {"ground_truth", index_array(t.ground_truth)},
                {"masked_text", t.masked.masked_text},
                {"masked_sentences", t.masked.masked_sentences},
                {"removal_log", std::move(log)}};
}

RecoveryTask task_from_json(const json& j) {
    RecoveryTask t;
    try {
        t.task_id = require<std::string>(j, "task_id");
        t.claim_id = require<std::string>(j, "claim_id");
        t.generator_id = require<std::string>(j, "generator_id");
        t.evidence_source = parse_evidence_source(require<std::string>(j, "evidence_source"));
        t.masked_evidence_idx = require<int>(j, "masked_evidence_idx");
        t.evidence_text = require<std::string>(j, "evidence_text");
        t.control_kind = parse_control_kind(require<std::string>(j, "control_kind"));
        t.numbering_base = require<int>(j, "numbering_base");
        t.ground_truth = index_set(require<json>(j, "ground_truth"));
        t.masked.masked_evidence_idx = t.masked_evidence_idx;
        t.masked.masked_text = require<std::string>(j, "masked_text");
        t.masked.masked_sentences = require<std::vector<std::string>>(j, "masked_sentences");
        for (const auto& r : require<json>(j, "removal_log")) {
            t.masked.removal_log.push_back({require<std::size_t>(r, "offset"), require<std::string>(r, "removed")});
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(fmt::format("malformed task: {}", e.what()));
    }
    t.masked.ground_truth = t.ground_truth;
    for (int pos : t.ground_truth) {
        if (pos < 0 || static_cast<std::size_t>(pos) >= t.sentence_count()) {
            throw ParseError(fmt::format("task '{}': ground truth position {} out of range", t.task_id, pos));
        }
    }
    return t;
}

json to_json(const AnnotationRecord& a) {
    json j{{"task_id", a.task_id},
           {"annotator_id", a.annotator_id},
           {"annotator_kind", to_string(a.annotator_kind)},
           {"prediction", index_array(a.prediction)},
           {"none_selected", a.none_selected},
           {"utility", a.utility ? json(*a.utility) : json(nullptr)},
           {"parse_failed", a.parse_failed}};
    if (a.raw_output) j["raw_output"] = *a.raw_output;
    if (a.timestamp) j["timestamp"] = *a.timestamp;
    return j;
}

AnnotationRecord annotation_from_json(const json& j) {
    AnnotationRecord a;
    try {
        a.task_id = require<std::string>(j, "task_id");
        a.annotator_id = require<std::string>(j, "annotator_id");
        a.annotator_kind = parse_annotator_kind(require<std::string>(j, "annotator_kind"));
        a.prediction = index_set(require<json>(j, "prediction"));
        a.none_selected = j.value("none_selected", false);
        if (auto it = j.find("utility"); it != j.end() && !it->is_null()) a.utility = it->get<double>();
        a.parse_failed = j.value("parse_failed", false);
        if (auto it = j.find("raw_output"); it != j.end()) a.raw_output = it->get<std::string>();
        if (auto it = j.find("timestamp"); it != j.end()) a.timestamp = it->get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(fmt::format("malformed annotation: {}", e.what()));
    }
    if (a.utility && !(*a.utility >= 0.0 && *a.utility <= 100.0)) {
        throw ParseError(fmt::format("annotation for '{}': utility outside [0, 100]", a.task_id));
    }
    return a;
}

}  // namespace attrib::recovery
