#include "attrib/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <tuple>

#include <fmt/format.h>

#include "attrib/rng.hpp"

namespace attrib {
namespace {

using json = nlohmann::ordered_json;

template <typename T>
T require(const json& j, const char* key) {
    if (!j.is_object()) throw ParseError("expected a JSON object");
    auto it = j.find(key);
    if (it == j.end()) throw ParseError(fmt::format("missing field '{}'", key));
    try {
        return it->template get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ParseError(fmt::format("field '{}' has the wrong type", key));
    }
}

bool blank(std::string_view s) {
    return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

json index_array(const IndexSet& s) {
    json a = json::array();
    for (int v : s) a.push_back(v);
    return a;
}

IndexSet index_set(const json& a, const char* what) {
    if (!a.is_array()) throw ParseError(fmt::format("'{}' must be an array of integers", what));
    IndexSet out;
    for (const auto& v : a) {
        if (!v.is_number_integer()) throw ParseError(fmt::format("'{}' must contain integers", what));
        out.insert(v.get<int>());
    }
    return out;
}

// Decodes one UTF-8 code point at text[i]; returns its length (>= 1).
std::size_t decode_utf8(std::string_view text, std::size_t i, char32_t& cp) {
    const auto b0 = static_cast<unsigned char>(text[i]);
    auto cont = [&](std::size_t k) -> unsigned {
        return i + k < text.size() ? static_cast<unsigned char>(text[i + k]) & 0x3Fu : 0u;
    };
    if (b0 < 0x80) {
        cp = b0;
        return 1;
    }
    if ((b0 >> 5) == 0x6) {
        cp = ((b0 & 0x1Fu) << 6) | cont(1);
        return 2;
    }
    if ((b0 >> 4) == 0xE) {
        cp = ((b0 & 0x0Fu) << 12) | (cont(1) << 6) | cont(2);
        return 3;
    }
    if ((b0 >> 3) == 0x1E) {
        cp = ((b0 & 0x07u) << 18) | (cont(1) << 12) | (cont(2) << 6) | cont(3);
        return 4;
    }
    cp = 0xFFFD;
    return 1;
}

bool is_unicode_space(char32_t cp) {
    switch (cp) {
        case 0x09: case 0x0A: case 0x0B: case 0x0C: case 0x0D: case 0x20:
        case 0x85: case 0xA0: case 0x1680: case 0x2028: case 0x2029:
        case 0x202F: case 0x205F: case 0x3000:
            return true;
        default:
            return cp >= 0x2000 && cp <= 0x200A;
    }
}

}  // namespace

IndexSet ClaimRecord::evidence_universe() const {
    IndexSet out;
    for (const auto& p : evidence) out.insert(p.index);
    return out;
}

const Passage* ClaimRecord::find_passage(EvidenceIndex index) const {
    auto it = std::find_if(evidence.begin(), evidence.end(), [&](const Passage& p) { return p.index == index; });
    return it == evidence.end() ? nullptr : &*it;
}

std::vector<Passage> ClaimRecord::passages(const IndexSet& selection) const {
    std::vector<Passage> out;
    for (const auto& p : evidence) {
        if (selection.contains(p.index)) out.push_back(p);
    }
    return out;
}

void validate(const ClaimRecord& record) {
    if (record.id.empty()) throw ParseError("claim id must be non-empty");
    if (blank(record.claim)) throw ParseError(fmt::format("claim '{}' has empty text", record.id));
    std::set<int> seen;
    for (const auto& p : record.evidence) {
        if (p.index < 0) throw ParseError(fmt::format("claim '{}': negative evidence index {}", record.id, p.index));
        if (!seen.insert(p.index).second) {
            throw ParseError(fmt::format("claim '{}': duplicate evidence index {}", record.id, p.index));
        }
        if (blank(p.text)) throw ParseError(fmt::format("claim '{}': evidence {} is empty", record.id, p.index));
    }
    for (const auto& gold : record.gold_evidence_sets) {
        for (int idx : gold) {
            if (!seen.contains(idx)) {
                throw ParseError(fmt::format("claim '{}': gold evidence index {} is not in the evidence list",
                                             record.id, idx));
            }
        }
    }
}

json to_json(const ClaimRecord& record) {
    json evidence = json::array();
    for (const auto& p : record.evidence) evidence.push_back(json{{"idx", p.index}, {"text", p.text}});
    json gold = json::array();
    for (const auto& g : record.gold_evidence_sets) gold.push_back(index_array(g));
    return json{{"id", record.id},
                {"claim", record.claim},
                {"veracity", record.veracity},
                {"evidence", std::move(evidence)},
                {"gold_evidence_sets", std::move(gold)}};
}

ClaimRecord claim_from_json(const json& j) {
    ClaimRecord r;
    r.id = require<std::string>(j, "id");
    r.claim = require<std::string>(j, "claim");
    r.veracity = require<std::string>(j, "veracity");
    const auto evidence = require<json>(j, "evidence");
    if (!evidence.is_array()) throw ParseError("'evidence' must be an array");
    for (const auto& e : evidence) {
        r.evidence.push_back({require<int>(e, "idx"), require<std::string>(e, "text")});
    }
    const auto gold = require<json>(j, "gold_evidence_sets");
    if (!gold.is_array()) throw ParseError("'gold_evidence_sets' must be an array");
    for (const auto& g : gold) r.gold_evidence_sets.push_back(index_set(g, "gold_evidence_sets"));
    validate(r);
    return r;
}

std::vector<ClaimRecord> parse_corpus(std::istream& in) {
    std::vector<ClaimRecord> out;
    std::set<std::string> ids;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (blank(line)) continue;
        try {
            json j;
            try {
                j = json::parse(line);
            } catch (const nlohmann::json::parse_error& e) {
                throw ParseError(fmt::format("malformed JSON ({})", e.what()));
            }
            ClaimRecord r = claim_from_json(j);
            if (!ids.insert(r.id).second) throw ParseError(fmt::format("duplicate claim id '{}'", r.id));
            out.push_back(std::move(r));
        } catch (const ParseError& e) {
            throw ParseError(fmt::format("line {}: {}", line_no, e.what()));
        }
    }
    return out;
}

std::vector<ClaimRecord> load_corpus(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(fmt::format("cannot open corpus file '{}'", path.string()));
    return parse_corpus(in);
}

void write_corpus(std::ostream& out, std::span<const ClaimRecord> records) {
    for (const auto& r : records) out << to_json(r).dump() << '\n';
}

IndexSet choose_gold_subset(const ClaimRecord& record, std::uint64_t seed) {
    if (record.gold_evidence_sets.empty()) {
        throw PreconditionError(fmt::format("no human-selected evidence for claim '{}'", record.id));
    }
    auto engine = substream(seed, "gold-subset", record.id);
    return record.gold_evidence_sets[uniform_index(engine, record.gold_evidence_sets.size())];
}

ExplanationRecord make_explanation(std::string claim_id,
                                   std::string generator_id,
                                   EvidenceSource source,
                                   IndexSet selected_evidence,
                                   std::string raw_text,
                                   const cite::Segmenter& segmenter) {
    ExplanationRecord r;
    r.claim_id = std::move(claim_id);
    r.generator_id = std::move(generator_id);
    r.evidence_source = source;
    r.selected_evidence = std::move(selected_evidence);
    r.raw_text = std::move(raw_text);
    r.sentences = segmenter(r.raw_text);
    r.citation_map = cite::extract_citation_map(r.sentences, r.selected_evidence);
    r.issues = cite::validate_citations(r.citation_map, r.selected_evidence, r.sentences);
    return r;
}

cite::MaskedExplanation mask_citation(const ExplanationRecord& explanation, EvidenceIndex evidence_idx) {
    return cite::mask_citation(explanation.raw_text, explanation.sentences, explanation.citation_map, evidence_idx);
}

json to_json(const ExplanationRecord& r) {
    json sentences = json::array();
    for (const auto& s : r.sentences) {
        sentences.push_back(json{{"text", s.text}, {"begin", s.span.begin}, {"end", s.span.end}});
    }
    json citations = json::array();
    for (const auto& [pos, indices] : r.citation_map.entries) citations.push_back(json::array({pos, indices}));
    json issues = json::array();
    for (const auto& issue : r.issues) {
        json i{{"kind", cite::to_string(issue.kind)}};
        if (issue.evidence_idx) i["evidence_idx"] = *issue.evidence_idx;
        if (issue.sentence) i["sentence"] = *issue.sentence;
        i["message"] = issue.message;
        issues.push_back(std::move(i));
    }
    json j{{"claim_id", r.claim_id},
           {"generator_id", r.generator_id},
           {"evidence_source", to_string(r.evidence_source)},
           {"selected_evidence", index_array(r.selected_evidence)},
           {"raw_text", r.raw_text},
           {"sentences", std::move(sentences)},
           {"citations", std::move(citations)},
           {"issues", std::move(issues)}};
    if (r.selection_output) j["selection_output"] = *r.selection_output;
    return j;
}

ExplanationRecord explanation_from_json(const json& j) {
    ExplanationRecord r;
    r.claim_id = require<std::string>(j, "claim_id");
    r.generator_id = require<std::string>(j, "generator_id");
    r.evidence_source = parse_evidence_source(require<std::string>(j, "evidence_source"));
    r.selected_evidence = index_set(require<json>(j, "selected_evidence"), "selected_evidence");
    r.raw_text = require<std::string>(j, "raw_text");
    std::size_t prev_end = 0;
    for (const auto& s : require<json>(j, "sentences")) {
        cite::Sentence sentence{require<std::string>(s, "text"),
                                {require<std::size_t>(s, "begin"), require<std::size_t>(s, "end")}};
        if (sentence.span.begin < prev_end || sentence.span.end > r.raw_text.size() ||
            sentence.span.end < sentence.span.begin ||
            r.raw_text.compare(sentence.span.begin, sentence.span.size(), sentence.text) != 0 ||
            !blank(std::string_view(r.raw_text).substr(prev_end, sentence.span.begin - prev_end))) {
            throw ParseError(fmt::format("explanation '{}': sentence spans do not match raw_text", r.claim_id));
        }
        prev_end = sentence.span.end;
        r.sentences.push_back(std::move(sentence));
    }
    if (!blank(std::string_view(r.raw_text).substr(prev_end))) {
        throw ParseError(fmt::format("explanation '{}': text after the last sentence", r.claim_id));
    }
    r.citation_map = cite::extract_citation_map(r.sentences, r.selected_evidence);
    r.issues = cite::validate_citations(r.citation_map, r.selected_evidence, r.sentences);
    if (auto it = j.find("selection_output"); it != j.end()) r.selection_output = it->get<std::string>();

    const json stored = require<json>(j, "citations");
    json derived = json::array();
    for (const auto& [pos, indices] : r.citation_map.entries) derived.push_back(json::array({pos, indices}));
    if (stored != derived) {
        throw ParseError(fmt::format("explanation '{}': stored citations disagree with the text", r.claim_id));
    }
    return r;
}

std::size_t WhitespaceTokenizer::count(std::string_view text) const {
    std::size_t tokens = 0;
    bool in_token = false;
    for (std::size_t i = 0; i < text.size();) {
        char32_t cp;
        i += decode_utf8(text, i, cp);
        if (is_unicode_space(cp)) {
            in_token = false;
        } else if (!in_token) {
            in_token = true;
            ++tokens;
        }
    }
    return tokens;
}

StatsReport corpus_stats(std::span<const ClaimRecord> records,
                         std::span<const ExplanationRecord> explanations,
                         const Tokenizer& tokenizer) {
    StatsReport report;
    report.claims = records.size();
    std::map<std::string, double> claim_tokens;
    double total = 0.0;
    for (const auto& r : records) {
        const double n = static_cast<double>(tokenizer.count(r.claim));
        claim_tokens[r.id] = n;
        total += n;
    }
    if (!records.empty()) report.mean_claim_tokens = total / static_cast<double>(records.size());

    struct Acc {
        std::size_t n = 0;
        double claim = 0.0, evidence = 0.0, explanation = 0.0;
    };
    std::map<std::pair<int, std::string>, Acc> groups;
    for (const auto& e : explanations) {
        auto it = claim_tokens.find(e.claim_id);
        if (it == claim_tokens.end()) {
            throw PreconditionError(fmt::format("explanation references unknown claim '{}'", e.claim_id));
        }
        auto& acc = groups[{static_cast<int>(e.evidence_source), e.generator_id}];
        ++acc.n;
        acc.claim += it->second;
        acc.evidence += static_cast<double>(e.selected_evidence.size());
        acc.explanation += static_cast<double>(tokenizer.count(e.raw_text));
    }
    for (const auto& [key, acc] : groups) {
        const double n = static_cast<double>(acc.n);
        report.groups.push_back({static_cast<EvidenceSource>(key.first), key.second, acc.n, acc.claim / n,
                                 acc.evidence / n, acc.explanation / n});
    }
    return report;
}

json to_json(const StatsReport& report) {
    json groups = json::array();
    for (const auto& g : report.groups) {
        groups.push_back(json{{"evidence_source", to_string(g.evidence_source)},
                              {"generator_id", g.generator_id},
                              {"explanations", g.explanations},
                              {"mean_claim_tokens", g.mean_claim_tokens},
                              {"mean_evidence_size", g.mean_evidence_size},
                              {"mean_explanation_tokens", g.mean_explanation_tokens}});
    }
    return json{{"claims", report.claims}, {"mean_claim_tokens", report.mean_claim_tokens}, {"groups", groups}};
}

}  // namespace attrib
