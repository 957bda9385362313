#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "attrib/citeparse.hpp"
#include "attrib/types.hpp"

namespace attrib {

using ordered_json = nlohmann::ordered_json;

/// A numbered evidence passage.
struct Passage {
    EvidenceIndex index = 0;
    std::string text;

    bool operator==(const Passage&) const = default;
};

/// A fact-checking instance: claim, verdict, evidence, and the human-selected
/// evidence subsets (PolitiHop style).
struct ClaimRecord {
    std::string id;
    std::string claim;
    /// Free-form verdict label, e.g. "false" or "half-true".
    std::string veracity;
    std::vector<Passage> evidence;
    std::vector<IndexSet> gold_evidence_sets;

    IndexSet evidence_universe() const;
    const Passage* find_passage(EvidenceIndex index) const;
    /// Passages whose index is in `selection`, in corpus order.
    std::vector<Passage> passages(const IndexSet& selection) const;

    bool operator==(const ClaimRecord&) const = default;
};

/// Throws ParseError if an invariant of ClaimRecord does not hold.
void validate(const ClaimRecord& record);

ordered_json to_json(const ClaimRecord& record);
ClaimRecord claim_from_json(const nlohmann::ordered_json& j);

/// Parses a line-delimited corpus. Blank lines are skipped. Errors name the
/// 1-based line number.
std::vector<ClaimRecord> parse_corpus(std::istream& in);
std::vector<ClaimRecord> load_corpus(const std::filesystem::path& path);
void write_corpus(std::ostream& out, std::span<const ClaimRecord> records);

/// Picks one human-selected subset. Pure in (record.id, seed).
/// Throws PreconditionError("no human-selected evidence") when there is none.
IndexSet choose_gold_subset(const ClaimRecord& record, std::uint64_t seed);

/// A generated explanation with its segmentation and citations.
struct ExplanationRecord {
    std::string claim_id;
    std::string generator_id;
    EvidenceSource evidence_source = EvidenceSource::kHuman;
    /// Evidence handed to the generator; also the validation universe.
    IndexSet selected_evidence;
    std::string raw_text;
    std::vector<cite::Sentence> sentences;
    cite::CitationMap citation_map;
    std::vector<cite::ValidationIssue> issues;
    /// Raw evidence-selection output for machine-selected runs.
    std::optional<std::string> selection_output;

    bool operator==(const ExplanationRecord&) const = default;
};

/// Segments, extracts citations, and validates `raw_text`.
ExplanationRecord make_explanation(std::string claim_id,
                                   std::string generator_id,
                                   EvidenceSource source,
                                   IndexSet selected_evidence,
                                   std::string raw_text,
                                   const cite::Segmenter& segmenter = cite::segment_sentences);

/// Masks one evidence index of an explanation.
cite::MaskedExplanation mask_citation(const ExplanationRecord& explanation, EvidenceIndex evidence_idx);

ordered_json to_json(const ExplanationRecord& record);
/// Rebuilds the record; citations and issues are re-derived from the stored
/// sentences and must agree with what was stored.
ExplanationRecord explanation_from_json(const nlohmann::ordered_json& j);

/// Token counter used for descriptive statistics.
class Tokenizer {
public:
    virtual ~Tokenizer() = default;
    virtual std::size_t count(std::string_view text) const = 0;
};

/// Splits on Unicode whitespace (ASCII space class, NBSP, U+1680,
/// U+2000..U+200A, U+2028, U+2029, U+202F, U+205F, U+3000, U+0085).
class WhitespaceTokenizer final : public Tokenizer {
public:
    std::size_t count(std::string_view text) const override;
};

struct GroupStats {
    EvidenceSource evidence_source = EvidenceSource::kHuman;
    std::string generator_id;
    std::size_t explanations = 0;
    double mean_claim_tokens = 0.0;
    double mean_evidence_size = 0.0;
    double mean_explanation_tokens = 0.0;
};

struct StatsReport {
    std::size_t claims = 0;
    double mean_claim_tokens = 0.0;
    std::vector<GroupStats> groups;
};

/// Dataset statistics; groups are keyed by (evidence source, generator) and
/// sorted by that key. Throws PreconditionError if an explanation names an
/// unknown claim.
StatsReport corpus_stats(std::span<const ClaimRecord> records,
                         std::span<const ExplanationRecord> explanations,
                         const Tokenizer& tokenizer = WhitespaceTokenizer{});

ordered_json to_json(const StatsReport& report);

}  // namespace attrib
