#pragma once

#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "attrib/types.hpp"

namespace attrib::cite {

/// One segmented sentence and its byte span in the source text.
struct Sentence {
    std::string text;
    Span span;

    bool operator==(const Sentence&) const = default;
};

/// Rule-based, dependency-free sentence segmenter.
///
/// A boundary is placed after a run of terminal punctuation (. ! ?) plus any
/// closing quotes or brackets when the next sentence starts with an
/// uppercase letter, digit, opening quote, or opening bracket after at least
/// one whitespace character. Periods after known abbreviations, single-letter
/// initials, and dotted tokens such as "U.S." never end a sentence. A citation
/// marker chain directly after terminal punctuation ("... false. [9] Next")
/// binds to the preceding sentence.
///
/// Sentence spans exclude leading and trailing whitespace; the bytes between
/// consecutive spans are whitespace only.
std::vector<Sentence> segment_sentences(std::string_view text);

/// Pluggable segmenter, defaulting to segment_sentences.
using Segmenter = std::function<std::vector<Sentence>(std::string_view)>;

/// One evidence index inside a marker, with the byte span of its digits.
struct Citation {
    EvidenceIndex index = 0;
    Span digits;

    bool operator==(const Citation&) const = default;
};

/// A bracketed marker such as "[9]" or "[2, 4]".
struct Marker {
    std::size_t sentence = 0;
    Span span;
    std::vector<Citation> citations;

    bool operator==(const Marker&) const = default;
};

/// Finds every well-formed marker in `text`. Offsets are relative to `text`;
/// the `sentence` field is left at 0.
std::vector<Marker> find_markers(std::string_view text);

/// Sentence position -> cited evidence indices, plus the markers they came from.
struct CitationMap {
    /// Indices per sentence, unique and ordered by first appearance. Sentences
    /// without markers have no entry.
    std::map<std::size_t, std::vector<EvidenceIndex>> entries;
    /// Every marker in document order, with offsets into the full raw text.
    std::vector<Marker> markers;
    /// Cited indices that are not in the evidence universe.
    IndexSet out_of_universe;

    /// All indices cited anywhere.
    IndexSet cited() const;
    /// Sentence positions whose entry contains `index`.
    IndexSet sentences_citing(EvidenceIndex index) const;

    bool operator==(const CitationMap&) const = default;
};

/// Builds the citation map for already-segmented sentences. Markers citing
/// indices outside `evidence_universe` are kept and flagged.
CitationMap extract_citation_map(std::span<const Sentence> sentences, const IndexSet& evidence_universe);

/// One deletion performed while masking: `removed` was erased at `offset`.
struct Removal {
    std::size_t offset = 0;
    std::string removed;

    bool operator==(const Removal&) const = default;
};

/// An explanation with every marker for one evidence index removed.
struct MaskedExplanation {
    EvidenceIndex masked_evidence_idx = 0;
    std::string masked_text;
    std::vector<std::string> masked_sentences;
    /// Positions of sentences that cited the masked index.
    IndexSet ground_truth;
    /// Deletions in application order. Offsets are valid against the text as it
    /// was immediately before each deletion.
    std::vector<Removal> removal_log;

    bool operator==(const MaskedExplanation&) const = default;
};

/// Removes every citation of `evidence_idx` from the explanation.
///
/// A marker citing only `evidence_idx` is deleted together with the
/// whitespace that would otherwise be left dangling; from a multi-index list
/// only the target index and one separator are deleted. Sentence partition is
/// preserved: masked_sentences[i] is sentences[i] with its deletions applied.
///
/// Throws PreconditionError("evidence uncited") if no sentence cites the index.
MaskedExplanation mask_citation(std::string_view raw_text,
                                std::span<const Sentence> sentences,
                                const CitationMap& citation_map,
                                EvidenceIndex evidence_idx);

/// Replays `log` backwards over `masked_text`, reconstructing the original.
std::string restore_original(std::string_view masked_text, std::span<const Removal> log);

enum class IssueKind { kOutOfUniverse, kUrl, kUncited, kCitedMoreThanOnce };

std::string_view to_string(IssueKind kind);

struct ValidationIssue {
    IssueKind kind = IssueKind::kOutOfUniverse;
    std::optional<EvidenceIndex> evidence_idx;
    std::optional<std::size_t> sentence;
    std::string message;

    bool operator==(const ValidationIssue&) const = default;
};

/// Reports citation noise: indices outside the universe, URL-like tokens in
/// sentences, universe indices never cited, and (when
/// `require_single_citation`) indices cited by more than one marker.
std::vector<ValidationIssue> validate_citations(const CitationMap& citation_map,
                                                const IndexSet& evidence_universe,
                                                std::span<const Sentence> sentences = {},
                                                bool require_single_citation = true);

}  // namespace attrib::cite
