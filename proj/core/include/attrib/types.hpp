#pragma once

#include <cstddef>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>

namespace attrib {

/// Evidence passage index as numbered in the corpus.
using EvidenceIndex = int;
/// 0-based sentence position inside a (possibly masked) explanation.
using SentencePos = int;
/// Ordered set of evidence indices or sentence positions.
using IndexSet = std::set<int>;

/// Half-open byte range [begin, end) into a UTF-8 string.
struct Span {
    std::size_t begin = 0;
    std::size_t end = 0;

    std::size_t size() const { return end - begin; }
    bool contains(const Span& other) const { return begin <= other.begin && other.end <= end; }
    bool operator==(const Span&) const = default;
};

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input data (corpus lines, model outputs, tables).
class ParseError : public Error {
public:
    using Error::Error;
};

/// A domain precondition does not hold (e.g. nothing to mask).
class PreconditionError : public Error {
public:
    using Error::Error;
};

enum class EvidenceSource { kHuman, kMachine };
enum class Setting { kSample, kFull };
enum class ControlKind { kNone, kPositive, kNegative };
enum class AnnotatorKind { kHuman, kLlm, kNli };

std::string_view to_string(EvidenceSource v);
std::string_view to_string(Setting v);
std::string_view to_string(ControlKind v);
std::string_view to_string(AnnotatorKind v);

EvidenceSource parse_evidence_source(std::string_view s);
Setting parse_setting(std::string_view s);
ControlKind parse_control_kind(std::string_view s);
AnnotatorKind parse_annotator_kind(std::string_view s);

/// Current UTC time as ISO-8601 with second precision, e.g. 2024-05-01T12:00:00Z.
std::string utc_timestamp();

}  // namespace attrib
