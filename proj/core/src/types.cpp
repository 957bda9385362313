#include "attrib/types.hpp"

#include <chrono>
#include <ctime>

#include <fmt/format.h>

namespace attrib {

std::string_view to_string(EvidenceSource v) {
    return v == EvidenceSource::kHuman ? "human" : "machine";
}

std::string_view to_string(Setting v) { return v == Setting::kSample ? "sample" : "full"; }

std::string_view to_string(ControlKind v) {
    switch (v) {
        case ControlKind::kNone: return "none";
        case ControlKind::kPositive: return "positive";
        case ControlKind::kNegative: return "negative";
    }
    return "none";
}

std::string_view to_string(AnnotatorKind v) {
    switch (v) {
        case AnnotatorKind::kHuman: return "human";
        case AnnotatorKind::kLlm: return "llm";
        case AnnotatorKind::kNli: return "nli";
    }
    return "human";
}

EvidenceSource parse_evidence_source(std::string_view s) {
    if (s == "human") return EvidenceSource::kHuman;
    if (s == "machine") return EvidenceSource::kMachine;
    throw ParseError(fmt::format("unknown evidence source '{}' (expected human|machine)", s));
}

Setting parse_setting(std::string_view s) {
    if (s == "sample") return Setting::kSample;
    if (s == "full") return Setting::kFull;
    throw ParseError(fmt::format("unknown setting '{}' (expected sample|full)", s));
}

ControlKind parse_control_kind(std::string_view s) {
    if (s == "none") return ControlKind::kNone;
    if (s == "positive") return ControlKind::kPositive;
    if (s == "negative") return ControlKind::kNegative;
    throw ParseError(fmt::format("unknown control kind '{}'", s));
}

AnnotatorKind parse_annotator_kind(std::string_view s) {
    if (s == "human") return AnnotatorKind::kHuman;
    if (s == "llm") return AnnotatorKind::kLlm;
    if (s == "nli") return AnnotatorKind::kNli;
    throw ParseError(fmt::format("unknown annotator kind '{}'", s));
}

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace attrib
