#include "attrib/citeparse.hpp"

#include <algorithm>
#include <array>
#include <cctype>

#include <fmt/format.h>

namespace attrib::cite {
namespace {

constexpr std::size_t kMaxIndexDigits = 6;

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_upper(char c) { return c >= 'A' && c <= 'Z'; }
bool is_terminal(char c) { return c == '.' || c == '!' || c == '?'; }

// Multi-byte UTF-8 quotes: opening “ ‘ and closing ” ’.
constexpr std::string_view kOpenDouble = "\xE2\x80\x9C";
constexpr std::string_view kOpenSingle = "\xE2\x80\x98";
constexpr std::string_view kCloseDouble = "\xE2\x80\x9D";
constexpr std::string_view kCloseSingle = "\xE2\x80\x99";

bool starts_with_at(std::string_view text, std::size_t pos, std::string_view prefix) {
    return text.substr(pos, prefix.size()) == prefix;
}

// Length of a closing quote/bracket at pos, 0 if none.
std::size_t closer_length(std::string_view text, std::size_t pos) {
    const char c = text[pos];
    if (c == '"' || c == '\'' || c == ')') return 1;
    if (starts_with_at(text, pos, kCloseDouble) || starts_with_at(text, pos, kCloseSingle)) return 3;
    return 0;
}

bool starts_sentence(std::string_view text, std::size_t pos) {
    const char c = text[pos];
    if (is_upper(c) || is_digit(c) || c == '"' || c == '\'' || c == '(') return true;
    return starts_with_at(text, pos, kOpenDouble) || starts_with_at(text, pos, kOpenSingle);
}

std::size_t skip_spaces(std::string_view text, std::size_t pos) {
    while (pos < text.size() && is_space(text[pos])) ++pos;
    return pos;
}

constexpr std::array<std::string_view, 52> kAbbreviations = {
    "mr", "mrs", "ms", "dr", "prof", "sr", "jr", "st", "vs", "etc", "no", "inc",
    "ltd", "co", "corp", "gov", "sen", "rep", "gen", "col", "lt", "sgt", "capt", "mt",
    "fig", "approx", "dept", "est", "jan", "feb", "mar", "apr", "jun", "jul", "aug", "sep",
    "sept", "oct", "nov", "dec", "rev", "hon", "pres", "supt", "ave", "blvd", "rd", "vol",
    "pp", "al", "cf", "ca"};

// The token ending right before the period at `dot` looks like an abbreviation.
bool is_abbreviation(std::string_view text, std::size_t dot) {
    std::size_t begin = dot;
    while (begin > 0 && !is_space(text[begin - 1])) --begin;
    std::string_view word = text.substr(begin, dot - begin);
    while (!word.empty() && (word.front() == '(' || word.front() == '"' || word.front() == '\'')) {
        word.remove_prefix(1);
    }
    if (word.empty()) return false;
    if (word.find('.') != std::string_view::npos) return true;  // U.S, e.g, i.e
    if (word.size() == 1 && is_upper(word[0])) return true;     // initials
    std::string lower(word);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (lower == "no") {
        // "No. 5" but not "said no."
        const std::size_t next = skip_spaces(text, dot + 1);
        return next > dot + 1 && next < text.size() && is_digit(text[next]);
    }
    return std::find(kAbbreviations.begin(), kAbbreviations.end(), lower) != kAbbreviations.end();
}

// Parses one marker starting at text[pos] == '['.
std::optional<Marker> parse_marker(std::string_view text, std::size_t pos) {
    if (pos >= text.size() || text[pos] != '[') return std::nullopt;
    Marker marker;
    std::size_t i = pos + 1;
    auto skip_blank = [&] {
        while (i < text.size() && text[i] == ' ') ++i;
    };
    skip_blank();
    while (true) {
        const std::size_t digits_begin = i;
        while (i < text.size() && is_digit(text[i])) ++i;
        const std::size_t len = i - digits_begin;
        if (len == 0 || len > kMaxIndexDigits) return std::nullopt;
        int value = 0;
        for (std::size_t k = digits_begin; k < i; ++k) value = value * 10 + (text[k] - '0');
        marker.citations.push_back({value, {digits_begin, i}});
        skip_blank();
        if (i >= text.size()) return std::nullopt;
        if (text[i] == ']') {
            marker.span = {pos, i + 1};
            return marker;
        }
        if (text[i] != ',') return std::nullopt;
        ++i;
        skip_blank();
    }
}

// End of a chain of markers separated only by whitespace, starting at pos.
std::optional<std::size_t> marker_chain_end(std::string_view text, std::size_t pos) {
    auto first = parse_marker(text, pos);
    if (!first) return std::nullopt;
    std::size_t end = first->span.end;
    while (true) {
        const std::size_t next = skip_spaces(text, end);
        auto m = parse_marker(text, next);
        if (!m) return end;
        end = m->span.end;
    }
}

bool is_follow_punct(char c) {
    return c == '.' || c == ',' || c == ';' || c == ':' || c == '!' || c == '?';
}

// Deletion interval for removing a whole marker [a, b) from sentence text t.
Span whole_marker_deletion(std::string_view t, std::size_t a, std::size_t b) {
    std::size_t l = a;
    while (l > 0 && is_space(t[l - 1])) --l;
    std::size_t r = b;
    while (r < t.size() && is_space(t[r])) ++r;
    if (r == t.size() || is_follow_punct(t[r])) return {l, r};
    if (l == 0) return {a, r};
    if (l < a && r > b) return {a, r};
    return {a, b};
}

}  // namespace

std::vector<Sentence> segment_sentences(std::string_view text) {
    std::vector<Sentence> out;
    const std::size_t n = text.size();
    std::size_t start = skip_spaces(text, 0);
    std::size_t i = start;

    auto emit = [&](std::size_t end) {
        if (end > start) out.push_back({std::string(text.substr(start, end - start)), {start, end}});
    };

    while (i < n) {
        const char c = text[i];
        if (c == '[') {
            if (auto m = parse_marker(text, i)) {
                i = m->span.end;
                continue;
            }
        }
        if (!is_terminal(c)) {
            ++i;
            continue;
        }
        std::size_t end = i + 1;
        while (end < n && is_terminal(text[end])) ++end;
        const bool single_period = c == '.' && end == i + 1;
        while (end < n) {
            const std::size_t len = closer_length(text, end);
            if (len == 0) break;
            end += len;
        }

        std::size_t sentence_end = end;
        std::size_t next = skip_spaces(text, end);
        bool had_space = next > end;
        if (next < n && text[next] == '[') {
            if (auto chain_end = marker_chain_end(text, next)) {
                sentence_end = *chain_end;
                next = skip_spaces(text, sentence_end);
                had_space = next > sentence_end;
            }
        }
        if (next >= n) break;
        if (had_space && starts_sentence(text, next) && !(single_period && is_abbreviation(text, i))) {
            emit(sentence_end);
            start = next;
            i = next;
            continue;
        }
        i = end;
    }

    std::size_t tail = n;
    while (tail > start && is_space(text[tail - 1])) --tail;
    emit(tail);
    return out;
}

std::vector<Marker> find_markers(std::string_view text) {
    std::vector<Marker> out;
    std::size_t pos = 0;
    while ((pos = text.find('[', pos)) != std::string_view::npos) {
        if (auto m = parse_marker(text, pos)) {
            pos = m->span.end;
            out.push_back(std::move(*m));
        } else {
            ++pos;
        }
    }
    return out;
}

IndexSet CitationMap::cited() const {
    IndexSet out;
    for (const auto& [pos, indices] : entries) out.insert(indices.begin(), indices.end());
    return out;
}

IndexSet CitationMap::sentences_citing(EvidenceIndex index) const {
    IndexSet out;
    for (const auto& [pos, indices] : entries) {
        if (std::find(indices.begin(), indices.end(), index) != indices.end()) {
            out.insert(static_cast<int>(pos));
        }
    }
    return out;
}

CitationMap extract_citation_map(std::span<const Sentence> sentences, const IndexSet& evidence_universe) {
    CitationMap map;
    for (std::size_t s = 0; s < sentences.size(); ++s) {
        const auto& sentence = sentences[s];
        for (auto marker : find_markers(sentence.text)) {
            marker.sentence = s;
            marker.span.begin += sentence.span.begin;
            marker.span.end += sentence.span.begin;
            auto& entry = map.entries[s];
            for (auto& citation : marker.citations) {
                citation.digits.begin += sentence.span.begin;
                citation.digits.end += sentence.span.begin;
                if (std::find(entry.begin(), entry.end(), citation.index) == entry.end()) {
                    entry.push_back(citation.index);
                }
                if (!evidence_universe.contains(citation.index)) map.out_of_universe.insert(citation.index);
            }
            map.markers.push_back(std::move(marker));
        }
    }
    return map;
}

MaskedExplanation mask_citation(std::string_view raw_text,
                                std::span<const Sentence> sentences,
                                const CitationMap& citation_map,
                                EvidenceIndex evidence_idx) {
    MaskedExplanation out;
    out.masked_evidence_idx = evidence_idx;
    out.ground_truth = citation_map.sentences_citing(evidence_idx);
    if (out.ground_truth.empty()) {
        throw PreconditionError(fmt::format("evidence uncited: index {} has no citation marker", evidence_idx));
    }

    out.masked_sentences.reserve(sentences.size());
    for (const auto& s : sentences) out.masked_sentences.push_back(s.text);

    // Later sentences first, and right-to-left inside a sentence, so every
    // recorded offset is also an offset into the untouched prefix of raw_text.
    for (std::size_t s = sentences.size(); s-- > 0;) {
        if (!out.ground_truth.contains(static_cast<int>(s))) continue;
        std::string& text = out.masked_sentences[s];
        while (true) {
            auto markers = find_markers(text);
            auto it = std::find_if(markers.rbegin(), markers.rend(), [&](const Marker& m) {
                return std::any_of(m.citations.begin(), m.citations.end(),
                                   [&](const Citation& c) { return c.index == evidence_idx; });
            });
            if (it == markers.rend()) break;
            const Marker& m = *it;

            Span del;
            const bool only_target = std::all_of(m.citations.begin(), m.citations.end(),
                                                 [&](const Citation& c) { return c.index == evidence_idx; });
            if (only_target) {
                del = whole_marker_deletion(text, m.span.begin, m.span.end);
            } else {
                std::size_t k = m.citations.size();
                while (m.citations[--k].index != evidence_idx) {
                }
                if (k + 1 < m.citations.size()) {
                    del = {m.citations[k].digits.begin, m.citations[k + 1].digits.begin};
                } else {
                    del = {m.citations[k - 1].digits.end, m.citations[k].digits.end};
                }
            }
            out.removal_log.push_back({sentences[s].span.begin + del.begin, text.substr(del.begin, del.size())});
            text.erase(del.begin, del.size());
        }
    }

    out.masked_text.assign(raw_text);
    for (const auto& r : out.removal_log) out.masked_text.erase(r.offset, r.removed.size());
    return out;
}

std::string restore_original(std::string_view masked_text, std::span<const Removal> log) {
    std::string text(masked_text);
    for (auto it = log.rbegin(); it != log.rend(); ++it) {
        if (it->offset > text.size()) throw Error("restore_original: removal offset out of range");
        text.insert(it->offset, it->removed);
    }
    return text;
}

std::string_view to_string(IssueKind kind) {
    switch (kind) {
        case IssueKind::kOutOfUniverse: return "out_of_universe";
        case IssueKind::kUrl: return "url";
        case IssueKind::kUncited: return "uncited";
        case IssueKind::kCitedMoreThanOnce: return "cited_more_than_once";
    }
    return "unknown";
}

std::vector<ValidationIssue> validate_citations(const CitationMap& citation_map,
                                                const IndexSet& evidence_universe,
                                                std::span<const Sentence> sentences,
                                                bool require_single_citation) {
    std::vector<ValidationIssue> issues;

    for (EvidenceIndex idx : citation_map.cited()) {
        if (!evidence_universe.contains(idx)) {
            issues.push_back({IssueKind::kOutOfUniverse, idx, std::nullopt,
                              fmt::format("{} is outside the evidence universe", idx)});
        }
    }

    for (std::size_t s = 0; s < sentences.size(); ++s) {
        const std::string& text = sentences[s].text;
        for (std::string_view needle : {"http://", "https://", "www."}) {
            const auto pos = text.find(needle);
            if (pos == std::string::npos) continue;
            std::size_t end = pos;
            while (end < text.size() && !is_space(text[end])) ++end;
            issues.push_back({IssueKind::kUrl, std::nullopt, s,
                              fmt::format("sentence {} contains URL-like token '{}'", s,
                                          text.substr(pos, end - pos))});
            break;
        }
    }

    const IndexSet cited = citation_map.cited();
    for (EvidenceIndex idx : evidence_universe) {
        if (!cited.contains(idx)) {
            issues.push_back({IssueKind::kUncited, idx, std::nullopt, fmt::format("{} uncited", idx)});
        }
    }

    if (require_single_citation) {
        std::map<EvidenceIndex, std::size_t> counts;
        for (const auto& m : citation_map.markers) {
            for (const auto& c : m.citations) ++counts[c.index];
        }
        for (const auto& [idx, count] : counts) {
            if (count > 1) {
                issues.push_back({IssueKind::kCitedMoreThanOnce, idx, std::nullopt,
                                  fmt::format("{} cited more than once ({} times)", idx, count)});
            }
        }
    }
    return issues;
}

}  // namespace attrib::cite
