#pragma once

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "attrib/corpus.hpp"
#include "attrib/transport.hpp"

namespace attrib::prompts {

inline constexpr std::string_view kEvidenceSelection = "evidence-selection-v1";
inline constexpr std::string_view kExplanationGeneration = "explanation-generation-v1";
inline constexpr std::string_view kCitationRecovery = "citation-recovery-v1";

/// Template body for a registered id. Throws Error for unknown ids.
std::string_view template_text(std::string_view id);

/// Replaces each {name} in `tmpl` with vars[name] in a single left-to-right
/// pass; substituted text is never rescanned. Unknown placeholders throw.
std::string render(std::string_view tmpl, const std::map<std::string, std::string>& vars);

/// One-shot evidence selection prompt ("Reason [k]: text" lines).
std::vector<llm::ChatMessage> evidence_selection(const ClaimRecord& claim,
                                                 std::string_view template_id = kEvidenceSelection);

/// Zero-shot generation prompt; passages keep their corpus indices.
std::vector<llm::ChatMessage> explanation_generation(const ClaimRecord& claim,
                                                     std::span<const Passage> evidence,
                                                     std::string_view template_id = kExplanationGeneration);

/// Recovery prompt with sentences numbered from `numbering_base`.
std::vector<llm::ChatMessage> citation_recovery(std::string_view evidence_text,
                                                std::span<const std::string> sentences,
                                                int numbering_base = 0,
                                                std::string_view template_id = kCitationRecovery);

}  // namespace attrib::prompts
