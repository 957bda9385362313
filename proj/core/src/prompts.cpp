#include "attrib/prompts.hpp"

#include <fmt/format.h>

namespace attrib::prompts {
namespace {

constexpr std::string_view kSelectionTemplate =
    R"(Instructions: You are required to retrieve a subset of reasons from the provided full reasons. The sentences in this subset should be coherent and logically consistent, presenting the most crucial information necessary to establish the veracity of the claim. Aim for the minimum number of sentences in the subset while maintaining the completeness and clarity. When extract reasons, use [1,2,3]. At last, provide a justification explaining why they are good reasons and how they form a logically consistent reasoning process.
Demonstration:
Reasons:
Reason [0]: Anglerfish may have a reputation for being among the creepier-looking ocean-dwellers, but it’s not because they grow to be seven feet long, as a viral image on Facebook claims.
Reason [1]: The Jan. 12 post shows a young girl reaching toward what appears to be a very large anglerfish mounted on display at a museum.
Reason [2]: The text above the image reads, "So,... I’ve spent my entire life thinking the Deep Sea Angler Fish was about the size of a Nerf football.
Reason [3]: What’s more, the picture referenced in the Facebook post alleging that anglerfish are typically 7 feet is taken from the Australian Museum’s 2012 exhibit titled  "Deep Oceans".
Reason [4]: The anglerfish in the photo is actually a large-scale sculpture model of the fish made of plaster.
Reason [5]: When the exhibit opened in June 2012, The Sydney Morning Herald reported on how the exhibit’s team had created an "oversized anglerfish" and listed the many steps in making it: "Pieces such as the oversized anglerfish, with huge fangs and antenna-like flashing rod to attract prey, begin with cutting and welding a metal frame, then sculpting material over it and, finally, hand painting it," the story says.

Claim: The typical anglerfish is seven feet long.
Veracity: False
Extracted Reasons: [3,5]
Justification: Reason [3] establishes that the Facebook post's claim relies on a picture from the Australian Museum's 2012 exhibit. Reason [5] then reveals that the anglerfish in the exhibit is an oversized sculpture, not an actual specimen. Together, these reasons logically demonstrate that the viral claim of typical anglerfish being seven feet long is false, as it is based on a misrepresented image from an exhibit.

Here's the actual task:
Reasons:
{reasons}
Claim: {claim}
Veracity: {veracity}
Extracted Reasons:)";

constexpr std::string_view kGenerationTemplate =
    R"(Instructions: You are required to write an accurate, coherent and logically consistent explanation for the claim based on the given veracity and list of reasons in one paragraph. Use an unbiased and journalistic tone. When citing several search results, use [1][2][3]. Ensure that each reason is cited only once. Do not cite multiple reasons in a single sentence.

Reasons:
{reasons}

Claim: {claim}
Veracity: {veracity}
Explanation:)";

constexpr std::string_view kRecoveryTemplate =
    R"(Find the most suitable explanation sentence(s) that can cite the given reason sentence. Return the sentence number(s) separated by comma, e.g., 0 or 0,2. Return -1 if no suitable sentences are found. Consider semantic citation relationships, not just keyword matching. Only return numbers, DO NOT include any additional output.

Reason Sentence:
{evidence}

Explanation Sentences:
{sentences}

Answers:)";

std::vector<llm::ChatMessage> user_message(std::string content) {
    return {{"user", std::move(content)}};
}

}  // namespace

std::string_view template_text(std::string_view id) {
    if (id == kEvidenceSelection) return kSelectionTemplate;
    if (id == kExplanationGeneration) return kGenerationTemplate;
    if (id == kCitationRecovery) return kRecoveryTemplate;
    throw Error(fmt::format("unknown prompt template '{}'", id));
}

std::string render(std::string_view tmpl, const std::map<std::string, std::string>& vars) {
    std::string out;
    out.reserve(tmpl.size());
    std::size_t i = 0;
    while (i < tmpl.size()) {
        const auto open = tmpl.find('{', i);
        if (open == std::string_view::npos) {
            out.append(tmpl.substr(i));
            break;
        }
        const auto close = tmpl.find('}', open);
        if (close == std::string_view::npos) throw Error("unterminated placeholder in prompt template");
        out.append(tmpl.substr(i, open - i));
        const std::string name(tmpl.substr(open + 1, close - open - 1));
        auto it = vars.find(name);
        if (it == vars.end()) throw Error(fmt::format("no value for prompt placeholder '{}'", name));
        out += it->second;
        i = close + 1;
    }
    return out;
}

std::vector<llm::ChatMessage> evidence_selection(const ClaimRecord& claim, std::string_view template_id) {
    std::string reasons;
    for (const auto& p : claim.evidence) reasons += fmt::format("Reason [{}]: {}\n", p.index, p.text);
    if (!reasons.empty()) reasons.pop_back();
    return user_message(
        render(template_text(template_id), {{"reasons", reasons}, {"claim", claim.claim}, {"veracity", claim.veracity}}));
}

std::vector<llm::ChatMessage> explanation_generation(const ClaimRecord& claim,
                                                     std::span<const Passage> evidence,
                                                     std::string_view template_id) {
    std::string reasons;
    for (const auto& p : evidence) reasons += fmt::format("Reason [{}] {}\n", p.index, p.text);
    if (!reasons.empty()) reasons.pop_back();
    return user_message(
        render(template_text(template_id), {{"reasons", reasons}, {"claim", claim.claim}, {"veracity", claim.veracity}}));
}

std::vector<llm::ChatMessage> citation_recovery(std::string_view evidence_text,
                                                std::span<const std::string> sentences,
                                                int numbering_base,
                                                std::string_view template_id) {
    std::string listing;
    for (std::size_t i = 0; i < sentences.size(); ++i) {
        listing += fmt::format("{}. {}\n", static_cast<int>(i) + numbering_base, sentences[i]);
    }
    if (!listing.empty()) listing.pop_back();
    return user_message(
        render(template_text(template_id), {{"evidence", std::string(evidence_text)}, {"sentences", listing}}));
}

}  // namespace attrib::prompts
