#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "attrib/corpus.hpp"
#include "attrib/prompts.hpp"
#include "attrib/transport.hpp"

namespace attrib::gen {

/// One model drives both evidence selection and explanation generation.
struct GenerationConfig {
    std::string generator_id;
    double temperature = 0.0;
    int max_tokens = 1024;
    std::chrono::milliseconds timeout{60000};
    llm::RetryPolicy retry;
    /// Extra prompts after an unparseable selection reply.
    int parse_retries = 2;
    /// Requests per second across all workers; 0 disables throttling.
    double rate_limit = 0.0;
    std::string selection_template{prompts::kEvidenceSelection};
    std::string generation_template{prompts::kExplanationGeneration};
};

/// First bracketed integer list in `text`, restricted to `universe`.
/// Out-of-universe indices are dropped with a warning.
/// Throws ParseError("unparseable selection: ...") if there is no list.
IndexSet parse_selection_output(std::string_view text, const IndexSet& universe);

struct Selection {
    IndexSet indices;
    std::string raw_output;
};

/// Prompts for a subset of the claim's evidence. Throws TransportError after
/// exhausting retries, or ParseError carrying the raw text when no reply
/// yields a non-empty in-universe subset.
Selection select_evidence(const ClaimRecord& claim, llm::ChatTransport& transport, const GenerationConfig& config);

/// Generates, segments and citation-maps an explanation. Validation issues
/// are attached, not thrown. An empty completion is an error.
ExplanationRecord generate_explanation(const ClaimRecord& claim,
                                       const IndexSet& selected,
                                       EvidenceSource source,
                                       llm::ChatTransport& transport,
                                       const GenerationConfig& config);

struct GenerationOutcome {
    std::string claim_id;
    std::optional<ExplanationRecord> explanation;
    /// Set when the claim was skipped or failed.
    std::string error;
};

/// Runs both stages for every claim with at most `parallel` claims in
/// flight. Human-evidence runs use choose_gold_subset(claim, seed); claims
/// without gold sets are skipped with a warning. `gold_choices` receives the
/// subsets used. Outcomes are in input order.
std::vector<GenerationOutcome> run_generation(std::span<const ClaimRecord> claims,
                                              EvidenceSource source,
                                              std::uint64_t seed,
                                              llm::ChatTransport& transport,
                                              const GenerationConfig& config,
                                              int parallel = 1,
                                              std::map<std::string, IndexSet>* gold_choices = nullptr);

}  // namespace attrib::gen
