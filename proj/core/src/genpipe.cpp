#include "attrib/genpipe.hpp"

#include <memory>
#include <regex>

#include <fmt/format.h>
#include <fmt/ranges.h>
#include <spdlog/spdlog.h>

#include "attrib/parallel.hpp"

namespace attrib::gen {
namespace {

llm::CompletionParams params_of(const GenerationConfig& config) {
    return {config.generator_id, config.temperature, config.max_tokens, config.timeout};
}

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

}  // namespace

IndexSet parse_selection_output(std::string_view text, const IndexSet& universe) {
    static const std::regex list(R"(\[\s*-?\d+(?:\s*,\s*-?\d+)*\s*\])");
    static const std::regex number(R"(-?\d+)");
    std::match_results<std::string_view::const_iterator> m;
    if (!std::regex_search(text.begin(), text.end(), m, list)) {
        throw ParseError(fmt::format("unparseable selection: {}", text));
    }
    const std::string body = m.str();
    IndexSet out;
    std::vector<std::string> dropped;
    for (auto it = std::sregex_iterator(body.begin(), body.end(), number); it != std::sregex_iterator(); ++it) {
        const std::string token = it->str();
        int value = 0;
        try {
            value = std::stoi(token);
        } catch (const std::out_of_range&) {
            dropped.push_back(token);
            continue;
        }
        if (universe.contains(value)) {
            out.insert(value);
        } else {
            dropped.push_back(token);
        }
    }
    if (!dropped.empty()) spdlog::warn("selection cites indices outside the evidence list: {}", fmt::join(dropped, ", "));
    return out;
}

Selection select_evidence(const ClaimRecord& claim, llm::ChatTransport& transport, const GenerationConfig& config) {
    if (claim.evidence.empty()) throw PreconditionError(fmt::format("claim '{}' has no evidence", claim.id));
    auto messages = prompts::evidence_selection(claim, config.selection_template);
    const auto universe = claim.evidence_universe();
    std::string reply;
    for (int attempt = 0; attempt <= config.parse_retries; ++attempt) {
        reply = llm::complete_with_retry(transport, messages, params_of(config), config.retry);
        try {
            auto indices = parse_selection_output(reply, universe);
            if (!indices.empty()) return {std::move(indices), reply};
        } catch (const ParseError&) {
        }
        spdlog::warn("claim '{}': selection reply not usable (attempt {})", claim.id, attempt + 1);
        messages.push_back({"assistant", reply});
        messages.push_back({"user", "Answer with the extracted reasons as a bracketed list of reason numbers, e.g. [1,2,3]."});
    }
    throw ParseError(fmt::format("unparseable selection for claim '{}': {}", claim.id, reply));
}

ExplanationRecord generate_explanation(const ClaimRecord& claim,
                                       const IndexSet& selected,
                                       EvidenceSource source,
                                       llm::ChatTransport& transport,
                                       const GenerationConfig& config) {
    if (selected.empty()) throw PreconditionError(fmt::format("claim '{}': no evidence selected", claim.id));
    const auto passages = claim.passages(selected);
    if (passages.size() != selected.size()) {
        throw PreconditionError(fmt::format("claim '{}': selected evidence not in the corpus", claim.id));
    }
    const auto messages = prompts::explanation_generation(claim, passages, config.generation_template);
    std::string text = trim(llm::complete_with_retry(transport, messages, params_of(config), config.retry));
    if (text.empty()) throw llm::TransportError(fmt::format("claim '{}': empty completion", claim.id), false);
    return make_explanation(claim.id, config.generator_id, source, selected, std::move(text));
}

std::vector<GenerationOutcome> run_generation(std::span<const ClaimRecord> claims,
                                              EvidenceSource source,
                                              std::uint64_t seed,
                                              llm::ChatTransport& transport,
                                              const GenerationConfig& config,
                                              int parallel,
                                              std::map<std::string, IndexSet>* gold_choices) {
    std::unique_ptr<llm::ThrottledTransport> throttled;
    llm::ChatTransport* backend = &transport;
    if (config.rate_limit > 0) {
        throttled = std::make_unique<llm::ThrottledTransport>(transport, config.rate_limit);
        backend = throttled.get();
    }

    std::vector<std::optional<IndexSet>> gold(claims.size());
    if (source == EvidenceSource::kHuman) {
        for (std::size_t i = 0; i < claims.size(); ++i) {
            if (claims[i].gold_evidence_sets.empty()) {
                spdlog::warn("claim '{}' skipped: no human-selected evidence", claims[i].id);
                continue;
            }
            gold[i] = choose_gold_subset(claims[i], seed);
            if (gold_choices != nullptr) (*gold_choices)[claims[i].id] = *gold[i];
        }
    }

    std::function<GenerationOutcome(std::size_t)> work = [&](std::size_t i) {
        const auto& claim = claims[i];
        GenerationOutcome outcome{claim.id, std::nullopt, {}};
        try {
            if (source == EvidenceSource::kHuman) {
                if (!gold[i]) {
                    outcome.error = "no human-selected evidence";
                    return outcome;
                }
                outcome.explanation = generate_explanation(claim, *gold[i], source, *backend, config);
            } else {
                auto selection = select_evidence(claim, *backend, config);
                outcome.explanation = generate_explanation(claim, selection.indices, source, *backend, config);
                outcome.explanation->selection_output = std::move(selection.raw_output);
            }
        } catch (const Error& e) {
            spdlog::error("claim '{}': {}", claim.id, e.what());
            outcome.error = e.what();
        }
        return outcome;
    };
    return parallel_map<GenerationOutcome>(claims.size(), parallel, work);
}

}  // namespace attrib::gen
