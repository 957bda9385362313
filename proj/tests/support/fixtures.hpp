#pragma once

#include <algorithm>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "attrib/corpus.hpp"

namespace fixtures {

inline std::filesystem::path data_dir() {
    return ATTRIB_TEST_DATA_DIR;
}

/// The worked example: passages 9, 10 and 11 of a PolitiHop claim.
inline attrib::ClaimRecord donation_claim() {
    attrib::ClaimRecord c;
    c.id = "politihop-facebook-donation";
    c.claim = "Facebook will donate a dollar for every share that a photograph of a sick boy receives.";
    c.veracity = "false";
    c.evidence = {
        {8, "A post circulating on Facebook shows a photo of a sick boy in a hospital bed."},
        {9, "Facebook does not make donations based on the number of shares or comments a particular post or "
            "photo may receive."},
        {10, "The post is an example of a long-running scam that is employed to generate user interaction by "
             "falsely claiming that shares or comments will help pay for a sick child's care."},
        {11, "In 2015, the Better Business Bureau released a statement about such scams..."},
    };
    c.gold_evidence_sets = {{9, 10, 11}};
    return c;
}

inline const char* donation_explanation() {
    return "The claim that Facebook will donate a dollar for every \"share\" that a photograph of a sick boy "
           "receives is false. It is crucial to note that Facebook does not make donations based on the number "
           "of shares or comments a particular post or photo may receive [9]. Such posts are typically part of a "
           "long-running scam that falsely claims sharing will financially contribute to the care of a sick child "
           "[10]. Though it might initially appear benign, engaging with such posts hands scammers a larger "
           "audience, which in turn empowers them to disseminate further deceptions [11].";
}

inline attrib::ExplanationRecord donation_record() {
    return attrib::make_explanation(donation_claim().id, "fixture", attrib::EvidenceSource::kHuman, {9, 10, 11},
                                    donation_explanation());
}

/// Random explanations over the marker grammar: [n], [n][m], [n,m,...],
/// markers mid-sentence, before the full stop and after it.
class ExplanationFuzzer {
public:
    explicit ExplanationFuzzer(std::uint64_t seed) : rng_(seed) {}

    std::string next() {
        const int sentences = pick(1, 7);
        std::string out;
        for (int s = 0; s < sentences; ++s) {
            if (s > 0) out += pick_of({" ", " ", "  ", "\n", " \n "});
            out += sentence(s == 0);
        }
        if (coin(0.1)) out += pick_of({" ", "\n"});
        return out;
    }

private:
    int pick(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
    bool coin(double p) { return std::bernoulli_distribution(p)(rng_); }
    std::string pick_of(std::initializer_list<const char*> xs) {
        return *(xs.begin() + pick(0, static_cast<int>(xs.size()) - 1));
    }

    std::string marker() {
        const int n = pick(1, 3);
        std::vector<int> idx;
        while (static_cast<int>(idx.size()) < n) {
            const int v = pick(0, 14);
            if (std::find(idx.begin(), idx.end(), v) == idx.end()) idx.push_back(v);
        }
        std::string out;
        if (n == 1 || coin(0.5)) {
            for (int v : idx) out += "[" + std::to_string(v) + "]";
        } else {
            const char* sep = coin(0.5) ? "," : ", ";
            out = "[";
            for (std::size_t i = 0; i < idx.size(); ++i) out += (i ? sep : "") + std::to_string(idx[i]);
            out += "]";
        }
        return out;
    }

    std::string sentence(bool first) {
        static const char* kWords[] = {"the",    "claim", "is",     "false", "reports", "show",   "that",
                                       "Dr.",    "Smith", "said",   "U.S.",  "debt",    "rose",   "posts",
                                       "scam",   "a",     "e.g.",   "(see",  "note)",   "\"true\"", "Jan.",
                                       "shares", "2015",  "3.5",    "of",    "donate",  "photo",  "no"};
        constexpr int kCount = sizeof(kWords) / sizeof(kWords[0]);
        std::string out = first ? "The" : pick_of({"Such", "It", "Records", "However", "This", "Officials"});
        const int words = pick(2, 10);
        bool placed = false;
        for (int w = 0; w < words; ++w) {
            out += " ";
            out += kWords[pick(0, kCount - 1)];
            if (coin(0.12)) {
                out += " " + marker();
                placed = true;
            }
        }
        // End on a plain word so no abbreviation sits before the terminator.
        out += " " + std::string(pick_of({"today", "again", "online", "widely"}));
        const std::string terminal = pick_of({".", ".", ".", "!", "?"});
        const int where = pick(0, 3);
        if (where == 0 || (!placed && where == 1)) {
            out += " " + marker() + terminal;
        } else if (where == 1) {
            out += terminal;
        } else if (where == 2) {
            out += terminal + " " + marker();
        } else {
            out += terminal;
        }
        return out;
    }

    std::mt19937_64 rng_;
};

}  // namespace fixtures
