#pragma once

#include <cmath>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "attrib/types.hpp"

namespace attrib::metrics {

struct Scores {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;

    bool operator==(const Scores&) const = default;
};

/// Set precision, recall and F1 of `pred` against `ref`.
///
/// Empty sets: both empty is a perfect score; exactly one empty scores zero.
/// F1 is evaluated as 2|pred ∩ ref| / (|pred| + |ref|), which equals the
/// harmonic mean of P and R but avoids its rounding.
Scores set_prf(const IndexSet& pred, const IndexSet& ref);

/// Component-wise mean. Throws PreconditionError on an empty list.
Scores aggregate_claim_full(std::span<const Scores> task_scores);

/// Evidence retrieval against the human-selected subset.
inline Scores retrieval_prf(const IndexSet& machine_set, const IndexSet& human_set) {
    return set_prf(machine_set, human_set);
}

enum class ThresholdMode {
    /// Every per-evidence F1 must reach the threshold.
    kAll,
    /// The claim's mean F1 must reach the threshold.
    kMean,
};

/// Fraction of claims counted as fully attributed. Claims with no scores are
/// ignored. Throws PreconditionError when no claim has scores or the
/// threshold is outside [0, 1].
double fully_attributed_proportion(const std::map<std::string, std::vector<double>>& per_claim,
                                   double threshold = 0.6,
                                   ThresholdMode mode = ThresholdMode::kAll);

/// -Σ p ln p over normalised counts. Throws PreconditionError if no count is
/// positive.
double annotation_entropy(std::span<const int> option_counts);
/// Entropy divided by ln(#options); 0 when there is a single option.
double normalized_entropy(std::span<const int> option_counts);
/// Entropy in bits.
inline double entropy_bits(std::span<const int> option_counts) {
    return annotation_entropy(option_counts) / std::log(2.0);
}

/// 1 - |A ∩ B| / |A ∪ B|, with d(∅, ∅) = 0.
double jaccard_distance(const IndexSet& a, const IndexSet& b);

inline constexpr int kOutOfTruth = -2;

/// (pred ∩ ref) ∪ {sentinel if pred has anything outside ref}.
IndexSet standardize_prediction(const IndexSet& pred, const IndexSet& ref, int sentinel = kOutOfTruth);

/// Union of all predictions. Throws PreconditionError on an empty list.
IndexSet union_annotations(std::span<const IndexSet> preds);

struct MeanStd {
    double mean = 0.0;
    /// Population standard deviation.
    double std = 0.0;
    std::size_t n = 0;
};

/// Mean and population std; all zero for an empty input.
MeanStd mean_std(std::span<const double> values);

}  // namespace attrib::metrics
