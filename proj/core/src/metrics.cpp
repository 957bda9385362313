#include "attrib/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

namespace attrib::metrics {
namespace {

std::size_t intersection_size(const IndexSet& a, const IndexSet& b) {
    std::size_t n = 0;
    auto i = a.begin();
    auto j = b.begin();
    while (i != a.end() && j != b.end()) {
        if (*i < *j) {
            ++i;
        } else if (*j < *i) {
            ++j;
        } else {
            ++n;
            ++i;
            ++j;
        }
    }
    return n;
}

}  // namespace

Scores set_prf(const IndexSet& pred, const IndexSet& ref) {
    if (pred.empty() && ref.empty()) return {1.0, 1.0, 1.0};
    if (pred.empty() || ref.empty()) return {0.0, 0.0, 0.0};
    const auto hit = static_cast<double>(intersection_size(pred, ref));
    const auto np = static_cast<double>(pred.size());
    const auto nr = static_cast<double>(ref.size());
    return {hit / np, hit / nr, 2.0 * hit / (np + nr)};
}

Scores aggregate_claim_full(std::span<const Scores> task_scores) {
    if (task_scores.empty()) throw PreconditionError("cannot aggregate an empty list of scores");
    Scores sum;
    for (const auto& s : task_scores) {
        sum.precision += s.precision;
        sum.recall += s.recall;
        sum.f1 += s.f1;
    }
    const auto n = static_cast<double>(task_scores.size());
    return {sum.precision / n, sum.recall / n, sum.f1 / n};
}

double fully_attributed_proportion(const std::map<std::string, std::vector<double>>& per_claim,
                                   double threshold,
                                   ThresholdMode mode) {
    if (!(threshold >= 0.0 && threshold <= 1.0)) {
        throw PreconditionError(fmt::format("threshold {} outside [0, 1]", threshold));
    }
    std::size_t claims = 0;
    std::size_t passing = 0;
    for (const auto& [id, f1s] : per_claim) {
        if (f1s.empty()) continue;
        ++claims;
        bool ok = false;
        if (mode == ThresholdMode::kAll) {
            ok = std::all_of(f1s.begin(), f1s.end(), [&](double f) { return f >= threshold; });
        } else {
            ok = std::accumulate(f1s.begin(), f1s.end(), 0.0) / static_cast<double>(f1s.size()) >= threshold;
        }
        if (ok) ++passing;
    }
    if (claims == 0) throw PreconditionError("no claim has attribution scores");
    return static_cast<double>(passing) / static_cast<double>(claims);
}

double annotation_entropy(std::span<const int> option_counts) {
    long long total = 0;
    for (int c : option_counts) {
        if (c < 0) throw PreconditionError("option counts must be non-negative");
        total += c;
    }
    if (total == 0) throw PreconditionError("entropy needs at least one positive count");
    double h = 0.0;
    for (int c : option_counts) {
        if (c == 0) continue;
        const double p = static_cast<double>(c) / static_cast<double>(total);
        h -= p * std::log(p);
    }
    return h;
}

double normalized_entropy(std::span<const int> option_counts) {
    const double h = annotation_entropy(option_counts);
    if (option_counts.size() < 2) return 0.0;
    return h / std::log(static_cast<double>(option_counts.size()));
}

double jaccard_distance(const IndexSet& a, const IndexSet& b) {
    if (a.empty() && b.empty()) return 0.0;
    const auto inter = intersection_size(a, b);
    const auto uni = a.size() + b.size() - inter;
    return 1.0 - static_cast<double>(inter) / static_cast<double>(uni);
}

IndexSet standardize_prediction(const IndexSet& pred, const IndexSet& ref, int sentinel) {
    IndexSet out;
    bool outside = false;
    for (int p : pred) {
        if (ref.contains(p)) {
            out.insert(p);
        } else {
            outside = true;
        }
    }
    if (outside) out.insert(sentinel);
    return out;
}

IndexSet union_annotations(std::span<const IndexSet> preds) {
    if (preds.empty()) throw PreconditionError("cannot take the union of no annotations");
    IndexSet out;
    for (const auto& p : preds) out.insert(p.begin(), p.end());
    return out;
}

MeanStd mean_std(std::span<const double> values) {
    MeanStd r;
    r.n = values.size();
    if (values.empty()) return r;
    const auto n = static_cast<double>(values.size());
    r.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : values) ss += (v - r.mean) * (v - r.mean);
    r.std = std::sqrt(ss / n);
    return r;
}

}  // namespace attrib::metrics
