#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "attrib/types.hpp"

namespace attrib::metrics {

/// Krippendorff's alpha for arbitrary labels and distance.
///
/// Units with fewer than two labels are not pairable and are dropped. With n
/// pairable labels in total and m_u labels in unit u:
///
///   D_o = 1/n · Σ_u 1/(m_u - 1) · Σ_{i≠j in u} d(l_i, l_j)
///   D_e = 1/(n(n - 1)) · Σ_{i≠j over all pairable labels} d(l_i, l_j)
///   α   = 1 - D_o / D_e
///
/// This is the coincidence-matrix form, written out pairwise so that it
/// works for distances on values that cannot be enumerated up front.
/// Throws PreconditionError with fewer than two pairable units, or when
/// D_e = 0 while D_o > 0. D_e = D_o = 0 gives 1.
template <typename Label, typename Distance>
double krippendorff_alpha(const std::vector<std::vector<Label>>& units, Distance distance) {
    std::vector<const std::vector<Label>*> pairable;
    std::size_t n = 0;
    for (const auto& u : units) {
        if (u.size() < 2) continue;
        pairable.push_back(&u);
        n += u.size();
    }
    if (pairable.size() < 2) throw PreconditionError("alpha needs at least two units with two or more labels");

    double observed = 0.0;
    std::vector<const Label*> pooled;
    pooled.reserve(n);
    for (const auto* u : pairable) {
        double within = 0.0;
        for (std::size_t i = 0; i < u->size(); ++i) {
            for (std::size_t j = 0; j < u->size(); ++j) {
                if (i != j) within += distance((*u)[i], (*u)[j]);
            }
            pooled.push_back(&(*u)[i]);
        }
        observed += within / static_cast<double>(u->size() - 1);
    }
    observed /= static_cast<double>(n);

    double expected = 0.0;
    for (std::size_t i = 0; i < pooled.size(); ++i) {
        for (std::size_t j = i + 1; j < pooled.size(); ++j) expected += 2.0 * distance(*pooled[i], *pooled[j]);
    }
    expected /= static_cast<double>(n) * static_cast<double>(n - 1);

    if (expected == 0.0) {
        if (observed == 0.0) return 1.0;
        throw PreconditionError("alpha undefined: no expected disagreement");
    }
    return 1.0 - observed / expected;
}

/// Same, for units given as (annotator, label) lists keyed by unit id.
template <typename Label, typename Distance>
double krippendorff_alpha(const std::map<std::string, std::vector<std::pair<std::string, Label>>>& units,
                          Distance distance) {
    std::vector<std::vector<Label>> plain;
    plain.reserve(units.size());
    for (const auto& [id, labels] : units) {
        auto& u = plain.emplace_back();
        for (const auto& [annotator, label] : labels) u.push_back(label);
    }
    return krippendorff_alpha(plain, distance);
}

}  // namespace attrib::metrics
