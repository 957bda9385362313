#pragma once

#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "attrib/types.hpp"

namespace attrib::calib {

/// One utility rating s_ij of item i by annotator j.
struct UtilityObservation {
    std::string item_id;
    std::string annotator_id;
    double score = 0.0;

    bool operator==(const UtilityObservation&) const = default;
};

struct ZScored {
    std::vector<UtilityObservation> observations;
    /// Annotators with fewer than two distinct scores; their scores map to 0.
    std::vector<std::string> degenerate;
};

/// (s - mean) / std per annotator, population std. Order is preserved.
ZScored zscore_per_annotator(std::span<const UtilityObservation> observations);

struct EpOptions {
    /// Gamma prior on annotator accuracy: shape k and *rate* θ.
    double shape = 1.5;
    double rate = 0.5;
    double tol = 1e-6;
    int max_iter = 500;
    /// Step size of each site update: site += damping · (target - site).
    double damping = 0.8;
    /// Annotators whose accuracy is fixed to a known value.
    std::map<std::string, double> clamped_accuracy;
    /// Items to report even when they have no observations.
    std::vector<std::string> item_ids;
};

struct ItemPosterior {
    std::string item_id;
    double mean = 0.0;
    double variance = 1.0;
};

struct AnnotatorPosterior {
    std::string annotator_id;
    double shape = 0.0;
    double rate = 0.0;
    /// Clamped annotators keep the prior shape/rate and report `fixed`.
    bool clamped = false;
    double fixed = 0.0;

    double mean_accuracy() const { return clamped ? fixed : shape / rate; }
};

struct CalibrationResult {
    /// Sorted by item id.
    std::vector<ItemPosterior> items;
    /// Sorted by annotator id.
    std::vector<AnnotatorPosterior> annotators;
    bool converged = false;
    int iterations = 0;
    /// Largest site change in the last sweep.
    double final_delta = 0.0;
    /// Factor updates skipped because of an improper cavity or non-finite
    /// moments.
    std::size_t skipped_updates = 0;
};

/// Posterior over item utilities μ_i ~ N(0, 1) and annotator accuracies
/// τ_j ~ Gamma(shape, rate) given s_ij ~ N(μ_i, 1/τ_j), by expectation
/// propagation with one Gaussian and one Gamma site per observation.
///
/// Tilted moments are computed by quadrature over ln τ with μ integrated
/// analytically; the Gamma projection matches E[τ] and E[ln τ]. Factors are
/// swept in input order until no site natural parameter moves by more than
/// `tol`, or `max_iter` sweeps.
///
/// Throws PreconditionError on invalid priors, an empty input, or a repeated
/// (item, annotator) pair.
CalibrationResult ep_calibrate(std::span<const UtilityObservation> observations, const EpOptions& options = {});

/// Tab-separated "item_id annotator_id score" with a header row.
std::vector<UtilityObservation> read_observations_tsv(std::istream& in);
void write_observations_tsv(std::ostream& out, std::span<const UtilityObservation> observations);
/// "item_id posterior_mean posterior_var".
void write_items_tsv(std::ostream& out, const CalibrationResult& result);
/// "annotator_id shape rate".
void write_annotators_tsv(std::ostream& out, const CalibrationResult& result);

}  // namespace attrib::calib
