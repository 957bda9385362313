#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "attrib/calibrate.hpp"
#include "attrib/corpus.hpp"
#include "attrib/metrics.hpp"
#include "attrib/recovery.hpp"
#include "attrib/run_store.hpp"

namespace attrib::report {

struct ReportOptions {
    double threshold = 0.6;
    metrics::ThresholdMode mode = metrics::ThresholdMode::kAll;
    calib::EpOptions ep;
};

struct TaskScore {
    std::string task_id;
    std::string claim_id;
    EvidenceIndex evidence_idx = 0;
    metrics::Scores scores;
    /// Records averaged into `scores` (more than one only for humans).
    std::size_t annotations = 0;
};

/// Scores of one annotator, or of all humans averaged per task ("human").
struct AnnotatorScores {
    std::string annotator;
    std::vector<TaskScore> tasks;
    std::map<std::string, metrics::Scores> claims;
    metrics::MeanStd precision, recall, f1;
    std::optional<double> fully_attributed;
    std::size_t parse_failures = 0;
};

struct Agreement {
    std::string a;
    std::string b;
    std::optional<double> alpha;
    std::size_t units = 0;
    std::string note;
};

struct TaskEntropy {
    std::string task_id;
    std::string claim_id;
    /// Human votes per sentence, then the "no sentence" option.
    std::vector<int> counts;
    double entropy = 0.0;
    double normalized = 0.0;
};

struct UtilityItem {
    std::string claim_id;
    double raw_mean = 0.0;
    std::size_t ratings = 0;
    std::optional<double> calibrated_mean;
    std::optional<double> calibrated_var;
};

struct ScoreReport {
    std::string run_id;
    std::string generator_id;
    EvidenceSource evidence_source = EvidenceSource::kHuman;
    Setting setting = Setting::kSample;
    double threshold = 0.6;
    StatsReport stats;
    std::vector<AnnotatorScores> annotators;
    std::vector<Agreement> agreement;
    std::vector<TaskEntropy> entropy;
    metrics::MeanStd entropy_summary;
    metrics::MeanStd normalized_entropy_summary;
    std::vector<UtilityItem> utility;
    std::optional<calib::CalibrationResult> calibration;
    /// Machine-selected runs: selected evidence against a human subset.
    std::optional<metrics::MeanStd> retrieval_precision, retrieval_recall, retrieval_f1;
};

/// Everything a report is computed from.
struct RunData {
    RunManifest manifest;
    std::vector<ClaimRecord> claims;
    std::vector<ExplanationRecord> explanations;
    std::vector<recovery::RecoveryTask> tasks;
    std::vector<recovery::AnnotationRecord> annotations;

    static RunData load(const RunStore& store);
};

/// Labels of `spec` for one task: "human:union" (one union set),
/// "human:all" (every human answer), or an exact annotator id.
std::vector<IndexSet> labels_for(const std::string& spec,
                                 const std::vector<const recovery::AnnotationRecord*>& records);

/// Alpha with Jaccard distance between two annotation sources over the
/// regular tasks both have answered; answers are standardised against the
/// task's ground truth first. With a == b the source's own labels form the
/// units (human inter-annotator agreement).
Agreement agreement(const RunData& data, const std::string& a, const std::string& b);

/// Pure function of the run contents.
ScoreReport build_report(const RunData& data, const ReportOptions& options = {});

nlohmann::ordered_json to_json(const ScoreReport& report);
/// Flat table: annotator, generator, evidence_source, setting, metric,
/// mean, std, n.
std::string to_tsv(const ScoreReport& report);

}  // namespace attrib::report
