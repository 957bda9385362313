#include "attrib/report.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "attrib/agreement.hpp"

namespace attrib::report {
namespace {

using json = nlohmann::ordered_json;
using recovery::AnnotationRecord;
using recovery::RecoveryTask;

constexpr const char* kHumanGroup = "human";

/// Rounds to 12 significant digits so reports do not depend on the last bits
/// of libm results.
double num(double x) {
    if (!std::isfinite(x)) return x;
    if (x == 0.0) return 0.0;
    return std::stod(fmt::format("{:.12g}", x));
}

json opt_num(const std::optional<double>& x) {
    return x ? json(num(*x)) : json(nullptr);
}

json scores_json(const metrics::Scores& s) {
    return json{{"precision", num(s.precision)}, {"recall", num(s.recall)}, {"f1", num(s.f1)}};
}

json mean_std_json(const metrics::MeanStd& m) {
    return json{{"mean", num(m.mean)}, {"std", num(m.std)}, {"n", m.n}};
}

struct Index {
    /// Regular tasks in store order.
    std::vector<const RecoveryTask*> tasks;
    std::map<std::string, std::vector<const AnnotationRecord*>> by_task;
    std::set<std::string> automatic;
    bool has_humans = false;
};

Index index_of(const RunData& data) {
    Index ix;
    std::set<std::string> regular;
    for (const auto& t : data.tasks) {
        if (t.is_control()) continue;
        ix.tasks.push_back(&t);
        regular.insert(t.task_id);
    }
    for (const auto& a : data.annotations) {
        if (!regular.contains(a.task_id)) continue;
        ix.by_task[a.task_id].push_back(&a);
        if (a.annotator_kind == AnnotatorKind::kHuman) {
            ix.has_humans = true;
        } else {
            ix.automatic.insert(a.annotator_id);
        }
    }
    for (auto& [id, records] : ix.by_task) {
        std::sort(records.begin(), records.end(),
                  [](const auto* x, const auto* y) { return x->annotator_id < y->annotator_id; });
    }
    return ix;
}

AnnotatorScores score_annotator(const Index& ix, const std::string& group, const ReportOptions& options) {
    AnnotatorScores out;
    out.annotator = group;
    const bool human = group == kHumanGroup;
    std::map<std::string, std::vector<metrics::Scores>> per_claim;
    for (const auto* t : ix.tasks) {
        auto it = ix.by_task.find(t->task_id);
        if (it == ix.by_task.end()) continue;
        std::vector<metrics::Scores> scores;
        for (const auto* a : it->second) {
            const bool match = human ? a->annotator_kind == AnnotatorKind::kHuman : a->annotator_id == group;
            if (!match) continue;
            scores.push_back(metrics::set_prf(a->prediction, t->ground_truth));
            if (a->parse_failed) ++out.parse_failures;
        }
        if (scores.empty()) continue;
        const auto mean = metrics::aggregate_claim_full(scores);
        out.tasks.push_back({t->task_id, t->claim_id, t->masked_evidence_idx, mean, scores.size()});
        per_claim[t->claim_id].push_back(mean);
    }
    std::vector<double> p, r, f;
    std::map<std::string, std::vector<double>> f1s;
    for (const auto& [claim, scores] : per_claim) {
        const auto agg = metrics::aggregate_claim_full(scores);
        out.claims[claim] = agg;
        p.push_back(agg.precision);
        r.push_back(agg.recall);
        f.push_back(agg.f1);
        for (const auto& s : scores) f1s[claim].push_back(s.f1);
    }
    out.precision = metrics::mean_std(p);
    out.recall = metrics::mean_std(r);
    out.f1 = metrics::mean_std(f);
    if (!f1s.empty()) out.fully_attributed = metrics::fully_attributed_proportion(f1s, options.threshold, options.mode);
    return out;
}

std::vector<TaskEntropy> human_entropy(const Index& ix) {
    std::vector<TaskEntropy> out;
    for (const auto* t : ix.tasks) {
        auto it = ix.by_task.find(t->task_id);
        if (it == ix.by_task.end()) continue;
        std::vector<int> counts(t->sentence_count() + 1, 0);
        bool any = false;
        for (const auto* a : it->second) {
            if (a->annotator_kind != AnnotatorKind::kHuman) continue;
            any = true;
            if (a->prediction.empty()) {
                ++counts.back();
            } else {
                for (int pos : a->prediction) {
                    if (pos >= 0 && static_cast<std::size_t>(pos) < t->sentence_count()) ++counts[pos];
                }
            }
        }
        if (!any) continue;
        out.push_back({t->task_id, t->claim_id, counts, metrics::annotation_entropy(counts),
                       metrics::normalized_entropy(counts)});
    }
    return out;
}

void add_utility(const RunData& data, const ReportOptions& options, ScoreReport& report) {
    std::map<std::string, const RecoveryTask*> tasks;
    for (const auto& t : data.tasks) tasks[t.task_id] = &t;
    // (claim, annotator) -> ratings; one annotator may rate a claim via
    // several tasks, which are averaged.
    std::map<std::pair<std::string, std::string>, std::vector<double>> ratings;
    for (const auto& a : data.annotations) {
        if (a.annotator_kind != AnnotatorKind::kHuman || !a.utility) continue;
        auto it = tasks.find(a.task_id);
        if (it == tasks.end()) continue;
        ratings[{it->second->claim_id, a.annotator_id}].push_back(*a.utility);
    }
    if (ratings.empty()) return;

    std::vector<calib::UtilityObservation> obs;
    std::map<std::string, std::vector<double>> raw;
    for (const auto& [key, values] : ratings) {
        double sum = 0.0;
        for (double v : values) sum += v;
        const double mean = sum / static_cast<double>(values.size());
        obs.push_back({key.first, key.second, mean});
        raw[key.first].push_back(mean);
    }
    const auto z = calib::zscore_per_annotator(obs);
    report.calibration = calib::ep_calibrate(z.observations, options.ep);
    std::map<std::string, const calib::ItemPosterior*> posterior;
    for (const auto& item : report.calibration->items) posterior[item.item_id] = &item;
    for (const auto& [claim, values] : raw) {
        UtilityItem u;
        u.claim_id = claim;
        u.ratings = values.size();
        u.raw_mean = metrics::mean_std(values).mean;
        if (auto it = posterior.find(claim); it != posterior.end()) {
            u.calibrated_mean = it->second->mean;
            u.calibrated_var = it->second->variance;
        }
        report.utility.push_back(u);
    }
}

void add_retrieval(const RunData& data, ScoreReport& report) {
    if (data.manifest.evidence_source != EvidenceSource::kMachine) return;
    std::map<std::string, const ClaimRecord*> claims;
    for (const auto& c : data.claims) claims[c.id] = &c;
    std::vector<double> p, r, f;
    for (const auto& e : data.explanations) {
        auto it = claims.find(e.claim_id);
        if (it == claims.end() || it->second->gold_evidence_sets.empty()) continue;
        const auto gold = choose_gold_subset(*it->second, data.manifest.seed);
        const auto s = metrics::retrieval_prf(e.selected_evidence, gold);
        p.push_back(s.precision);
        r.push_back(s.recall);
        f.push_back(s.f1);
    }
    if (p.empty()) return;
    report.retrieval_precision = metrics::mean_std(p);
    report.retrieval_recall = metrics::mean_std(r);
    report.retrieval_f1 = metrics::mean_std(f);
}

}  // namespace

RunData RunData::load(const RunStore& store) {
    return {store.manifest(), store.corpus(), store.explanations(), store.tasks(), store.annotations()};
}

std::vector<IndexSet> labels_for(const std::string& spec, const std::vector<const AnnotationRecord*>& records) {
    std::vector<IndexSet> humans;
    for (const auto* a : records) {
        if (a->annotator_kind == AnnotatorKind::kHuman) humans.push_back(a->prediction);
    }
    if (spec == "human:all") return humans;
    if (spec == "human:union") {
        if (humans.empty()) return {};
        return {metrics::union_annotations(humans)};
    }
    for (const auto* a : records) {
        if (a->annotator_id == spec) return {a->prediction};
    }
    return {};
}

Agreement agreement(const RunData& data, const std::string& a, const std::string& b) {
    const Index ix = index_of(data);
    Agreement out{a, b, std::nullopt, 0, {}};
    std::vector<std::vector<IndexSet>> units;
    for (const auto* t : ix.tasks) {
        auto it = ix.by_task.find(t->task_id);
        if (it == ix.by_task.end()) continue;
        auto la = labels_for(a, it->second);
        std::vector<IndexSet> unit;
        if (a == b) {
            unit = std::move(la);
        } else {
            auto lb = labels_for(b, it->second);
            if (la.empty() || lb.empty()) continue;
            unit = std::move(la);
            unit.insert(unit.end(), lb.begin(), lb.end());
        }
        for (auto& label : unit) label = metrics::standardize_prediction(label, t->ground_truth);
        if (unit.size() >= 2) units.push_back(std::move(unit));
    }
    out.units = units.size();
    try {
        out.alpha = metrics::krippendorff_alpha(units, metrics::jaccard_distance);
    } catch (const PreconditionError& e) {
        out.note = e.what();
    }
    return out;
}

ScoreReport build_report(const RunData& data, const ReportOptions& options) {
    ScoreReport report;
    report.run_id = data.manifest.run_id;
    report.generator_id = data.manifest.generator_id;
    report.evidence_source = data.manifest.evidence_source;
    report.setting = data.manifest.setting;
    report.threshold = options.threshold;
    report.stats = corpus_stats(data.claims, data.explanations);

    const Index ix = index_of(data);
    if (ix.has_humans) report.annotators.push_back(score_annotator(ix, kHumanGroup, options));
    for (const auto& id : ix.automatic) report.annotators.push_back(score_annotator(ix, id, options));

    if (ix.has_humans) {
        report.agreement.push_back(agreement(data, "human:all", "human:all"));
        for (const auto& id : ix.automatic) report.agreement.push_back(agreement(data, id, "human:union"));
    }

    report.entropy = human_entropy(ix);
    std::vector<double> h, hn;
    for (const auto& e : report.entropy) {
        h.push_back(e.entropy);
        hn.push_back(e.normalized);
    }
    report.entropy_summary = metrics::mean_std(h);
    report.normalized_entropy_summary = metrics::mean_std(hn);

    add_utility(data, options, report);
    add_retrieval(data, report);
    return report;
}

json to_json(const ScoreReport& r) {
    json annotators = json::array();
    for (const auto& a : r.annotators) {
        json tasks = json::array();
        for (const auto& t : a.tasks) {
            json row{{"task_id", t.task_id}, {"claim_id", t.claim_id}, {"evidence_idx", t.evidence_idx}};
            row.update(scores_json(t.scores));
            row["annotations"] = t.annotations;
            tasks.push_back(std::move(row));
        }
        json claims = json::object();
        for (const auto& [id, s] : a.claims) claims[id] = scores_json(s);
        annotators.push_back(json{{"annotator", a.annotator},
                                  {"precision", mean_std_json(a.precision)},
                                  {"recall", mean_std_json(a.recall)},
                                  {"f1", mean_std_json(a.f1)},
                                  {"fully_attributed", opt_num(a.fully_attributed)},
                                  {"parse_failures", a.parse_failures},
                                  {"claims", std::move(claims)},
                                  {"tasks", std::move(tasks)}});
    }
    json agreement = json::array();
    for (const auto& g : r.agreement) {
        json row{{"a", g.a}, {"b", g.b}, {"alpha", opt_num(g.alpha)}, {"units", g.units}};
        if (!g.note.empty()) row["note"] = g.note;
        agreement.push_back(std::move(row));
    }
    json entropy = json::array();
    for (const auto& e : r.entropy) {
        entropy.push_back(json{{"task_id", e.task_id},
                               {"claim_id", e.claim_id},
                               {"counts", e.counts},
                               {"entropy", num(e.entropy)},
                               {"normalized", num(e.normalized)}});
    }
    json utility = json::array();
    for (const auto& u : r.utility) {
        utility.push_back(json{{"claim_id", u.claim_id},
                               {"ratings", u.ratings},
                               {"raw_mean", num(u.raw_mean)},
                               {"calibrated_mean", opt_num(u.calibrated_mean)},
                               {"calibrated_var", opt_num(u.calibrated_var)}});
    }
    json calibration = nullptr;
    if (r.calibration) {
        json annotators_cal = json::array();
        for (const auto& a : r.calibration->annotators) {
            annotators_cal.push_back(
                json{{"annotator_id", a.annotator_id}, {"shape", num(a.shape)}, {"rate", num(a.rate)}});
        }
        calibration = json{{"converged", r.calibration->converged},
                           {"iterations", r.calibration->iterations},
                           {"skipped_updates", r.calibration->skipped_updates},
                           {"annotators", std::move(annotators_cal)}};
    }
    json retrieval = nullptr;
    if (r.retrieval_f1) {
        retrieval = json{{"precision", mean_std_json(*r.retrieval_precision)},
                         {"recall", mean_std_json(*r.retrieval_recall)},
                         {"f1", mean_std_json(*r.retrieval_f1)}};
    }
    json stats = attrib::to_json(r.stats);
    stats["mean_claim_tokens"] = num(r.stats.mean_claim_tokens);
    for (auto& g : stats["groups"]) {
        for (const char* k : {"mean_claim_tokens", "mean_evidence_size", "mean_explanation_tokens"}) {
            g[k] = num(g[k].get<double>());
        }
    }
    return json{{"run_id", r.run_id},
                {"generator_id", r.generator_id},
                {"evidence_source", to_string(r.evidence_source)},
                {"setting", to_string(r.setting)},
                {"threshold", r.threshold},
                {"stats", std::move(stats)},
                {"annotators", std::move(annotators)},
                {"agreement", std::move(agreement)},
                {"entropy", json{{"summary", mean_std_json(r.entropy_summary)},
                                 {"normalized_summary", mean_std_json(r.normalized_entropy_summary)},
                                 {"tasks", std::move(entropy)}}},
                {"utility", std::move(utility)},
                {"calibration", std::move(calibration)},
                {"retrieval", std::move(retrieval)}};
}

std::string to_tsv(const ScoreReport& r) {
    std::string out = "annotator\tgenerator\tevidence_source\tsetting\tmetric\tmean\tstd\tn\n";
    auto row = [&](const std::string& annotator, const std::string& metric, double mean, double sd, std::size_t n) {
        out += fmt::format("{}\t{}\t{}\t{}\t{}\t{:.6f}\t{:.6f}\t{}\n", annotator, r.generator_id,
                           to_string(r.evidence_source), to_string(r.setting), metric, mean, sd, n);
    };
    for (const auto& a : r.annotators) {
        row(a.annotator, "precision", a.precision.mean, a.precision.std, a.precision.n);
        row(a.annotator, "recall", a.recall.mean, a.recall.std, a.recall.n);
        row(a.annotator, "f1", a.f1.mean, a.f1.std, a.f1.n);
        if (a.fully_attributed) {
            row(a.annotator, fmt::format("fully_attributed@{}", r.threshold), *a.fully_attributed, 0.0, a.f1.n);
        }
    }
    for (const auto& g : r.agreement) {
        if (g.alpha) row(g.a == g.b ? g.a : fmt::format("{}~{}", g.a, g.b), "alpha", *g.alpha, 0.0, g.units);
    }
    if (r.entropy_summary.n > 0) {
        row(kHumanGroup, "entropy", r.entropy_summary.mean, r.entropy_summary.std, r.entropy_summary.n);
        row(kHumanGroup, "entropy_normalized", r.normalized_entropy_summary.mean, r.normalized_entropy_summary.std,
            r.normalized_entropy_summary.n);
    }
    if (!r.utility.empty()) {
        std::vector<double> raw, cal;
        for (const auto& u : r.utility) {
            raw.push_back(u.raw_mean);
            if (u.calibrated_mean) cal.push_back(*u.calibrated_mean);
        }
        const auto mr = metrics::mean_std(raw);
        row(kHumanGroup, "utility_raw", mr.mean, mr.std, mr.n);
        const auto mc = metrics::mean_std(cal);
        if (mc.n > 0) row(kHumanGroup, "utility_calibrated", mc.mean, mc.std, mc.n);
    }
    if (r.retrieval_f1) {
        row("selector", "retrieval_precision", r.retrieval_precision->mean, r.retrieval_precision->std,
            r.retrieval_precision->n);
        row("selector", "retrieval_recall", r.retrieval_recall->mean, r.retrieval_recall->std, r.retrieval_recall->n);
        row("selector", "retrieval_f1", r.retrieval_f1->mean, r.retrieval_f1->std, r.retrieval_f1->n);
    }
    return out;
}

}  // namespace attrib::report
