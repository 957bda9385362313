#include "attrib/calibrate.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>
#include <boost/math/tools/toms748_solve.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

namespace attrib::calib {
namespace {

constexpr int kCoarsePoints = 1201;
constexpr int kFinePoints = 2001;  // odd, for Simpson's rule
constexpr double kLogWindow = 50.0;

struct Tilted {
    double mu_mean = 0.0;
    double mu_var = 0.0;
    double tau_mean = 0.0;
    double log_tau_mean = 0.0;
};

double log_weight(double u, double m, double v, double a, double b, double s) {
    const double tau = std::exp(u);
    const double var = v + 1.0 / tau;
    return a * u - b * tau - 0.5 * std::log(var) - 0.5 * (s - m) * (s - m) / var;
}

/// Moments of N(μ; m, v) Gamma(τ; a, b) N(s; μ, 1/τ), integrating μ in closed
/// form and u = ln τ numerically.
std::optional<Tilted> tilted_moments(double m, double v, double a, double b, double s) {
    const double centre = boost::math::digamma(a) - std::log(b);
    const double spread = std::sqrt(boost::math::trigamma(a));
    const double half = std::max(30.0 * spread, 20.0);
    const double lo = centre - half;
    const double step = 2.0 * half / (kCoarsePoints - 1);

    std::vector<double> coarse(kCoarsePoints);
    double peak = -std::numeric_limits<double>::infinity();
    int arg = 0;
    for (int k = 0; k < kCoarsePoints; ++k) {
        coarse[k] = log_weight(lo + k * step, m, v, a, b, s);
        if (coarse[k] > peak) {
            peak = coarse[k];
            arg = k;
        }
    }
    if (!std::isfinite(peak)) return std::nullopt;
    int first = arg;
    int last = arg;
    for (int k = 0; k < kCoarsePoints; ++k) {
        if (coarse[k] > peak - kLogWindow) {
            first = std::min(first, k);
            last = std::max(last, k);
        }
    }
    const double u0 = lo + std::max(first - 1, 0) * step;
    const double u1 = lo + std::min(last + 1, kCoarsePoints - 1) * step;
    const double h = (u1 - u0) / (kFinePoints - 1);

    std::vector<double> lw(kFinePoints);
    double fine_peak = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < kFinePoints; ++k) {
        lw[k] = log_weight(u0 + k * h, m, v, a, b, s);
        fine_peak = std::max(fine_peak, lw[k]);
    }

    double z = 0.0, e_mu = 0.0, e_within = 0.0, e_tau = 0.0, e_u = 0.0;
    std::vector<double> w(kFinePoints), cond_mean(kFinePoints);
    for (int k = 0; k < kFinePoints; ++k) {
        const double simpson = (k == 0 || k == kFinePoints - 1) ? 1.0 : (k % 2 == 1 ? 4.0 : 2.0);
        const double u = u0 + k * h;
        const double tau = std::exp(u);
        const double prec = 1.0 / v + tau;
        w[k] = simpson * std::exp(lw[k] - fine_peak);
        cond_mean[k] = (m / v + tau * s) / prec;
        z += w[k];
        e_mu += w[k] * cond_mean[k];
        e_within += w[k] / prec;
        e_tau += w[k] * tau;
        e_u += w[k] * u;
    }
    if (!(z > 0.0)) return std::nullopt;
    Tilted t;
    t.mu_mean = e_mu / z;
    double between = 0.0;
    for (int k = 0; k < kFinePoints; ++k) between += w[k] * (cond_mean[k] - t.mu_mean) * (cond_mean[k] - t.mu_mean);
    t.mu_var = (e_within + between) / z;
    t.tau_mean = e_tau / z;
    t.log_tau_mean = e_u / z;
    if (!std::isfinite(t.mu_mean) || !(t.mu_var > 0.0) || !(t.tau_mean > 0.0) || !std::isfinite(t.log_tau_mean)) {
        return std::nullopt;
    }
    return t;
}

/// Gamma(shape, rate) with the given E[τ] and E[ln τ].
std::optional<std::pair<double, double>> fit_gamma(double tau_mean, double log_tau_mean) {
    const double target = std::log(tau_mean) - log_tau_mean;
    if (!(target > 0.0) || !std::isfinite(target)) return std::nullopt;
    auto f = [&](double x) { return std::log(x) - boost::math::digamma(x) - target; };
    double lo = 1e-8;
    double hi = 1e8;
    while (f(lo) < 0.0 && lo > 1e-300) lo *= 1e-4;
    while (f(hi) > 0.0 && hi < 1e300) hi *= 1e4;
    if (f(lo) < 0.0 || f(hi) > 0.0) return std::nullopt;
    auto tol = [](double x, double y) { return std::abs(x - y) <= 1e-10 * std::max(1.0, std::abs(x)); };
    std::uintmax_t iters = 200;
    const auto [x0, x1] = boost::math::tools::toms748_solve(f, lo, hi, tol, iters);
    const double shape = 0.5 * (x0 + x1);
    return std::make_pair(shape, shape / tau_mean);
}

struct Factor {
    std::size_t item = 0;
    std::size_t annotator = 0;
    double score = 0.0;
    bool clamped = false;
    // Gaussian site in natural form (precision, precision * mean).
    double lambda = 0.0;
    double eta = 0.0;
    // Gamma site as offsets to (shape, rate).
    double alpha = 0.0;
    double beta = 0.0;
};

}  // namespace

ZScored zscore_per_annotator(std::span<const UtilityObservation> observations) {
    std::map<std::string, std::vector<double>> by_annotator;
    for (const auto& o : observations) by_annotator[o.annotator_id].push_back(o.score);
    std::map<std::string, std::pair<double, double>> moments;
    ZScored out;
    for (const auto& [id, scores] : by_annotator) {
        const auto n = static_cast<double>(scores.size());
        double mean = 0.0;
        for (double s : scores) mean += s;
        mean /= n;
        double ss = 0.0;
        for (double s : scores) ss += (s - mean) * (s - mean);
        const double sd = std::sqrt(ss / n);
        const bool degenerate = std::set<double>(scores.begin(), scores.end()).size() < 2 || !(sd > 0.0);
        if (degenerate) {
            out.degenerate.push_back(id);
            spdlog::warn("annotator '{}' has fewer than two distinct utility scores", id);
        }
        moments[id] = {mean, degenerate ? 0.0 : sd};
    }
    out.observations.reserve(observations.size());
    for (const auto& o : observations) {
        const auto [mean, sd] = moments[o.annotator_id];
        out.observations.push_back({o.item_id, o.annotator_id, sd > 0.0 ? (o.score - mean) / sd : 0.0});
    }
    return out;
}

CalibrationResult ep_calibrate(std::span<const UtilityObservation> observations, const EpOptions& options) {
    if (!(options.shape > 0.0) || !(options.rate > 0.0)) {
        throw PreconditionError(fmt::format("invalid Gamma prior (shape {}, rate {})", options.shape, options.rate));
    }
    if (!(options.damping > 0.0 && options.damping <= 1.0)) throw PreconditionError("damping must be in (0, 1]");
    if (observations.empty() && options.item_ids.empty()) throw PreconditionError("no utility observations");
    for (const auto& [id, value] : options.clamped_accuracy) {
        if (!(value > 0.0)) throw PreconditionError(fmt::format("clamped accuracy for '{}' must be positive", id));
    }

    std::map<std::string, std::size_t> item_index;
    std::map<std::string, std::size_t> annotator_index;
    for (const auto& id : options.item_ids) item_index.emplace(id, 0);
    for (const auto& o : observations) {
        item_index.emplace(o.item_id, 0);
        annotator_index.emplace(o.annotator_id, 0);
    }
    std::vector<std::string> item_names, annotator_names;
    for (auto& [id, idx] : item_index) {
        idx = item_names.size();
        item_names.push_back(id);
    }
    for (auto& [id, idx] : annotator_index) {
        idx = annotator_names.size();
        annotator_names.push_back(id);
    }

    std::vector<Factor> factors;
    std::set<std::pair<std::size_t, std::size_t>> seen;
    for (const auto& o : observations) {
        if (!std::isfinite(o.score)) throw PreconditionError("non-finite utility score");
        Factor f;
        f.item = item_index[o.item_id];
        f.annotator = annotator_index[o.annotator_id];
        f.score = o.score;
        if (!seen.emplace(f.item, f.annotator).second) {
            throw PreconditionError(
                fmt::format("item '{}' rated twice by annotator '{}'", o.item_id, o.annotator_id));
        }
        if (auto it = options.clamped_accuracy.find(o.annotator_id); it != options.clamped_accuracy.end()) {
            f.clamped = true;
            f.lambda = it->second;
            f.eta = it->second * o.score;
        }
        factors.push_back(f);
    }

    // Global approximation q = prior × sites.
    std::vector<double> q_lambda(item_names.size(), 1.0), q_eta(item_names.size(), 0.0);
    std::vector<double> q_shape(annotator_names.size(), options.shape), q_rate(annotator_names.size(), options.rate);
    for (const auto& f : factors) {
        q_lambda[f.item] += f.lambda;
        q_eta[f.item] += f.eta;
    }

    CalibrationResult result;
    for (int sweep = 1; sweep <= options.max_iter; ++sweep) {
        double delta = 0.0;
        for (auto& f : factors) {
            if (f.clamped) continue;
            const double c_lambda = q_lambda[f.item] - f.lambda;
            const double c_eta = q_eta[f.item] - f.eta;
            const double c_shape = q_shape[f.annotator] - f.alpha;
            const double c_rate = q_rate[f.annotator] - f.beta;
            if (!(c_lambda > 0.0) || !(c_shape > 0.0) || !(c_rate > 0.0)) {
                ++result.skipped_updates;
                continue;
            }
            const auto t = tilted_moments(c_eta / c_lambda, 1.0 / c_lambda, c_shape, c_rate, f.score);
            const auto g = t ? fit_gamma(t->tau_mean, t->log_tau_mean) : std::nullopt;
            if (!t || !g) {
                ++result.skipped_updates;
                continue;
            }
            const double d = options.damping;
            const double lambda = f.lambda + d * ((1.0 / t->mu_var - c_lambda) - f.lambda);
            const double eta = f.eta + d * ((t->mu_mean / t->mu_var - c_eta) - f.eta);
            const double alpha = f.alpha + d * ((g->first - c_shape) - f.alpha);
            const double beta = f.beta + d * ((g->second - c_rate) - f.beta);
            if (!std::isfinite(lambda) || !std::isfinite(eta) || !std::isfinite(alpha) || !std::isfinite(beta)) {
                ++result.skipped_updates;
                continue;
            }
            delta = std::max({delta, std::abs(lambda - f.lambda), std::abs(eta - f.eta), std::abs(alpha - f.alpha),
                              std::abs(beta - f.beta)});
            f.lambda = lambda;
            f.eta = eta;
            f.alpha = alpha;
            f.beta = beta;
            q_lambda[f.item] = c_lambda + lambda;
            q_eta[f.item] = c_eta + eta;
            q_shape[f.annotator] = c_shape + alpha;
            q_rate[f.annotator] = c_rate + beta;
        }
        result.iterations = sweep;
        result.final_delta = delta;
        if (delta < options.tol) {
            result.converged = true;
            break;
        }
    }
    if (!result.converged) {
        spdlog::warn("EP did not converge after {} sweeps (last change {:.3g})", result.iterations, result.final_delta);
    }

    for (std::size_t i = 0; i < item_names.size(); ++i) {
        result.items.push_back({item_names[i], q_eta[i] / q_lambda[i], 1.0 / q_lambda[i]});
    }
    for (std::size_t j = 0; j < annotator_names.size(); ++j) {
        AnnotatorPosterior a{annotator_names[j], q_shape[j], q_rate[j]};
        if (auto it = options.clamped_accuracy.find(a.annotator_id); it != options.clamped_accuracy.end()) {
            a.clamped = true;
            a.fixed = it->second;
        }
        result.annotators.push_back(a);
    }
    return result;
}

std::vector<UtilityObservation> read_observations_tsv(std::istream& in) {
    std::vector<UtilityObservation> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        for (std::string field; std::getline(ss, field, '\t');) fields.push_back(field);
        if (line_no == 1 && !fields.empty() && fields[0] == "item_id") continue;
        if (fields.size() != 3) throw ParseError(fmt::format("line {}: expected 3 tab-separated fields", line_no));
        std::size_t used = 0;
        double score = 0.0;
        try {
            score = std::stod(fields[2], &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != fields[2].size()) {
            throw ParseError(fmt::format("line {}: invalid score '{}'", line_no, fields[2]));
        }
        out.push_back({fields[0], fields[1], score});
    }
    return out;
}

void write_observations_tsv(std::ostream& out, std::span<const UtilityObservation> observations) {
    out << "item_id\tannotator_id\tscore\n";
    for (const auto& o : observations) out << fmt::format("{}\t{}\t{}\n", o.item_id, o.annotator_id, o.score);
}

void write_items_tsv(std::ostream& out, const CalibrationResult& result) {
    out << "item_id\tposterior_mean\tposterior_var\n";
    for (const auto& i : result.items) out << fmt::format("{}\t{:.10g}\t{:.10g}\n", i.item_id, i.mean, i.variance);
}

void write_annotators_tsv(std::ostream& out, const CalibrationResult& result) {
    out << "annotator_id\tshape\trate\n";
    for (const auto& a : result.annotators) {
        if (a.clamped) {
            out << fmt::format("{}\tclamped\t{:.10g}\n", a.annotator_id, a.fixed);
        } else {
            out << fmt::format("{}\t{:.10g}\t{:.10g}\n", a.annotator_id, a.shape, a.rate);
        }
    }
}

}  // namespace attrib::calib
