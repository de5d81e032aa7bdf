#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <numeric>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "sglmm/errors.hpp"
#include "sglmm/rng.hpp"
#include "sglmm/sampler.hpp"

// Cross-validation planning, Bayesian cross-validation scoring (BCVS),
// effective-sample-size throughput, and posterior summarization.

namespace sglmm {

// ---------------------------------------------------------------------------
// Fold plans

enum class Grouping { none, by_location_cluster };

// A k-fold partition of observation rows. Ungrouped plans balance row counts
// to within one; grouped plans keep every row of a location cluster in the
// same fold and balance cluster counts instead.
struct CvPlan {
    std::vector<int> fold;  // fold id per observation row, in [0, k)
    int k = 10;
    Grouping grouping = Grouping::none;
    std::uint64_t seed = 1;

    int n() const { return static_cast<int>(fold.size()); }

    std::vector<int> fold_rows(int f) const {
        std::vector<int> rows;
        for (int i = 0; i < n(); ++i)
            if (fold[static_cast<std::size_t>(i)] == f) rows.push_back(i);
        return rows;
    }

    // ascending training rows: the complement of fold f
    std::vector<int> training_rows(int f) const {
        std::vector<int> rows;
        for (int i = 0; i < n(); ++i)
            if (fold[static_cast<std::size_t>(i)] != f) rows.push_back(i);
        return rows;
    }
};

namespace evaluation_detail {

// Deterministic Fisher-Yates permutation of 0..n-1 under the library stream.
inline std::vector<int> shuffled_indices(int n, std::uint64_t seed) {
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    Rng rng = Rng::derive(seed, 0x666F6C6473ULL);  // fold-plan substream
    for (int i = n - 1; i > 0; --i) {
        const auto j = static_cast<int>(rng.next_u64() %
                                        static_cast<std::uint64_t>(i + 1));
        std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
    }
    return order;
}

}  // namespace evaluation_detail

inline CvPlan make_folds(int n, int k, std::uint64_t seed) {
    if (k < 1) throw InvalidParams("make_folds: fold count must be positive");
    if (n < k)
        throw TooFewGroups("make_folds: " + std::to_string(n) + " rows cannot fill " +
                           std::to_string(k) + " folds");
    CvPlan plan;
    plan.k = k;
    plan.grouping = Grouping::none;
    plan.seed = seed;
    plan.fold.assign(static_cast<std::size_t>(n), 0);
    const std::vector<int> order = evaluation_detail::shuffled_indices(n, seed);
    for (int pos = 0; pos < n; ++pos)
        plan.fold[static_cast<std::size_t>(order[static_cast<std::size_t>(pos)])] = pos % k;
    return plan;
}

// Grouped variant: groups[i] labels row i's location cluster; whole clusters
// are assigned to folds so no cluster straddles a train/test split.
inline CvPlan make_folds(const std::vector<int>& groups, int k, std::uint64_t seed) {
    if (k < 1) throw InvalidParams("make_folds: fold count must be positive");
    if (groups.empty()) throw InvalidParams("make_folds: empty group labels");
    std::vector<int> ids(groups);
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    const int m = static_cast<int>(ids.size());
    if (m < k)
        throw TooFewGroups("make_folds: " + std::to_string(m) + " groups cannot fill " +
                           std::to_string(k) + " folds");

    const std::vector<int> order = evaluation_detail::shuffled_indices(m, seed);
    std::vector<std::pair<int, int>> group_fold(static_cast<std::size_t>(m));
    for (int pos = 0; pos < m; ++pos) {
        const int which = order[static_cast<std::size_t>(pos)];
        group_fold[static_cast<std::size_t>(which)] = {ids[static_cast<std::size_t>(which)],
                                                       pos % k};
    }

    CvPlan plan;
    plan.k = k;
    plan.grouping = Grouping::by_location_cluster;
    plan.seed = seed;
    plan.fold.reserve(groups.size());
    for (int g : groups) {
        const auto it = std::lower_bound(ids.begin(), ids.end(), g);
        plan.fold.push_back(
            group_fold[static_cast<std::size_t>(it - ids.begin())].second);
    }
    return plan;
}

// ---------------------------------------------------------------------------
// BCVS

inline double logsumexp(const std::vector<double>& xs) {
    const double m = *std::max_element(xs.begin(), xs.end());
    double acc = 0.0;
    for (double x : xs) acc += std::exp(x - m);
    return m + std::log(acc);
}

// BCVS = -sum_k log( (1/T) sum_t [y_k | y_-k, theta_t] ). Inputs are log
// predictive densities per fold and stored state; smaller is better.
inline double bcvs(const std::vector<std::vector<double>>& fold_logdens) {
    if (fold_logdens.empty()) throw InvalidParams("bcvs: no folds");
    double score = 0.0;
    for (std::size_t f = 0; f < fold_logdens.size(); ++f) {
        const auto& draws = fold_logdens[f];
        if (draws.empty())
            throw InvalidParams("bcvs: fold " + std::to_string(f) + " has no draws");
        for (std::size_t t = 0; t < draws.size(); ++t)
            if (!std::isfinite(draws[t]))
                throw NonFiniteDensity("bcvs: non-positive or non-finite predictive density at fold " +
                                       std::to_string(f) + ", draw " + std::to_string(t));
        score -= logsumexp(draws) - std::log(static_cast<double>(draws.size()));
    }
    return score;
}

// Joint log predictive density of a fit's held-out block, one value per
// stored state (the product over the fold's points given the drawn state).
inline std::vector<double> held_out_joint_logdensities(const PosteriorSamples& fit) {
    if (fit.held_out_rows.empty())
        throw InvalidParams("held-out densities: the fit scored no held-out rows");
    std::vector<double> out;
    out.reserve(fit.held_out_loglik.size());
    for (const auto& state : fit.held_out_loglik) out.push_back(state.sum());
    return out;
}

// ---------------------------------------------------------------------------
// Cross-validation driver

struct CrossValidation {
    CvPlan plan;
    double bcvs_joint = 0.0;      // fold-level joint densities (default score)
    double bcvs_pointwise = 0.0;  // per-observation densities
    double seconds = 0.0;         // summed across fold fits
    long long rank_deficiency_events = 0;
    long long retries_exhausted = 0;
};

// Fits one chain per fold (training rows active, fold rows scored as
// held-out) and assembles both BCVS variants. Fold chains draw independent
// seeds from the configured master seed and run concurrently; the scores are
// assembled in fold order afterwards, so the result does not depend on the
// schedule.
inline CrossValidation cross_validate(const ModelSpec& spec, const Support& support,
                                      const ModelData& data, const CvPlan& plan,
                                      const McmcConfig& config) {
    if (plan.n() != static_cast<int>(data.y.size()))
        throw DimensionMismatch("cross_validate: plan covers " + std::to_string(plan.n()) +
                                " rows but the data holds " + std::to_string(data.y.size()));
    if (!data.active.empty())
        throw InvalidParams("cross_validate: data already carries an active-row subset");

    std::vector<PosteriorSamples> fits(static_cast<std::size_t>(plan.k));
    std::vector<std::exception_ptr> failures(static_cast<std::size_t>(plan.k));
    {
        std::vector<std::thread> workers;
        workers.reserve(static_cast<std::size_t>(plan.k));
        for (int f = 0; f < plan.k; ++f)
            workers.emplace_back([&, f] {
                try {
                    ModelData fold_data = data;
                    fold_data.active = plan.training_rows(f);
                    McmcConfig fold_config = config;
                    std::uint64_t state =
                        config.seed ^
                        (0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(f) + 1));
                    fold_config.seed = splitmix64(state);
                    fold_config.store_field = false;
                    fits[static_cast<std::size_t>(f)] =
                        run_chain(spec, support, fold_data, fold_config);
                } catch (...) {
                    failures[static_cast<std::size_t>(f)] = std::current_exception();
                }
            });
        for (auto& w : workers) w.join();
    }
    for (const auto& failure : failures)
        if (failure) std::rethrow_exception(failure);

    CrossValidation result;
    result.plan = plan;
    std::vector<std::vector<double>> joint, pointwise;
    for (const PosteriorSamples& fit : fits) {
        joint.push_back(held_out_joint_logdensities(fit));
        for (std::size_t r = 0; r < fit.held_out_rows.size(); ++r) {
            std::vector<double> one;
            one.reserve(fit.held_out_loglik.size());
            for (const auto& state_dens : fit.held_out_loglik)
                one.push_back(state_dens[static_cast<Eigen::Index>(r)]);
            pointwise.push_back(std::move(one));
        }
        result.seconds += fit.seconds;
        result.rank_deficiency_events += fit.rank_deficiency_events;
        result.retries_exhausted += fit.retries_exhausted;
    }
    result.bcvs_joint = bcvs(joint);
    result.bcvs_pointwise = bcvs(pointwise);
    return result;
}

// ---------------------------------------------------------------------------
// Effective sample size

// ESS = N / (1 + 2 sum rho_l) with the autocorrelation sum truncated by
// Geyer's initial monotone positive sequence on pair sums. A zero return
// marks a degenerate (zero-variance) trace; callers surface the warning.
inline double ess(const std::vector<double>& trace) {
    const auto n = static_cast<long long>(trace.size());
    if (n < 100)
        throw TraceTooShort("ess: need at least 100 states, got " + std::to_string(n));

    const double mean = std::accumulate(trace.begin(), trace.end(), 0.0) /
                        static_cast<double>(n);
    std::vector<double> d(trace.size());
    for (std::size_t t = 0; t < trace.size(); ++t) d[t] = trace[t] - mean;
    auto autocov = [&](long long lag) {
        double acc = 0.0;
        for (long long t = 0; t + lag < n; ++t)
            acc += d[static_cast<std::size_t>(t)] * d[static_cast<std::size_t>(t + lag)];
        return acc / static_cast<double>(n);
    };
    const double c0 = autocov(0);
    if (!(c0 > 0.0) || !std::isfinite(c0)) return 0.0;

    double pair_sum = 0.0;
    double prev = std::numeric_limits<double>::infinity();
    for (long long m = 0; 2 * m < n; ++m) {
        double g = autocov(2 * m) / c0;
        if (2 * m + 1 < n) g += autocov(2 * m + 1) / c0;
        if (g <= 0.0) break;
        g = std::min(g, prev);  // enforce the monotone envelope
        prev = g;
        pair_sum += g;
    }
    const double iat = std::max(2.0 * pair_sum - 1.0,
                                std::numeric_limits<double>::min());
    return std::min(static_cast<double>(n), static_cast<double>(n) / iat);
}

inline double ess_per_second(const std::vector<double>& trace, double seconds) {
    if (!(seconds > 0.0)) throw InvalidParams("ess_per_second: seconds must be positive");
    return ess(trace) / seconds;
}

// ---------------------------------------------------------------------------
// Posterior summaries

// Equal-tailed empirical quantile with linear interpolation between order
// statistics.
inline double quantile(std::vector<double> xs, double q) {
    if (xs.empty()) throw InvalidParams("quantile: empty sample");
    if (!(q >= 0.0 && q <= 1.0)) throw InvalidParams("quantile: level outside [0, 1]");
    std::sort(xs.begin(), xs.end());
    const double h = q * (static_cast<double>(xs.size()) - 1.0);
    const auto lo = static_cast<std::size_t>(h);
    if (lo + 1 >= xs.size()) return xs.back();
    return xs[lo] + (h - static_cast<double>(lo)) * (xs[lo + 1] - xs[lo]);
}

struct Summary {
    double mean = 0.0;
    double lower = 0.0;  // 2.5%
    double upper = 0.0;  // 97.5%
};

inline Summary summarize(const std::vector<double>& xs) {
    if (xs.empty()) throw InvalidParams("summarize: empty sample");
    Summary s;
    s.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
    s.lower = quantile(xs, 0.025);
    s.upper = quantile(xs, 0.975);
    return s;
}

// One row of the reporting table: predictor, parameter, estimate, CI bounds.
struct SummaryRow {
    std::string predictor;
    std::string parameter;
    double estimate = 0.0;
    double lower = 0.0;
    double upper = 0.0;
};

// Summaries for every stored trace column. Covariate rows pick up predictor
// labels by position; remaining parameters are labelled with a dash.
inline std::vector<SummaryRow> summary_table(const PosteriorSamples& samples,
                                             const std::vector<std::string>& predictors) {
    std::vector<SummaryRow> rows;
    rows.reserve(samples.names.size());
    for (std::size_t j = 0; j < samples.names.size(); ++j) {
        const std::string& name = samples.names[j];
        SummaryRow row;
        row.parameter = name;
        row.predictor = "-";
        if (name.rfind("beta_", 0) == 0) {
            const auto idx = static_cast<std::size_t>(std::stoi(name.substr(5)));
            if (idx < predictors.size()) row.predictor = predictors[idx];
        }
        const Summary s = summarize(samples.draws[j]);
        row.estimate = s.mean;
        row.lower = s.lower;
        row.upper = s.upper;
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace sglmm
