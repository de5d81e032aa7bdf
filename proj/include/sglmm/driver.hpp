#pragma once

#include <algorithm>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "sglmm/config.hpp"
#include "sglmm/errors.hpp"
#include "sglmm/evaluation.hpp"
#include "sglmm/fem.hpp"
#include "sglmm/io.hpp"
#include "sglmm/models.hpp"
#include "sglmm/sampler.hpp"

// Run orchestration: turn a parsed RunConfig into support + data, run the
// requested command, and write the output files into cfg.output_dir. The
// fit and cv entry points return their in-memory results so callers (tests,
// downstream tooling) can inspect them without re-reading the files.

namespace sglmm {

// Builds the spatial support named by the config. For graph supports the
// dataset (when provided) sets a lower bound on the node count so that
// isolated nodes referenced by observations but absent from the edge list
// still exist.
inline Support build_support(const RunConfig& cfg, const Dataset* dataset = nullptr) {
    if (cfg.support == SupportKind::graph) {
        int min_nodes = 0;
        if (dataset)
            for (int node : dataset->nodes) min_nodes = std::max(min_nodes, node + 1);
        return DiscreteSupport(read_adjacency(cfg.adjacency_path, min_nodes), cfg.order);
    }
    return ContinuousSupport(load_mesh(cfg.mesh_path), cfg.alpha);
}

// Joins the dataset to the support: graph rows select their node, mesh rows
// project barycentrically onto the containing triangle.
inline ModelData assemble_model_data(const RunConfig& cfg, const Dataset& dataset,
                                     const Support& support) {
    ModelData data;
    data.y = dataset.y;
    data.x = dataset.x;
    data.log_offset = dataset.log_offset;
    const int n_field = support_field_size(support);
    if (cfg.support == SupportKind::graph) {
        for (std::size_t r = 0; r < dataset.nodes.size(); ++r)
            if (dataset.nodes[r] >= n_field)
                throw ValidationError({cfg.data_path + ": data row " + std::to_string(r + 1) +
                                       ": node id " + std::to_string(dataset.nodes[r]) +
                                       " outside the graph (" + std::to_string(n_field) +
                                       " nodes)"});
        data.obs = replication_matrix(dataset.nodes, n_field);
    } else {
        data.obs = std::get<ContinuousSupport>(support).projection(dataset.coords);
    }
    return data;
}

namespace driver_detail {

inline std::uint64_t chain_seed(std::uint64_t master, int chain) {
    if (chain == 0) return master;
    return Rng::derive(master, 0x636861696eULL + static_cast<std::uint64_t>(chain)).next_u64();
}

inline std::string support_label(const RunConfig& cfg) {
    if (cfg.support == SupportKind::graph)
        return "graph (difference order " + std::to_string(cfg.order) + ")";
    return "mesh (operator order " + std::to_string(cfg.alpha) + ")";
}

inline std::string joined(const std::vector<std::string>& items) {
    std::string out;
    for (const auto& s : items) out += (out.empty() ? "" : ", ") + s;
    return out;
}

// One ESS table row; traces shorter than the estimator minimum and constant
// traces degrade to annotations rather than errors.
inline void ess_row(std::ostream& out, const std::string& name,
                    const std::vector<double>& trace, double seconds,
                    std::vector<std::string>& warnings) {
    out << "    " << std::left << std::setw(24) << name << std::right;
    try {
        const double e = ess(trace);
        out << std::setw(12) << io_detail::format_value(e, "%.1f");
        if (e == 0.0) {
            out << std::setw(12) << "n/a";
            warnings.push_back("trace '" + name + "' is constant; its ess is reported as 0");
        } else if (seconds > 0.0) {
            out << std::setw(12) << io_detail::format_value(e / seconds, "%.3f");
        } else {
            out << std::setw(12) << "n/a";
        }
    } catch (const TraceTooShort&) {
        out << std::setw(12) << "n/a" << std::setw(12) << "n/a"
            << "  (needs at least 100 stored states)";
    }
    out << "\n";
}

inline void chain_block(std::ostream& out, const PosteriorSamples& fit, int index,
                        std::vector<std::string>& warnings) {
    out << "chain " << index + 1 << " (seed " << fit.seed << ")\n";
    out << "  wall seconds: total " << io_detail::format_value(fit.seconds, "%.3f")
        << ", post burn-in " << io_detail::format_value(fit.seconds_post_burn, "%.3f") << "\n";
    out << "  counters: rank deficiency events " << fit.rank_deficiency_events
        << ", retries exhausted " << fit.retries_exhausted << ", floored auxiliaries "
        << fit.floored_auxiliaries << "\n";
    if (fit.retries_exhausted > 0)
        warnings.push_back("chain " + std::to_string(index + 1) +
                           " exhausted its proposal retry budget " +
                           std::to_string(fit.retries_exhausted) +
                           " times; inspect the trace before trusting the run");
    out << "  effective sample sizes (per post burn-in second):\n";
    out << "    " << std::left << std::setw(24) << "parameter" << std::right << std::setw(12)
        << "ess" << std::setw(12) << "ess/sec"
        << "\n";
    for (std::size_t j = 0; j < fit.names.size(); ++j)
        ess_row(out, fit.names[j], fit.draws[j], fit.seconds_post_burn, warnings);
    ess_row(out, "loglik", fit.loglik, fit.seconds_post_burn, warnings);
}

inline void write_warnings(std::ostream& out, const std::vector<std::string>& warnings) {
    if (warnings.empty()) return;
    out << "\nwarnings\n";
    for (const auto& w : warnings) out << "  - " << w << "\n";
}

}  // namespace driver_detail

struct FitResult {
    std::vector<PosteriorSamples> chains;
    std::vector<SummaryRow> summary;
    Vector field_mean;  // averaged across chains, linear-predictor scale
};

// Fits the model and writes samples (one file per chain), the pooled
// parameter summary, per-node posterior field means, and a run report.
inline FitResult run_fit(const RunConfig& cfg) {
    const Dataset dataset = load_dataset(cfg);
    const Support support = build_support(cfg, &dataset);
    const ModelData data = assemble_model_data(cfg, dataset, support);

    // Chains are independent and run concurrently; outputs are written in
    // chain order after the join, so files do not depend on the schedule.
    FitResult result;
    result.chains.resize(static_cast<std::size_t>(cfg.chains));
    {
        std::vector<std::exception_ptr> failures(static_cast<std::size_t>(cfg.chains));
        std::vector<std::thread> workers;
        workers.reserve(static_cast<std::size_t>(cfg.chains));
        for (int c = 0; c < cfg.chains; ++c)
            workers.emplace_back([&, c] {
                try {
                    McmcConfig mc = cfg.mcmc;
                    mc.seed = driver_detail::chain_seed(cfg.mcmc.seed, c);
                    result.chains[static_cast<std::size_t>(c)] =
                        run_chain(cfg.model, support, data, mc);
                } catch (...) {
                    failures[static_cast<std::size_t>(c)] = std::current_exception();
                }
            });
        for (auto& w : workers) w.join();
        for (const auto& failure : failures)
            if (failure) std::rethrow_exception(failure);
    }

    const std::filesystem::path dir(cfg.output_dir);
    for (int c = 0; c < cfg.chains; ++c) {
        const std::string name =
            cfg.chains == 1 ? "samples.csv" : "samples_chain" + std::to_string(c + 1) + ".csv";
        write_samples((dir / name).string(), result.chains[c]);
    }

    // Pool chains for the headline summary; equal stored lengths make the
    // concatenation a fair mixture.
    PosteriorSamples pooled;
    pooled.spec = result.chains.front().spec;
    pooled.names = result.chains.front().names;
    pooled.draws.assign(pooled.names.size(), {});
    for (const auto& fit : result.chains)
        for (std::size_t j = 0; j < pooled.names.size(); ++j)
            pooled.draws[j].insert(pooled.draws[j].end(), fit.draws[j].begin(),
                                   fit.draws[j].end());
    result.summary = summary_table(pooled, dataset.predictors);
    write_summary((dir / "summary.csv").string(), result.summary, cfg.mcmc.seed);

    result.field_mean = Vector::Zero(result.chains.front().field_size);
    for (const auto& fit : result.chains) result.field_mean += fit.field_mean;
    result.field_mean /= static_cast<double>(cfg.chains);

    const int n_field = support_field_size(support);
    std::vector<std::string> pred_names = {"node"};
    std::vector<std::vector<double>> pred_cols(1);
    for (int i = 0; i < n_field; ++i) pred_cols[0].push_back(i);
    if (cfg.support == SupportKind::mesh) {
        const Mesh& mesh = std::get<ContinuousSupport>(support).mesh();
        pred_names.insert(pred_names.end(), {"x", "y"});
        pred_cols.resize(3);
        for (const auto& node : mesh.nodes) {
            pred_cols[1].push_back(node[0]);
            pred_cols[2].push_back(node[1]);
        }
    }
    pred_names.push_back("field_mean");
    pred_cols.emplace_back(result.field_mean.data(), result.field_mean.data() + n_field);
    write_delimited((dir / "predictions.csv").string(),
                    {"sglmm posterior field mean", "seed " + std::to_string(cfg.mcmc.seed),
                     "linear-predictor scale; covariate effects excluded"},
                    pred_names, pred_cols, "%.9g");

    std::ofstream report = io_detail::open_output((dir / "report.txt").string());
    std::vector<std::string> warnings;
    report << "sglmm fit report\n";
    report << "family: " << family_name(cfg.model.family)
           << "   prior: " << (cfg.model.prior == PriorKind::grf ? "grf" : "lma")
           << "   support: " << driver_detail::support_label(cfg) << "\n";
    report << "observations: " << dataset.y.size() << "   field size: " << n_field
           << "   predictors: " << driver_detail::joined(dataset.predictors) << "\n";
    report << "chains: " << cfg.chains << "   burn-in: " << cfg.mcmc.burn_in
           << "   stored: " << cfg.mcmc.n_store << "   thin: " << cfg.mcmc.thin
           << "   master seed: " << cfg.mcmc.seed << "\n\n";
    for (int c = 0; c < cfg.chains; ++c)
        driver_detail::chain_block(report, result.chains[c], c, warnings);
    driver_detail::write_warnings(report, warnings);
    if (!report) throw std::runtime_error("output: write failed for report.txt");
    return result;
}

// Cross-validates the model under the configured fold plan and writes the
// fold assignment table plus a score report.
inline CrossValidation run_cv(const RunConfig& cfg) {
    const Dataset dataset = load_dataset(cfg);
    const Support support = build_support(cfg, &dataset);
    const ModelData data = assemble_model_data(cfg, dataset, support);

    const CvPlan plan = cfg.cv_grouping == Grouping::by_location_cluster
                            ? make_folds(dataset.groups, cfg.cv_k, cfg.mcmc.seed)
                            : make_folds(static_cast<int>(dataset.y.size()), cfg.cv_k,
                                         cfg.mcmc.seed);
    const CrossValidation cv = cross_validate(cfg.model, support, data, plan, cfg.mcmc);

    const std::filesystem::path dir(cfg.output_dir);
    std::vector<std::string> fold_names = {"row", "fold"};
    std::vector<std::vector<double>> fold_cols(2);
    for (int r = 0; r < plan.n(); ++r) {
        fold_cols[0].push_back(r);
        fold_cols[1].push_back(plan.fold[static_cast<std::size_t>(r)]);
    }
    if (!dataset.groups.empty()) {
        fold_names.push_back("group");
        fold_cols.emplace_back();
        for (int g : dataset.groups) fold_cols[2].push_back(g);
    }
    write_delimited((dir / "folds.csv").string(),
                    {"sglmm cross-validation folds", "seed " + std::to_string(cfg.mcmc.seed)},
                    fold_names, fold_cols, "%g");

    std::ofstream report = io_detail::open_output((dir / "cv_report.txt").string());
    report << "sglmm cross-validation report\n";
    report << "family: " << family_name(cfg.model.family)
           << "   prior: " << (cfg.model.prior == PriorKind::grf ? "grf" : "lma")
           << "   support: " << driver_detail::support_label(cfg) << "\n";
    report << "folds: " << plan.k << "   grouping: "
           << (plan.grouping == Grouping::by_location_cluster ? "by_location_cluster" : "none")
           << "   seed: " << cfg.mcmc.seed << "\n";
    report << "per-fold chain: burn-in " << cfg.mcmc.burn_in << ", stored " << cfg.mcmc.n_store
           << ", thin " << cfg.mcmc.thin << "\n\n";
    report << "bcvs (joint per fold):  " << io_detail::format_value(cv.bcvs_joint, "%.6f")
           << "\n";
    report << "bcvs (pointwise):       " << io_detail::format_value(cv.bcvs_pointwise, "%.6f")
           << "\n";
    report << "wall seconds:           " << io_detail::format_value(cv.seconds, "%.3f") << "\n";
    report << "rank deficiency events: " << cv.rank_deficiency_events << "\n";
    report << "retries exhausted:      " << cv.retries_exhausted << "\n";
    if (!report) throw std::runtime_error("output: write failed for cv_report.txt");
    return cv;
}

// Draws fields from the prior at pinned hyperparameters (one row per draw in
// prior_draws.csv) — the quickest way to eyeball what a prior believes
// before fitting anything. Mesh runs also get a node coordinate table.
inline void run_simulate(const RunConfig& cfg) {
    const Support support = build_support(cfg);
    const int n_field = support_field_size(support);
    const double kappa2 = *cfg.model.fixed_kappa2;
    const double scale = *cfg.model.fixed_scale;
    const FieldStructure s = support_structure(support, cfg.model.prior, kappa2);
    const Vector mass = support_mass_diagonal(support);
    const bool continuous = support_is_continuous(support);

    Rng rng(cfg.mcmc.seed);
    const Vector zero = Vector::Zero(n_field);
    std::vector<std::vector<double>> cols(static_cast<std::size_t>(n_field));
    long long floored = 0;
    for (long long d = 0; d < cfg.mcmc.n_store; ++d) {
        Vector aux;
        if (cfg.model.prior == PriorKind::lma) {
            aux = Vector(s.delta.rows());
            for (Eigen::Index i = 0; i < aux.size(); ++i) {
                aux[i] = continuous
                             ? sample_gamma(*cfg.model.fixed_tau * mass[i], scale, rng)
                             : rng.exponential(scale / 2.0);
                if (aux[i] < 1e-12) {
                    aux[i] = 1e-12;
                    ++floored;
                }
            }
        }
        const auto precision = field_prior_precision(s, cfg.model.prior, scale, aux);
        if (!precision)
            throw ConvergenceFailure("simulate: prior precision overflowed at draw " +
                                     std::to_string(d + 1));
        const auto factor = factorize(*precision);
        if (!factor)
            throw NotPositiveDefiniteError("simulate: prior precision failed to factorize at "
                                           "draw " +
                                           std::to_string(d + 1));
        const Vector field = factor->sample_gaussian_precision(zero, rng);
        for (int i = 0; i < n_field; ++i) cols[static_cast<std::size_t>(i)].push_back(field[i]);
    }

    std::vector<std::string> comments = {
        "sglmm prior field draws", "seed " + std::to_string(cfg.mcmc.seed),
        std::string("prior ") + (cfg.model.prior == PriorKind::grf ? "grf" : "lma"),
        "kappa2 " + io_detail::format_value(kappa2, "%.9g") + ", scale " +
            io_detail::format_value(scale, "%.9g") +
            (continuous && cfg.model.prior == PriorKind::lma
                 ? ", tau " + io_detail::format_value(*cfg.model.fixed_tau, "%.9g")
                 : "")};
    if (floored > 0)
        comments.push_back("floored auxiliaries: " + std::to_string(floored));
    std::vector<std::string> names;
    for (int i = 0; i < n_field; ++i) names.push_back("node_" + std::to_string(i));
    const std::filesystem::path dir(cfg.output_dir);
    write_delimited((dir / "prior_draws.csv").string(), comments, names, cols, "%.9g");

    if (continuous) {
        const Mesh& mesh = std::get<ContinuousSupport>(support).mesh();
        std::vector<std::vector<double>> node_cols(3);
        for (int i = 0; i < n_field; ++i) {
            node_cols[0].push_back(i);
            node_cols[1].push_back(mesh.nodes[static_cast<std::size_t>(i)][0]);
            node_cols[2].push_back(mesh.nodes[static_cast<std::size_t>(i)][1]);
        }
        write_delimited((dir / "mesh_nodes.csv").string(), {"sglmm mesh node coordinates"},
                        {"node", "x", "y"}, node_cols, "%.9g");
    }
}

inline void run_command(const RunConfig& cfg) {
    switch (cfg.command) {
        case Command::fit: run_fit(cfg); break;
        case Command::cv: run_cv(cfg); break;
        case Command::simulate: run_simulate(cfg); break;
    }
}

}  // namespace sglmm
