// sglmm: batch front door for spatial generalized linear mixed models.
//
// Three subcommands, each driven by one config file:
//   sglmm fit      --config run.cfg   posterior sampling + summaries
//   sglmm cv       --config run.cfg   k-fold cross-validated scoring
//   sglmm simulate --config run.cfg   prior field draws at pinned values
//
// Exit codes: 0 success, 2 validation problems (bad config, bad data,
// unsupported model combination), 1 runtime failure.

#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <string>

#include "sglmm/driver.hpp"

namespace {

int run(sglmm::Command command, const std::string& config_path) {
    sglmm::RunConfig cfg = sglmm::parse_config(config_path);
    if (cfg.command != command)
        throw sglmm::ValidationError({"[run] command: config says '" +
                                      std::string(cfg.command == sglmm::Command::fit   ? "fit"
                                                  : cfg.command == sglmm::Command::cv ? "cv"
                                                                                      : "simulate") +
                                      "' but the '" +
                                      std::string(command == sglmm::Command::fit   ? "fit"
                                                  : command == sglmm::Command::cv ? "cv"
                                                                                  : "simulate") +
                                      "' subcommand was invoked"});
    sglmm::run_command(cfg);
    std::printf("outputs written to %s\n", cfg.output_dir.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"sglmm: Bayesian spatial mixed models with GRF and Laplace "
                 "moving-average priors"};
    app.require_subcommand(1);

    std::string fit_config, cv_config, sim_config;
    CLI::App* fit = app.add_subcommand("fit", "sample the posterior and write summaries");
    fit->add_option("--config", fit_config, "run configuration file")
        ->required()
        ->check(CLI::ExistingFile);
    CLI::App* cv = app.add_subcommand("cv", "k-fold cross-validated scoring");
    cv->add_option("--config", cv_config, "run configuration file")
        ->required()
        ->check(CLI::ExistingFile);
    CLI::App* simulate =
        app.add_subcommand("simulate", "draw fields from the prior at pinned values");
    simulate->add_option("--config", sim_config, "run configuration file")
        ->required()
        ->check(CLI::ExistingFile);

    CLI11_PARSE(app, argc, argv);

    try {
        if (fit->parsed()) return run(sglmm::Command::fit, fit_config);
        if (cv->parsed()) return run(sglmm::Command::cv, cv_config);
        return run(sglmm::Command::simulate, sim_config);
    } catch (const sglmm::ValidationError& e) {
        std::fprintf(stderr, "configuration problems:\n%s\n", e.what());
        return 2;
    } catch (const sglmm::InvalidParams& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const sglmm::DimensionMismatch& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const sglmm::MissingColumn& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const sglmm::NonNumeric& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const sglmm::NegativeCount& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const sglmm::NonBinary& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const sglmm::TooFewGroups& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const sglmm::OddAlphaUnsupported& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const sglmm::LocationOutsideMesh& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const sglmm::NonPositiveKappa& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "runtime failure: %s\n", e.what());
        return 1;
    }
}
