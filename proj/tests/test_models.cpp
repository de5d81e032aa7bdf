#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <utility>
#include <vector>

#include "sglmm/models.hpp"
#include "support/ks.hpp"
#include "support/stats.hpp"

using sglmm::DiscreteSupport;
using sglmm::Family;
using sglmm::GraphSupport;
using sglmm::Mesh;
using sglmm::ModelData;
using sglmm::ModelSpec;
using sglmm::PriorKind;
using sglmm::Rng;
using sglmm::SparseMatrix;
using sglmm::Vector;

namespace {

Eigen::MatrixXd dense(const SparseMatrix& m) { return Eigen::MatrixXd(m.eigen()); }

GraphSupport path(int n) {
    std::vector<std::pair<int, int>> edges;
    for (int i = 0; i + 1 < n; ++i) edges.emplace_back(i, i + 1);
    return GraphSupport::from_edges(n, std::move(edges));
}

// Two right triangles tiling the unit square.
Mesh unit_square() {
    return Mesh::from_parts({{0.0, 0.0}, {1.0, 0.0}, {1.0, 1.0}, {0.0, 1.0}},
                            {{0, 1, 2}, {0, 2, 3}});
}

double gamma_cdf(double x, double shape, double scale) {
    if (x <= 0.0) return 0.0;
    return 1.0 - oracle::gamma_q(shape, x / scale);
}

}  // namespace

TEST_CASE("hyperprior kernels and replication matrix", "[models]") {
    SECTION("half-normal kernels in both parametrizations") {
        const sglmm::HyperPrior on_value{10.0, false};
        REQUIRE(on_value.log_term(4.0) == Catch::Approx(-16.0 / 200.0));
        const sglmm::HyperPrior on_sd{1.0, true};
        REQUIRE(on_sd.log_term(4.0) == Catch::Approx(-2.0));
        REQUIRE(on_sd.log_term(0.0) == 0.0);
        REQUIRE_THROWS_AS(sglmm::HyperPrior{0.0}.log_term(1.0), sglmm::InvalidParams);
        REQUIRE_THROWS_AS(on_value.log_term(-1.0), sglmm::InvalidParams);
    }

    SECTION("replication matrix column sums count group sizes") {
        const SparseMatrix b = sglmm::replication_matrix({0, 0, 1, 2, 2, 2}, 3);
        REQUIRE(b.rows() == 6);
        REQUIRE(b.cols() == 3);
        const Vector sums = dense(b).colwise().sum();
        REQUIRE(sums[0] == 2.0);
        REQUIRE(sums[1] == 1.0);
        REQUIRE(sums[2] == 3.0);
        // every row is a single unit entry
        for (int r = 0; r < 6; ++r) REQUIRE(dense(b).row(r).sum() == 1.0);
        REQUIRE_THROWS_AS(sglmm::replication_matrix({3}, 3), sglmm::DimensionMismatch);
        REQUIRE_THROWS_AS(sglmm::replication_matrix({0}, 0), sglmm::InvalidParams);
    }
}

TEST_CASE("spatial supports expose structure with the right determinants", "[models]") {
    SECTION("discrete support: operators and half log-determinant") {
        const DiscreteSupport support(path(2), 1);
        REQUIRE(support.field_size() == 2);
        const auto s = support.structure(PriorKind::lma, 1.0);
        Eigen::MatrixXd want(2, 2);
        want << 2.0, -1.0, -1.0, 2.0;  // kappa^2 I + Laplacian
        REQUIRE((dense(s.delta) - want).cwiseAbs().maxCoeff() < 1e-12);
        // |M| = 3, multiplier (k+1)/2 = 1
        REQUIRE(s.half_logdet == Catch::Approx(std::log(3.0)).epsilon(1e-10));

        const auto g = support.structure(PriorKind::grf, 1.0);
        REQUIRE((dense(g.prior_q) - want * want).cwiseAbs().maxCoeff() < 1e-12);
        REQUIRE(g.half_logdet == Catch::Approx(std::log(3.0)).epsilon(1e-10));

        // k = 2 (even parity): multiplier 3/2, prior still M^(k+1)
        const DiscreteSupport support2(path(3), 2);
        const auto s2 = support2.structure(PriorKind::grf, 0.7);
        Eigen::MatrixXd m = 0.7 * Eigen::MatrixXd::Identity(3, 3);
        m(0, 0) += 1.0;
        m(1, 1) += 2.0;
        m(2, 2) += 1.0;
        m(0, 1) = m(1, 0) = m(1, 2) = m(2, 1) = -1.0;
        REQUIRE((dense(s2.prior_q) - m * m * m).cwiseAbs().maxCoeff() < 1e-10);
        REQUIRE(s2.half_logdet ==
                Catch::Approx(1.5 * std::log(m.determinant())).epsilon(1e-10));

        REQUIRE_THROWS_AS(support.structure(PriorKind::grf, 0.0), sglmm::NonPositiveKappa);
    }

    SECTION("continuous support: half log-determinant scales with alpha") {
        const sglmm::ContinuousSupport support(unit_square(), 2);
        REQUIRE(support.field_size() == 4);
        // lumped masses tile the unit square
        REQUIRE(support.mass_diagonal().sum() == Catch::Approx(1.0));

        const double kappa2 = 1.7;
        const Eigen::MatrixXd c = dense(sglmm::assemble_mass_lumped(unit_square()));
        const Eigen::MatrixXd g = dense(sglmm::assemble_stiffness(unit_square()));
        const Eigen::MatrixXd l = kappa2 * c + g;
        const double logdet_l = std::log(l.determinant());

        const auto s2 = support.structure(PriorKind::grf, kappa2);
        REQUIRE(s2.half_logdet == Catch::Approx(logdet_l).epsilon(1e-9));
        const sglmm::ContinuousSupport support4(unit_square(), 4);
        const auto s4 = support4.structure(PriorKind::lma, kappa2);
        REQUIRE(s4.half_logdet == Catch::Approx(2.0 * logdet_l).epsilon(1e-9));

        // alpha = 2 moving-average operator is L itself
        const auto lma = support.structure(PriorKind::lma, kappa2);
        REQUIRE((dense(lma.delta) - l).cwiseAbs().maxCoeff() < 1e-10);

        // the LMA recursion needs even alpha
        const sglmm::ContinuousSupport support3(unit_square(), 3);
        REQUIRE_THROWS_AS(support3.structure(PriorKind::lma, 1.0),
                          sglmm::OddAlphaUnsupported);
        REQUIRE_NOTHROW(support3.structure(PriorKind::grf, 1.0));
    }
}

TEST_CASE("penalty log-prior hand values", "[models]") {
    const DiscreteSupport support(path(2), 1);
    const auto s = support.structure(PriorKind::grf, 1.0);
    const auto s_lma = support.structure(PriorKind::lma, 1.0);
    Vector eta(2);
    eta << 1.0, -1.0;

    // Delta eta = (3, -3): squared penalty -18/(2 xi^2), L1 penalty -lambda 6
    REQUIRE(sglmm::penalty_logprior(eta, s, PriorKind::grf, 2.0) == Catch::Approx(-4.5));
    REQUIRE(sglmm::penalty_logprior(eta, s_lma, PriorKind::lma, 0.8) == Catch::Approx(-4.8));

    const Vector zero = Vector::Zero(2);
    REQUIRE(sglmm::penalty_logprior(zero, s, PriorKind::grf, 2.0) == 0.0);
    REQUIRE(sglmm::penalty_logprior(zero, s_lma, PriorKind::lma, 0.8) == 0.0);

    // linear in lambda: halving lambda halves the penalty
    const double full = sglmm::penalty_logprior(eta, s_lma, PriorKind::lma, 1.6);
    const double half = sglmm::penalty_logprior(eta, s_lma, PriorKind::lma, 0.8);
    REQUIRE(full == Catch::Approx(2.0 * half));
}

TEST_CASE("beta conditional matches the ridge closed form", "[models]") {
    Rng rng(404);
    const int n = 7, p = 2;
    Eigen::MatrixXd x(n, p);
    Vector y(n);
    for (int i = 0; i < n; ++i) {
        x(i, 0) = 1.0;
        x(i, 1) = rng.normal();
        y[i] = 0.4 + 1.3 * x(i, 1) + rng.normal(0.0, 0.5);
    }
    const double resp_var = 0.25, beta_var = 10.0;
    const auto params = sglmm::beta_conditional(x, y, resp_var, beta_var);

    Eigen::MatrixXd precision = x.transpose() * x / resp_var +
                                Eigen::MatrixXd::Identity(p, p) / beta_var;
    const Vector want_mean = precision.inverse() * (x.transpose() * y / resp_var);
    REQUIRE((params.mean - want_mean).cwiseAbs().maxCoeff() < 1e-10);
    REQUIRE((params.covariance - precision.inverse()).cwiseAbs().maxCoeff() < 1e-10);

    // grid check: conditional density == prior x likelihood up to a constant
    Eigen::MatrixXd x1(n, 1);
    x1 = x.col(1);
    const auto scalar = sglmm::beta_conditional(x1, y, resp_var, beta_var);
    const double sd = std::sqrt(scalar.covariance(0, 0));
    std::optional<double> constant;
    for (double g = -2.0; g <= 2.0; g += 0.25) {
        double logpost = sglmm::normal_logpdf(g, scalar.mean[0], sd);
        double logprod = sglmm::normal_logpdf(g, 0.0, std::sqrt(beta_var));
        for (int i = 0; i < n; ++i)
            logprod += sglmm::normal_logpdf(y[i], x1(i, 0) * g, std::sqrt(resp_var));
        if (!constant) constant = logpost - logprod;
        REQUIRE(logpost - logprod == Catch::Approx(*constant).margin(1e-8));
    }

    REQUIRE_THROWS_AS(sglmm::beta_conditional(x, y.head(3), resp_var, beta_var),
                      sglmm::DimensionMismatch);
    REQUIRE_THROWS_AS(sglmm::beta_conditional(x, y, 0.0, beta_var), sglmm::InvalidParams);
}

TEST_CASE("field conditional: grid identity, LMA/GRF equivalence, overflow guard",
          "[models]") {
    const DiscreteSupport support(path(4), 1);
    const auto s = support.structure(PriorKind::grf, 0.8);
    const auto s_lma = support.structure(PriorKind::lma, 0.8);

    // observations at nodes 0, 2, 2, 3
    const SparseMatrix obs = sglmm::replication_matrix({0, 2, 2, 3}, 4);
    Vector resid(4);
    resid << 0.6, -0.3, 0.9, 1.4;
    const double resp_var = 0.5, xi2 = 1.7;

    SECTION("conditional density matches prior x likelihood on a grid") {
        const auto fc = sglmm::field_conditional(s, PriorKind::grf, xi2, Vector(), obs,
                                                 resid, resp_var);
        REQUIRE(fc.has_value());
        const Eigen::MatrixXd q = dense(fc->precision);
        const Vector mean = q.ldlt().solve(fc->mean_term);
        const Eigen::MatrixXd q_prior = dense(s.prior_q) / xi2;

        Rng rng(11);
        std::optional<double> constant;
        for (int trial = 0; trial < 20; ++trial) {
            Vector g(4);
            for (int i = 0; i < 4; ++i) g[i] = rng.normal(0.0, 1.5);
            const Vector d = g - mean;
            const double logpost = -0.5 * d.dot(q * d);
            double logprod = -0.5 * g.dot(q_prior * g);
            const Vector og = obs.eigen() * g;
            for (int i = 0; i < 4; ++i)
                logprod += sglmm::normal_logpdf(resid[i], og[i], std::sqrt(resp_var));
            if (!constant) constant = logpost - logprod;
            REQUIRE(logpost - logprod == Catch::Approx(*constant).margin(1e-8));
        }
    }

    SECTION("LMA with unit auxiliaries equals GRF with xi^2 = 1") {
        const auto grf = sglmm::field_conditional(s, PriorKind::grf, 1.0, Vector(), obs,
                                                  resid, resp_var);
        const auto lma = sglmm::field_conditional(s_lma, PriorKind::lma, 1.0,
                                                  Vector(Vector::Ones(4)), obs, resid,
                                                  resp_var);
        REQUIRE(grf.has_value());
        REQUIRE(lma.has_value());
        REQUIRE((dense(grf->precision) - dense(lma->precision)).cwiseAbs().maxCoeff() <
                1e-10);
        REQUIRE((grf->mean_term - lma->mean_term).cwiseAbs().maxCoeff() < 1e-12);

        // distribution equality on actual draws (two independent streams)
        const auto f_grf = sglmm::factorize(grf->precision);
        const auto f_lma = sglmm::factorize(lma->precision);
        REQUIRE(f_grf.has_value());
        REQUIRE(f_lma.has_value());
        Rng rng_a(21), rng_b(22);
        std::vector<double> a, b;
        for (int t = 0; t < 4000; ++t) {
            a.push_back(f_grf->sample_gaussian_precision(grf->mean_term, rng_a)[1]);
            b.push_back(f_lma->sample_gaussian_precision(lma->mean_term, rng_b)[1]);
        }
        REQUIRE(oracle::ks_test_two_sample(a, b) > 0.01);
    }

    SECTION("near-zero auxiliary variances overflow to a rank-deficiency signal") {
        Vector aux = Vector::Ones(4);
        aux[1] = 1e-308;  // 1/aux overflows the operator product
        const auto fc = sglmm::field_conditional(s_lma, PriorKind::lma, 1.0, aux, obs,
                                                 resid, resp_var);
        REQUIRE_FALSE(fc.has_value());
        REQUIRE_FALSE(
            sglmm::field_prior_precision(s_lma, PriorKind::lma, 1.0, aux).has_value());
        REQUIRE_THROWS_AS(
            sglmm::field_prior_precision(s_lma, PriorKind::lma, 1.0, Vector(Vector::Zero(4))),
            sglmm::InvalidParams);
    }
}

TEST_CASE("lma auxiliary updates", "[models]") {
    SECTION("t = 0 reduces the continuous Gibbs draw to its Gamma branch") {
        Rng rng(515);
        sglmm::AuxUpdateStats stats;
        const double tau = 1.1, lambda2 = 2.0;
        Vector shape_diag = Vector::Constant(1, 2.0);  // tau C - 1/2 = 1.7 > 0
        Vector gamma = Vector::Ones(1);
        const Vector t0 = Vector::Zero(1);
        std::vector<double> draws;
        for (int i = 0; i < 60000; ++i) {
            sglmm::lma_gamma_gibbs(gamma, t0, shape_diag, tau, lambda2, stats, rng);
            draws.push_back(gamma[0]);
        }
        REQUIRE(stats.floored == 0);
        // Gamma(1.7, scale 2): mean 3.4, variance 6.8
        const double mean = oracle::mean_of(draws);
        REQUIRE(std::fabs(mean - 3.4) < 4.0 * oracle::batch_se(draws));
        std::vector<double> sq;
        for (double d : draws) sq.push_back((d - 3.4) * (d - 3.4));
        REQUIRE(std::fabs(oracle::mean_of(sq) - 6.8) < 4.0 * oracle::batch_se(sq));

        // order p <= 0 with t = 0 floors b and counts the event
        shape_diag[0] = 0.3;  // tau C - 1/2 = -0.17
        sglmm::lma_gamma_gibbs(gamma, t0, shape_diag, tau, lambda2, stats, rng);
        REQUIRE(stats.floored == 1);
        REQUIRE(gamma[0] > 0.0);
        REQUIRE(std::isfinite(gamma[0]));
    }

    SECTION("discrete Gibbs stationarity: Delta eta margins are Laplace(lambda)") {
        // Iterating [eta | S] and [S | Delta eta] must keep t = Delta eta
        // Laplace(lambda)-distributed, because eta | S ~ N(0, (D'S^-1 D)^-1)
        // implies t | S ~ N(0, diag(S)) and S mixes over Exp(lambda^2/2).
        // This also pins the inverse-Gaussian parametrization of the S draw.
        const DiscreteSupport support(path(2), 1);
        const auto s = support.structure(PriorKind::lma, 0.9);
        const double lambda2 = 1.21;  // lambda = 1.1
        Rng rng(909);
        Vector aux = Vector::Ones(2);
        std::vector<double> t_draws;
        for (int sweep = 0; sweep < 100000; ++sweep) {
            const auto prior =
                sglmm::field_prior_precision(s, PriorKind::lma, lambda2, aux);
            REQUIRE(prior.has_value());
            const auto factor = sglmm::factorize(*prior);
            REQUIRE(factor.has_value());
            const Vector eta =
                factor->sample_gaussian_precision(Vector::Zero(2), rng);
            const Vector t = s.delta.eigen() * eta;
            sglmm::lma_s_gibbs(aux, t, lambda2, rng);
            if (sweep % 5 == 4) t_draws.push_back(t[0]);
        }
        REQUIRE(oracle::ks_test(t_draws, [](double x) {
                    return sglmm::laplace_cdf(x, 1.1);
                }) > 0.01);
    }

    SECTION("continuous prior reproduction: Gamma margins survive the field loop") {
        // With no data, iterating [w | Gamma] and [Gamma | K w] must leave the
        // Gamma margins at their Gamma(tau C_ii, lambda^2) prior.
        const sglmm::ContinuousSupport support(unit_square(), 2);
        const auto s = support.structure(PriorKind::lma, 1.3);
        const Vector c_diag = support.mass_diagonal();
        const double tau = 6.0, lambda2 = 1.5;
        const int node = 2;

        for (const bool gibbs : {true, false}) {
            Rng rng(gibbs ? 606 : 607);
            sglmm::AuxUpdateStats stats;
            std::vector<sglmm::AdaptiveTuner> tuners(
                4, sglmm::AdaptiveTuner(1.0));
            Vector gamma = Vector::Constant(4, tau * c_diag.mean() * lambda2);
            std::vector<double> draws;
            const int sweeps = gibbs ? 60000 : 120000;
            const int thin = gibbs ? 5 : 10;
            for (int sweep = 0; sweep < sweeps; ++sweep) {
                const auto prior =
                    sglmm::field_prior_precision(s, PriorKind::lma, lambda2, gamma);
                REQUIRE(prior.has_value());
                const auto factor = sglmm::factorize(*prior);
                REQUIRE(factor.has_value());
                const Vector w = factor->sample_gaussian_precision(Vector::Zero(4), rng);
                const Vector t = s.delta.eigen() * w;
                if (gibbs)
                    sglmm::lma_gamma_gibbs(gamma, t, c_diag, tau, lambda2, stats, rng);
                else
                    sglmm::lma_gamma_mh(gamma, t, c_diag, tau, lambda2, tuners, rng);
                if (sweep % thin == thin - 1) draws.push_back(gamma[node]);
            }
            const double shape = tau * c_diag[node];
            REQUIRE(oracle::ks_test(draws, [&](double x) {
                        return gamma_cdf(x, shape, lambda2);
                    }) > 0.01);
        }
    }
}

TEST_CASE("observation log densities", "[models]") {
    SECTION("gaussian and poisson forms") {
        REQUIRE(sglmm::obs_logdensity(Family::gaussian, 1.3, 0.4, 2.0) ==
                Catch::Approx(sglmm::normal_logpdf(1.3, 0.4, std::sqrt(2.0))));
        const double lp = 0.7;
        REQUIRE(sglmm::obs_logdensity(Family::poisson, 3.0, lp, 1.0) ==
                Catch::Approx(3.0 * lp - std::exp(lp) - std::lgamma(4.0)));
    }

    SECTION("probit augmentation marginalizes back to the probit likelihood") {
        for (double lp : {-3.0, -0.7, 0.0, 0.4, 2.5}) {
            const double p = sglmm::normal_cdf(lp);
            REQUIRE(std::exp(sglmm::obs_logdensity(Family::binary_probit, 1.0, lp, 1.0)) ==
                    Catch::Approx(p).margin(1e-12));
            REQUIRE(std::exp(sglmm::obs_logdensity(Family::binary_probit, 0.0, lp, 1.0)) ==
                    Catch::Approx(1.0 - p).margin(1e-12));
        }
        // deep tail stays finite via the asymptotic branch
        const double tail = sglmm::obs_logdensity(Family::binary_probit, 1.0, -40.0, 1.0);
        REQUIRE(std::isfinite(tail));
        REQUIRE(tail == Catch::Approx(-804.608442).margin(1e-2));
    }

    SECTION("truncated-normal z update has mean sqrt(2/pi) at the origin") {
        Rng rng(33);
        std::vector<double> zs;
        for (int i = 0; i < 200000; ++i)
            zs.push_back(sglmm::sample_truncnorm(0.0, 1.0, sglmm::TruncSide::positive, rng));
        REQUIRE(std::fabs(oracle::mean_of(zs) - std::sqrt(2.0 / sglmm::kPi)) <
                4.0 * oracle::batch_se(zs));
    }
}

TEST_CASE("model validation aggregates failures", "[models]") {
    const DiscreteSupport support(path(3), 1);
    ModelSpec spec;
    spec.family = Family::binary_probit;
    spec.covariates = 2;

    ModelData data;
    data.y = Vector(3);
    data.y << 0.0, 1.0, 2.0;  // not binary
    data.x = Eigen::MatrixXd::Ones(3, 1);  // wrong width
    data.obs = sglmm::replication_matrix({0, 1, 2}, 3);

    try {
        sglmm::validate_model(spec, data, support.field_size());
        FAIL("expected validation to throw");
    } catch (const sglmm::ValidationError& e) {
        REQUIRE(e.messages.size() >= 2);
    }

    SECTION("family-specific response checks") {
        spec.covariates = 1;
        data.y << 0.0, 1.0, 1.0;
        REQUIRE_NOTHROW(sglmm::validate_model(spec, data, 3));

        spec.family = Family::poisson;
        data.y << 1.0, 2.0, -1.0;
        REQUIRE_THROWS_AS(sglmm::validate_model(spec, data, 3), sglmm::ValidationError);
        data.y << 1.0, 2.5, 3.0;
        REQUIRE_THROWS_AS(sglmm::validate_model(spec, data, 3), sglmm::ValidationError);
    }

    SECTION("offset and noise flags are family-gated") {
        spec.family = Family::gaussian;
        spec.covariates = 1;
        data.y << 0.1, -0.4, 0.8;
        spec.has_offset = true;
        data.log_offset = Vector::Zero(3);
        REQUIRE_THROWS_AS(sglmm::validate_model(spec, data, 3), sglmm::ValidationError);
        spec.has_offset = false;
        data.log_offset = Vector();
        spec.include_nugget = true;
        REQUIRE_THROWS_AS(sglmm::validate_model(spec, data, 3), sglmm::ValidationError);
        spec.include_nugget = false;
        REQUIRE_NOTHROW(sglmm::validate_model(spec, data, 3));
    }

    SECTION("active rows must be ascending and in range") {
        spec.family = Family::gaussian;
        spec.covariates = 1;
        data.y << 0.1, -0.4, 0.8;
        data.active = {2, 1};
        REQUIRE_THROWS_AS(sglmm::validate_model(spec, data, 3), sglmm::ValidationError);
        data.active = {0, 7};
        REQUIRE_THROWS_AS(sglmm::validate_model(spec, data, 3), sglmm::ValidationError);
        data.active = {0, 2};
        REQUIRE_NOTHROW(sglmm::validate_model(spec, data, 3));
    }
}
