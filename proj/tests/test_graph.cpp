#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <utility>
#include <vector>

#include "sglmm/distributions.hpp"
#include "sglmm/graph.hpp"
#include "support/gtf_oracle.hpp"
#include "support/ks.hpp"

using sglmm::GraphSupport;
using sglmm::Rng;
using sglmm::SparseMatrix;

namespace {

Eigen::MatrixXd dense(const SparseMatrix& m) { return Eigen::MatrixXd(m.eigen()); }

GraphSupport path(int n) {
    std::vector<std::pair<int, int>> edges;
    for (int i = 0; i + 1 < n; ++i) edges.emplace_back(i, i + 1);
    return GraphSupport::from_edges(n, std::move(edges));
}

GraphSupport cycle(int n) {
    std::vector<std::pair<int, int>> edges;
    for (int i = 0; i + 1 < n; ++i) edges.emplace_back(i, i + 1);
    edges.emplace_back(0, n - 1);
    return GraphSupport::from_edges(n, std::move(edges));
}

GraphSupport grid3x3() {
    std::vector<std::pair<int, int>> edges;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) {
            const int v = 3 * r + c;
            if (c + 1 < 3) edges.emplace_back(v, v + 1);
            if (r + 1 < 3) edges.emplace_back(v, v + 3);
        }
    return GraphSupport::from_edges(9, std::move(edges));
}

Eigen::MatrixXd dense_power(const Eigen::MatrixXd& base, int p) {
    Eigen::MatrixXd r = Eigen::MatrixXd::Identity(base.rows(), base.cols());
    for (int i = 0; i < p; ++i) r = base * r;
    return r;
}

}  // namespace

TEST_CASE("graph laplacian has degree diagonal and -1 neighbors", "[graph]") {
    SECTION("three-node path") {
        const Eigen::MatrixXd a = dense(sglmm::graph_laplacian(path(3)));
        Eigen::MatrixXd want(3, 3);
        want << 1, -1, 0, -1, 2, -1, 0, -1, 1;
        REQUIRE((a - want).cwiseAbs().maxCoeff() == 0.0);
    }

    SECTION("single node") {
        const auto a = sglmm::graph_laplacian(GraphSupport::from_edges(1, {}));
        REQUIRE(a.rows() == 1);
        REQUIRE(a.nonzeros() == 0);
    }

    SECTION("columbus fixture: zero row sums and recomputed degrees") {
        const GraphSupport g = sglmm::load_adjacency(SGLMM_DATA_DIR "/columbus_adj.txt");
        REQUIRE(g.n == 49);
        REQUIRE(g.components == 1);
        const Eigen::MatrixXd a = dense(sglmm::graph_laplacian(g));
        const Eigen::VectorXd rowsum = a * Eigen::VectorXd::Ones(g.n);
        REQUIRE(rowsum.cwiseAbs().maxCoeff() == 0.0);
        std::vector<int> degree(g.n, 0);
        for (const auto& [i, j] : g.edges) {
            ++degree[i];
            ++degree[j];
        }
        for (int i = 0; i < g.n; ++i) REQUIRE(a(i, i) == static_cast<double>(degree[i]));
    }

    SECTION("graph validation rejects malformed inputs") {
        REQUIRE_THROWS_AS(GraphSupport::from_edges(3, {{0, 0}}), sglmm::ValidationError);
        REQUIRE_THROWS_AS(GraphSupport::from_edges(3, {{0, 1}, {1, 0}}),
                          sglmm::ValidationError);
        REQUIRE_THROWS_AS(GraphSupport::from_edges(3, {{0, 7}}), sglmm::ValidationError);
    }

    SECTION("component count is reported for disconnected graphs") {
        const GraphSupport g = GraphSupport::from_edges(5, {{0, 1}, {2, 3}});
        REQUIRE(g.components == 3);
    }
}

TEST_CASE("difference operator parity and defining invariant", "[graph]") {
    SECTION("k = 1 is L itself and Q_1 = L^2") {
        const auto a = sglmm::graph_laplacian(path(4));
        const auto op = sglmm::difference_operator(a, 0.8, 1);
        const Eigen::MatrixXd l =
            0.8 * Eigen::MatrixXd::Identity(4, 4) + dense(a);
        REQUIRE((dense(op.delta) - l).cwiseAbs().maxCoeff() < 1e-14);
        REQUIRE((dense(op.precision()) - l * l).norm() < 1e-12 * (l * l).norm());
    }

    SECTION("k = 0 gives the upper Cholesky factor") {
        const auto a = sglmm::graph_laplacian(path(3));
        const auto op = sglmm::difference_operator(a, 1.0, 0);
        const Eigen::MatrixXd d = dense(op.delta);
        // Upper triangular with D'D = I + A.
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < i; ++j) REQUIRE(d(i, j) == 0.0);
        const Eigen::MatrixXd l = Eigen::MatrixXd::Identity(3, 3) + dense(a);
        REQUIRE((d.transpose() * d - l).cwiseAbs().maxCoeff() < 1e-12);
    }

    SECTION("k = 2 precision matches the dense cube") {
        const auto a = sglmm::graph_laplacian(path(5));
        const auto op = sglmm::difference_operator(a, 0.5, 2);
        const Eigen::MatrixXd l = 0.5 * Eigen::MatrixXd::Identity(5, 5) + dense(a);
        const Eigen::MatrixXd want = l * l * l;
        REQUIRE((dense(op.precision()) - want).norm() < 1e-10 * want.norm());
    }

    SECTION("delta' delta = L^(k+1) across orders, kappas, fixtures") {
        for (const auto& g : {path(6), cycle(6), grid3x3()}) {
            const auto a = sglmm::graph_laplacian(g);
            for (double kappa2 : {0.1, 1.0, 5.0}) {
                for (int k : {0, 1, 2, 3}) {
                    const auto op = sglmm::difference_operator(a, kappa2, k);
                    REQUIRE(op.order == k);
                    REQUIRE(op.even() == (k % 2 == 0));
                    const Eigen::MatrixXd l =
                        kappa2 * Eigen::MatrixXd::Identity(g.n, g.n) + dense(a);
                    const Eigen::MatrixXd want = dense_power(l, k + 1);
                    const Eigen::MatrixXd dd = dense(op.delta);
                    REQUIRE((dd.transpose() * dd - want).norm() < 1e-10 * want.norm());
                }
            }
        }
    }

    SECTION("zero kappa^2 with even k cannot factorize") {
        const auto a = sglmm::graph_laplacian(path(4));
        REQUIRE_THROWS_AS(sglmm::difference_operator(a, 0.0, 0),
                          sglmm::NotPositiveDefiniteError);
        REQUIRE_THROWS_AS(sglmm::difference_operator(a, -1.0, 1), sglmm::InvalidParams);
        REQUIRE_THROWS_AS(sglmm::difference_operator(a, 1.0, -1), sglmm::InvalidParams);
    }
}

TEST_CASE("car decomposition", "[graph]") {
    SECTION("identity precision") {
        const auto car = sglmm::car_decompose(SparseMatrix::identity(3));
        REQUIRE(car.c.nonzeros() == 0);
        REQUIRE((car.m - Eigen::VectorXd::Ones(3)).cwiseAbs().maxCoeff() == 0.0);
    }

    SECTION("two-by-two example") {
        std::vector<sglmm::Triplet> ts = {{0, 0, 2.0}, {1, 1, 2.0}, {0, 1, -1.0}, {1, 0, -1.0}};
        const auto q = SparseMatrix::from_triplets(2, 2, ts, true);
        const auto car = sglmm::car_decompose(q);
        REQUIRE(car.m[0] == Catch::Approx(0.5));
        REQUIRE(car.m[1] == Catch::Approx(0.5));
        const Eigen::MatrixXd c = dense(car.c);
        REQUIRE(c(0, 0) == 0.0);
        REQUIRE(c(0, 1) == Catch::Approx(0.5));
        REQUIRE(c(1, 0) == Catch::Approx(0.5));
    }

    SECTION("round trip M^-1 (I - C) = Q") {
        const auto a = sglmm::graph_laplacian(grid3x3());
        const auto q = sglmm::difference_operator(a, 0.7, 1).precision();
        const auto car = sglmm::car_decompose(q);
        const Eigen::MatrixXd lhs = car.m.cwiseInverse().asDiagonal() *
                                    (Eigen::MatrixXd::Identity(9, 9) - dense(car.c));
        REQUIRE((lhs - dense(q)).cwiseAbs().maxCoeff() < 1e-12);
    }

    SECTION("full conditionals match the dense Schur oracle") {
        const auto a = sglmm::graph_laplacian(path(4));
        const auto q = sglmm::difference_operator(a, 0.8, 1).precision();
        const auto car = sglmm::car_decompose(q);
        const Eigen::MatrixXd sigma = dense(q).inverse();
        const Eigen::MatrixXd c = dense(car.c);
        for (int i = 0; i < 4; ++i) {
            std::vector<int> rest;
            for (int j = 0; j < 4; ++j)
                if (j != i) rest.push_back(j);
            Eigen::MatrixXd s_rr(3, 3);
            Eigen::VectorXd s_ir(3);
            for (int r = 0; r < 3; ++r) {
                s_ir[r] = sigma(i, rest[r]);
                for (int s = 0; s < 3; ++s) s_rr(r, s) = sigma(rest[r], rest[s]);
            }
            const Eigen::VectorXd w = s_rr.ldlt().solve(s_ir);
            const double cond_var = sigma(i, i) - s_ir.dot(w);
            REQUIRE(car.m[i] == Catch::Approx(cond_var).epsilon(1e-10));
            for (int r = 0; r < 3; ++r)
                REQUIRE(c(i, rest[r]) == Catch::Approx(w[r]).margin(1e-10));
        }
    }

    SECTION("zero diagonal is rejected") {
        std::vector<sglmm::Triplet> ts = {{0, 1, 1.0}, {1, 0, 1.0}, {1, 1, 2.0}};
        const auto q = SparseMatrix::from_triplets(2, 2, ts, true);
        REQUIRE_THROWS_AS(sglmm::car_decompose(q), sglmm::ZeroDiagonal);
    }
}

TEST_CASE("discrete field sampling matches the implied covariance", "[graph]") {
    const GraphSupport g = path(5);
    const auto a = sglmm::graph_laplacian(g);
    const auto op = sglmm::difference_operator(a, 0.7, 1);
    const Eigen::MatrixXd delta = dense(op.delta);
    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(delta);
    const int n = 5, draws = 100000;

    SECTION("gaussian differences: Cov(eta) = xi^2 Q^-1") {
        const double xi = 1.1;
        Rng rng(501);
        Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(n, n);
        Eigen::VectorXd z(n);
        for (int t = 0; t < draws; ++t) {
            for (int i = 0; i < n; ++i) z[i] = xi * rng.normal();
            const Eigen::VectorXd eta = lu.solve(z);
            sum += eta * eta.transpose();
        }
        const Eigen::MatrixXd emp = sum / draws;
        const Eigen::MatrixXd target = xi * xi * dense(op.precision()).inverse();
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                const double se = std::sqrt(
                    (target(i, i) * target(j, j) + target(i, j) * target(i, j)) / draws);
                REQUIRE(std::fabs(emp(i, j) - target(i, j)) < 3.0 * se);
            }
    }

    SECTION("exponential mixing: Laplace margins and Cov(eta) = (2/lambda^2) Q^-1") {
        const double lambda = 1.4;
        Rng rng(502);
        std::vector<double> pooled;
        pooled.reserve(static_cast<std::size_t>(draws) * n);
        Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(n, n);
        Eigen::MatrixXd sumsq = Eigen::MatrixXd::Zero(n, n);
        Eigen::VectorXd z(n);
        for (int t = 0; t < draws; ++t) {
            for (int i = 0; i < n; ++i) {
                const double s = rng.exponential(lambda * lambda / 2.0);
                z[i] = std::sqrt(s) * rng.normal();
                pooled.push_back(z[i]);
            }
            const Eigen::VectorXd eta = lu.solve(z);
            const Eigen::MatrixXd outer = eta * eta.transpose();
            sum += outer;
            sumsq += outer.cwiseProduct(outer);
        }
        const double ks_p = oracle::ks_test(
            pooled, [lambda](double x) { return sglmm::laplace_cdf(x, lambda); });
        REQUIRE(ks_p > 0.01);

        const Eigen::MatrixXd emp = sum / draws;
        const Eigen::MatrixXd target =
            (2.0 / (lambda * lambda)) * dense(op.precision()).inverse();
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                const double var_hat =
                    sumsq(i, j) / draws - emp(i, j) * emp(i, j);
                const double se = std::sqrt(var_hat / draws);
                REQUIRE(std::fabs(emp(i, j) - target(i, j)) < 3.0 * se);
            }
    }
}

TEST_CASE("adjacency file io", "[graph]") {
    namespace fs = std::filesystem;
    const fs::path p = fs::temp_directory_path() / "sglmm_test_adj.txt";

    SECTION("round trip with an isolated node") {
        {
            std::ofstream out(p);
            out << "0 1\n1 2\n";
        }
        const GraphSupport inferred = sglmm::load_adjacency(p.string());
        REQUIRE(inferred.n == 3);
        const GraphSupport padded = sglmm::load_adjacency(p.string(), 4);
        REQUIRE(padded.n == 4);
        REQUIRE(padded.components == 2);
        std::error_code ec;
        fs::remove(p, ec);
    }

    SECTION("malformed or invalid files") {
        {
            std::ofstream out(p);
            out << "0 x\n";
        }
        REQUIRE_THROWS_AS(sglmm::load_adjacency(p.string()), sglmm::ValidationError);
        {
            std::ofstream out(p);
            out << "2 2\n";
        }
        REQUIRE_THROWS_AS(sglmm::load_adjacency(p.string()), sglmm::ValidationError);
        REQUIRE_THROWS_AS(sglmm::load_adjacency("/nonexistent/adj.txt"),
                          sglmm::ValidationError);
        std::error_code ec;
        fs::remove(p, ec);
    }
}

TEST_CASE("gtf oracle and the small-kappa^2 limit", "[graph][gtf]") {
    const GraphSupport g = path(6);
    Eigen::VectorXd y(6);
    y << 2.0, 1.8, 3.5, 3.4, 0.2, 0.4;

    SECTION("no penalty returns the data") {
        const Eigen::VectorXd fit = oracle::gtf_mode_check(y, 0.0, 1, g);
        REQUIRE((fit - y).cwiseAbs().maxCoeff() < 1e-8);
    }

    SECTION("full fusion at the mean for huge lambda") {
        const Eigen::VectorXd fit = oracle::gtf_mode_check(y, 1e3, 0, g);
        for (int i = 0; i < 6; ++i)
            REQUIRE(fit[i] == Catch::Approx(y.mean()).margin(1e-6));
    }

    SECTION("the two k = 0 routes agree") {
        const Eigen::VectorXd admm = oracle::gtf_mode_check(y, 1.0, 0, g);
        const Eigen::VectorXd cd = oracle::fused_lasso_block_cd(y, 1.0, g);
        REQUIRE((admm - cd).cwiseAbs().maxCoeff() < 1e-6);
        // Neither route undercuts the other's objective.
        const Eigen::MatrixXd delta = oracle::gtf_delta(g, 0);
        REQUIRE(std::fabs(oracle::gtf_objective(y, 1.0, delta, admm) -
                          oracle::gtf_objective(y, 1.0, delta, cd)) < 1e-9);
    }

    SECTION("lma penalty mode approaches the gtf estimate as kappa^2 shrinks") {
        const auto a = sglmm::graph_laplacian(g);
        const Eigen::VectorXd gtf = oracle::gtf_mode_check(y, 1.0, 0, g);
        double prev = 1e300;
        for (double kappa2 : {1e-2, 1e-4, 1e-6}) {
            const auto op = sglmm::difference_operator(a, kappa2, 0);
            const Eigen::VectorXd mode = oracle::gtf_admm(y, 1.0, dense(op.delta));
            const double dist = (mode - gtf).cwiseAbs().maxCoeff();
            REQUIRE(dist < prev);
            prev = dist;
        }
        REQUIRE(prev < 5e-3);
    }

    SECTION("size guard") {
        Eigen::VectorXd big = Eigen::VectorXd::Zero(31);
        REQUIRE_THROWS_AS(oracle::gtf_mode_check(big, 1.0, 0, path(31)),
                          sglmm::InvalidParams);
    }
}
