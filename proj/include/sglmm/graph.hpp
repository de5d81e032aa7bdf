#pragma once

// Discrete (areal) support: graph Laplacian, order-k differencing operators
// Delta^(k) with Q_k = Delta' Delta = L^(k+1), and the CAR conditional
// decomposition. L = kappa^2 I + A throughout, with A the graph Laplacian.

#include <fstream>
#include <numeric>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "sglmm/errors.hpp"
#include "sglmm/sparse.hpp"

namespace sglmm {

struct GraphSupport {
    int n = 0;
    std::vector<std::pair<int, int>> edges;  // normalized i < j, each once
    std::vector<std::string> labels;         // optional node labels
    int components = 0;

    static GraphSupport from_edges(int n, std::vector<std::pair<int, int>> edges) {
        std::vector<std::string> problems;
        if (n < 1) problems.push_back("graph: node count must be positive");
        std::set<std::pair<int, int>> seen;
        for (auto& [a, b] : edges) {
            if (a > b) std::swap(a, b);
            if (a == b)
                problems.push_back("graph: self-loop at node " + std::to_string(a));
            else if (a < 0 || b >= n)
                problems.push_back("graph: edge (" + std::to_string(a) + ", " +
                                   std::to_string(b) + ") outside [0, " + std::to_string(n) +
                                   ")");
            else if (!seen.insert({a, b}).second)
                problems.push_back("graph: duplicate edge (" + std::to_string(a) + ", " +
                                   std::to_string(b) + ")");
        }
        if (!problems.empty()) throw ValidationError(std::move(problems));

        GraphSupport g;
        g.n = n;
        g.edges = std::move(edges);

        // Union-find for the connected-component count; a count above one
        // signals ICAR-style rank deficiency per component (callers warn).
        std::vector<int> parent(n);
        std::iota(parent.begin(), parent.end(), 0);
        auto find = [&parent](int x) {
            while (parent[x] != x) x = parent[x] = parent[parent[x]];
            return x;
        };
        int components = n;
        for (const auto& [a, b] : g.edges) {
            const int ra = find(a), rb = find(b);
            if (ra != rb) {
                parent[ra] = rb;
                --components;
            }
        }
        g.components = components;
        return g;
    }
};

// Graph Laplacian: diagonal = degree, off-diagonal -1 for neighbors.
inline SparseMatrix graph_laplacian(const GraphSupport& g) {
    std::vector<Triplet> ts;
    ts.reserve(g.edges.size() * 4);
    for (const auto& [a, b] : g.edges) {
        ts.emplace_back(a, b, -1.0);
        ts.emplace_back(b, a, -1.0);
        ts.emplace_back(a, a, 1.0);
        ts.emplace_back(b, b, 1.0);
    }
    return SparseMatrix::from_triplets(g.n, g.n, ts, true);
}

namespace graph_detail {

inline EigenSparse sparse_power(const EigenSparse& base, int power) {
    EigenSparse r(base.rows(), base.cols());
    r.setIdentity();
    for (int i = 0; i < power; ++i) r = (base * r).eval();
    return r;
}

// Unpermuted upper Cholesky factor D with D'D = M. Natural ordering keeps the
// factor reproducible bit-for-bit across runs and platforms.
inline EigenSparse upper_cholesky(const EigenSparse& m) {
    Eigen::SimplicialLLT<EigenSparse, Eigen::Lower, Eigen::NaturalOrdering<int>> llt;
    llt.compute(m);
    if (llt.info() != Eigen::Success)
        throw NotPositiveDefiniteError(
            "difference operator: Cholesky of L failed (kappa^2 too small?)");
    EigenSparse lower = llt.matrixL();
    for (Eigen::Index i = 0; i < lower.rows(); ++i) {
        const double d = lower.coeff(i, i);
        if (!std::isfinite(d) || d * d < CholeskyFactor::kPivotTolerance)
            throw NotPositiveDefiniteError(
                "difference operator: L is numerically rank-deficient");
    }
    return EigenSparse(lower.transpose());
}

}  // namespace graph_detail

// Order-k graph difference operator: odd k gives L^((k+1)/2); even k gives
// D L^(k/2) with D the upper Cholesky factor of L. Either way the implied
// precision is Q_k = Delta' Delta = L^(k+1).
struct DifferenceOperator {
    int order = 1;
    double kappa2 = 1.0;
    SparseMatrix delta;

    bool even() const { return order % 2 == 0; }

    SparseMatrix precision() const {
        return symmetrized(EigenSparse(delta.eigen().transpose()) * delta.eigen());
    }
};

inline DifferenceOperator difference_operator(const SparseMatrix& laplacian, double kappa2,
                                              int k) {
    if (k < 0) throw InvalidParams("difference operator: order k must be non-negative");
    if (kappa2 < 0.0) throw InvalidParams("difference operator: kappa^2 must be non-negative");
    if (laplacian.rows() != laplacian.cols())
        throw DimensionMismatch("difference operator: Laplacian must be square");
    EigenSparse identity(laplacian.rows(), laplacian.cols());
    identity.setIdentity();
    const EigenSparse l = kappa2 * identity + laplacian.eigen();

    DifferenceOperator out;
    out.order = k;
    out.kappa2 = kappa2;
    if (k % 2 == 1) {
        out.delta = SparseMatrix(graph_detail::sparse_power(l, (k + 1) / 2), false);
    } else {
        const EigenSparse d = graph_detail::upper_cholesky(l);
        out.delta = SparseMatrix(EigenSparse(d * graph_detail::sparse_power(l, k / 2)), false);
    }
    return out;
}

// CAR decomposition of a precision matrix Q: conditional variances
// M_ii = 1/Q_ii and conditional mean weights C = M R with R the negated
// off-diagonal part, so that M^-1 (I - C) = Q.
struct CarDecomposition {
    SparseMatrix c;
    Vector m;
};

inline CarDecomposition car_decompose(const SparseMatrix& q) {
    if (!q.symmetric())
        throw DimensionMismatch("car decomposition: input must carry the symmetry flag");
    const Vector d = q.diagonal();
    for (Eigen::Index i = 0; i < d.size(); ++i)
        if (!(d[i] > 0.0))
            throw ZeroDiagonal("car decomposition: diagonal entry " + std::to_string(i) +
                               " is not positive");
    std::vector<Triplet> ts;
    const EigenSparse& e = q.eigen();
    for (int outer = 0; outer < e.outerSize(); ++outer)
        for (EigenSparse::InnerIterator it(e, outer); it; ++it)
            if (it.row() != it.col()) ts.emplace_back(it.row(), it.col(), -it.value() / d[it.row()]);
    CarDecomposition out;
    out.c = SparseMatrix::from_triplets(q.rows(), q.cols(), ts, false);
    out.m = d.cwiseInverse();
    return out;
}

// Plain-text adjacency reader: one "i j" pair per line, 0-based, each
// undirected edge listed once. Node count is inferred as max index + 1 unless
// supplied (which also permits trailing isolated nodes).
inline GraphSupport load_adjacency(const std::string& path, int n_nodes = -1) {
    std::ifstream in(path);
    if (!in) throw ValidationError({"adjacency file: cannot open " + path});
    std::vector<std::pair<int, int>> edges;
    int max_index = -1;
    long a = 0, b = 0;
    while (in >> a >> b) {
        edges.emplace_back(static_cast<int>(a), static_cast<int>(b));
        max_index = std::max(max_index, static_cast<int>(std::max(a, b)));
    }
    if (!in.eof())
        throw ValidationError({"adjacency file: malformed edge line near entry " +
                               std::to_string(edges.size())});
    const int n = n_nodes >= 0 ? n_nodes : max_index + 1;
    return GraphSupport::from_edges(n, std::move(edges));
}

}  // namespace sglmm
