#pragma once

// Triangular-mesh discretization of the Matérn SPDE on a continuous domain:
// lumped mass matrix C, stiffness matrix G, barycentric projection A, the
// GRF precision recursion Q_alpha, and the LMA operator recursion K_alpha.
//
// Meshes are consumed, never generated. Only the natural (Neumann) boundary
// conditions implicit in G are imposed; callers should supply meshes that
// extend beyond the data extent to keep boundary effects away from the
// observations.

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "sglmm/errors.hpp"
#include "sglmm/sparse.hpp"

namespace sglmm {

constexpr double kDegenerateAreaTolerance = 1e-14;
constexpr double kBarycentricTolerance = 1e-12;

struct Mesh {
    std::vector<std::array<double, 2>> nodes;
    std::vector<std::array<int, 3>> triangles;
    std::vector<std::uint8_t> boundary;  // 1 when the node lies on a boundary edge

    // Index-bounds validation plus boundary flags (edges incident to exactly
    // one triangle). Geometric checks happen at assembly time.
    static Mesh from_parts(std::vector<std::array<double, 2>> nodes,
                           std::vector<std::array<int, 3>> triangles) {
        Mesh m;
        m.nodes = std::move(nodes);
        m.triangles = std::move(triangles);
        const int n = static_cast<int>(m.nodes.size());
        for (const auto& tri : m.triangles)
            for (int v : tri)
                if (v < 0 || v >= n)
                    throw ValidationError({"mesh: triangle references node " + std::to_string(v) +
                                           " outside [0, " + std::to_string(n) + ")"});
        std::map<std::pair<int, int>, int> edge_count;
        for (const auto& tri : m.triangles) {
            for (int e = 0; e < 3; ++e) {
                int a = tri[e], b = tri[(e + 1) % 3];
                if (a > b) std::swap(a, b);
                ++edge_count[{a, b}];
            }
        }
        m.boundary.assign(m.nodes.size(), 0);
        for (const auto& [edge, count] : edge_count) {
            if (count == 1) {
                m.boundary[edge.first] = 1;
                m.boundary[edge.second] = 1;
            }
        }
        return m;
    }
};

enum class PriorKind { grf, lma };

// SPDE order bundle: alpha with the derived smoothness nu = alpha - d/2 on
// d = 2. The LMA recursion only exists for even alpha.
struct SpdeOrder {
    int alpha = 2;
    PriorKind kind = PriorKind::grf;

    double nu() const { return alpha - 1.0; }

    void validate() const {
        if (kind == PriorKind::lma && alpha % 2 != 0)
            throw OddAlphaUnsupported(
                "lma requires even alpha (the Laplace moving-average construction has no "
                "odd-alpha extension); got alpha = " +
                std::to_string(alpha));
        if (alpha < 1) throw InvalidParams("spde order: alpha must be >= 1");
        if (nu() <= 0.0)
            throw InvalidParams("spde order: smoothness nu = alpha - 1 must be positive");
    }
};

namespace fem_detail {

inline double signed_area(const std::array<double, 2>& p0, const std::array<double, 2>& p1,
                          const std::array<double, 2>& p2) {
    return 0.5 * (p0[0] * (p1[1] - p2[1]) + p1[0] * (p2[1] - p0[1]) + p2[0] * (p0[1] - p1[1]));
}

inline double element_area(const Mesh& mesh, std::size_t t) {
    const auto& tri = mesh.triangles[t];
    const double area =
        std::fabs(signed_area(mesh.nodes[tri[0]], mesh.nodes[tri[1]], mesh.nodes[tri[2]]));
    if (area < kDegenerateAreaTolerance)
        throw DegenerateTriangle("mesh: triangle " + std::to_string(t) + " has area " +
                                 std::to_string(area) + " below tolerance");
    return area;
}

// Shared by the GRF and LMA recursions: L = kappa^2 C + G with C diagonal.
inline EigenSparse whittle_operator(const SparseMatrix& c, const SparseMatrix& g, double kappa) {
    if (c.rows() != g.rows() || c.cols() != g.cols())
        throw DimensionMismatch("spde operator: C and G dimensions disagree");
    return kappa * kappa * c.eigen() + g.eigen();
}

inline Vector inverse_diagonal(const SparseMatrix& c) {
    if (c.nonzeros() > c.rows())
        throw InvalidParams("spde operator: mass matrix must be diagonal");
    Vector d = c.diagonal();
    for (Eigen::Index i = 0; i < d.size(); ++i) {
        if (d[i] <= 0.0)
            throw InvalidParams("spde operator: mass diagonal must be strictly positive");
        d[i] = 1.0 / d[i];
    }
    return d;
}

}  // namespace fem_detail

// Lumped mass matrix: C_ii = sum over incident triangles of area/3.
inline SparseMatrix assemble_mass_lumped(const Mesh& mesh) {
    std::vector<Triplet> ts;
    ts.reserve(mesh.triangles.size() * 3);
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
        const double share = fem_detail::element_area(mesh, t) / 3.0;
        for (int v : mesh.triangles[t]) ts.emplace_back(v, v, share);
    }
    const auto n = static_cast<Eigen::Index>(mesh.nodes.size());
    return SparseMatrix::from_triplets(n, n, ts, true);
}

// Stiffness matrix from the piecewise-linear basis: per element,
// G_ij = (e_i . e_j) / (4 T) with e_i the edge vector opposite vertex i.
inline SparseMatrix assemble_stiffness(const Mesh& mesh) {
    std::vector<Triplet> ts;
    ts.reserve(mesh.triangles.size() * 9);
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
        const double area = fem_detail::element_area(mesh, t);
        const auto& tri = mesh.triangles[t];
        std::array<std::array<double, 2>, 3> edge;
        for (int i = 0; i < 3; ++i) {
            const auto& from = mesh.nodes[tri[(i + 2) % 3]];
            const auto& to = mesh.nodes[tri[(i + 1) % 3]];
            edge[i] = {to[0] - from[0], to[1] - from[1]};
        }
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                ts.emplace_back(tri[i], tri[j],
                                (edge[i][0] * edge[j][0] + edge[i][1] * edge[j][1]) /
                                    (4.0 * area));
    }
    const auto n = static_cast<Eigen::Index>(mesh.nodes.size());
    return SparseMatrix::from_triplets(n, n, ts, true);
}

// Projection matrix A with A_ij = phi_j(u_i): each location row carries the
// barycentric coordinates of its containing triangle (ties broken toward the
// lowest triangle index), renormalized so the row sums to one exactly.
inline SparseMatrix assemble_projection(const Mesh& mesh,
                                        const std::vector<std::array<double, 2>>& locations) {
    std::vector<Triplet> ts;
    for (std::size_t r = 0; r < locations.size(); ++r) {
        const auto& u = locations[r];
        bool placed = false;
        for (std::size_t t = 0; t < mesh.triangles.size() && !placed; ++t) {
            const auto& tri = mesh.triangles[t];
            const auto& p0 = mesh.nodes[tri[0]];
            const auto& p1 = mesh.nodes[tri[1]];
            const auto& p2 = mesh.nodes[tri[2]];
            const double total = fem_detail::signed_area(p0, p1, p2);
            if (std::fabs(total) < kDegenerateAreaTolerance)
                throw DegenerateTriangle("mesh: triangle " + std::to_string(t) +
                                         " is degenerate");
            std::array<double, 3> lambda = {fem_detail::signed_area(u, p1, p2) / total,
                                            fem_detail::signed_area(p0, u, p2) / total,
                                            fem_detail::signed_area(p0, p1, u) / total};
            if (lambda[0] < -kBarycentricTolerance || lambda[1] < -kBarycentricTolerance ||
                lambda[2] < -kBarycentricTolerance)
                continue;
            double sum = 0.0;
            for (double& l : lambda) {
                if (l < 0.0) l = 0.0;
                sum += l;
            }
            for (int i = 0; i < 3; ++i)
                if (lambda[i] != 0.0)
                    ts.emplace_back(static_cast<int>(r), tri[i], lambda[i] / sum);
            placed = true;
        }
        if (!placed)
            throw LocationOutsideMesh(static_cast<int>(r),
                                      "location row " + std::to_string(r) +
                                          " lies outside every mesh triangle");
    }
    return SparseMatrix::from_triplets(static_cast<Eigen::Index>(locations.size()),
                                       static_cast<Eigen::Index>(mesh.nodes.size()), ts, false);
}

// GRF precision recursion: Q_1 = L, Q_2 = L C^-1 L, Q_alpha = L C^-1 Q_{alpha-2} C^-1 L.
inline SparseMatrix grf_precision(const SparseMatrix& c, const SparseMatrix& g, double kappa,
                                  int alpha) {
    if (!(kappa > 0.0)) throw NonPositiveKappa("grf precision: kappa must be positive");
    if (alpha < 1) throw InvalidParams("grf precision: alpha must be >= 1");
    const EigenSparse l = fem_detail::whittle_operator(c, g, kappa);
    if (alpha == 1) return symmetrized(l);
    const Vector cinv = fem_detail::inverse_diagonal(c);
    // Start from the parity base (Q_1 = L or Q_2 = L C^-1 L), then wrap with
    // L C^-1 . C^-1 L two orders at a time.
    EigenSparse q;
    int order;
    if (alpha % 2 == 0) {
        q = l * cinv.asDiagonal() * l;
        order = 2;
    } else {
        q = l;
        order = 1;
    }
    for (; order < alpha; order += 2) q = l * cinv.asDiagonal() * q * cinv.asDiagonal() * l;
    return symmetrized(q);
}

// LMA operator recursion: K_2 = L, K_alpha = L C^-1 K_{alpha-2} (even alpha only).
inline SparseMatrix lma_operator(const SparseMatrix& c, const SparseMatrix& g, double kappa,
                                 int alpha) {
    if (!(kappa > 0.0)) throw NonPositiveKappa("lma operator: kappa must be positive");
    if (alpha % 2 != 0)
        throw OddAlphaUnsupported(
            "lma operator requires even alpha (no odd-alpha extension of the Laplace "
            "moving-average construction exists); got alpha = " +
            std::to_string(alpha));
    if (alpha < 2) throw InvalidParams("lma operator: alpha must be an even integer >= 2");
    const EigenSparse l = fem_detail::whittle_operator(c, g, kappa);
    if (alpha == 2) return SparseMatrix(EigenSparse(l), false);
    const Vector cinv = fem_detail::inverse_diagonal(c);
    EigenSparse k = l;
    for (int order = 2; order < alpha; order += 2) k = l * cinv.asDiagonal() * k;
    return SparseMatrix(std::move(k), false);
}

// Marginal variance and effective range implied by the SPDE parameters.
struct MaternDerived {
    double phi2;  // marginal variance
    double rho;   // effective range
};

inline MaternDerived matern_derived(double xi, double kappa, double nu, double d = 2.0) {
    const double alpha = nu + d / 2.0;
    const double four_pi = 12.566370614359172;
    MaternDerived out;
    out.phi2 = xi * xi * std::tgamma(nu) /
               (std::tgamma(alpha) * std::pow(four_pi, d / 2.0) * std::pow(kappa, 2.0 * nu));
    out.rho = std::sqrt(8.0 * nu) / kappa;
    return out;
}

// Plain-text mesh reader: header "nodes <n> triangles <m>", then n lines
// "x y", then m lines "i j k" with 0-based node indices.
inline Mesh load_mesh(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError({"mesh file: cannot open " + path});
    std::string word;
    long n = 0, m = 0;
    std::string tag_nodes, tag_triangles;
    if (!(in >> tag_nodes >> n >> tag_triangles >> m) || tag_nodes != "nodes" ||
        tag_triangles != "triangles" || n < 0 || m < 0)
        throw ValidationError({"mesh file: malformed header (expected 'nodes <n> triangles <m>')"});
    std::vector<std::array<double, 2>> nodes(static_cast<std::size_t>(n));
    for (long i = 0; i < n; ++i)
        if (!(in >> nodes[i][0] >> nodes[i][1]))
            throw ValidationError({"mesh file: truncated node list at row " + std::to_string(i)});
    std::vector<std::array<int, 3>> triangles(static_cast<std::size_t>(m));
    for (long i = 0; i < m; ++i)
        if (!(in >> triangles[i][0] >> triangles[i][1] >> triangles[i][2]))
            throw ValidationError(
                {"mesh file: truncated triangle list at row " + std::to_string(i)});
    return Mesh::from_parts(std::move(nodes), std::move(triangles));
}

}  // namespace sglmm
