#pragma once

// Brute-force finite-element oracles. Everything here recomputes element
// matrices from first principles (shoelace areas, explicit affine basis
// solves, midpoint Gauss quadrature) in long double, deliberately avoiding
// the edge-vector shortcuts used by the library assembly.

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "sglmm/fem.hpp"

namespace oracle {

using LMat = std::vector<std::vector<long double>>;

inline long double signed_area(const std::array<double, 2>& p0, const std::array<double, 2>& p1,
                               const std::array<double, 2>& p2) {
    return 0.5L * (static_cast<long double>(p0[0]) * (p1[1] - p2[1]) +
                   static_cast<long double>(p1[0]) * (p2[1] - p0[1]) +
                   static_cast<long double>(p2[0]) * (p0[1] - p1[1]));
}

// Affine nodal basis phi_i(x, y) = a_i + b_i x + c_i y with phi_i(v_j) =
// delta_ij, obtained by Cramer's rule on the 3x3 Vandermonde system.
struct AffineBasis {
    std::array<long double, 3> a, b, c;
};

inline AffineBasis affine_basis(const std::array<double, 2>& p0, const std::array<double, 2>& p1,
                                const std::array<double, 2>& p2) {
    const long double x0 = p0[0], y0 = p0[1];
    const long double x1 = p1[0], y1 = p1[1];
    const long double x2 = p2[0], y2 = p2[1];
    const long double det =
        (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0);
    if (det == 0.0L) throw std::runtime_error("fem oracle: degenerate element");
    AffineBasis out{};
    // Column i of the inverse Vandermonde gives the coefficients of phi_i.
    out.a = {(x1 * y2 - x2 * y1) / det, (x2 * y0 - x0 * y2) / det, (x0 * y1 - x1 * y0) / det};
    out.b = {(y1 - y2) / det, (y2 - y0) / det, (y0 - y1) / det};
    out.c = {(x2 - x1) / det, (x0 - x2) / det, (x1 - x0) / det};
    return out;
}

// Dense consistent mass matrix: per-element (T/12) [[2,1,1],[1,2,1],[1,1,2]].
inline LMat consistent_mass_dense(const sglmm::Mesh& mesh) {
    const std::size_t n = mesh.nodes.size();
    LMat m(n, std::vector<long double>(n, 0.0L));
    for (const auto& tri : mesh.triangles) {
        const long double area = std::fabs(
            signed_area(mesh.nodes[tri[0]], mesh.nodes[tri[1]], mesh.nodes[tri[2]]));
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                m[tri[i]][tri[j]] += area / 12.0L * (i == j ? 2.0L : 1.0L);
    }
    return m;
}

// Dense stiffness matrix by 3-point (edge midpoint) Gauss quadrature of
// grad(phi_i) . grad(phi_j); exact for the piecewise-constant gradients.
inline LMat stiffness_gauss_dense(const sglmm::Mesh& mesh) {
    const std::size_t n = mesh.nodes.size();
    LMat g(n, std::vector<long double>(n, 0.0L));
    for (const auto& tri : mesh.triangles) {
        const auto& p0 = mesh.nodes[tri[0]];
        const auto& p1 = mesh.nodes[tri[1]];
        const auto& p2 = mesh.nodes[tri[2]];
        const long double area = std::fabs(signed_area(p0, p1, p2));
        const AffineBasis basis = affine_basis(p0, p1, p2);
        // Each of the three midpoints carries weight area/3.
        for (int q = 0; q < 3; ++q) {
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j)
                    g[tri[i]][tri[j]] +=
                        area / 3.0L * (basis.b[i] * basis.b[j] + basis.c[i] * basis.c[j]);
        }
    }
    return g;
}

}  // namespace oracle
