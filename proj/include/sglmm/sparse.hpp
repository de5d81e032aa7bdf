#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <cmath>
#include <memory>
#include <optional>
#include <vector>

#include "sglmm/errors.hpp"
#include "sglmm/rng.hpp"

namespace sglmm {

using Vector = Eigen::VectorXd;
using Triplet = Eigen::Triplet<double>;
using EigenSparse = Eigen::SparseMatrix<double>;

// Compressed sparse matrix with an explicit symmetry flag. Exact zeros are
// never stored; when the flag is set the stored pattern and values must match
// the transpose exactly (assembly is required to symmetrize).
class SparseMatrix {
  public:
    SparseMatrix() : symmetric_(false) {}

    SparseMatrix(EigenSparse m, bool symmetric) : m_(std::move(m)), symmetric_(symmetric) {
        m_.prune([](int, int, double v) { return v != 0.0; });
        m_.makeCompressed();
        if (symmetric_) check_symmetry();
    }

    static SparseMatrix from_triplets(Eigen::Index rows, Eigen::Index cols,
                                      const std::vector<Triplet>& ts, bool symmetric) {
        EigenSparse m(rows, cols);
        m.setFromTriplets(ts.begin(), ts.end());
        return SparseMatrix(std::move(m), symmetric);
    }

    static SparseMatrix identity(Eigen::Index n) {
        EigenSparse m(n, n);
        m.setIdentity();
        return SparseMatrix(std::move(m), true);
    }

    Eigen::Index rows() const { return m_.rows(); }
    Eigen::Index cols() const { return m_.cols(); }
    Eigen::Index nonzeros() const { return m_.nonZeros(); }
    bool symmetric() const { return symmetric_; }

    const EigenSparse& eigen() const { return m_; }

    Vector diagonal() const { return m_.diagonal(); }

    // Matrix products keep exact-zero pruning; symmetry of a product is the
    // caller's claim and is re-verified on construction.
    SparseMatrix multiply(const SparseMatrix& rhs, bool result_symmetric = false) const {
        if (cols() != rhs.rows())
            throw DimensionMismatch("sparse multiply: inner dimensions disagree");
        EigenSparse p = m_ * rhs.m_;
        return SparseMatrix(std::move(p), result_symmetric);
    }

    SparseMatrix transpose() const { return SparseMatrix(EigenSparse(m_.transpose()), symmetric_); }

  private:
    void check_symmetry() {
        if (m_.rows() != m_.cols())
            throw DimensionMismatch("symmetric flag on a non-square matrix");
        EigenSparse d = EigenSparse(m_.transpose()) - m_;
        d.prune([](int, int, double v) { return v != 0.0; });
        if (d.nonZeros() != 0)
            throw DimensionMismatch("symmetric flag set but values differ from transpose");
    }

    EigenSparse m_;
    bool symmetric_;
};

// Exact symmetrization of a numerically near-symmetric product: (p_ij + p_ji)
// sums the same two terms on both sides, so the result passes the bitwise
// symmetry check regardless of sparse-product accumulation order.
inline SparseMatrix symmetrized(const EigenSparse& p) {
    EigenSparse s = 0.5 * (p + EigenSparse(p.transpose()));
    return SparseMatrix(std::move(s), true);
}

// Sparse Cholesky factor (AMD fill-reducing ordering) of a symmetric positive
// definite matrix M: P M P' = F F' with F lower triangular. Backed by an LDL'
// decomposition; the exposed diagonal U_ii = sqrt(D_ii) so the log-determinant
// is 2 sum(log U_ii). A pivot that is non-finite, <= 0, or below 1e-12 means
// the input is treated as numerically rank-deficient.
class CholeskyFactor {
  public:
    static constexpr double kPivotTolerance = 1e-12;

    Eigen::Index dimension() const { return solver_->rows(); }

    const Eigen::VectorXi& permutation() const { return perm_; }

    // Lower-triangular factor F = L sqrt(D) with P M P' = F F'.
    SparseMatrix factor_lower() const {
        EigenSparse l = solver_->matrixL();
        Vector root_d = solver_->vectorD().cwiseSqrt();
        EigenSparse f = l * root_d.asDiagonal();
        return SparseMatrix(std::move(f), false);
    }

    // The U_ii of the factorization: strictly positive by construction.
    Vector diagonal() const { return solver_->vectorD().cwiseSqrt(); }

    double log_det() const { return log_det_; }

    Vector solve(const Vector& b) const {
        if (b.size() != dimension())
            throw DimensionMismatch("solve: right-hand side length mismatch");
        return solver_->solve(b);
    }

    // Draw x ~ N(Q^{-1} h, Q^{-1}) for the factored precision Q: the mean is a
    // full solve, the fluctuation back-substitutes one standard normal vector
    // through F' and the permutation. One factorization serves a whole sweep.
    Vector sample_gaussian_precision(const Vector& mean_term, Rng& rng) const {
        const Eigen::Index n = dimension();
        if (mean_term.size() != n)
            throw DimensionMismatch("sample_gaussian_precision: mean term length mismatch");
        Vector z(n);
        for (Eigen::Index i = 0; i < n; ++i) z[i] = rng.normal();
        z.array() /= solver_->vectorD().array().sqrt();
        Vector fluct = solver_->permutationPinv() * Vector(solver_->matrixU().solve(z));
        return solver_->solve(mean_term) + fluct;
    }

    friend std::optional<CholeskyFactor> factorize(const SparseMatrix& m);

  private:
    using Solver = Eigen::SimplicialLDLT<EigenSparse, Eigen::Lower, Eigen::AMDOrdering<int>>;

    std::shared_ptr<const Solver> solver_;
    Eigen::VectorXi perm_;
    double log_det_ = 0.0;
};

// Factorizes a symmetric matrix; empty result signals "not positive definite"
// (the rank-deficiency path a caller must handle by re-sampling auxiliaries).
// Asymmetric input is a caller bug and throws.
inline std::optional<CholeskyFactor> factorize(const SparseMatrix& m) {
    if (!m.symmetric())
        throw DimensionMismatch("factorize: input must carry the symmetry flag");
    auto solver = std::make_shared<Eigen::SimplicialLDLT<EigenSparse, Eigen::Lower,
                                                         Eigen::AMDOrdering<int>>>();
    solver->compute(m.eigen());
    if (solver->info() != Eigen::Success) return std::nullopt;
    const Vector& d = solver->vectorD();
    double log_det = 0.0;
    for (Eigen::Index i = 0; i < d.size(); ++i) {
        if (!std::isfinite(d[i]) || d[i] < CholeskyFactor::kPivotTolerance) return std::nullopt;
        log_det += std::log(d[i]);
    }
    CholeskyFactor f;
    f.solver_ = std::move(solver);
    f.perm_ = f.solver_->permutationP().indices();
    f.log_det_ = log_det;
    return f;
}

inline double log_det(const CholeskyFactor& f) { return f.log_det(); }

inline Vector solve(const CholeskyFactor& f, const Vector& b) { return f.solve(b); }

inline Vector sample_gaussian_precision(const CholeskyFactor& f, const Vector& mean_term,
                                        Rng& rng) {
    return f.sample_gaussian_precision(mean_term, rng);
}

}  // namespace sglmm
