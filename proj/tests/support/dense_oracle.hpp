#pragma once

// Brute-force dense linear-algebra oracles for the test suite. Hand-rolled
// long-double loops, deliberately independent of the library's sparse path
// (Eigen types are used as containers only).

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <vector>

namespace oracle {

using LMat = std::vector<std::vector<long double>>;

inline LMat to_lmat(const Eigen::MatrixXd& a) {
    LMat m(a.rows(), std::vector<long double>(a.cols()));
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j) m[i][j] = a(i, j);
    return m;
}

// Unpivoted dense Cholesky A = L L'; throws on a non-positive pivot.
inline LMat cholesky_lower(const LMat& a) {
    const int n = static_cast<int>(a.size());
    LMat l(n, std::vector<long double>(n, 0.0L));
    for (int j = 0; j < n; ++j) {
        long double d = a[j][j];
        for (int k = 0; k < j; ++k) d -= l[j][k] * l[j][k];
        if (!(d > 0.0L)) throw std::runtime_error("dense oracle: matrix not positive definite");
        l[j][j] = std::sqrt(d);
        for (int i = j + 1; i < n; ++i) {
            long double s = a[i][j];
            for (int k = 0; k < j; ++k) s -= l[i][k] * l[j][k];
            l[i][j] = s / l[j][j];
        }
    }
    return l;
}

inline double log_det_spd(const Eigen::MatrixXd& a) {
    LMat l = cholesky_lower(to_lmat(a));
    long double s = 0.0L;
    for (size_t i = 0; i < l.size(); ++i) s += std::log(l[i][i]);
    return static_cast<double>(2.0L * s);
}

inline Eigen::VectorXd solve_spd(const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
    const int n = static_cast<int>(a.rows());
    LMat l = cholesky_lower(to_lmat(a));
    std::vector<long double> y(n), x(n);
    for (int i = 0; i < n; ++i) {
        long double s = b[i];
        for (int k = 0; k < i; ++k) s -= l[i][k] * y[k];
        y[i] = s / l[i][i];
    }
    for (int i = n - 1; i >= 0; --i) {
        long double s = y[i];
        for (int k = i + 1; k < n; ++k) s -= l[k][i] * x[k];
        x[i] = s / l[i][i];
    }
    Eigen::VectorXd out(n);
    for (int i = 0; i < n; ++i) out[i] = static_cast<double>(x[i]);
    return out;
}

inline Eigen::MatrixXd inverse_spd(const Eigen::MatrixXd& a) {
    const int n = static_cast<int>(a.rows());
    Eigen::MatrixXd inv(n, n);
    for (int j = 0; j < n; ++j) inv.col(j) = solve_spd(a, Eigen::VectorXd::Unit(n, j));
    return inv;
}

// Reconstruction residual of a claimed factorization P A P' = F F', as a
// relative Frobenius error.
inline double reconstruction_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& f,
                                   const Eigen::VectorXi& perm) {
    const int n = static_cast<int>(a.rows());
    Eigen::MatrixXd paptr(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) paptr(perm[i], perm[j]) = a(i, j);
    return (paptr - f * f.transpose()).norm() / a.norm();
}

}  // namespace oracle
