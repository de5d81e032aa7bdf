#pragma once

// Small statistical helpers for the test suite: chi-square tail areas via the
// regularized incomplete gamma function, and batch-means Monte-Carlo standard
// errors for correlated chain output.

#include <cmath>
#include <stdexcept>
#include <vector>

namespace oracle {

namespace stats_detail {

// Regularized lower incomplete gamma P(a, x) by series expansion (x < a + 1).
inline double gamma_p_series(double a, double x) {
    const double gln = std::lgamma(a);
    double ap = a;
    double sum = 1.0 / a;
    double del = sum;
    for (int n = 0; n < 500; ++n) {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if (std::fabs(del) < std::fabs(sum) * 1e-15)
            return sum * std::exp(-x + a * std::log(x) - gln);
    }
    throw std::runtime_error("stats oracle: incomplete gamma series failed to converge");
}

// Regularized upper incomplete gamma Q(a, x) by Lentz continued fraction.
inline double gamma_q_cf(double a, double x) {
    const double gln = std::lgamma(a);
    const double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i <= 500; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < 1e-15) return std::exp(-x + a * std::log(x) - gln) * h;
    }
    throw std::runtime_error("stats oracle: incomplete gamma fraction failed to converge");
}

}  // namespace stats_detail

inline double gamma_q(double a, double x) {
    if (x < 0.0 || a <= 0.0) throw std::runtime_error("stats oracle: bad gamma_q arguments");
    if (x == 0.0) return 1.0;
    if (x < a + 1.0) return 1.0 - stats_detail::gamma_p_series(a, x);
    return stats_detail::gamma_q_cf(a, x);
}

inline double chi2_sf(double stat, int dof) { return gamma_q(0.5 * dof, 0.5 * stat); }

// Batch-means standard error of the mean for (possibly autocorrelated) draws.
inline double batch_se(const std::vector<double>& xs, int n_batches = 50) {
    const int n = static_cast<int>(xs.size());
    if (n < 2 * n_batches) throw std::runtime_error("stats oracle: too few draws for batches");
    const int len = n / n_batches;
    std::vector<double> means(n_batches, 0.0);
    for (int b = 0; b < n_batches; ++b) {
        double s = 0.0;
        for (int i = 0; i < len; ++i) s += xs[b * len + i];
        means[b] = s / len;
    }
    double grand = 0.0;
    for (double m : means) grand += m;
    grand /= n_batches;
    double var = 0.0;
    for (double m : means) var += (m - grand) * (m - grand);
    var /= (n_batches - 1);
    return std::sqrt(var / n_batches);
}

inline double mean_of(const std::vector<double>& xs) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

}  // namespace oracle
