#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

namespace spectralnet {

// Dense helpers for symmetric problems of modest size (band-correlation
// matrices, a few hundred rows). Row-major flat storage throughout.

struct EigenResult {
    std::vector<double> values;   // descending
    std::vector<double> vectors;  // n x n, column j is the eigenvector of values[j]
};

// Cyclic Jacobi rotations. Converges quadratically for symmetric input;
// sweep order is fixed so results are reproducible.
inline EigenResult jacobi_eigen_symmetric(std::vector<double> a, std::size_t n,
                                          int max_sweeps = 100) {
    std::vector<double> v(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;

    double norm = 0.0;
    for (double x : a) norm += x * x;
    const double tol = 1e-24 * std::max(norm, 1.0);

    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += a[p * n + q] * a[p * n + q];
        if (off <= tol) break;

        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a[p * n + q];
                if (apq == 0.0) continue;
                const double theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;

                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a[k * n + p], akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a[p * n + k], aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v[k * n + p], vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t(0));
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return a[i * n + i] > a[j * n + j]; });

    EigenResult res;
    res.values.resize(n);
    res.vectors.assign(n * n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        res.values[j] = a[order[j] * n + order[j]];
        for (std::size_t i = 0; i < n; ++i) res.vectors[i * n + j] = v[i * n + order[j]];
    }
    return res;
}

// In-place lower Cholesky factor of an SPD matrix; the upper triangle is
// left untouched. Returns false if the matrix is not positive definite.
inline bool cholesky_factor(std::vector<double>& a, std::size_t n) {
    for (std::size_t j = 0; j < n; ++j) {
        double d = a[j * n + j];
        for (std::size_t k = 0; k < j; ++k) d -= a[j * n + k] * a[j * n + k];
        if (d <= 0.0 || !std::isfinite(d)) return false;
        const double ljj = std::sqrt(d);
        a[j * n + j] = ljj;
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = a[i * n + j];
            for (std::size_t k = 0; k < j; ++k) s -= a[i * n + k] * a[j * n + k];
            a[i * n + j] = s / ljj;
        }
    }
    return true;
}

// Solves L L^T x = b in place given the lower factor.
inline void cholesky_solve(const std::vector<double>& lower, std::size_t n, double* b) {
    for (std::size_t i = 0; i < n; ++i) {
        double s = b[i];
        for (std::size_t k = 0; k < i; ++k) s -= lower[i * n + k] * b[k];
        b[i] = s / lower[i * n + i];
    }
    for (std::size_t ii = n; ii > 0; --ii) {
        const std::size_t i = ii - 1;
        double s = b[i];
        for (std::size_t k = i + 1; k < n; ++k) s -= lower[k * n + i] * b[k];
        b[i] = s / lower[i * n + i];
    }
}

// Full inverse from the lower Cholesky factor, by n solves of unit vectors.
inline std::vector<double> cholesky_inverse(const std::vector<double>& lower, std::size_t n) {
    std::vector<double> inv(n * n, 0.0);
    std::vector<double> col(n);
    for (std::size_t j = 0; j < n; ++j) {
        std::fill(col.begin(), col.end(), 0.0);
        col[j] = 1.0;
        cholesky_solve(lower, n, col.data());
        for (std::size_t i = 0; i < n; ++i) inv[i * n + j] = col[i];
    }
    return inv;
}

}  // namespace spectralnet
