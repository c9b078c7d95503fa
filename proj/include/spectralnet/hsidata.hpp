#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "spectralnet/errors.hpp"
#include "spectralnet/linalg.hpp"
#include "spectralnet/npy.hpp"
#include "spectralnet/rng.hpp"

namespace spectralnet {

// Hyperspectral cube: rows x cols spatial grid, bands spectral values per
// pixel, stored pixel-major ([row][col][band]). Label 0 marks unlabeled
// background; classes run 1..class_count.
struct HSICube {
    std::size_t rows = 0, cols = 0, bands = 0;
    std::vector<double> data;
    std::vector<int> labels;
    int class_count = 0;

    std::size_t pixel_count() const { return rows * cols; }
    double at(std::size_t r, std::size_t c, std::size_t b) const {
        return data[(r * cols + c) * bands + b];
    }
    int label_at(std::size_t r, std::size_t c) const { return labels[r * cols + c]; }
};

// Per-band standardization parameters, kept so downstream runs can audit
// or undo the scaling.
struct Standardization {
    std::vector<double> means;
    std::vector<double> stds;
};

// Factor scores per pixel plus the fitted model.
struct ReducedCube {
    std::size_t rows = 0, cols = 0, bands = 0;  // bands == B
    std::vector<double> data;                   // rows*cols*B scores, pixel-major
    std::vector<double> loadings;               // R x B
    std::vector<double> uniquenesses;           // R
    std::vector<double> band_means;             // R, from standardization
    std::vector<double> band_stds;              // R
    int iterations = 0;
    double final_delta = 0.0;
    int heywood_count = 0;

    double at(std::size_t r, std::size_t c, std::size_t b) const {
        return data[(r * cols + c) * bands + b];
    }
};

enum class Split : unsigned char { kTrain = 0, kTest = 1 };

// One S x S x B window per labeled pixel, label taken from the window
// center. Patches are stored in row-major pixel scan order.
struct PatchSet {
    std::size_t patch_size = 0;  // S
    std::size_t bands = 0;       // B
    int class_count = 0;
    std::vector<double> patches;               // count * S*S*B, [i][row][col][band]
    std::vector<int> labels;                   // 0-based class ids
    std::vector<std::pair<int, int>> coords;   // source (row, col)
    std::vector<Split> split;

    std::size_t count() const { return labels.size(); }
    std::size_t patch_volume() const { return patch_size * patch_size * bands; }
    const double* patch(std::size_t i) const { return patches.data() + i * patch_volume(); }

    std::vector<std::size_t> indices_of(Split s) const {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < split.size(); ++i)
            if (split[i] == s) idx.push_back(i);
        return idx;
    }
};

inline HSICube load_cube(const std::string& data_path, const std::string& labels_path) {
    npy::NpyArray data = npy::load(data_path);
    npy::NpyArray labels = npy::load(labels_path);

    if (data.shape.size() != 3)
        throw InputError(data_path + ": expected 3-d cube (M,N,R), got rank " +
                         std::to_string(data.shape.size()));
    if (labels.shape.size() != 2)
        throw InputError(labels_path + ": expected 2-d label map (M,N), got rank " +
                         std::to_string(labels.shape.size()));
    if (labels.shape[0] != data.shape[0] || labels.shape[1] != data.shape[1])
        throw InputError("label map " + std::to_string(labels.shape[0]) + "x" +
                         std::to_string(labels.shape[1]) + " does not match cube " +
                         std::to_string(data.shape[0]) + "x" + std::to_string(data.shape[1]));
    if (!labels.integer_typed())
        throw InputError(labels_path + ": labels must be integer-typed, got '" + labels.descr +
                         "'");

    HSICube cube;
    cube.rows = data.shape[0];
    cube.cols = data.shape[1];
    cube.bands = data.shape[2];
    if (cube.rows == 0 || cube.cols == 0 || cube.bands == 0)
        throw InputError(data_path + ": degenerate cube shape");
    cube.data = std::move(data.values);

    cube.labels.resize(labels.values.size());
    int max_label = 0;
    for (std::size_t i = 0; i < labels.values.size(); ++i) {
        const int v = static_cast<int>(labels.values[i]);
        if (v < 0) throw InputError(labels_path + ": negative label");
        cube.labels[i] = v;
        max_label = std::max(max_label, v);
    }
    cube.class_count = max_label;
    if (max_label == 0) throw InputError(labels_path + ": no labeled pixels");

    std::vector<int> seen(static_cast<std::size_t>(max_label) + 1, 0);
    for (int v : cube.labels) seen[static_cast<std::size_t>(v)]++;
    for (int c = 1; c <= max_label; ++c)
        if (seen[static_cast<std::size_t>(c)] == 0)
            throw InputError(labels_path + ": class " + std::to_string(c) + " has no pixels");
    return cube;
}

// Rescales every band to mean 0, variance 1 over all pixels (population
// statistics). Fails on a constant band.
inline HSICube standardize_bands(const HSICube& cube, Standardization* stats = nullptr) {
    const std::size_t n = cube.pixel_count(), R = cube.bands;
    std::vector<double> means(R, 0.0), stds(R, 0.0);

    for (std::size_t p = 0; p < n; ++p)
        for (std::size_t b = 0; b < R; ++b) means[b] += cube.data[p * R + b];
    for (std::size_t b = 0; b < R; ++b) means[b] /= static_cast<double>(n);

    for (std::size_t p = 0; p < n; ++p)
        for (std::size_t b = 0; b < R; ++b) {
            const double d = cube.data[p * R + b] - means[b];
            stds[b] += d * d;
        }
    for (std::size_t b = 0; b < R; ++b) {
        stds[b] = std::sqrt(stds[b] / static_cast<double>(n));
        if (stds[b] == 0.0)
            throw InputError("standardize_bands: band " + std::to_string(b) +
                             " is constant (zero variance)");
    }

    HSICube out = cube;
    for (std::size_t p = 0; p < n; ++p)
        for (std::size_t b = 0; b < R; ++b)
            out.data[p * R + b] = (cube.data[p * R + b] - means[b]) / stds[b];

    if (stats) {
        stats->means = std::move(means);
        stats->stds = std::move(stds);
    }
    return out;
}

struct FactorAnalysisOptions {
    double tol = 1e-4;
    int max_iterations = 100;
};

namespace detail {

// Canonical sign: each loading column has its largest-magnitude entry
// positive, which keeps runs comparable across platforms.
inline void canonicalize_columns(std::vector<double>& m, std::size_t rows, std::size_t cols) {
    for (std::size_t j = 0; j < cols; ++j) {
        std::size_t arg = 0;
        double best = -1.0;
        for (std::size_t i = 0; i < rows; ++i) {
            const double a = std::abs(m[i * cols + j]);
            if (a > best) {
                best = a;
                arg = i;
            }
        }
        if (m[arg * cols + j] < 0.0)
            for (std::size_t i = 0; i < rows; ++i) m[i * cols + j] = -m[i * cols + j];
    }
}

}  // namespace detail

// Iterated principal-axis factoring on the band correlation matrix,
// followed by regression-method factor scores.
//
// Communalities start at the squared multiple correlations (fallback to
// the largest absolute off-diagonal correlation per band when the matrix
// is singular) and are refined by eigendecomposing the reduced correlation
// matrix until the largest communality change drops below tol. Heywood
// cases are clamped to 1 and counted.
inline ReducedCube factor_analysis(const HSICube& cube, std::size_t n_factors,
                                   FactorAnalysisOptions opts = {}) {
    const std::size_t n = cube.pixel_count(), R = cube.bands, B = n_factors;
    if (B == 0 || B >= R)
        throw std::invalid_argument("factor_analysis: need 0 < B < R, got B=" +
                                    std::to_string(B) + " R=" + std::to_string(R));

    // precondition: standardized input (correlation == covariance)
    for (std::size_t b = 0; b < R; ++b) {
        double mu = 0.0;
        for (std::size_t p = 0; p < n; ++p) mu += cube.data[p * R + b];
        mu /= static_cast<double>(n);
        if (std::abs(mu) > 1e-6)
            throw std::invalid_argument("factor_analysis: band " + std::to_string(b) +
                                        " is not standardized (mean " + std::to_string(mu) + ")");
    }

    std::vector<double> corr(R * R, 0.0);
    for (std::size_t p = 0; p < n; ++p) {
        const double* z = cube.data.data() + p * R;
        for (std::size_t i = 0; i < R; ++i)
            for (std::size_t j = i; j < R; ++j) corr[i * R + j] += z[i] * z[j];
    }
    for (std::size_t i = 0; i < R; ++i)
        for (std::size_t j = i; j < R; ++j) {
            corr[i * R + j] /= static_cast<double>(n);
            corr[j * R + i] = corr[i * R + j];
        }

    // initial communalities: SMC when the matrix is invertible
    std::vector<double> chol = corr;
    const bool spd = cholesky_factor(chol, R);
    std::vector<double> h2(R, 0.0);
    if (spd) {
        const std::vector<double> inv = cholesky_inverse(chol, R);
        for (std::size_t i = 0; i < R; ++i) h2[i] = 1.0 - 1.0 / inv[i * R + i];
    } else {
        for (std::size_t i = 0; i < R; ++i) {
            double best = 0.0;
            for (std::size_t j = 0; j < R; ++j)
                if (j != i) best = std::max(best, std::abs(corr[i * R + j]));
            h2[i] = best;
        }
    }

    ReducedCube out;
    out.rows = cube.rows;
    out.cols = cube.cols;
    out.bands = B;
    out.loadings.assign(R * B, 0.0);

    bool converged = false;
    double delta = 0.0;
    int iter = 0;
    for (; iter < opts.max_iterations; ++iter) {
        std::vector<double> reduced = corr;
        for (std::size_t i = 0; i < R; ++i) reduced[i * R + i] = h2[i];

        EigenResult eig = jacobi_eigen_symmetric(std::move(reduced), R);
        for (std::size_t i = 0; i < R; ++i)
            for (std::size_t j = 0; j < B; ++j) {
                const double lam = std::max(eig.values[j], 0.0);
                out.loadings[i * B + j] = eig.vectors[i * R + j] * std::sqrt(lam);
            }

        delta = 0.0;
        for (std::size_t i = 0; i < R; ++i) {
            double c = 0.0;
            for (std::size_t j = 0; j < B; ++j)
                c += out.loadings[i * B + j] * out.loadings[i * B + j];
            if (c > 1.0) {
                c = 1.0;
                out.heywood_count++;
            }
            delta = std::max(delta, std::abs(c - h2[i]));
            h2[i] = c;
        }
        if (delta < opts.tol) {
            converged = true;
            ++iter;
            break;
        }
    }
    out.iterations = iter;
    out.final_delta = delta;
    if (!converged)
        throw ConvergenceError("factor_analysis: no convergence after " +
                                   std::to_string(opts.max_iterations) +
                                   " iterations (last communality delta " +
                                   std::to_string(delta) + ")",
                               delta);

    detail::canonicalize_columns(out.loadings, R, B);
    out.uniquenesses.resize(R);
    for (std::size_t i = 0; i < R; ++i) out.uniquenesses[i] = 1.0 - h2[i];

    // regression scores: F = Z * corr^{-1} * L
    if (!spd)
        throw InputError("factor_analysis: correlation matrix is singular; "
                         "regression scores are undefined");
    std::vector<double> weights(R * B);  // corr^{-1} L, solved column-wise
    std::vector<double> col(R);
    for (std::size_t j = 0; j < B; ++j) {
        for (std::size_t i = 0; i < R; ++i) col[i] = out.loadings[i * B + j];
        cholesky_solve(chol, R, col.data());
        for (std::size_t i = 0; i < R; ++i) weights[i * B + j] = col[i];
    }

    out.data.assign(n * B, 0.0);
    for (std::size_t p = 0; p < n; ++p) {
        const double* z = cube.data.data() + p * R;
        double* f = out.data.data() + p * B;
        for (std::size_t i = 0; i < R; ++i) {
            const double zi = z[i];
            for (std::size_t j = 0; j < B; ++j) f[j] += zi * weights[i * B + j];
        }
    }
    return out;
}

// standardize + factor_analysis, with the standardization recorded on the
// result. This is the preprocessing entry point used by the CLI.
inline ReducedCube reduce_bands(const HSICube& cube, std::size_t n_factors,
                                FactorAnalysisOptions opts = {}) {
    Standardization stats;
    HSICube z = standardize_bands(cube, &stats);
    ReducedCube out = factor_analysis(z, n_factors, opts);
    out.band_means = std::move(stats.means);
    out.band_stds = std::move(stats.stds);
    return out;
}

// Emits one patch per labeled pixel, in row-major pixel order. The window
// around pixel (r,c) spans rows r-S/2 .. r+S/2-1; positions outside the
// cube read as zero.
inline PatchSet extract_patches(const ReducedCube& reduced, const std::vector<int>& labels,
                                std::size_t patch_size) {
    const std::size_t M = reduced.rows, N = reduced.cols, B = reduced.bands;
    if (labels.size() != M * N)
        throw std::invalid_argument("extract_patches: label map size mismatch");
    if (patch_size == 0 || patch_size % 2 != 0)
        throw std::invalid_argument("extract_patches: patch size must be even and positive");
    if (patch_size > 2 * std::min(M, N))
        throw std::invalid_argument("extract_patches: patch size " + std::to_string(patch_size) +
                                    " too large for " + std::to_string(M) + "x" +
                                    std::to_string(N) + " cube");

    int max_label = 0;
    std::size_t labeled = 0;
    for (int v : labels) {
        if (v > 0) ++labeled;
        max_label = std::max(max_label, v);
    }
    if (labeled == 0) throw InputError("extract_patches: no labeled pixels");

    const std::size_t S = patch_size;
    const long long half = static_cast<long long>(S) / 2;

    PatchSet ps;
    ps.patch_size = S;
    ps.bands = B;
    ps.class_count = max_label;
    ps.patches.reserve(labeled * S * S * B);
    ps.labels.reserve(labeled);
    ps.coords.reserve(labeled);

    for (std::size_t r = 0; r < M; ++r)
        for (std::size_t c = 0; c < N; ++c) {
            const int lbl = labels[r * N + c];
            if (lbl == 0) continue;
            for (long long i = 0; i < static_cast<long long>(S); ++i) {
                const long long gr = static_cast<long long>(r) - half + i;
                for (long long j = 0; j < static_cast<long long>(S); ++j) {
                    const long long gc = static_cast<long long>(c) - half + j;
                    const bool inside = gr >= 0 && gr < static_cast<long long>(M) && gc >= 0 &&
                                        gc < static_cast<long long>(N);
                    for (std::size_t b = 0; b < B; ++b)
                        ps.patches.push_back(
                            inside ? reduced.at(static_cast<std::size_t>(gr),
                                                static_cast<std::size_t>(gc), b)
                                   : 0.0);
                }
            }
            ps.labels.push_back(lbl - 1);
            ps.coords.emplace_back(static_cast<int>(r), static_cast<int>(c));
        }
    ps.split.assign(ps.labels.size(), Split::kTrain);
    return ps;
}

// Per class, assigns max(1, round(fraction * class_count)) patches to the
// train partition by seeded shuffle; everything else becomes test.
inline void stratified_split(PatchSet& ps, double train_fraction, std::uint64_t seed) {
    if (train_fraction <= 0.0 || train_fraction > 1.0)
        throw std::invalid_argument("stratified_split: fraction must be in (0,1]");

    const int C = ps.class_count;
    std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(C));
    for (std::size_t i = 0; i < ps.labels.size(); ++i)
        by_class[static_cast<std::size_t>(ps.labels[i])].push_back(i);

    Rng rng(seed);
    for (int c = 0; c < C; ++c) {
        auto& idx = by_class[static_cast<std::size_t>(c)];
        if (idx.empty())
            throw InputError("stratified_split: class " + std::to_string(c + 1) +
                             " has no patches");
        rng.shuffle(idx);
        // round half up, floor of one train sample per class
        std::size_t n_train = static_cast<std::size_t>(
            std::floor(train_fraction * static_cast<double>(idx.size()) + 0.5));
        n_train = std::max<std::size_t>(1, std::min(n_train, idx.size()));
        for (std::size_t k = 0; k < idx.size(); ++k)
            ps.split[idx[k]] = k < n_train ? Split::kTrain : Split::kTest;
    }
}

}  // namespace spectralnet
