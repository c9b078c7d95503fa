#pragma once

#include <gtest/gtest.h>
#include <stdlib.h>

#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "spectralnet/hsidata.hpp"
#include "spectralnet/ops.hpp"
#include "spectralnet/rng.hpp"
#include "spectralnet/tensor.hpp"

namespace testutil {

using namespace spectralnet;

// Fixed-coefficient scalar loss over all elements of t. A plain sum would
// let sign errors that cancel across entries slip past the gradient checks;
// distinct weights make every output entry observable.
inline Tensor weighted_sum_probe(Graph& g, const Tensor& t) {
    std::vector<double> w(t.size());
    for (std::size_t i = 0; i < w.size(); ++i)
        w[i] = std::sin(0.7 * static_cast<double>(i + 1)) + 0.05;
    return weighted_sum(g, t, w);
}

// |analytic - fd| <= atol + rtol * max(|analytic|, |fd|)
constexpr double kGradAtol = 1e-7;
constexpr double kGradRtol = 1e-4;
constexpr double kGradStep = 1e-5;

// Checks analytic gradients of loss_fn (a callable Graph& -> scalar Tensor
// that rebuilds the forward pass each call) against central differences for
// every entry of every parameter. loss_fn must be deterministic.
template <typename LossFn>
void expect_grads_match(const std::vector<Tensor>& params, LossFn&& loss_fn) {
    for (const Tensor& p : params) p.zero_grad();
    Graph g;
    Tensor loss = loss_fn(g);
    backward(g, loss);

    std::vector<std::vector<double>> analytic;
    analytic.reserve(params.size());
    for (const Tensor& p : params) analytic.push_back(p.grad());

    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        const Tensor& p = params[pi];
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double v = p.data()[i];
            p.data()[i] = v + kGradStep;
            Graph gp;
            const double fp = loss_fn(gp).item();
            p.data()[i] = v - kGradStep;
            Graph gm;
            const double fm = loss_fn(gm).item();
            p.data()[i] = v;
            const double fd = (fp - fm) / (2.0 * kGradStep);
            const double a = analytic[pi][i];
            EXPECT_NEAR(a, fd, kGradAtol + kGradRtol * std::max(std::abs(a), std::abs(fd)))
                << "param " << pi << " entry " << i;
        }
    }
}

// Same check on a random `fraction` of all parameter entries. Returns the
// worst absolute tolerance violation margin observed (<= 0 means pass).
template <typename LossFn>
std::size_t check_sampled_grads(const std::vector<Tensor>& params, LossFn&& loss_fn,
                                double fraction, std::uint64_t seed, double* worst_excess) {
    for (const Tensor& p : params) p.zero_grad();
    Graph g;
    Tensor loss = loss_fn(g);
    backward(g, loss);

    std::vector<std::pair<std::size_t, std::size_t>> entries;
    for (std::size_t pi = 0; pi < params.size(); ++pi)
        for (std::size_t i = 0; i < params[pi].size(); ++i) entries.emplace_back(pi, i);
    Rng rng(seed);
    rng.shuffle(entries);
    const std::size_t n_checks = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(entries.size()))));

    *worst_excess = -1.0;
    for (std::size_t k = 0; k < n_checks; ++k) {
        auto [pi, i] = entries[k];
        const Tensor& p = params[pi];
        const double a = p.grad()[i];
        const double v = p.data()[i];
        p.data()[i] = v + kGradStep;
        Graph gp;
        const double fp = loss_fn(gp).item();
        p.data()[i] = v - kGradStep;
        Graph gm;
        const double fm = loss_fn(gm).item();
        p.data()[i] = v;
        const double fd = (fp - fm) / (2.0 * kGradStep);
        const double excess =
            std::abs(a - fd) - (kGradAtol + kGradRtol * std::max(std::abs(a), std::abs(fd)));
        *worst_excess = std::max(*worst_excess, excess);
        EXPECT_LE(excess, 0.0) << "param " << pi << " entry " << i << ": analytic " << a
                               << " vs finite-diff " << fd;
    }
    return n_checks;
}

class TmpDir {
  public:
    TmpDir() {
        char tmpl[] = "/tmp/spectralnet_test_XXXXXX";
        dir_ = ::mkdtemp(tmpl);
    }
    ~TmpDir() {
        std::error_code ec;
        std::filesystem::remove_all(dir_, ec);
    }
    TmpDir(const TmpDir&) = delete;
    TmpDir& operator=(const TmpDir&) = delete;

    const std::string& str() const { return dir_; }
    std::filesystem::path path() const { return dir_; }
    std::string file(const std::string& name) const {
        return (std::filesystem::path(dir_) / name).string();
    }

  private:
    std::string dir_;
};

// M x N cube whose four quadrants carry distinct spectral signatures plus
// per-band Gaussian noise with sigma = noise_scale * (smallest pairwise
// signature distance). Labels are the quadrant index + 1.
//
// The signatures are sign combinations of three exactly orthogonal spectral
// directions (constant, sine, cosine at half-integer sampling) with strengths
// 4R : 2R : R, so the population covariance is an exact three-factor model
// with well-separated factor eigenvalues. Weak or near-degenerate third
// directions make iterated principal-axis factoring drift for hundreds of
// iterations; this construction keeps it comfortably inside its budget.
inline HSICube make_quadrant_cube(std::size_t M, std::size_t N, std::size_t R,
                                  double noise_scale, std::uint64_t seed) {
    const double pi = std::acos(-1.0);
    std::vector<std::vector<double>> axis(3, std::vector<double>(R));
    for (std::size_t b = 0; b < R; ++b) {
        const double theta = 2.0 * pi * (static_cast<double>(b) + 0.5) / static_cast<double>(R);
        axis[0][b] = 1.0 / std::sqrt(static_cast<double>(R));
        axis[1][b] = std::sin(theta) * std::sqrt(2.0 / static_cast<double>(R));
        axis[2][b] = std::cos(theta) * std::sqrt(2.0 / static_cast<double>(R));
    }
    const double alpha[3] = {2.0 * std::sqrt(static_cast<double>(R)),
                             std::sqrt(2.0 * static_cast<double>(R)),
                             std::sqrt(static_cast<double>(R))};
    const int signs[4][3] = {{-1, -1, -1}, {-1, +1, +1}, {+1, -1, +1}, {+1, +1, -1}};
    std::vector<std::vector<double>> sig(4, std::vector<double>(R));
    for (int c = 0; c < 4; ++c)
        for (std::size_t b = 0; b < R; ++b)
            for (int i = 0; i < 3; ++i)
                sig[static_cast<std::size_t>(c)][b] +=
                    alpha[i] * signs[c][i] * axis[static_cast<std::size_t>(i)][b];

    double min_dist = 1e300;
    for (int i = 0; i < 4; ++i)
        for (int j = i + 1; j < 4; ++j) {
            double d2 = 0.0;
            for (std::size_t b = 0; b < R; ++b) {
                const double d = sig[static_cast<std::size_t>(i)][b] -
                                 sig[static_cast<std::size_t>(j)][b];
                d2 += d * d;
            }
            min_dist = std::min(min_dist, std::sqrt(d2));
        }
    const double sigma = noise_scale * min_dist;

    HSICube cube;
    cube.rows = M;
    cube.cols = N;
    cube.bands = R;
    cube.class_count = 4;
    cube.data.resize(M * N * R);
    cube.labels.resize(M * N);
    Rng rng(seed);
    for (std::size_t r = 0; r < M; ++r)
        for (std::size_t c = 0; c < N; ++c) {
            const std::size_t cls = (r >= M / 2 ? 2u : 0u) + (c >= N / 2 ? 1u : 0u);
            cube.labels[r * N + c] = static_cast<int>(cls) + 1;
            for (std::size_t b = 0; b < R; ++b)
                cube.data[(r * N + c) * R + b] = sig[cls][b] + sigma * rng.normal();
        }
    return cube;
}

// Generative factor-model data: x = L f + eps, f ~ N(0, I_k), per-band
// noise eps ~ N(0, noise_std^2). Factors are retained for recovery checks.
struct FactorData {
    HSICube cube;
    std::vector<double> loadings;  // R x k
    std::vector<double> factors;   // n x k
    std::size_t k = 0;
};

// With identified=true the loading columns are orthogonalized and given
// well-separated norms, so the model is recoverable up to sign and
// permutation only. Random loadings leave a rotation ambiguity: factors of
// similar strength are recovered as mixtures within their eigen-subspace.
inline FactorData make_factor_data(std::size_t M, std::size_t N, std::size_t R, std::size_t k,
                                   double noise_std, std::uint64_t seed,
                                   bool identified = false) {
    const std::size_t n = M * N;
    Rng rng(seed);
    FactorData fd;
    fd.k = k;
    fd.loadings.resize(R * k);
    if (identified) {
        // Principal-axis factoring works on the correlation matrix, so the
        // loadings are only recoverable up to sign/permutation when they stay
        // orthogonal after dividing each band by its standard deviation. Walsh
        // columns (entries of one magnitude, mutually orthogonal) give every
        // band the same communal variance, which makes that rescaling a pure
        // scalar; distinct column norms then pin the factor order. Arbitrary
        // orthogonal columns do not survive the rescaling and the recovered
        // factors come back rotated.
        if ((R & (R - 1)) != 0 || k >= R)
            throw std::invalid_argument("identified loadings need a power-of-two band count");
        for (std::size_t j = 0; j < k; ++j) {
            const double mag = 0.9 * std::pow(0.65, static_cast<double>(j));
            for (std::size_t b = 0; b < R; ++b) {
                const bool flip = std::popcount(b & (j + 1)) % 2 == 1;
                fd.loadings[b * k + j] = flip ? -mag : mag;
            }
        }
    } else {
        for (double& v : fd.loadings) v = rng.normal();
    }
    fd.factors.resize(n * k);
    for (double& v : fd.factors) v = rng.normal();

    fd.cube.rows = M;
    fd.cube.cols = N;
    fd.cube.bands = R;
    fd.cube.class_count = 1;
    fd.cube.labels.assign(n, 1);
    fd.cube.data.assign(n * R, 0.0);
    for (std::size_t p = 0; p < n; ++p)
        for (std::size_t b = 0; b < R; ++b) {
            double v = 0.0;
            for (std::size_t j = 0; j < k; ++j)
                v += fd.loadings[b * k + j] * fd.factors[p * k + j];
            fd.cube.data[p * R + b] = v + noise_std * rng.normal();
        }
    return fd;
}

inline double pearson(const double* x, const double* y, std::size_t n, std::size_t x_stride = 1,
                      std::size_t y_stride = 1) {
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i * x_stride];
        my += y[i * y_stride];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = x[i * x_stride] - mx, dy = y[i * y_stride] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    return sxy / std::sqrt(sxx * syy);
}

}  // namespace testutil
