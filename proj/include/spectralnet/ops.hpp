#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <sstream>
#include <string>
#include <vector>

#include "spectralnet/rng.hpp"
#include "spectralnet/tensor.hpp"

namespace spectralnet {

enum class Mode { kTrain, kEval };

namespace detail {

inline std::string shape_str(const std::vector<std::size_t>& s) {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << ")";
    return os.str();
}

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

}  // namespace detail

// y[n,f,:,:] = sum_c input[n,c,:,:] (*) kernels[f,c,:,:] + bias[f], valid
// correlation over the zero-padded input. Accumulation runs over (c,kh,kw)
// in row-major order with the bias added last; reductions are sequential so
// results are bitwise reproducible.
inline Tensor conv2d(Graph& g, const Tensor& input, const Tensor& kernels, const Tensor& bias,
                     int stride, int padding) {
    using detail::require;
    require(input.rank() == 4, "conv2d: input must be [N,C,H,W], got " +
                                   detail::shape_str(input.shape()));
    require(kernels.rank() == 4, "conv2d: kernels must be [F,C,kh,kw], got " +
                                     detail::shape_str(kernels.shape()));
    require(stride >= 1, "conv2d: stride must be positive");
    require(padding >= 0, "conv2d: padding must be nonnegative");

    const std::size_t N = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
    const std::size_t F = kernels.dim(0), KC = kernels.dim(1);
    const std::size_t kh = kernels.dim(2), kw = kernels.dim(3);
    require(KC == C, "conv2d: kernel channels " + std::to_string(KC) +
                         " do not match input channels " + std::to_string(C));
    const bool has_bias = bias.size() > 0;
    if (has_bias)
        require(bias.rank() == 1 && bias.dim(0) == F, "conv2d: bias must be [F]");

    const long long Hp = static_cast<long long>(H) + 2 * padding;
    const long long Wp = static_cast<long long>(W) + 2 * padding;
    require(static_cast<long long>(kh) <= Hp && static_cast<long long>(kw) <= Wp,
            "conv2d: kernel larger than padded input");
    const std::size_t Ho = static_cast<std::size_t>((Hp - kh) / stride + 1);
    const std::size_t Wo = static_cast<std::size_t>((Wp - kw) / stride + 1);
    require(Ho >= 1 && Wo >= 1, "conv2d: zero-size output");

    Tensor out = Tensor::zeros({N, F, Ho, Wo});
    const double* x = input.data();
    const double* k = kernels.data();
    const double* b = has_bias ? bias.data() : nullptr;
    double* y = out.data();

    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t f = 0; f < F; ++f)
            for (std::size_t oh = 0; oh < Ho; ++oh)
                for (std::size_t ow = 0; ow < Wo; ++ow) {
                    double acc = 0.0;
                    for (std::size_t c = 0; c < C; ++c)
                        for (std::size_t r = 0; r < kh; ++r) {
                            const long long ih = static_cast<long long>(oh) * stride - padding +
                                                 static_cast<long long>(r);
                            if (ih < 0 || ih >= static_cast<long long>(H)) continue;
                            for (std::size_t s = 0; s < kw; ++s) {
                                const long long iw = static_cast<long long>(ow) * stride -
                                                     padding + static_cast<long long>(s);
                                if (iw < 0 || iw >= static_cast<long long>(W)) continue;
                                acc += x[((n * C + c) * H + ih) * W + iw] *
                                       k[((f * C + c) * kh + r) * kw + s];
                            }
                        }
                    if (has_bias) acc += b[f];
                    y[((n * F + f) * Ho + oh) * Wo + ow] = acc;
                }

    out.set_requires_grad(input.requires_grad() || kernels.requires_grad() ||
                          (has_bias && bias.requires_grad()));
    if (out.requires_grad()) {
        g.record("conv2d", [input, kernels, bias, out, stride, padding, has_bias]() mutable {
            const std::size_t N = input.dim(0), C = input.dim(1), H = input.dim(2),
                              W = input.dim(3);
            const std::size_t F = kernels.dim(0), kh = kernels.dim(2), kw = kernels.dim(3);
            const std::size_t Ho = out.dim(2), Wo = out.dim(3);
            const double* dy = out.grad().data();
            const double* x = input.data();
            const double* k = kernels.data();
            const bool need_dx = input.requires_grad();
            const bool need_dk = kernels.requires_grad();
            const bool need_db = has_bias && bias.requires_grad();
            double* dx = need_dx ? input.grad().data() : nullptr;
            double* dk = need_dk ? kernels.grad().data() : nullptr;
            double* db = need_db ? bias.grad().data() : nullptr;

            for (std::size_t n = 0; n < N; ++n)
                for (std::size_t f = 0; f < F; ++f)
                    for (std::size_t oh = 0; oh < Ho; ++oh)
                        for (std::size_t ow = 0; ow < Wo; ++ow) {
                            const double gv = dy[((n * F + f) * Ho + oh) * Wo + ow];
                            if (db) db[f] += gv;
                            if (!need_dx && !need_dk) continue;
                            for (std::size_t c = 0; c < C; ++c)
                                for (std::size_t r = 0; r < kh; ++r) {
                                    const long long ih = static_cast<long long>(oh) * stride -
                                                         padding + static_cast<long long>(r);
                                    if (ih < 0 || ih >= static_cast<long long>(H)) continue;
                                    for (std::size_t s = 0; s < kw; ++s) {
                                        const long long iw = static_cast<long long>(ow) * stride -
                                                             padding + static_cast<long long>(s);
                                        if (iw < 0 || iw >= static_cast<long long>(W)) continue;
                                        const std::size_t xi = ((n * C + c) * H + ih) * W + iw;
                                        const std::size_t ki = ((f * C + c) * kh + r) * kw + s;
                                        if (dx) dx[xi] += gv * k[ki];
                                        if (dk) dk[ki] += gv * x[xi];
                                    }
                                }
                        }
        });
    }
    return out;
}

inline Tensor conv2d(Graph& g, const Tensor& input, const Tensor& kernels, int stride,
                     int padding) {
    return conv2d(g, input, kernels, Tensor(), stride, padding);
}

// out = input . weight + bias, input [N,D], weight [D,K], bias [K].
inline Tensor affine(Graph& g, const Tensor& input, const Tensor& weight, const Tensor& bias) {
    using detail::require;
    require(input.rank() == 2, "affine: input must be [N,D]");
    require(weight.rank() == 2, "affine: weight must be [D,K]");
    const std::size_t N = input.dim(0), D = input.dim(1), K = weight.dim(1);
    require(weight.dim(0) == D, "affine: inner dimensions disagree, input " +
                                    detail::shape_str(input.shape()) + " weight " +
                                    detail::shape_str(weight.shape()));
    require(bias.rank() == 1 && bias.dim(0) == K, "affine: bias must be [K]");

    Tensor out = Tensor::zeros({N, K});
    const double* x = input.data();
    const double* w = weight.data();
    const double* b = bias.data();
    double* y = out.data();
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t kcol = 0; kcol < K; ++kcol) {
            double acc = 0.0;
            for (std::size_t d = 0; d < D; ++d) acc += x[n * D + d] * w[d * K + kcol];
            y[n * K + kcol] = acc + b[kcol];
        }

    out.set_requires_grad(input.requires_grad() || weight.requires_grad() ||
                          bias.requires_grad());
    if (out.requires_grad()) {
        g.record("affine", [input, weight, bias, out]() mutable {
            const std::size_t N = input.dim(0), D = input.dim(1), K = weight.dim(1);
            const double* dy = out.grad().data();
            const double* x = input.data();
            const double* w = weight.data();
            if (input.requires_grad()) {
                double* dx = input.grad().data();
                for (std::size_t n = 0; n < N; ++n)
                    for (std::size_t d = 0; d < D; ++d) {
                        double acc = 0.0;
                        for (std::size_t kcol = 0; kcol < K; ++kcol)
                            acc += dy[n * K + kcol] * w[d * K + kcol];
                        dx[n * D + d] += acc;
                    }
            }
            if (weight.requires_grad()) {
                double* dw = weight.grad().data();
                for (std::size_t d = 0; d < D; ++d)
                    for (std::size_t kcol = 0; kcol < K; ++kcol) {
                        double acc = 0.0;
                        for (std::size_t n = 0; n < N; ++n)
                            acc += x[n * D + d] * dy[n * K + kcol];
                        dw[d * K + kcol] += acc;
                    }
            }
            if (bias.requires_grad()) {
                double* db = bias.grad().data();
                for (std::size_t kcol = 0; kcol < K; ++kcol) {
                    double acc = 0.0;
                    for (std::size_t n = 0; n < N; ++n) acc += dy[n * K + kcol];
                    db[kcol] += acc;
                }
            }
        });
    }
    return out;
}

// Elementwise max(0, x); subgradient at 0 is 0.
inline Tensor relu(Graph& g, const Tensor& input) {
    Tensor out = Tensor::zeros(input.shape());
    const double* x = input.data();
    double* y = out.data();
    for (std::size_t i = 0; i < input.size(); ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;

    out.set_requires_grad(input.requires_grad());
    if (out.requires_grad()) {
        g.record("relu", [input, out]() mutable {
            const double* x = input.data();
            const double* dy = out.grad().data();
            double* dx = input.grad().data();
            for (std::size_t i = 0; i < input.size(); ++i)
                if (x[i] > 0.0) dx[i] += dy[i];
        });
    }
    return out;
}

// Per-channel normalization statistics carried between training batches.
struct RunningStats {
    std::vector<double> mean;
    std::vector<double> var;
    long long batches_seen = 0;

    explicit RunningStats(std::size_t channels = 0)
        : mean(channels, 0.0), var(channels, 1.0) {}
};

// Train mode normalizes with batch statistics over (N,H,W) per channel and
// folds them into the running stats; eval mode normalizes with the running
// stats. Batch variance is the population variance.
//
// Train backward, per channel with m = N*H*W:
//   dxhat = dy * gamma
//   dx = inv_std/m * (m*dxhat - sum(dxhat) - xhat * sum(dxhat*xhat))
inline Tensor batch_norm(Graph& g, const Tensor& input, const Tensor& gamma, const Tensor& beta,
                         RunningStats& stats, Mode mode, double eps = 1e-5,
                         double momentum = 0.9) {
    using detail::require;
    require(input.rank() == 4, "batch_norm: input must be [N,C,H,W]");
    const std::size_t N = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
    require(N * H * W >= 1, "batch_norm: empty reduction");
    require(eps > 0.0, "batch_norm: eps must be positive");
    require(gamma.rank() == 1 && gamma.dim(0) == C, "batch_norm: gamma must be [C]");
    require(beta.rank() == 1 && beta.dim(0) == C, "batch_norm: beta must be [C]");
    require(stats.mean.size() == C && stats.var.size() == C,
            "batch_norm: running stats channel mismatch");
    if (mode == Mode::kEval && stats.batches_seen == 0)
        throw std::logic_error("batch_norm: eval mode before any running-stat update");

    const std::size_t plane = H * W;
    const std::size_t m = N * plane;
    std::vector<double> mean(C, 0.0), inv_std(C, 0.0);

    if (mode == Mode::kTrain) {
        const double* x = input.data();
        for (std::size_t c = 0; c < C; ++c) {
            double s = 0.0;
            for (std::size_t n = 0; n < N; ++n) {
                const double* p = x + (n * C + c) * plane;
                for (std::size_t i = 0; i < plane; ++i) s += p[i];
            }
            mean[c] = s / static_cast<double>(m);
            double v = 0.0;
            for (std::size_t n = 0; n < N; ++n) {
                const double* p = x + (n * C + c) * plane;
                for (std::size_t i = 0; i < plane; ++i) {
                    const double d = p[i] - mean[c];
                    v += d * d;
                }
            }
            v /= static_cast<double>(m);
            inv_std[c] = 1.0 / std::sqrt(v + eps);
            stats.mean[c] = momentum * stats.mean[c] + (1.0 - momentum) * mean[c];
            stats.var[c] = momentum * stats.var[c] + (1.0 - momentum) * v;
        }
        stats.batches_seen++;
    } else {
        for (std::size_t c = 0; c < C; ++c) {
            mean[c] = stats.mean[c];
            inv_std[c] = 1.0 / std::sqrt(stats.var[c] + eps);
        }
    }

    Tensor out = Tensor::zeros(input.shape());
    // xhat saved for backward and for the gamma gradient in both modes
    Tensor xhat = Tensor::zeros(input.shape());
    {
        const double* x = input.data();
        double* xh = xhat.data();
        double* y = out.data();
        const double* gm = gamma.data();
        const double* bt = beta.data();
        for (std::size_t n = 0; n < N; ++n)
            for (std::size_t c = 0; c < C; ++c) {
                const std::size_t base = (n * C + c) * plane;
                for (std::size_t i = 0; i < plane; ++i) {
                    const double h = (x[base + i] - mean[c]) * inv_std[c];
                    xh[base + i] = h;
                    y[base + i] = gm[c] * h + bt[c];
                }
            }
    }

    out.set_requires_grad(input.requires_grad() || gamma.requires_grad() ||
                          beta.requires_grad());
    if (out.requires_grad()) {
        g.record("batch_norm", [input, gamma, beta, out, xhat, inv_std, mode, m, N, C,
                                plane]() mutable {
            const double* dy = out.grad().data();
            const double* xh = xhat.data();
            const double* gm = gamma.data();

            std::vector<double> sum_dy(C, 0.0), sum_dy_xhat(C, 0.0);
            for (std::size_t n = 0; n < N; ++n)
                for (std::size_t c = 0; c < C; ++c) {
                    const std::size_t base = (n * C + c) * plane;
                    for (std::size_t i = 0; i < plane; ++i) {
                        sum_dy[c] += dy[base + i];
                        sum_dy_xhat[c] += dy[base + i] * xh[base + i];
                    }
                }

            if (gamma.requires_grad()) {
                double* dg = gamma.grad().data();
                for (std::size_t c = 0; c < C; ++c) dg[c] += sum_dy_xhat[c];
            }
            if (beta.requires_grad()) {
                double* db = beta.grad().data();
                for (std::size_t c = 0; c < C; ++c) db[c] += sum_dy[c];
            }
            if (input.requires_grad()) {
                double* dx = input.grad().data();
                const double dm = static_cast<double>(m);
                for (std::size_t n = 0; n < N; ++n)
                    for (std::size_t c = 0; c < C; ++c) {
                        const std::size_t base = (n * C + c) * plane;
                        for (std::size_t i = 0; i < plane; ++i) {
                            if (mode == Mode::kTrain) {
                                dx[base + i] += gm[c] * inv_std[c] / dm *
                                                (dm * dy[base + i] - sum_dy[c] -
                                                 xh[base + i] * sum_dy_xhat[c]);
                            } else {
                                // running stats are constants in eval mode
                                dx[base + i] += gm[c] * inv_std[c] * dy[base + i];
                            }
                        }
                    }
            }
        });
    }
    return out;
}

// Inverted dropout: train mode zeroes with probability rate and scales
// survivors by 1/(1-rate); eval mode is the identity.
inline Tensor dropout(Graph& g, const Tensor& input, double rate, Mode mode, Rng& rng) {
    detail::require(rate >= 0.0 && rate < 1.0, "dropout: rate must be in [0,1)");
    if (mode == Mode::kEval || rate == 0.0) return input;

    const double keep_scale = 1.0 / (1.0 - rate);
    auto mask = std::make_shared<std::vector<double>>(input.size());
    for (std::size_t i = 0; i < input.size(); ++i)
        (*mask)[i] = rng.uniform() >= rate ? keep_scale : 0.0;

    Tensor out = Tensor::zeros(input.shape());
    const double* x = input.data();
    double* y = out.data();
    for (std::size_t i = 0; i < input.size(); ++i) y[i] = x[i] * (*mask)[i];

    out.set_requires_grad(input.requires_grad());
    if (out.requires_grad()) {
        g.record("dropout", [input, out, mask]() mutable {
            const double* dy = out.grad().data();
            double* dx = input.grad().data();
            for (std::size_t i = 0; i < input.size(); ++i) dx[i] += dy[i] * (*mask)[i];
        });
    }
    return out;
}

// Per-channel spatial mean: [N,C,H,W] -> [N,C].
inline Tensor global_avg_pool(Graph& g, const Tensor& input) {
    detail::require(input.rank() == 4, "global_avg_pool: input must be [N,C,H,W]");
    const std::size_t N = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
    detail::require(H >= 1 && W >= 1, "global_avg_pool: empty spatial extent");
    const std::size_t plane = H * W;

    Tensor out = Tensor::zeros({N, C});
    const double* x = input.data();
    double* y = out.data();
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t c = 0; c < C; ++c) {
            double s = 0.0;
            const double* p = x + (n * C + c) * plane;
            for (std::size_t i = 0; i < plane; ++i) s += p[i];
            y[n * C + c] = s / static_cast<double>(plane);
        }

    out.set_requires_grad(input.requires_grad());
    if (out.requires_grad()) {
        g.record("global_avg_pool", [input, out, N, C, plane]() mutable {
            const double* dy = out.grad().data();
            double* dx = input.grad().data();
            const double scale = 1.0 / static_cast<double>(plane);
            for (std::size_t n = 0; n < N; ++n)
                for (std::size_t c = 0; c < C; ++c) {
                    const double gv = dy[n * C + c] * scale;
                    double* p = dx + (n * C + c) * plane;
                    for (std::size_t i = 0; i < plane; ++i) p[i] += gv;
                }
        });
    }
    return out;
}

// Stacks [N,Ci,H,W] inputs along the channel axis in argument order.
inline Tensor concat_channels(Graph& g, const std::vector<Tensor>& inputs) {
    detail::require(!inputs.empty(), "concat_channels: no inputs");
    const std::size_t N = inputs[0].dim(0), H = inputs[0].dim(2), W = inputs[0].dim(3);
    std::size_t total_c = 0;
    bool needs_grad = false;
    for (const Tensor& t : inputs) {
        detail::require(t.rank() == 4, "concat_channels: inputs must be [N,C,H,W]");
        detail::require(t.dim(0) == N && t.dim(2) == H && t.dim(3) == W,
                        "concat_channels: batch/spatial mismatch, " +
                            detail::shape_str(t.shape()) + " vs " +
                            detail::shape_str(inputs[0].shape()));
        total_c += t.dim(1);
        needs_grad = needs_grad || t.requires_grad();
    }

    const std::size_t plane = H * W;
    Tensor out = Tensor::zeros({N, total_c, H, W});
    double* y = out.data();
    std::size_t c_off = 0;
    for (const Tensor& t : inputs) {
        const std::size_t Ci = t.dim(1);
        const double* x = t.data();
        for (std::size_t n = 0; n < N; ++n)
            std::copy(x + n * Ci * plane, x + (n + 1) * Ci * plane,
                      y + (n * total_c + c_off) * plane);
        c_off += Ci;
    }

    out.set_requires_grad(needs_grad);
    if (out.requires_grad()) {
        g.record("concat_channels", [inputs, out, N, total_c, plane]() mutable {
            const double* dy = out.grad().data();
            std::size_t c_off = 0;
            for (Tensor t : inputs) {
                const std::size_t Ci = t.dim(1);
                if (t.requires_grad()) {
                    double* dx = t.grad().data();
                    for (std::size_t n = 0; n < N; ++n) {
                        const double* src = dy + (n * total_c + c_off) * plane;
                        double* dst = dx + n * Ci * plane;
                        for (std::size_t i = 0; i < Ci * plane; ++i) dst[i] += src[i];
                    }
                }
                c_off += Ci;
            }
        });
    }
    return out;
}

// Elementwise sum of two same-shape tensors (residual connections).
inline Tensor add(Graph& g, const Tensor& a, const Tensor& b) {
    detail::require(a.shape() == b.shape(), "add: shape mismatch, " +
                                                detail::shape_str(a.shape()) + " vs " +
                                                detail::shape_str(b.shape()));
    Tensor out = Tensor::zeros(a.shape());
    const double* pa = a.data();
    const double* pb = b.data();
    double* y = out.data();
    for (std::size_t i = 0; i < a.size(); ++i) y[i] = pa[i] + pb[i];

    out.set_requires_grad(a.requires_grad() || b.requires_grad());
    if (out.requires_grad()) {
        g.record("add", [a, b, out]() mutable {
            const double* dy = out.grad().data();
            if (a.requires_grad()) {
                double* da = a.grad().data();
                for (std::size_t i = 0; i < a.size(); ++i) da[i] += dy[i];
            }
            if (b.requires_grad()) {
                double* db = b.grad().data();
                for (std::size_t i = 0; i < b.size(); ++i) db[i] += dy[i];
            }
        });
    }
    return out;
}

// Mean over the batch of -log softmax(logits)[label], max-stabilized.
// Gradient is (softmax - onehot) / N.
inline Tensor softmax_cross_entropy(Graph& g, const Tensor& logits,
                                    const std::vector<int>& labels) {
    detail::require(logits.rank() == 2, "softmax_cross_entropy: logits must be [N,K]");
    const std::size_t N = logits.dim(0), K = logits.dim(1);
    detail::require(labels.size() == N, "softmax_cross_entropy: label count mismatch");
    for (int lbl : labels)
        detail::require(lbl >= 0 && static_cast<std::size_t>(lbl) < K,
                        "softmax_cross_entropy: label " + std::to_string(lbl) +
                            " out of range [0," + std::to_string(K) + ")");
    if (!logits.all_finite())
        throw std::domain_error("softmax_cross_entropy: non-finite logits");

    Tensor probs = Tensor::zeros({N, K});
    const double* x = logits.data();
    double* p = probs.data();
    double loss = 0.0;
    for (std::size_t n = 0; n < N; ++n) {
        double mx = x[n * K];
        for (std::size_t k = 1; k < K; ++k) mx = std::max(mx, x[n * K + k]);
        double z = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
            p[n * K + k] = std::exp(x[n * K + k] - mx);
            z += p[n * K + k];
        }
        for (std::size_t k = 0; k < K; ++k) p[n * K + k] /= z;
        loss -= x[n * K + labels[n]] - mx - std::log(z);
    }
    Tensor out = Tensor::scalar(loss / static_cast<double>(N));

    out.set_requires_grad(logits.requires_grad());
    if (out.requires_grad()) {
        g.record("softmax_cross_entropy", [logits, probs, labels, out, N, K]() mutable {
            const double gv = out.grad()[0] / static_cast<double>(N);
            const double* p = probs.data();
            double* dx = logits.grad().data();
            for (std::size_t n = 0; n < N; ++n)
                for (std::size_t k = 0; k < K; ++k) {
                    const double onehot = (static_cast<std::size_t>(labels[n]) == k) ? 1.0 : 0.0;
                    dx[n * K + k] += gv * (p[n * K + k] - onehot);
                }
        });
    }
    return out;
}

// Scalar sum of all elements.
inline Tensor sum(Graph& g, const Tensor& input) {
    double s = 0.0;
    const double* x = input.data();
    for (std::size_t i = 0; i < input.size(); ++i) s += x[i];
    Tensor out = Tensor::scalar(s);

    out.set_requires_grad(input.requires_grad());
    if (out.requires_grad()) {
        g.record("sum", [input, out]() mutable {
            const double gv = out.grad()[0];
            double* dx = input.grad().data();
            for (std::size_t i = 0; i < input.size(); ++i) dx[i] += gv;
        });
    }
    return out;
}

// Scalar dot product with a fixed coefficient vector; handy as a generic
// test loss that makes every output element matter.
inline Tensor weighted_sum(Graph& g, const Tensor& input, const std::vector<double>& weights) {
    detail::require(weights.size() == input.size(), "weighted_sum: weight count mismatch");
    double s = 0.0;
    const double* x = input.data();
    for (std::size_t i = 0; i < input.size(); ++i) s += x[i] * weights[i];
    Tensor out = Tensor::scalar(s);

    out.set_requires_grad(input.requires_grad());
    if (out.requires_grad()) {
        g.record("weighted_sum", [input, out, weights]() mutable {
            const double gv = out.grad()[0];
            double* dx = input.grad().data();
            for (std::size_t i = 0; i < input.size(); ++i) dx[i] += gv * weights[i];
        });
    }
    return out;
}

}  // namespace spectralnet
