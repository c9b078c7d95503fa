#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "spectralnet/haar.hpp"
#include "spectralnet/ops.hpp"
#include "spectralnet/rng.hpp"
#include "spectralnet/tensor.hpp"

namespace spectralnet {

enum class Fusion { kConcat, kAdd };

inline Fusion parse_fusion(const std::string& s) {
    if (s == "concat") return Fusion::kConcat;
    if (s == "add") return Fusion::kAdd;
    throw std::invalid_argument("fusion mode must be 'concat' or 'add', got '" + s + "'");
}

inline const char* fusion_name(Fusion f) { return f == Fusion::kConcat ? "concat" : "add"; }

struct ModelConfig {
    std::size_t patch_size = 64;  // S
    std::size_t input_bands = 3;  // B
    int class_count = 0;          // C
    std::vector<std::size_t> stage_channels = {64, 128, 256, 256};
    int wavelet_levels = -1;  // -1: resolve to min(4, stage count, levels S allows)
    std::size_t dense_width = 128;
    std::array<double, 2> dropout_rates = {0.4, 0.4};
    Fusion fusion = Fusion::kConcat;
    bool fuse_wavelets = true;  // ablation switch: drop the wavelet branches entirely

    bool operator==(const ModelConfig&) const = default;
};

inline int resolved_levels(const ModelConfig& c) {
    if (c.wavelet_levels >= 0) return c.wavelet_levels;
    const int cap = max_haar_levels(c.patch_size, c.patch_size);
    return std::min({4, static_cast<int>(c.stage_channels.size()), cap});
}

inline void validate_config(const ModelConfig& c) {
    if (c.patch_size == 0 || c.input_bands == 0)
        throw std::invalid_argument("model config: patch size and band count must be positive");
    if (c.class_count < 1) throw std::invalid_argument("model config: class count must be >= 1");
    if (c.stage_channels.empty())
        throw std::invalid_argument("model config: need at least one stage");
    for (std::size_t w : c.stage_channels)
        if (w == 0) throw std::invalid_argument("model config: zero-width stage");
    if (c.dense_width == 0) throw std::invalid_argument("model config: zero dense width");
    for (double r : c.dropout_rates)
        if (r < 0.0 || r >= 1.0)
            throw std::invalid_argument("model config: dropout rate must be in [0,1)");
    const int L = resolved_levels(c);
    if (L > static_cast<int>(c.stage_channels.size()))
        throw std::invalid_argument("model config: " + std::to_string(L) +
                                    " wavelet levels but only " +
                                    std::to_string(c.stage_channels.size()) + " stages");
    if (L > max_haar_levels(c.patch_size, c.patch_size))
        throw std::invalid_argument("model config: patch size " + std::to_string(c.patch_size) +
                                    " is not divisible by 2^" + std::to_string(L));
}

// One downsampling stage: a stride-2 conv->BN->ReLU main path, an optional
// wavelet branch fused in, and a 1x1 stride-2 projection shortcut added
// around the whole stage.
struct Stage {
    Tensor conv_kernel;  // [main_c, in_c, 3, 3], no bias (BN follows)
    Tensor bn_gamma, bn_beta;
    RunningStats bn_stats;

    bool has_branch = false;
    Tensor wave_kernel;  // [branch_c, 4B, 3, 3], no bias
    Tensor wave_gamma, wave_beta;
    RunningStats wave_stats;

    Tensor proj_kernel, proj_bias;  // [out_c, in_c, 1, 1]

    // shape descriptors, fixed at build time
    std::size_t in_channels = 0, main_channels = 0, branch_channels = 0, out_channels = 0;
    std::size_t in_spatial = 0, out_spatial = 0;
};

class Network {
  public:
    ModelConfig config;
    int levels = 0;  // resolved wavelet levels

    Tensor stem_kernel, stem_bias;  // 3x3 stride 1 pad 1, bands -> stage_channels[0]
    std::vector<Stage> stages;
    Tensor fc1_weight, fc1_bias;  // [out_c, dense_width]
    Tensor fc2_weight, fc2_bias;  // [dense_width, C]

    Mode mode = Mode::kTrain;
    void set_mode(Mode m) { mode = m; }

    std::vector<std::pair<std::string, Tensor>> named_parameters() const {
        std::vector<std::pair<std::string, Tensor>> out;
        out.emplace_back("stem.kernel", stem_kernel);
        out.emplace_back("stem.bias", stem_bias);
        for (std::size_t t = 0; t < stages.size(); ++t) {
            const Stage& st = stages[t];
            const std::string p = "stage" + std::to_string(t + 1) + ".";
            out.emplace_back(p + "conv.kernel", st.conv_kernel);
            out.emplace_back(p + "bn.gamma", st.bn_gamma);
            out.emplace_back(p + "bn.beta", st.bn_beta);
            if (st.has_branch) {
                out.emplace_back(p + "wave.kernel", st.wave_kernel);
                out.emplace_back(p + "wave_bn.gamma", st.wave_gamma);
                out.emplace_back(p + "wave_bn.beta", st.wave_beta);
            }
            out.emplace_back(p + "proj.kernel", st.proj_kernel);
            out.emplace_back(p + "proj.bias", st.proj_bias);
        }
        out.emplace_back("head.fc1.weight", fc1_weight);
        out.emplace_back("head.fc1.bias", fc1_bias);
        out.emplace_back("head.fc2.weight", fc2_weight);
        out.emplace_back("head.fc2.bias", fc2_bias);
        return out;
    }

    std::vector<Tensor> parameters() const {
        std::vector<Tensor> out;
        for (auto& [name, t] : named_parameters()) out.push_back(t);
        return out;
    }

    // Batch-norm running statistics; saved with checkpoints but not trained.
    std::vector<std::pair<std::string, RunningStats*>> named_stats() {
        std::vector<std::pair<std::string, RunningStats*>> out;
        for (std::size_t t = 0; t < stages.size(); ++t) {
            const std::string p = "stage" + std::to_string(t + 1) + ".";
            out.emplace_back(p + "bn", &stages[t].bn_stats);
            if (stages[t].has_branch) out.emplace_back(p + "wave_bn", &stages[t].wave_stats);
        }
        return out;
    }

    // Test helper: makes eval-mode batch norm the identity map.
    void set_identity_running_stats() {
        for (auto& [name, rs] : named_stats()) {
            std::fill(rs->mean.begin(), rs->mean.end(), 0.0);
            std::fill(rs->var.begin(), rs->var.end(), 1.0);
            rs->batches_seen = 1;
        }
    }

    // non-const: train-mode batch norm updates running statistics
    Tensor forward(Graph& g, const Tensor& batch, const std::vector<Tensor>& level_stacks,
                   Rng& rng);
    Tensor forward(Graph& g, const Tensor& batch, Rng& rng);
    Tensor forward(Graph& g, const Tensor& batch) {
        if (mode == Mode::kTrain)
            throw std::logic_error("train-mode forward needs an RNG for dropout");
        Rng unused(0);
        return forward(g, batch, unused);
    }
};

// Per-level subband stacks for a batch: level t (1-based) yields
// [N, 4B, S/2^t, S/2^t] with channel blocks ordered LL, LH, HL, HH and the
// band index running fastest inside each block. The stacks are plain data
// (no gradient flows back into the input patches).
inline std::vector<Tensor> pyramid_level_stacks(const Tensor& batch, int levels) {
    detail::require(batch.rank() == 4, "pyramid_level_stacks: batch must be [N,B,S,S]");
    const std::size_t N = batch.dim(0), B = batch.dim(1), S = batch.dim(2);
    detail::require(batch.dim(3) == S, "pyramid_level_stacks: patches must be square");
    if (levels < 1) return {};
    detail::require(levels <= max_haar_levels(S, S),
                    "pyramid_level_stacks: patch size does not allow " + std::to_string(levels) +
                        " levels");

    std::vector<Tensor> stacks;
    for (int t = 1; t <= levels; ++t) {
        const std::size_t s = S >> t;
        stacks.push_back(Tensor::zeros({N, 4 * B, s, s}));
    }
    for (std::size_t n = 0; n < N; ++n) {
        Tensor current = Tensor::zeros({B, S, S});
        std::copy_n(batch.data() + n * B * S * S, B * S * S, current.data());
        for (int t = 0; t < levels; ++t) {
            HaarSubbands sb = haar_forward(current);
            Tensor& stack = stacks[static_cast<std::size_t>(t)];
            const std::size_t s = stack.dim(2), plane = s * s;
            for (int k = 0; k < 4; ++k)
                std::copy_n(sb[k].data(), B * plane,
                            stack.data() + (n * 4 * B + static_cast<std::size_t>(k) * B) * plane);
            current = sb.ll;
        }
    }
    return stacks;
}

inline Network build_model(const ModelConfig& config, Rng& rng) {
    validate_config(config);

    Network net;
    net.config = config;
    net.levels = config.fuse_wavelets ? resolved_levels(config) : 0;

    // He-style init: kernels/weights ~ N(0, sqrt(2/fan_in)), everything else
    // zero (gamma one). Draw order follows registration order so a seed pins
    // the whole parameter vector.
    auto he_fill = [&rng](Tensor& t, std::size_t fan_in) {
        const double scale = std::sqrt(2.0 / static_cast<double>(fan_in));
        for (std::size_t i = 0; i < t.size(); ++i) t.data()[i] = rng.normal() * scale;
        t.set_requires_grad(true);
    };
    auto param = [](Tensor t, double value = 0.0) {
        std::fill(t.data(), t.data() + t.size(), value);
        t.set_requires_grad(true);
        return t;
    };

    const std::size_t B = config.input_bands;
    const std::size_t stem_c = config.stage_channels[0];
    net.stem_kernel = Tensor::zeros({stem_c, B, 3, 3});
    he_fill(net.stem_kernel, B * 9);
    net.stem_bias = param(Tensor::zeros({stem_c}));

    std::size_t in_c = stem_c;
    std::size_t spatial = config.patch_size;
    for (std::size_t t = 0; t < config.stage_channels.size(); ++t) {
        Stage st;
        st.in_channels = in_c;
        st.in_spatial = spatial;
        st.main_channels = config.stage_channels[t];
        st.out_spatial = (spatial - 1) / 2 + 1;  // conv 3x3 stride 2 pad 1

        st.conv_kernel = Tensor::zeros({st.main_channels, in_c, 3, 3});
        he_fill(st.conv_kernel, in_c * 9);
        st.bn_gamma = param(Tensor::zeros({st.main_channels}), 1.0);
        st.bn_beta = param(Tensor::zeros({st.main_channels}));
        st.bn_stats = RunningStats(st.main_channels);

        st.has_branch = static_cast<int>(t) < net.levels;
        if (st.has_branch) {
            // The branch normalizes raw subbands (magnitudes grow 4x per
            // level) before fusion. Concat keeps the 4B width; add must
            // match the main path.
            st.branch_channels =
                config.fusion == Fusion::kConcat ? 4 * B : st.main_channels;
            st.wave_kernel = Tensor::zeros({st.branch_channels, 4 * B, 3, 3});
            he_fill(st.wave_kernel, 4 * B * 9);
            st.wave_gamma = param(Tensor::zeros({st.branch_channels}), 1.0);
            st.wave_beta = param(Tensor::zeros({st.branch_channels}));
            st.wave_stats = RunningStats(st.branch_channels);
        }

        st.out_channels = st.main_channels;
        if (st.has_branch && config.fusion == Fusion::kConcat)
            st.out_channels += st.branch_channels;

        st.proj_kernel = Tensor::zeros({st.out_channels, in_c, 1, 1});
        he_fill(st.proj_kernel, in_c);
        st.proj_bias = param(Tensor::zeros({st.out_channels}));

        in_c = st.out_channels;
        spatial = st.out_spatial;
        net.stages.push_back(std::move(st));
    }

    const std::size_t C = static_cast<std::size_t>(config.class_count);
    net.fc1_weight = Tensor::zeros({in_c, config.dense_width});
    he_fill(net.fc1_weight, in_c);
    net.fc1_bias = param(Tensor::zeros({config.dense_width}));
    net.fc2_weight = Tensor::zeros({config.dense_width, C});
    he_fill(net.fc2_weight, config.dense_width);
    net.fc2_bias = param(Tensor::zeros({C}));
    return net;
}

inline std::size_t count_parameters(const Network& net) {
    std::size_t total = 0;
    for (const Tensor& t : net.parameters()) total += t.size();
    return total;
}

inline Tensor Network::forward(Graph& g, const Tensor& batch,
                               const std::vector<Tensor>& level_stacks, Rng& rng) {
    detail::require(batch.rank() == 4, "forward: batch must be [N,B,S,S]");
    detail::require(batch.dim(1) == config.input_bands && batch.dim(2) == config.patch_size &&
                        batch.dim(3) == config.patch_size,
                    "forward: batch shape " + detail::shape_str(batch.shape()) +
                        " does not match configured [*, " + std::to_string(config.input_bands) +
                        ", " + std::to_string(config.patch_size) + ", " +
                        std::to_string(config.patch_size) + "]");
    detail::require(level_stacks.size() >= static_cast<std::size_t>(levels),
                    "forward: pyramid depth " + std::to_string(level_stacks.size()) +
                        " < configured " + std::to_string(levels) + " levels");

    Tensor x = conv2d(g, batch, stem_kernel, stem_bias, 1, 1);
    for (std::size_t t = 0; t < stages.size(); ++t) {
        Stage& st = stages[t];
        Tensor main = conv2d(g, x, st.conv_kernel, 2, 1);
        main = batch_norm(g, main, st.bn_gamma, st.bn_beta, st.bn_stats, mode);
        main = relu(g, main);

        Tensor fused = main;
        if (st.has_branch) {
            const Tensor& stack = level_stacks[t];
            detail::require(stack.rank() == 4 && stack.dim(0) == batch.dim(0) &&
                                stack.dim(1) == 4 * config.input_bands &&
                                stack.dim(2) == st.out_spatial && stack.dim(3) == st.out_spatial,
                            "forward: level-" + std::to_string(t + 1) + " subband stack " +
                                detail::shape_str(stack.shape()) + " does not match stage map [" +
                                std::to_string(batch.dim(0)) + ", " +
                                std::to_string(4 * config.input_bands) + ", " +
                                std::to_string(st.out_spatial) + ", " +
                                std::to_string(st.out_spatial) + "]");
            Tensor wave = conv2d(g, stack, st.wave_kernel, 1, 1);
            wave = batch_norm(g, wave, st.wave_gamma, st.wave_beta, st.wave_stats, mode);
            wave = relu(g, wave);
            fused = config.fusion == Fusion::kConcat ? concat_channels(g, {main, wave})
                                                     : add(g, main, wave);
        }

        Tensor shortcut = conv2d(g, x, st.proj_kernel, st.proj_bias, 2, 0);
        x = add(g, fused, shortcut);
        if (!x.all_finite())
            throw std::domain_error("forward: non-finite activation after stage " +
                                    std::to_string(t + 1));
    }

    Tensor pooled = global_avg_pool(g, x);
    Tensor d0 = dropout(g, pooled, config.dropout_rates[0], mode, rng);
    Tensor hidden = relu(g, affine(g, d0, fc1_weight, fc1_bias));
    Tensor d1 = dropout(g, hidden, config.dropout_rates[1], mode, rng);
    Tensor logits = affine(g, d1, fc2_weight, fc2_bias);
    if (!logits.all_finite()) throw std::domain_error("forward: non-finite logits");
    return logits;
}

inline Tensor Network::forward(Graph& g, const Tensor& batch, Rng& rng) {
    return forward(g, batch, pyramid_level_stacks(batch, levels), rng);
}

}  // namespace spectralnet
