#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "spectralnet/errors.hpp"
#include "spectralnet/hsidata.hpp"
#include "spectralnet/metrics.hpp"
#include "spectralnet/model.hpp"
#include "spectralnet/ops.hpp"
#include "spectralnet/optim.hpp"
#include "spectralnet/rng.hpp"
#include "spectralnet/tensor.hpp"

namespace spectralnet {

struct TrainConfig {
    int epochs = 150;
    double learning_rate = 0.01;
    double momentum = 0.9;
    int batch_size = 32;
    std::uint64_t seed = 0;
    bool shuffle = true;
};

inline void validate_config(const TrainConfig& c) {
    if (c.epochs < 1) throw std::invalid_argument("train config: epochs must be >= 1");
    if (!(c.learning_rate >= 0.0))
        throw std::invalid_argument("train config: learning rate must be >= 0");
    if (c.momentum < 0.0 || c.momentum >= 1.0)
        throw std::invalid_argument("train config: momentum must be in [0,1)");
    if (c.batch_size < 1) throw std::invalid_argument("train config: batch size must be >= 1");
}

struct EpochStats {
    int epoch = 0;  // 1-based
    double loss = 0.0;
    double train_accuracy = 0.0;

    bool operator==(const EpochStats&) const = default;
};

using TrainingHistory = std::vector<EpochStats>;

// Patches are stored [row][col][band]; batches feed the network as
// channels-first [N,B,S,S].
inline Tensor make_batch(const PatchSet& ps, const std::size_t* indices, std::size_t n) {
    const std::size_t S = ps.patch_size, B = ps.bands;
    Tensor batch = Tensor::zeros({n, B, S, S});
    for (std::size_t k = 0; k < n; ++k) {
        const double* src = ps.patch(indices[k]);
        double* dst = batch.data() + k * B * S * S;
        for (std::size_t i = 0; i < S; ++i)
            for (std::size_t j = 0; j < S; ++j)
                for (std::size_t b = 0; b < B; ++b)
                    dst[(b * S + i) * S + j] = src[(i * S + j) * B + b];
    }
    return batch;
}

inline int argmax_row(const double* row, int width) {
    int best = 0;
    for (int j = 1; j < width; ++j)
        if (row[j] > row[best]) best = j;  // ties keep the lowest index
    return best;
}

// Seeded-shuffle mini-batch SGD with momentum on softmax cross-entropy over
// the train-tagged patches. One RNG drives both the shuffles and dropout, so
// a seed fixes the whole trajectory.
inline TrainingHistory fit(Network& net, const PatchSet& trainset, const TrainConfig& config) {
    validate_config(config);
    if (net.mode != Mode::kTrain) throw std::logic_error("fit: network must be in train mode");
    std::vector<std::size_t> indices = trainset.indices_of(Split::kTrain);
    if (indices.empty()) throw std::invalid_argument("fit: empty train set");

    SgdMomentum opt(net.parameters(), config.learning_rate, config.momentum);
    Rng rng(config.seed);
    const std::size_t n = indices.size();
    const std::size_t bs = static_cast<std::size_t>(config.batch_size);

    TrainingHistory history;
    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        if (config.shuffle) rng.shuffle(indices);
        double loss_sum = 0.0;
        std::size_t correct = 0;
        int batch_index = 0;
        for (std::size_t lo = 0; lo < n; lo += bs, ++batch_index) {
            const std::size_t count = std::min(bs, n - lo);
            Tensor batch = make_batch(trainset, indices.data() + lo, count);
            std::vector<int> labels(count);
            for (std::size_t k = 0; k < count; ++k)
                labels[k] = trainset.labels[indices[lo + k]];

            Graph g;
            Tensor loss;
            try {
                Tensor logits = net.forward(g, batch, rng);
                loss = softmax_cross_entropy(g, logits, labels);
                const int C = static_cast<int>(logits.dim(1));
                for (std::size_t k = 0; k < count; ++k)
                    if (argmax_row(logits.data() + k * static_cast<std::size_t>(C), C) ==
                        labels[k])
                        ++correct;
            } catch (const std::domain_error& e) {
                throw TrainingDivergedError(std::string(e.what()) + " (epoch " +
                                                std::to_string(epoch) + ", batch " +
                                                std::to_string(batch_index) + ")",
                                            epoch, batch_index);
            }
            if (!std::isfinite(loss.item()))
                throw TrainingDivergedError("fit: non-finite loss at epoch " +
                                                std::to_string(epoch) + ", batch " +
                                                std::to_string(batch_index),
                                            epoch, batch_index);
            loss_sum += loss.item() * static_cast<double>(count);

            backward(g, loss);
            opt.step();
            opt.zero_grad();
        }
        history.push_back({epoch, loss_sum / static_cast<double>(n),
                           static_cast<double>(correct) / static_cast<double>(n)});
    }
    return history;
}

struct EvalResult {
    ConfusionMatrix confusion;
    double loss = 0.0;
};

namespace detail {

// Per-sample cross-entropy from a logits row, same max-shifted form the
// loss op uses.
inline double row_cross_entropy(const double* row, int width, int label) {
    double mx = row[0];
    for (int j = 1; j < width; ++j) mx = std::max(mx, row[j]);
    double sum = 0.0;
    for (int j = 0; j < width; ++j) sum += std::exp(row[j] - mx);
    return std::log(sum) - (row[label] - mx);
}

inline int eval_worker_cap() {
    const char* env = std::getenv("SPECTRALNET_THREADS");
    if (!env || !*env) return 1;
    const int v = std::atoi(env);
    return v < 1 ? 1 : v;
}

}  // namespace detail

// Evaluates the given patches: argmax predictions (ties toward the lowest
// class index) accumulate into a confusion matrix; the loss is the mean
// per-sample cross-entropy.
//
// The test set may be sharded across up to SPECTRALNET_THREADS workers.
// Per-sample logits do not depend on batch composition and the losses are
// stored per sample and summed in sample order afterwards, so the result is
// bitwise identical for every worker count.
inline EvalResult evaluate(Network& net, const PatchSet& ps,
                           const std::vector<std::size_t>& indices) {
    if (net.mode != Mode::kEval)
        throw std::logic_error("evaluate: network must be in eval mode");
    if (indices.empty()) throw std::invalid_argument("evaluate: empty test set");
    const std::size_t n = indices.size();
    const int C = ps.class_count;

    std::vector<double> losses(n, 0.0);
    const int workers =
        static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(detail::eval_worker_cap()), n));
    std::vector<ConfusionMatrix> cms(static_cast<std::size_t>(workers), ConfusionMatrix(C));

    auto run_shard = [&](int w, std::size_t lo, std::size_t hi) {
        constexpr std::size_t kBatch = 32;
        for (std::size_t at = lo; at < hi; at += kBatch) {
            const std::size_t count = std::min(kBatch, hi - at);
            Tensor batch = make_batch(ps, indices.data() + at, count);
            Graph g;
            Tensor logits = net.forward(g, batch);
            for (std::size_t k = 0; k < count; ++k) {
                const double* row = logits.data() + k * static_cast<std::size_t>(C);
                const int label = ps.labels[indices[at + k]];
                cms[static_cast<std::size_t>(w)].add(label, argmax_row(row, C));
                losses[at + k] = detail::row_cross_entropy(row, C, label);
            }
        }
    };

    if (workers <= 1) {
        run_shard(0, 0, n);
    } else {
        std::vector<std::thread> pool;
        std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
        const std::size_t chunk = (n + static_cast<std::size_t>(workers) - 1) /
                                  static_cast<std::size_t>(workers);
        for (int w = 0; w < workers; ++w) {
            const std::size_t lo = static_cast<std::size_t>(w) * chunk;
            const std::size_t hi = std::min(n, lo + chunk);
            pool.emplace_back([&, w, lo, hi] {
                try {
                    run_shard(w, lo, hi);
                } catch (...) {
                    errors[static_cast<std::size_t>(w)] = std::current_exception();
                }
            });
        }
        for (auto& t : pool) t.join();
        for (auto& e : errors)
            if (e) std::rethrow_exception(e);
    }

    EvalResult result{ConfusionMatrix(C), 0.0};
    for (const ConfusionMatrix& cm : cms) result.confusion += cm;
    double sum = 0.0;
    for (double l : losses) sum += l;  // fixed sample order, shard-invariant
    result.loss = sum / static_cast<double>(n);
    return result;
}

inline EvalResult evaluate(Network& net, const PatchSet& ps) {
    std::vector<std::size_t> all(ps.count());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    return evaluate(net, ps, all);
}

// CSV with %.17g values so equal histories serialize to equal bytes.
inline std::string history_to_csv(const TrainingHistory& history) {
    std::string out = "epoch,loss,train_acc\n";
    char buf[128];
    for (const EpochStats& e : history) {
        std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g\n", e.epoch, e.loss, e.train_accuracy);
        out += buf;
    }
    return out;
}

}  // namespace spectralnet
