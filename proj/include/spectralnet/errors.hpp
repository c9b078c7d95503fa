#pragma once

#include <stdexcept>
#include <string>

namespace spectralnet {

// Bad or unreadable input files, malformed NPY, shape mismatches at load time.
struct InputError : std::runtime_error {
    explicit InputError(const std::string& msg) : std::runtime_error(msg) {}
};

// Iterative numeric procedure failed to converge.
struct ConvergenceError : std::runtime_error {
    ConvergenceError(const std::string& msg, double final_delta)
        : std::runtime_error(msg), final_delta(final_delta) {}
    double final_delta;
};

// Non-finite loss during training; carries the coordinates of the bad batch.
struct TrainingDivergedError : std::runtime_error {
    TrainingDivergedError(const std::string& msg, int epoch, int batch)
        : std::runtime_error(msg), epoch(epoch), batch(batch) {}
    int epoch;
    int batch;
};

// Checkpoint does not match the requested model configuration.
struct ArtifactMismatchError : std::runtime_error {
    explicit ArtifactMismatchError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace spectralnet
