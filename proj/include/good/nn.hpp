#pragma once

#include <cstddef>
#include <string>

#include "good/tape.hpp"

namespace good {

/// Per-feature batch normalization: learnable scale/shift plus running
/// statistics used in eval mode.
struct BatchNorm {
    Parameter gamma;
    Parameter beta;
    Matrix running_mean;  // 1 x d
    Matrix running_var;   // 1 x d, entries >= 0
    double momentum = 0.1;
    double epsilon = 1e-5;

    BatchNorm() = default;
    BatchNorm(std::string name, std::size_t features);

    std::size_t features() const noexcept { return running_mean.cols(); }
    // gamma = 1, beta = 0, running mean 0, running var 1.
    void reset_identity();
};

// Train mode normalizes each column with the batch mean and population
// variance and folds them into the running stats (EMA with `momentum`);
// eval mode uses the running stats and is affine in x.
Var batch_norm(Var x, BatchNorm& bn, Mode mode);

// Inverted dropout: survivors are scaled by 1 / (1 - rate) at train time, so
// eval mode is the identity.
Var dropout(Var x, double rate, Mode mode, Rng& rng);

// Glorot/Xavier uniform initialization on [-a, a], a = sqrt(6 / (rows + cols)).
Matrix glorot_uniform(std::size_t rows, std::size_t cols, Rng& rng);

} // namespace good
