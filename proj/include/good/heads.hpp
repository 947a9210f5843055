#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "good/graph.hpp"
#include "good/nn.hpp"

namespace good {

/// Two-layer head: out = W_out * DP(ReLU(BN(W_hidden * x + b_hidden))) + b_out,
/// written with row vectors (x * W).
struct MlpHead {
    Parameter w_hidden;  // d_in x hidden
    Parameter b_hidden;  // 1 x hidden
    Parameter w_out;     // hidden x d_out
    Parameter b_out;     // 1 x d_out
    BatchNorm bn;
    double dropout_rate = 0.0;

    MlpHead() = default;
    MlpHead(const std::string& name, std::size_t d_in, std::size_t hidden, std::size_t d_out, double dropout_rate,
            Rng& rng);

    std::size_t input_dim() const noexcept { return w_hidden.value.rows(); }
    std::size_t output_dim() const noexcept { return w_out.value.cols(); }
    void collect_parameters(std::vector<Parameter*>& out);
    // Sets every weight and bias to zero.
    void zero();
};

// Pre-activation output of the head for each row of x.
Var mlp_forward(Var x, MlpHead& head, Mode mode, Rng& rng);

/// Link predictor of one target context: one logit per pair.
using LinkHead = MlpHead;
/// Coefficient disentangler: one logit per known context.
using Disentangler = MlpHead;

// Scores in (0, 1) as an m x 1 column, computed from H_src (.) H_dst. An empty
// pair list gives a 0 x 1 result.
Var predict_links(Var h, std::span<const NodePair> pairs, LinkHead& head, Mode mode, Rng& rng);

// Per-node logits mean-pooled over nodes, then softmax: a 1 x C row on the
// simplex.
Var disentangle(Var h, Disentangler& head, Mode mode, Rng& rng);

} // namespace good
