#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "good/graph.hpp"
#include "good/nn.hpp"

namespace good {

/// One graph-convolution subblock: BN(DP(ReLU(A_hat * H * W))).
struct Subblock {
    Parameter weight;  // d_in x d_out
    BatchNorm bn;
    double dropout_rate = 0.0;

    Subblock() = default;
    Subblock(const std::string& name, std::size_t d_in, std::size_t d_out, double dropout_rate, Rng& rng);

    std::size_t input_dim() const noexcept { return weight.value.rows(); }
    std::size_t output_dim() const noexcept { return weight.value.cols(); }
};

/// Subblocks applied to one input step, plus the projection of the skip
/// source (the previous step's input) when its width differs from the output.
struct EncoderStep {
    std::vector<Subblock> subblocks;
    std::optional<Parameter> residual_proj;

    std::size_t output_dim() const { return subblocks.back().output_dim(); }
};

/// Number of subblocks per input step ("2-1-1") and the output width of each
/// subblock in application order.
struct Architecture {
    std::vector<std::size_t> blocks_per_step{2, 1, 1};
    std::vector<std::size_t> widths{32, 24, 16, 12};

    std::size_t num_steps() const noexcept { return blocks_per_step.size(); }
    std::size_t total_blocks() const;
    std::size_t output_dim() const { return widths.back(); }
    void validate() const;

    // "2-1-1" -> {2, 1, 1}
    static std::vector<std::size_t> parse_schedule(const std::string& text);
    static std::string format_schedule(const std::vector<std::size_t>& blocks);
    // Widths proportional to {1, 3/4, 1/2, 3/8, ...} of `base`, one per subblock.
    static std::vector<std::size_t> default_widths(std::size_t base, std::size_t total_blocks);
};

/// Untied weights of one context. Time-dependent contexts use one
/// EncoderStep per window position; static ones a single flattened step.
struct ContextEncoder {
    ContextId context = 0;
    bool time_dependent = true;
    std::vector<EncoderStep> steps;

    ContextEncoder() = default;
    ContextEncoder(ContextId context, bool time_dependent, std::size_t input_dim, const Architecture& arch,
                   double dropout_rate, Rng& rng);

    std::size_t output_dim() const { return steps.back().output_dim(); }
    void collect_parameters(std::vector<Parameter*>& out);
    void collect_batch_norms(std::vector<BatchNorm*>& out);
};

// `where` names the (context, time, subblock) coordinates in error messages.
Var subblock_forward(Var h, const Snapshot& snap, Subblock& block, Mode mode, Rng& rng,
                     const std::string& where = {});

// Runs the stacked encoder over the ordered snapshots of one context and
// returns the last step's output. Static contexts take exactly one snapshot.
Var encode_context(Var x, std::span<const Snapshot* const> snaps, ContextEncoder& enc, Mode mode, Rng& rng);

// Encodes every context in `encoders` independently over the given input
// steps of `graph`. All outputs share one width.
std::map<ContextId, Var> encode_all(Var x, const MultiRelGraph& graph, std::span<ContextEncoder> encoders,
                                    std::span<const std::size_t> input_steps, Mode mode, Rng& rng);

} // namespace good
