#include "good/encoder.hpp"

#include <cmath>
#include <sstream>

#include "good/errors.hpp"

namespace good {

// ---- architecture -----------------------------------------------------------

std::size_t Architecture::total_blocks() const {
    std::size_t total = 0;
    for (std::size_t b : blocks_per_step) {
        total += b;
    }
    return total;
}

void Architecture::validate() const {
    if (blocks_per_step.empty()) {
        throw ConfigError("architecture schedule is empty");
    }
    for (std::size_t b : blocks_per_step) {
        if (b == 0) {
            throw ConfigError("architecture schedule '" + format_schedule(blocks_per_step) +
                              "' has a step without subblocks");
        }
    }
    if (widths.size() != total_blocks()) {
        throw ConfigError("architecture schedule '" + format_schedule(blocks_per_step) + "' needs " +
                          std::to_string(total_blocks()) + " widths, got " + std::to_string(widths.size()));
    }
    for (std::size_t w : widths) {
        if (w == 0) {
            throw ConfigError("architecture widths must be positive");
        }
    }
}

std::vector<std::size_t> Architecture::parse_schedule(const std::string& text) {
    std::vector<std::size_t> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, '-')) {
        std::size_t used = 0;
        unsigned long v = 0;
        try {
            v = std::stoul(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != item.size()) {
            throw ConfigError("malformed architecture schedule '" + text + "' (expected e.g. 2-1-1)");
        }
        out.push_back(v);
    }
    if (out.empty()) {
        throw ConfigError("malformed architecture schedule '" + text + "' (expected e.g. 2-1-1)");
    }
    return out;
}

std::string Architecture::format_schedule(const std::vector<std::size_t>& blocks) {
    std::string s;
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        s += (i ? "-" : "") + std::to_string(blocks[i]);
    }
    return s;
}

std::vector<std::size_t> Architecture::default_widths(std::size_t base, std::size_t total_blocks) {
    static constexpr double kRatios[] = {1.0, 0.75, 0.5, 0.375};
    std::vector<std::size_t> out;
    double ratio = 1.0;
    for (std::size_t i = 0; i < total_blocks; ++i) {
        ratio = i < std::size(kRatios) ? kRatios[i] : ratio * 0.75;
        out.push_back(std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(ratio * base))));
    }
    return out;
}

// ---- parameters ---------------------------------------------------------------

Subblock::Subblock(const std::string& name, std::size_t d_in, std::size_t d_out, double rate, Rng& rng)
    : weight(name + ".weight", glorot_uniform(d_in, d_out, rng)), bn(name + ".bn", d_out), dropout_rate(rate) {
    if (!(rate >= 0.0) || rate >= 1.0) {
        throw ConfigError("dropout rate must lie in [0, 1), got " + std::to_string(rate));
    }
}

ContextEncoder::ContextEncoder(ContextId c, bool time_dep, std::size_t input_dim, const Architecture& arch,
                               double dropout_rate, Rng& rng)
    : context(c), time_dependent(time_dep) {
    arch.validate();
    const std::string prefix = "encoder.c" + std::to_string(c);
    std::size_t width_idx = 0;
    std::size_t d = input_dim;
    if (!time_dependent) {
        EncoderStep step;
        for (std::size_t b = 0; b < arch.total_blocks(); ++b) {
            const std::size_t w = arch.widths[width_idx++];
            step.subblocks.emplace_back(prefix + ".static.b" + std::to_string(b), d, w, dropout_rate, rng);
            d = w;
        }
        steps.push_back(std::move(step));
        return;
    }
    std::size_t prev_input = input_dim;
    for (std::size_t s = 0; s < arch.num_steps(); ++s) {
        EncoderStep step;
        const std::size_t step_input = d;
        for (std::size_t b = 0; b < arch.blocks_per_step[s]; ++b) {
            const std::size_t w = arch.widths[width_idx++];
            step.subblocks.emplace_back(prefix + ".s" + std::to_string(s) + ".b" + std::to_string(b), d, w,
                                        dropout_rate, rng);
            d = w;
        }
        if (s > 0 && prev_input != d) {
            step.residual_proj.emplace(prefix + ".s" + std::to_string(s) + ".residual",
                                       glorot_uniform(prev_input, d, rng));
        }
        prev_input = step_input;
        steps.push_back(std::move(step));
    }
}

void ContextEncoder::collect_parameters(std::vector<Parameter*>& out) {
    for (EncoderStep& step : steps) {
        for (Subblock& b : step.subblocks) {
            out.push_back(&b.weight);
            out.push_back(&b.bn.gamma);
            out.push_back(&b.bn.beta);
        }
        if (step.residual_proj) {
            out.push_back(&*step.residual_proj);
        }
    }
}

void ContextEncoder::collect_batch_norms(std::vector<BatchNorm*>& out) {
    for (EncoderStep& step : steps) {
        for (Subblock& b : step.subblocks) {
            out.push_back(&b.bn);
        }
    }
}

// ---- forward ------------------------------------------------------------------

Var subblock_forward(Var h, const Snapshot& snap, Subblock& block, Mode mode, Rng& rng, const std::string& where) {
    const std::string at = where.empty() ? std::string("subblock") : where;
    if (h.rows() != snap.adj_norm.n) {
        throw DimensionError(at + ": embedding has " + std::to_string(h.rows()) + " rows but the snapshot has " +
                             std::to_string(snap.adj_norm.n) + " nodes");
    }
    if (h.cols() != block.input_dim()) {
        throw DimensionError(at + ": embedding " + h.value().shape_string() + " does not match weight " +
                             block.weight.value.shape_string());
    }
    Tape& tape = *h.tape();
    Var w = tape.parameter(block.weight);
    Var conv = matmul(spmm(snap.adj_norm, h), w);
    Var act = relu(conv);
    Var dropped = dropout(act, block.dropout_rate, mode, rng);
    return batch_norm(dropped, block.bn, mode);
}

namespace {

std::string coords(ContextId c, const Snapshot& snap, std::size_t block) {
    return "context " + context_token(c) + ", time " + time_token(snap.time) + ", subblock " + std::to_string(block);
}

} // namespace

Var encode_context(Var x, std::span<const Snapshot* const> snaps, ContextEncoder& enc, Mode mode, Rng& rng) {
    if (!enc.time_dependent) {
        if (snaps.size() != 1) {
            throw ConfigError("static context " + context_token(enc.context) + " takes exactly one snapshot, got " +
                              std::to_string(snaps.size()));
        }
        Var h = x;
        std::size_t b = 0;
        for (Subblock& block : enc.steps.front().subblocks) {
            h = subblock_forward(h, *snaps.front(), block, mode, rng, coords(enc.context, *snaps.front(), b++));
        }
        return h;
    }
    if (snaps.size() != enc.steps.size()) {
        throw ConfigError("context " + context_token(enc.context) + ": schedule has " +
                          std::to_string(enc.steps.size()) + " steps but " + std::to_string(snaps.size()) +
                          " snapshots were given");
    }
    Tape& tape = *x.tape();
    Var prev_input;
    Var input = x;
    for (std::size_t s = 0; s < snaps.size(); ++s) {
        EncoderStep& step = enc.steps[s];
        Var h = input;
        std::size_t b = 0;
        for (Subblock& block : step.subblocks) {
            h = subblock_forward(h, *snaps[s], block, mode, rng, coords(enc.context, *snaps[s], b++));
        }
        if (s > 0) {
            Var skip = step.residual_proj ? matmul(prev_input, tape.parameter(*step.residual_proj)) : prev_input;
            if (skip.cols() != h.cols()) {
                throw DimensionError("context " + context_token(enc.context) + ", step " + std::to_string(s) +
                                     ": residual width " + std::to_string(skip.cols()) + " vs output " +
                                     std::to_string(h.cols()));
            }
            h = add(h, skip);
        }
        prev_input = input;
        input = h;
    }
    return input;
}

std::map<ContextId, Var> encode_all(Var x, const MultiRelGraph& graph, std::span<ContextEncoder> encoders,
                                    std::span<const std::size_t> input_steps, Mode mode, Rng& rng) {
    std::map<ContextId, Var> out;
    std::optional<std::size_t> width;
    for (ContextEncoder& enc : encoders) {
        std::vector<const Snapshot*> snaps;
        if (enc.time_dependent) {
            for (std::size_t t : input_steps) {
                snaps.push_back(&graph.snapshot_at(enc.context, t));
            }
        } else {
            snaps.push_back(&graph.snapshot(enc.context, std::nullopt));
        }
        Var h = encode_context(x, snaps, enc, mode, rng);
        if (width && *width != h.cols()) {
            throw ConfigError("context embeddings differ in width (" + std::to_string(*width) + " vs " +
                              std::to_string(h.cols()) + "); aggregation needs one width");
        }
        width = h.cols();
        out.emplace(enc.context, h);
    }
    return out;
}

} // namespace good
