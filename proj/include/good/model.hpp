#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "json.hpp"

#include "good/encoder.hpp"
#include "good/heads.hpp"
#include "good/mixagg.hpp"

namespace good {

/// Everything that fixes the parameter shapes of a model.
struct ModelSpec {
    std::size_t num_nodes = 0;
    std::size_t feature_dim = 0;
    bool learnable_features = false;
    std::vector<ContextId> input_contexts;
    std::vector<bool> input_time_dependent;  // parallel to input_contexts
    std::vector<ContextId> target_contexts;
    Architecture arch;
    double dropout_rate = 0.3;
    Aggregator aggregator = Aggregator::Sum;
    std::size_t head_hidden = 32;

    std::size_t num_inputs() const noexcept { return input_contexts.size(); }
    std::size_t embedding_dim() const;
    void validate() const;
};

nlohmann::json to_json(const ModelSpec& spec);
ModelSpec model_spec_from_json(const nlohmann::json& j);

/// Encoders for the input contexts, the learnable coefficient logits, one
/// link head per target context and the coefficient disentangler.
class GoodModel {
public:
    GoodModel() = default;
    GoodModel(ModelSpec spec, Rng& init_rng);

    const ModelSpec& spec() const noexcept { return spec_; }

    // n x feature_dim node features on the tape.
    Var features(Tape& tape, const MultiRelGraph& graph);
    // Aggregated n x d_agg embedding for a window's input steps.
    Var embed(Var x, const MultiRelGraph& graph, std::span<const std::size_t> input_steps, Var q, Mode mode,
              Rng& rng);
    // Per-context embeddings before aggregation.
    std::map<ContextId, Var> encode(Var x, const MultiRelGraph& graph, std::span<const std::size_t> input_steps,
                                    Mode mode, Rng& rng);
    Var aggregate_embeddings(const std::map<ContextId, Var>& per_context, const MultiRelGraph& graph,
                             std::span<const std::size_t> input_steps, Var q) const;

    // softmax of the learnable coefficient logits, as a tape row.
    Var learned_coefficients(Tape& tape);
    std::vector<double> learned_coefficients() const;

    LinkHead& link_head(std::size_t target_index) { return link_heads_.at(target_index); }
    Disentangler& disentangler() noexcept { return disentangler_; }
    std::vector<ContextEncoder>& encoders() noexcept { return encoders_; }
    Parameter& coefficient_logits() noexcept { return mix_logits_; }

    // Fixed order used by optimizers and checkpoints.
    std::vector<Parameter*> parameters();
    std::vector<BatchNorm*> batch_norms();
    std::vector<Parameter*> disentangler_parameters();

private:
    ModelSpec spec_;
    std::optional<Parameter> learned_features_;
    std::vector<ContextEncoder> encoders_;
    Parameter mix_logits_;
    std::vector<LinkHead> link_heads_;
    Disentangler disentangler_;
};

// Throws IncompatibleError when the graph does not fit the model.
void check_compatible(const ModelSpec& spec, const MultiRelGraph& graph);

} // namespace good
