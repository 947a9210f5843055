#include "good/model.hpp"

#include "good/errors.hpp"

namespace good {

using nlohmann::json;

std::size_t ModelSpec::embedding_dim() const {
    return aggregated_dim(aggregator, num_inputs(), arch.output_dim());
}

void ModelSpec::validate() const {
    arch.validate();
    if (input_contexts.empty()) {
        throw ConfigError("model needs at least one input context");
    }
    if (input_time_dependent.size() != input_contexts.size()) {
        throw ConfigError("model input contexts and time-dependence flags differ in length");
    }
    if (target_contexts.empty()) {
        throw ConfigError("model needs at least one target context");
    }
    if (num_nodes == 0 || feature_dim == 0 || head_hidden == 0) {
        throw ConfigError("model dimensions must be positive");
    }
    if (!(dropout_rate >= 0.0) || dropout_rate >= 1.0) {
        throw ConfigError("dropout_rate must lie in [0, 1), got " + std::to_string(dropout_rate));
    }
}

json to_json(const ModelSpec& s) {
    return json{
        {"num_nodes", s.num_nodes},
        {"feature_dim", s.feature_dim},
        {"learnable_features", s.learnable_features},
        {"input_contexts", s.input_contexts},
        {"input_time_dependent", s.input_time_dependent},
        {"target_contexts", s.target_contexts},
        {"schedule", Architecture::format_schedule(s.arch.blocks_per_step)},
        {"widths", s.arch.widths},
        {"dropout_rate", s.dropout_rate},
        {"aggregator", to_string(s.aggregator)},
        {"head_hidden", s.head_hidden},
    };
}

ModelSpec model_spec_from_json(const json& j) {
    ModelSpec s;
    try {
        s.num_nodes = j.at("num_nodes").get<std::size_t>();
        s.feature_dim = j.at("feature_dim").get<std::size_t>();
        s.learnable_features = j.at("learnable_features").get<bool>();
        s.input_contexts = j.at("input_contexts").get<std::vector<ContextId>>();
        s.input_time_dependent = j.at("input_time_dependent").get<std::vector<bool>>();
        s.target_contexts = j.at("target_contexts").get<std::vector<ContextId>>();
        s.arch.blocks_per_step = Architecture::parse_schedule(j.at("schedule").get<std::string>());
        s.arch.widths = j.at("widths").get<std::vector<std::size_t>>();
        s.dropout_rate = j.at("dropout_rate").get<double>();
        s.aggregator = parse_aggregator(j.at("aggregator").get<std::string>());
        s.head_hidden = j.at("head_hidden").get<std::size_t>();
    } catch (const json::exception& e) {
        throw ParseError(std::string("malformed model description: ") + e.what());
    }
    s.validate();
    return s;
}

GoodModel::GoodModel(ModelSpec spec, Rng& rng) : spec_(std::move(spec)) {
    spec_.validate();
    if (spec_.learnable_features) {
        Matrix init(spec_.num_nodes, spec_.feature_dim);
        for (double& v : init.data()) {
            v = standard_normal(rng);
        }
        learned_features_.emplace("features", std::move(init));
    }
    for (std::size_t i = 0; i < spec_.num_inputs(); ++i) {
        encoders_.emplace_back(spec_.input_contexts[i], spec_.input_time_dependent[i], spec_.feature_dim, spec_.arch,
                               spec_.dropout_rate, rng);
    }
    mix_logits_ = Parameter("coefficient_logits", Matrix(1, spec_.num_inputs()));
    const std::size_t d = spec_.embedding_dim();
    for (ContextId t : spec_.target_contexts) {
        link_heads_.emplace_back("link_head." + context_token(t), d, spec_.head_hidden, 1, spec_.dropout_rate, rng);
    }
    disentangler_ = Disentangler("disentangler", d, spec_.head_hidden, spec_.num_inputs(), spec_.dropout_rate, rng);
}

Var GoodModel::features(Tape& tape, const MultiRelGraph& graph) {
    if (learned_features_) {
        return tape.parameter(*learned_features_);
    }
    const FeatureMatrix& f = graph.features();
    if (f.source != FeatureSource::Loaded || f.values.rows() != spec_.num_nodes ||
        f.values.cols() != spec_.feature_dim) {
        throw IncompatibleError("graph features do not match the model (" + std::to_string(spec_.num_nodes) + "x" +
                                std::to_string(spec_.feature_dim) + " expected)");
    }
    return tape.constant(f.values);
}

std::map<ContextId, Var> GoodModel::encode(Var x, const MultiRelGraph& graph, std::span<const std::size_t> input_steps,
                                           Mode mode, Rng& rng) {
    return encode_all(x, graph, encoders_, input_steps, mode, rng);
}

Var GoodModel::aggregate_embeddings(const std::map<ContextId, Var>& per_context, const MultiRelGraph& graph,
                                    std::span<const std::size_t> input_steps, Var q) const {
    std::vector<Var> parts;
    std::vector<const std::vector<std::size_t>*> degrees;
    for (ContextId c : spec_.input_contexts) {
        parts.push_back(per_context.at(c));
        // degree weighting uses the last input snapshot of each context
        degrees.push_back(&graph.snapshot_at(c, input_steps.back()).degree);
    }
    return aggregate(spec_.aggregator, parts, q, degrees);
}

Var GoodModel::embed(Var x, const MultiRelGraph& graph, std::span<const std::size_t> input_steps, Var q, Mode mode,
                     Rng& rng) {
    return aggregate_embeddings(encode(x, graph, input_steps, mode, rng), graph, input_steps, q);
}

Var GoodModel::learned_coefficients(Tape& tape) {
    return softmax_rows(tape.parameter(mix_logits_));
}

std::vector<double> GoodModel::learned_coefficients() const {
    return normalize_learned(mix_logits_.value.data());
}

std::vector<Parameter*> GoodModel::parameters() {
    std::vector<Parameter*> out;
    if (learned_features_) {
        out.push_back(&*learned_features_);
    }
    for (ContextEncoder& e : encoders_) {
        e.collect_parameters(out);
    }
    out.push_back(&mix_logits_);
    for (LinkHead& h : link_heads_) {
        h.collect_parameters(out);
    }
    disentangler_.collect_parameters(out);
    return out;
}

std::vector<BatchNorm*> GoodModel::batch_norms() {
    std::vector<BatchNorm*> out;
    for (ContextEncoder& e : encoders_) {
        e.collect_batch_norms(out);
    }
    for (LinkHead& h : link_heads_) {
        out.push_back(&h.bn);
    }
    out.push_back(&disentangler_.bn);
    return out;
}

std::vector<Parameter*> GoodModel::disentangler_parameters() {
    std::vector<Parameter*> out;
    disentangler_.collect_parameters(out);
    return out;
}

void check_compatible(const ModelSpec& spec, const MultiRelGraph& graph) {
    const GraphMeta& meta = graph.meta();
    if (meta.num_nodes != spec.num_nodes) {
        throw IncompatibleError("model expects " + std::to_string(spec.num_nodes) + " nodes, dataset has " +
                                std::to_string(meta.num_nodes));
    }
    for (std::size_t i = 0; i < spec.input_contexts.size(); ++i) {
        const ContextId c = spec.input_contexts[i];
        if (c >= meta.num_contexts || meta.is_time_dependent(c) != spec.input_time_dependent[i]) {
            throw IncompatibleError("model input context " + context_token(c) + " does not exist in the dataset");
        }
    }
    for (ContextId c : spec.target_contexts) {
        if (c >= meta.num_contexts) {
            throw IncompatibleError("model target context " + context_token(c) + " does not exist in the dataset");
        }
    }
    if (!spec.learnable_features) {
        const FeatureMatrix& f = graph.features();
        if (f.source != FeatureSource::Loaded || f.values.cols() != spec.feature_dim) {
            throw IncompatibleError("model expects loaded features of width " + std::to_string(spec.feature_dim));
        }
    }
}

} // namespace good
