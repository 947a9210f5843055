#include "good/composites.hpp"

#include <chrono>
#include <functional>

#include "good/encoder.hpp"
#include "good/heads.hpp"
#include "good/mixagg.hpp"
#include "good/model.hpp"
#include "good/objective.hpp"

namespace good {

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng) {
    Matrix m(r, c);
    for (double& v : m.data()) {
        v = standard_normal(rng);
    }
    return m;
}

// Small fixed graph used by the encoder checks.
EdgeSet ring_with_chords(ContextId c, std::size_t t, std::size_t n, std::size_t stride) {
    EdgeSet es(c, TimeStep(t));
    for (NodeId u = 0; u < n; ++u) {
        es.set_edge(u, (u + 1) % n, 1.0, EdgeLabel::Positive);
        if (u % stride == 0) {
            es.set_edge(u, (u + n / 2) % n, 1.0, EdgeLabel::Positive);
        }
    }
    return es;
}

MultiRelGraph toy_graph(std::size_t n, std::size_t feature_dim) {
    GraphMeta meta;
    meta.num_nodes = n;
    meta.num_contexts = 3;
    meta.num_known_contexts = 2;
    meta.num_steps = 5;
    std::vector<EdgeSet> sets;
    for (ContextId c = 0; c < 3; ++c) {
        for (std::size_t t = 0; t < 5; ++t) {
            sets.push_back(ring_with_chords(c, t, n, 2 + (c + t) % 3));
        }
    }
    Rng rng(5);
    return MultiRelGraph(meta, std::move(sets), FeatureMatrix::loaded(random_matrix(n, feature_dim, rng)));
}

template <class Setup>
CompositeReport timed(const std::string& name, const std::string& fault_op, Setup setup) {
    const auto start = std::chrono::steady_clock::now();
    CompositeReport r;
    r.name = name;
    r.result = setup(fault_op);
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return r;
}

void randomize_bn(BatchNorm& bn, Rng& rng) {
    bn.gamma.value = random_matrix(1, bn.features(), rng);
    bn.beta.value = random_matrix(1, bn.features(), rng);
}

} // namespace

std::vector<CompositeReport> check_composites(const std::string& fault_op) {
    std::vector<CompositeReport> out;
    const MultiRelGraph graph = toy_graph(8, 4);

    out.push_back(timed("subblock", fault_op, [&](const std::string& fault) {
        Rng init(11);
        Parameter x("x", random_matrix(8, 4, init));
        Subblock block("subblock", 4, 3, 0.3, init);
        randomize_bn(block.bn, init);
        const Matrix r = random_matrix(8, 3, init);
        const Snapshot& snap = graph.snapshot(0, TimeStep(0));
        LossBuilder f = [&](Tape& t) {
            Rng rng(3);
            Var y = subblock_forward(t.parameter(x), snap, block, Mode::Train, rng);
            return sum(hadamard(y, t.constant(r)));
        };
        std::vector<Parameter*> ps{&x, &block.weight, &block.bn.gamma, &block.bn.beta};
        return grad_check(f, ps, 1e-5, fault);
    }));

    out.push_back(timed("residual_stack", fault_op, [&](const std::string& fault) {
        Rng init(13);
        Parameter x("x", random_matrix(8, 4, init));
        Architecture arch;
        arch.blocks_per_step = {1, 1};
        arch.widths = {4, 3};
        ContextEncoder enc(0, true, 4, arch, 0.2, init);
        const Matrix r = random_matrix(8, 3, init);
        std::vector<const Snapshot*> snaps{&graph.snapshot(0, TimeStep(0)), &graph.snapshot(0, TimeStep(1))};
        LossBuilder f = [&](Tape& t) {
            Rng rng(3);
            Var h = encode_context(t.parameter(x), snaps, enc, Mode::Train, rng);
            return sum(hadamard(h, t.constant(r)));
        };
        std::vector<Parameter*> ps{&x};
        enc.collect_parameters(ps);
        return grad_check(f, ps, 1e-5, fault);
    }));

    out.push_back(timed("aggregate", fault_op, [&](const std::string& fault) {
        Rng init(17);
        Parameter h0("h0", random_matrix(8, 3, init));
        Parameter h1("h1", random_matrix(8, 3, init));
        Parameter logits("logits", random_matrix(1, 2, init));
        const Matrix r_sum = random_matrix(8, 3, init);
        const Matrix r_stack = random_matrix(8, 6, init);
        std::vector<const std::vector<std::size_t>*> deg{&graph.snapshot(0, TimeStep(0)).degree,
                                                         &graph.snapshot(1, TimeStep(0)).degree};
        LossBuilder f = [&](Tape& t) {
            std::vector<Var> hs{t.parameter(h0), t.parameter(h1)};
            Var q = softmax_rows(t.parameter(logits));
            Var a = sum(hadamard(aggregate(Aggregator::DSum, hs, q, deg), t.constant(r_sum)));
            Var b = sum(hadamard(aggregate(Aggregator::Stack, hs, q), t.constant(r_stack)));
            return add(a, b);
        };
        std::vector<Parameter*> ps{&h0, &h1, &logits};
        return grad_check(f, ps, 1e-5, fault);
    }));

    out.push_back(timed("link_head", fault_op, [&](const std::string& fault) {
        Rng init(19);
        Parameter h("h", random_matrix(8, 3, init));
        LinkHead head("link_head", 3, 5, 1, 0.3, init);
        randomize_bn(head.bn, init);
        const std::vector<NodePair> pairs{{0, 1}, {2, 5}, {3, 7}, {6, 4}, {1, 1}, {5, 0}};
        const Matrix r = random_matrix(pairs.size(), 1, init);
        LossBuilder f = [&](Tape& t) {
            Rng rng(3);
            return sum(hadamard(predict_links(t.parameter(h), pairs, head, Mode::Train, rng), t.constant(r)));
        };
        std::vector<Parameter*> ps{&h};
        head.collect_parameters(ps);
        return grad_check(f, ps, 1e-5, fault);
    }));

    out.push_back(timed("disentangler", fault_op, [&](const std::string& fault) {
        Rng init(23);
        Parameter h("h", random_matrix(8, 3, init));
        Disentangler head("disentangler", 3, 5, 3, 0.3, init);
        randomize_bn(head.bn, init);
        const Matrix r = random_matrix(1, 3, init);
        LossBuilder f = [&](Tape& t) {
            Rng rng(3);
            return sum(hadamard(disentangle(t.parameter(h), head, Mode::Train, rng), t.constant(r)));
        };
        std::vector<Parameter*> ps{&h};
        head.collect_parameters(ps);
        return grad_check(f, ps, 1e-5, fault);
    }));

    out.push_back(timed("link_loss", fault_op, [&](const std::string& fault) {
        Rng init(29);
        Parameter a("a", random_matrix(5, 1, init));
        Parameter b("b", random_matrix(4, 1, init));
        const std::vector<std::vector<double>> labels{{1, 0, 1, 1, 0}, {0, 1, 0, 1}};
        LossBuilder f = [&](Tape& t) {
            std::vector<Var> scores{sigmoid(t.parameter(a)), sigmoid(t.parameter(b))};
            return link_loss(scores, labels);
        };
        std::vector<Parameter*> ps{&a, &b};
        return grad_check(f, ps, 1e-5, fault);
    }));

    out.push_back(timed("disentangle_loss", fault_op, [&](const std::string& fault) {
        Rng init(31);
        Parameter logits("logits", random_matrix(1, 4, init));
        const std::vector<double> q{0.1, 0.6, 0.05, 0.25};
        LossBuilder f = [&](Tape& t) { return disentangle_loss(q, softmax_rows(t.parameter(logits))); };
        std::vector<Parameter*> ps{&logits};
        return grad_check(f, ps, 1e-5, fault);
    }));

    out.push_back(timed("full_model", fault_op, [&](const std::string& fault) {
        Rng init(37);
        ModelSpec spec;
        spec.num_nodes = 8;
        spec.feature_dim = 4;
        spec.input_contexts = {0, 1};
        spec.input_time_dependent = {true, true};
        spec.target_contexts = {2};
        spec.arch.blocks_per_step = {2, 1};
        spec.arch.widths = {4, 3, 3};
        spec.dropout_rate = 0.2;
        spec.aggregator = Aggregator::Stack;
        spec.head_hidden = 4;
        GoodModel model(spec, init);
        for (BatchNorm* bn : model.batch_norms()) {
            randomize_bn(*bn, init);
        }
        model.coefficient_logits().value = random_matrix(1, 2, init);
        const std::vector<NodePair> pairs{{0, 1}, {2, 5}, {3, 7}, {6, 4}};
        const std::vector<std::vector<double>> labels{{1, 1, 0, 0}};
        const std::vector<double> q{0.3, 0.7};
        const std::vector<std::size_t> steps{0, 1};
        LossBuilder f = [&](Tape& t) {
            Rng rng(3);
            Var x = model.features(t, graph);
            Var h = model.embed(x, graph, steps, model.learned_coefficients(t), Mode::Train, rng);
            std::vector<Var> scores{predict_links(h, pairs, model.link_head(0), Mode::Train, rng)};
            Var link = link_loss(scores, labels);
            Var disent = disentangle_loss(q, disentangle(h, model.disentangler(), Mode::Train, rng));
            return total_loss(Variant::Good, link, disent);
        };
        return grad_check(f, model.parameters(), 1e-5, fault);
    }));
    return out;
}

} // namespace good
