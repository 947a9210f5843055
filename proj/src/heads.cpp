#include "good/heads.hpp"

#include "good/errors.hpp"

namespace good {

MlpHead::MlpHead(const std::string& name, std::size_t d_in, std::size_t hidden, std::size_t d_out, double rate,
                 Rng& rng)
    : w_hidden(name + ".w_hidden", glorot_uniform(d_in, hidden, rng)),
      b_hidden(name + ".b_hidden", Matrix(1, hidden)),
      w_out(name + ".w_out", glorot_uniform(hidden, d_out, rng)),
      b_out(name + ".b_out", Matrix(1, d_out)),
      bn(name + ".bn", hidden),
      dropout_rate(rate) {
    if (!(rate >= 0.0) || rate >= 1.0) {
        throw ConfigError("dropout rate must lie in [0, 1), got " + std::to_string(rate));
    }
}

void MlpHead::collect_parameters(std::vector<Parameter*>& out) {
    out.insert(out.end(), {&w_hidden, &b_hidden, &bn.gamma, &bn.beta, &w_out, &b_out});
}

void MlpHead::zero() {
    for (Parameter* p : {&w_hidden, &b_hidden, &w_out, &b_out}) {
        p->value.fill(0.0);
    }
}

Var mlp_forward(Var x, MlpHead& head, Mode mode, Rng& rng) {
    if (x.cols() != head.input_dim()) {
        throw DimensionError("head input " + x.value().shape_string() + " does not match weight " +
                             head.w_hidden.value.shape_string());
    }
    Tape& tape = *x.tape();
    Var hidden = add_row(matmul(x, tape.parameter(head.w_hidden)), tape.parameter(head.b_hidden));
    hidden = dropout(relu(batch_norm(hidden, head.bn, mode)), head.dropout_rate, mode, rng);
    return add_row(matmul(hidden, tape.parameter(head.w_out)), tape.parameter(head.b_out));
}

Var predict_links(Var h, std::span<const NodePair> pairs, LinkHead& head, Mode mode, Rng& rng) {
    if (pairs.empty()) {
        return h.tape()->constant(Matrix(0, 1));
    }
    std::vector<std::size_t> src;
    std::vector<std::size_t> dst;
    src.reserve(pairs.size());
    dst.reserve(pairs.size());
    for (const auto& [u, v] : pairs) {
        if (u >= h.rows() || v >= h.rows()) {
            throw ArgumentError("predict_links: pair (" + std::to_string(u) + ", " + std::to_string(v) +
                                ") out of range for " + std::to_string(h.rows()) + " nodes");
        }
        src.push_back(u);
        dst.push_back(v);
    }
    Var x = hadamard(gather_rows(h, std::move(src)), gather_rows(h, std::move(dst)));
    return sigmoid(mlp_forward(x, head, mode, rng));
}

Var disentangle(Var h, Disentangler& head, Mode mode, Rng& rng) {
    if (h.rows() == 0) {
        throw ArgumentError("disentangle needs at least one node");
    }
    return softmax_rows(mean_rows(mlp_forward(h, head, mode, rng)));
}

} // namespace good
