#include "good/mixagg.hpp"

#include <algorithm>
#include <cmath>

#include "good/errors.hpp"

namespace good {

std::string to_string(Aggregator kind) {
    switch (kind) {
    case Aggregator::Sum:
        return "sum";
    case Aggregator::Stack:
        return "stack";
    case Aggregator::DSum:
        return "dsum";
    case Aggregator::DStack:
        return "dstack";
    }
    return "?";
}

Aggregator parse_aggregator(const std::string& text) {
    std::string t = text;
    std::transform(t.begin(), t.end(), t.begin(), [](unsigned char ch) { return std::tolower(ch); });
    if (t == "sum") {
        return Aggregator::Sum;
    }
    if (t == "stack") {
        return Aggregator::Stack;
    }
    if (t == "dsum") {
        return Aggregator::DSum;
    }
    if (t == "dstack") {
        return Aggregator::DStack;
    }
    throw ConfigError("unknown aggregator '" + text + "' (expected sum, stack, dsum or dstack)");
}

std::vector<double> sample_coefficients(std::size_t count, Rng& rng) {
    if (count == 0) {
        throw ArgumentError("sample_coefficients needs at least one context");
    }
    if (count == 1) {
        return {1.0};
    }
    std::vector<double> log_g(count);
    for (double& v : log_g) {
        const double alpha = kMinConcentration + (1.0 - kMinConcentration) * uniform01(rng);
        v = log_gamma_draw(rng, alpha);
    }
    return softmax(log_g);
}

std::vector<double> inference_coefficients(std::size_t count) {
    if (count == 0) {
        throw ArgumentError("inference_coefficients needs at least one context");
    }
    return std::vector<double>(count, 1.0 / static_cast<double>(count));
}

std::vector<double> normalize_learned(std::span<const double> raw) {
    return softmax(raw);
}

void check_simplex(std::span<const double> q) {
    double total = 0.0;
    for (double v : q) {
        if (!(v >= 0.0)) {
            throw ArgumentError("mixing coefficients must be nonnegative");
        }
        total += v;
    }
    if (q.empty() || std::abs(total - 1.0) > 1e-9) {
        throw ArgumentError("mixing coefficients must sum to 1");
    }
}

std::size_t aggregated_dim(Aggregator kind, std::size_t count, std::size_t dim) {
    return kind == Aggregator::Stack || kind == Aggregator::DStack ? count * dim : dim;
}

Var aggregate(Aggregator kind, std::span<const Var> embeddings, Var q,
              std::span<const std::vector<std::size_t>* const> degrees) {
    if (embeddings.empty()) {
        throw ArgumentError("aggregate needs at least one embedding");
    }
    if (q.rows() != 1 || q.cols() != embeddings.size()) {
        throw ArgumentError("aggregate: " + std::to_string(embeddings.size()) + " embeddings but coefficients " +
                            q.value().shape_string());
    }
    const bool weighted = kind == Aggregator::DSum || kind == Aggregator::DStack;
    if (weighted && degrees.size() != embeddings.size()) {
        throw ArgumentError("aggregate: " + to_string(kind) + " needs one degree vector per embedding");
    }
    const std::size_t n = embeddings.front().rows();
    const std::size_t d = embeddings.front().cols();
    std::vector<Var> parts;
    for (std::size_t c = 0; c < embeddings.size(); ++c) {
        Var h = embeddings[c];
        if (h.rows() != n || h.cols() != d) {
            throw ArgumentError("aggregate: embedding " + h.value().shape_string() + " differs from " +
                                embeddings.front().value().shape_string());
        }
        if (weighted) {
            const std::vector<std::size_t>& deg = *degrees[c];
            if (deg.size() != n) {
                throw ArgumentError("aggregate: degree vector length " + std::to_string(deg.size()) + " vs " +
                                    std::to_string(n) + " nodes");
            }
            const std::size_t max_deg = std::max<std::size_t>(1, *std::max_element(deg.begin(), deg.end()));
            std::vector<double> factors(n);
            for (std::size_t i = 0; i < n; ++i) {
                factors[i] = static_cast<double>(deg[i]) / static_cast<double>(max_deg);
            }
            h = scale_rows(h, std::move(factors));
        }
        parts.push_back(scale_by(h, element(q, 0, c)));
    }
    if (kind == Aggregator::Stack || kind == Aggregator::DStack) {
        return concat_cols(parts);
    }
    Var acc = parts.front();
    for (std::size_t c = 1; c < parts.size(); ++c) {
        acc = add(acc, parts[c]);
    }
    return acc;
}

Matrix aggregate(Aggregator kind, std::span<const Matrix> embeddings, std::span<const double> q,
                 std::span<const std::vector<std::size_t>> degrees) {
    Tape tape;
    std::vector<Var> vars;
    for (const Matrix& m : embeddings) {
        vars.push_back(tape.constant(m));
    }
    std::vector<const std::vector<std::size_t>*> deg_ptrs;
    for (const auto& d : degrees) {
        deg_ptrs.push_back(&d);
    }
    Var qv = tape.constant(Matrix(1, q.size(), std::vector<double>(q.begin(), q.end())));
    return aggregate(kind, vars, qv, deg_ptrs).value();
}

} // namespace good
