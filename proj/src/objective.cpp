#include "good/objective.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "good/errors.hpp"

namespace good {

std::string to_string(Variant v) {
    switch (v) {
    case Variant::Good:
        return "GOOD";
    case Variant::GoodLc:
        return "GOOD_LC";
    case Variant::GoodLcPlus:
        return "GOOD_LC_PLUS";
    }
    return "?";
}

Variant parse_variant(const std::string& text) {
    std::string t = text;
    std::transform(t.begin(), t.end(), t.begin(), [](unsigned char ch) { return std::toupper(ch); });
    std::replace(t.begin(), t.end(), '-', '_');
    if (t == "GOOD") {
        return Variant::Good;
    }
    if (t == "GOOD_LC") {
        return Variant::GoodLc;
    }
    if (t == "GOOD_LC_PLUS" || t == "GOOD_LC+") {
        return Variant::GoodLcPlus;
    }
    throw ConfigError("unknown variant '" + text + "' (expected GOOD, GOOD_LC or GOOD_LC_PLUS)");
}

// ---- losses -----------------------------------------------------------------

Var binary_cross_entropy(Var scores, std::span<const double> labels) {
    const Matrix& s = scores.value();
    if (s.cols() != 1 || s.rows() != labels.size()) {
        throw ArgumentError("binary_cross_entropy: scores " + s.shape_string() + " vs " +
                            std::to_string(labels.size()) + " labels");
    }
    if (labels.empty()) {
        throw ArgumentError("binary_cross_entropy of an empty batch");
    }
    const double m = static_cast<double>(labels.size());
    double total = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] != 0.0 && labels[i] != 1.0) {
            throw ArgumentError("labels must be 0 or 1");
        }
        const double p = std::clamp(s(i, 0), kScoreClamp, 1.0 - kScoreClamp);
        total -= labels[i] * std::log(p) + (1.0 - labels[i]) * std::log(1.0 - p);
    }
    std::vector<double> y(labels.begin(), labels.end());
    return scores.tape()->record(
        "bce", Matrix(1, 1, total / m), {scores}, [scores, y = std::move(y), m](Tape& t, const Matrix& g) {
            const Matrix& sv = scores.value();
            Matrix gs(sv.rows(), 1);
            for (std::size_t i = 0; i < y.size(); ++i) {
                const double raw = sv(i, 0);
                // the clamp has zero slope outside its interval
                if (raw < kScoreClamp || raw > 1.0 - kScoreClamp) {
                    continue;
                }
                gs(i, 0) = g(0, 0) * (-y[i] / raw + (1.0 - y[i]) / (1.0 - raw)) / m;
            }
            t.accumulate(scores, gs);
        });
}

Var link_loss(std::span<const Var> scores, std::span<const std::vector<double>> labels) {
    if (scores.empty() || scores.size() != labels.size()) {
        throw ArgumentError("link_loss needs one label vector per target context");
    }
    Var acc;
    for (std::size_t c = 0; c < scores.size(); ++c) {
        if (labels[c].empty()) {
            throw ArgumentError("link_loss: target context " + std::to_string(c) + " has an empty batch");
        }
        Var l = binary_cross_entropy(scores[c], labels[c]);
        acc = acc.valid() ? add(acc, l) : l;
    }
    return scale(acc, 1.0 / static_cast<double>(scores.size()));
}

double link_loss(std::span<const std::vector<double>> scores, std::span<const std::vector<double>> labels) {
    Tape tape;
    std::vector<Var> vars;
    for (const auto& s : scores) {
        vars.push_back(tape.constant(Matrix(s.size(), 1, s)));
    }
    return link_loss(vars, labels).value()(0, 0);
}

Var disentangle_loss(std::span<const double> q, Var q_hat) {
    if (q_hat.rows() != 1 || q_hat.cols() != q.size()) {
        throw ArgumentError("disentangle_loss: q has " + std::to_string(q.size()) + " entries but q_hat is " +
                            q_hat.value().shape_string());
    }
    Matrix target(1, q.size());
    for (std::size_t i = 0; i < q.size(); ++i) {
        target(0, i) = std::log1p(q[i]);
    }
    Var diff = sub(q_hat.tape()->constant(std::move(target)), log1p(q_hat));
    return mean(square(diff));
}

double disentangle_loss(std::span<const double> q, std::span<const double> q_hat) {
    if (q.size() != q_hat.size() || q.empty()) {
        throw ArgumentError("disentangle_loss: length mismatch " + std::to_string(q.size()) + " vs " +
                            std::to_string(q_hat.size()));
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
        const double d = std::log1p(q[i]) - std::log1p(q_hat[i]);
        acc += d * d;
    }
    return acc / static_cast<double>(q.size());
}

Var total_loss(Variant variant, Var link, Var disent) {
    if (variant == Variant::GoodLc || !disent.valid()) {
        return link;
    }
    return add(link, disent);
}

double total_loss(Variant variant, double link, double disent) {
    return variant == Variant::GoodLc ? link : link + disent;
}

// ---- negative sampling --------------------------------------------------------

NegStrategy NegStrategy::pure(NegKind kind) {
    NegStrategy s;
    s.ratios = {0.0, 0.0, 0.0};
    s.ratios[static_cast<std::size_t>(kind)] = 1.0;
    return s;
}

NegStrategy NegStrategy::mixture(double by_weight, double uniform_gt, double non_edge) {
    NegStrategy s;
    s.ratios = {by_weight, uniform_gt, non_edge};
    s.validate();
    return s;
}

NegStrategy NegStrategy::default_for(bool has_ground_truth_negatives) {
    return has_ground_truth_negatives ? mixture(0.5, 0.0, 0.5) : pure(NegKind::UniformNonEdge);
}

void NegStrategy::validate() const {
    double total = 0.0;
    for (double r : ratios) {
        if (!(r >= 0.0)) {
            throw StrategyError("negative sampling ratios must be nonnegative");
        }
        total += r;
    }
    if (std::abs(total - 1.0) > 1e-9) {
        throw StrategyError("negative sampling ratios must sum to 1, got " + std::to_string(total));
    }
}

namespace {

constexpr const char* kKindNames[] = {"by_weight", "ground_truth", "non_edge"};

std::string format_ratio(double r) {
    std::ostringstream os;
    os << r;
    return os.str();
}

} // namespace

std::string NegStrategy::describe() const {
    for (std::size_t i = 0; i < 3; ++i) {
        if (ratios[i] == 1.0) {
            return kKindNames[i];
        }
    }
    return "mixture:" + format_ratio(ratios[0]) + "," + format_ratio(ratios[1]) + "," + format_ratio(ratios[2]);
}

NegStrategy NegStrategy::parse(const std::string& text) {
    for (std::size_t i = 0; i < 3; ++i) {
        if (text == kKindNames[i]) {
            return pure(static_cast<NegKind>(i));
        }
    }
    const std::string prefix = "mixture:";
    if (text.rfind(prefix, 0) == 0) {
        std::stringstream ss(text.substr(prefix.size()));
        std::string item;
        std::vector<double> r;
        while (std::getline(ss, item, ',')) {
            try {
                std::size_t used = 0;
                r.push_back(std::stod(item, &used));
                if (used != item.size()) {
                    throw std::invalid_argument(item);
                }
            } catch (const std::exception&) {
                throw ConfigError("malformed negative sampling ratio '" + item + "'");
            }
        }
        if (r.size() != 3) {
            throw ConfigError("mixture negative sampling needs 3 ratios (by_weight, ground_truth, non_edge)");
        }
        try {
            return mixture(r[0], r[1], r[2]);
        } catch (const StrategyError& e) {
            throw ConfigError(e.what());
        }
    }
    throw ConfigError("unknown negative sampling strategy '" + text +
                      "' (expected by_weight, ground_truth, non_edge or mixture:a,b,c)");
}

std::array<std::size_t, 3> allocate_counts(const NegStrategy& strategy, std::size_t k) {
    strategy.validate();
    std::array<std::size_t, 3> counts{};
    std::array<double, 3> remainder{};
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < 3; ++i) {
        const double exact = strategy.ratios[i] * static_cast<double>(k);
        counts[i] = static_cast<std::size_t>(std::floor(exact));
        remainder[i] = exact - static_cast<double>(counts[i]);
        assigned += counts[i];
    }
    std::array<std::size_t, 3> order{0, 1, 2};
    // stable: equal remainders go to the earlier kind
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
    for (std::size_t i = 0; assigned < k; ++i) {
        const std::size_t kind = order[i % 3];
        if (strategy.ratios[kind] > 0.0) {
            ++counts[kind];
            ++assigned;
        }
    }
    return counts;
}

namespace {

std::vector<NodePair> draw_by_weight(const EdgeSet& es, std::size_t k, Rng& rng) {
    const std::vector<Edge> negs = [&] {
        std::vector<Edge> out;
        for (const Edge& e : es.canonical_edges()) {
            if (e.label == EdgeLabel::Negative) {
                out.push_back(e);
            }
        }
        return out;
    }();
    std::vector<double> cumulative;
    double total = 0.0;
    for (const Edge& e : negs) {
        total += e.weight;
        cumulative.push_back(total);
    }
    if (negs.empty() || !(total > 0.0)) {
        throw StrategyError("by_weight negative sampling needs ground-truth negatives with positive weight in context " +
                            context_token(es.context()) + ", time " + time_token(es.time()));
    }
    std::vector<NodePair> out;
    out.reserve(k);
    for (std::size_t i = 0; i < k; ++i) {
        const double u = uniform01(rng) * total;
        auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
        const std::size_t idx = std::min<std::size_t>(it - cumulative.begin(), negs.size() - 1);
        out.emplace_back(negs[idx].src, negs[idx].dst);
    }
    return out;
}

std::vector<NodePair> draw_ground_truth_uniform(const EdgeSet& es, std::size_t k, Rng& rng) {
    std::vector<NodePair> negs = es.canonical_pairs(EdgeLabel::Negative);
    if (negs.empty()) {
        throw StrategyError("ground_truth negative sampling needs ground-truth negatives in context " +
                            context_token(es.context()) + ", time " + time_token(es.time()));
    }
    std::vector<NodePair> out;
    out.reserve(k);
    while (out.size() < k) {
        // Fisher-Yates; each pass uses every negative once
        for (std::size_t i = negs.size(); i > 1; --i) {
            std::swap(negs[i - 1], negs[uniform_index(rng, i)]);
        }
        for (std::size_t i = 0; i < negs.size() && out.size() < k; ++i) {
            out.push_back(negs[i]);
        }
    }
    return out;
}

std::vector<NodePair> draw_non_edges(const EdgeSet& es, std::size_t n, std::size_t k, Rng& rng) {
    std::vector<NodePair> out;
    out.reserve(k);
    std::set<NodePair> seen;
    std::size_t rejections = 0;
    const std::size_t budget = 100 * std::max<std::size_t>(k, 1);
    while (out.size() < k) {
        NodeId u = uniform_index(rng, n);
        NodeId v = uniform_index(rng, n);
        if (u > v) {
            std::swap(u, v);
        }
        if (u == v || es.contains(u, v, EdgeLabel::Positive) || !seen.insert({u, v}).second) {
            if (++rejections > budget) {
                throw SamplingError("graph too dense to draw " + std::to_string(k) + " distinct non-edges in context " +
                                    context_token(es.context()) + ", time " + time_token(es.time()));
            }
            continue;
        }
        out.emplace_back(u, v);
    }
    return out;
}

} // namespace

std::vector<NodePair> sample_negatives(const MultiRelGraph& graph, ContextId context, TimeStep time, std::size_t k,
                                       const NegStrategy& strategy, Rng& rng) {
    if (k == 0) {
        throw ArgumentError("sample_negatives needs k >= 1");
    }
    const EdgeSet& es = graph.edges(context, time);
    const auto counts = allocate_counts(strategy, k);
    std::vector<NodePair> out;
    out.reserve(k);
    if (counts[0] > 0) {
        const auto part = draw_by_weight(es, counts[0], rng);
        out.insert(out.end(), part.begin(), part.end());
    }
    if (counts[1] > 0) {
        const auto part = draw_ground_truth_uniform(es, counts[1], rng);
        out.insert(out.end(), part.begin(), part.end());
    }
    if (counts[2] > 0) {
        const auto part = draw_non_edges(es, graph.num_nodes(), counts[2], rng);
        out.insert(out.end(), part.begin(), part.end());
    }
    return out;
}

} // namespace good
