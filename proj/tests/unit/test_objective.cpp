#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <set>

#include "good/errors.hpp"
#include "good/objective.hpp"
#include "helpers.hpp"

using namespace good;

namespace {

MultiRelGraph graph_with(EdgeSet es, std::size_t n) {
    GraphMeta meta;
    meta.num_nodes = n;
    meta.num_contexts = 2;
    meta.num_known_contexts = 1;
    meta.num_steps = 2;
    return MultiRelGraph(meta, {std::move(es)}, FeatureMatrix::learnable(2));
}

} // namespace

TEST_CASE("link_loss closed forms") {
    const std::vector<std::vector<double>> y{{1, 0, 1, 0}};
    SUBCASE("perfect predictions") {
        CHECK(link_loss(std::vector<std::vector<double>>{{1, 0, 1, 0}}, y) < 1e-10);
    }
    SUBCASE("uniform one half is ln 2") {
        CHECK(std::abs(link_loss(std::vector<std::vector<double>>{{0.5, 0.5, 0.5, 0.5}}, y) - std::log(2.0)) < 1e-9);
    }
    SUBCASE("hand computed pair") {
        const double expected = -(std::log(0.9) + std::log(0.8)) / 2.0;
        const double got = link_loss(std::vector<std::vector<double>>{{0.9, 0.2}},
                                     std::vector<std::vector<double>>{{1, 0}});
        CHECK(std::abs(got - expected) < 1e-15);
        CHECK(std::abs(got - 0.164252) < 1e-6);
    }
    SUBCASE("averaged over target contexts") {
        const double a = link_loss(std::vector<std::vector<double>>{{0.9, 0.2}}, std::vector<std::vector<double>>{{1, 0}});
        const double b = link_loss(std::vector<std::vector<double>>{{0.5, 0.5}}, std::vector<std::vector<double>>{{1, 0}});
        const double both = link_loss(std::vector<std::vector<double>>{{0.9, 0.2}, {0.5, 0.5}},
                                      std::vector<std::vector<double>>{{1, 0}, {1, 0}});
        CHECK(std::abs(both - (a + b) / 2.0) < 1e-15);
    }
    SUBCASE("empty batches and bad labels are errors") {
        CHECK_THROWS_AS(link_loss(std::vector<std::vector<double>>{{}}, std::vector<std::vector<double>>{{}}),
                        ArgumentError);
        CHECK_THROWS_AS(link_loss(std::vector<std::vector<double>>{{0.5}}, std::vector<std::vector<double>>{{0.3}}),
                        ArgumentError);
    }
    SUBCASE("saturated scores stay finite") {
        const double l = link_loss(std::vector<std::vector<double>>{{0.0, 1.0}}, std::vector<std::vector<double>>{{1, 0}});
        CHECK(std::isfinite(l));
        // 1 - kScoreClamp rounds, so the negative side differs from -log(kScoreClamp) by ~1e-4
        CHECK(std::abs(l + std::log(kScoreClamp)) < 1e-4);
    }
}

TEST_CASE("link_loss is order invariant (property)") {
    Rng rng(1);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t contexts = 1 + uniform_index(rng, 3);
        std::vector<std::vector<double>> s(contexts);
        std::vector<std::vector<double>> y(contexts);
        for (std::size_t c = 0; c < contexts; ++c) {
            const std::size_t m = 1 + uniform_index(rng, 10);
            for (std::size_t i = 0; i < m; ++i) {
                s[c].push_back(uniform01(rng));
                y[c].push_back(static_cast<double>(uniform_index(rng, 2)));
            }
        }
        const double base = link_loss(s, y);
        CHECK(base >= 0.0);
        auto s2 = s;
        auto y2 = y;
        for (std::size_t c = 0; c < contexts; ++c) {
            for (std::size_t i = s2[c].size(); i > 1; --i) {
                const std::size_t j = uniform_index(rng, i);
                std::swap(s2[c][i - 1], s2[c][j]);
                std::swap(y2[c][i - 1], y2[c][j]);
            }
        }
        std::reverse(s2.begin(), s2.end());
        std::reverse(y2.begin(), y2.end());
        CHECK(std::abs(link_loss(s2, y2) - base) < 1e-12);
    }
}

TEST_CASE("disentangle_loss closed forms") {
    const std::vector<double> q{0.2, 0.5, 0.3};
    CHECK(disentangle_loss(q, q) == 0.0);
    const double ln2sq = std::log(2.0) * std::log(2.0);
    CHECK(std::abs(disentangle_loss(std::vector<double>{1, 0}, std::vector<double>{0, 1}) - ln2sq) < 1e-9);
    CHECK(std::abs(ln2sq - 0.480453) < 1e-6);
    CHECK(disentangle_loss(std::vector<double>{1.0}, std::vector<double>{1.0}) == 0.0);
    CHECK_THROWS_AS(disentangle_loss(std::vector<double>{1.0}, std::vector<double>{0.5, 0.5}), ArgumentError);

    Tape tape;
    Var q_hat = tape.constant(Matrix::from_rows({{0.0, 1.0}}));
    CHECK(std::abs(disentangle_loss(std::vector<double>{1, 0}, q_hat).value()(0, 0) - ln2sq) < 1e-12);
}

TEST_CASE("disentangle_loss is symmetric and vanishes only at equality (property)") {
    Rng rng(2);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t c = 1 + uniform_index(rng, 5);
        std::vector<double> a(c);
        std::vector<double> b(c);
        for (std::size_t i = 0; i < c; ++i) {
            a[i] = uniform01(rng);
            b[i] = uniform01(rng);
        }
        const double a_sum = std::accumulate(a.begin(), a.end(), 0.0);
        const double b_sum = std::accumulate(b.begin(), b.end(), 0.0);
        for (std::size_t i = 0; i < c; ++i) {
            a[i] /= a_sum;
            b[i] /= b_sum;
        }
        CHECK(disentangle_loss(a, b) == disentangle_loss(b, a));
        CHECK(disentangle_loss(a, a) == 0.0);
        if (a != b) {
            CHECK(disentangle_loss(a, b) > 0.0);
        }
    }
}

TEST_CASE("total_loss") {
    CHECK(total_loss(Variant::Good, 0.5, 0.1) == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(total_loss(Variant::GoodLcPlus, 0.5, 0.1) == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(total_loss(Variant::GoodLc, 0.5, 123.0) == 0.5);
    CHECK(total_loss(Variant::Good, 0.0, 0.0) == 0.0);
    Rng rng(3);
    for (int i = 0; i < 50; ++i) {
        const double d = 10.0 * standard_normal(rng);
        CHECK(total_loss(Variant::GoodLc, 0.25, d) == 0.25);
    }
    Tape tape;
    Var link = tape.constant(Matrix(1, 1, 0.5));
    Var dis = tape.constant(Matrix(1, 1, 0.1));
    CHECK(total_loss(Variant::GoodLc, link, dis).value()(0, 0) == 0.5);
    CHECK(std::abs(total_loss(Variant::Good, link, dis).value()(0, 0) - 0.6) < 1e-15);
}

TEST_CASE("variant names") {
    for (Variant v : {Variant::Good, Variant::GoodLc, Variant::GoodLcPlus}) {
        CHECK(parse_variant(to_string(v)) == v);
    }
    CHECK(parse_variant("good_lc+") == Variant::GoodLcPlus);
    CHECK_THROWS_AS(parse_variant("GOOD_X"), ConfigError);
}

TEST_CASE("negative sampling examples") {
    EdgeSet es(0, TimeStep(0));
    es.set_edge(0, 1, 1.0, EdgeLabel::Positive);
    es.set_edge(1, 2, 1.0, EdgeLabel::Positive);
    es.set_edge(0, 3, 3.0, EdgeLabel::Negative);
    es.set_edge(2, 4, 1.0, EdgeLabel::Negative);
    const MultiRelGraph g = graph_with(es, 6);
    Rng rng(4);

    SUBCASE("uniform ground truth with exactly k negatives returns that set") {
        auto out = sample_negatives(g, 0, TimeStep(0), 2, NegStrategy::pure(NegKind::UniformGroundTruthNeg), rng);
        std::sort(out.begin(), out.end());
        CHECK(out == std::vector<NodePair>{{0, 3}, {2, 4}});
    }
    SUBCASE("by weight follows the weights (Monte Carlo)") {
        const auto out = sample_negatives(g, 0, TimeStep(0), 10000, NegStrategy::pure(NegKind::MultinomialByWeight), rng);
        const auto first = std::count(out.begin(), out.end(), NodePair{0, 3});
        CHECK(std::abs(static_cast<double>(first) / 10000.0 - 0.75) < 0.02);
    }
    SUBCASE("no ground-truth negatives is a strategy error") {
        const MultiRelGraph plain = graph_with(testutil::path_graph(), 4);
        CHECK_THROWS_AS(sample_negatives(plain, 0, TimeStep(0), 1, NegStrategy::pure(NegKind::MultinomialByWeight), rng),
                        StrategyError);
        CHECK_THROWS_AS(
            sample_negatives(plain, 0, TimeStep(0), 1, NegStrategy::pure(NegKind::UniformGroundTruthNeg), rng),
            StrategyError);
    }
    SUBCASE("dense graph exhausts the rejection budget") {
        EdgeSet k4(0, TimeStep(0));
        for (NodeId u = 0; u < 4; ++u) {
            for (NodeId v = u + 1; v < 4; ++v) {
                k4.set_edge(u, v, 1.0, EdgeLabel::Positive);
            }
        }
        const MultiRelGraph full = graph_with(k4, 4);
        CHECK_THROWS_AS(sample_negatives(full, 0, TimeStep(0), 1, NegStrategy::pure(NegKind::UniformNonEdge), rng),
                        SamplingError);
    }
    SUBCASE("k must be positive") {
        CHECK_THROWS_AS(sample_negatives(g, 0, TimeStep(0), 0, NegStrategy::pure(NegKind::UniformNonEdge), rng),
                        ArgumentError);
    }
}

TEST_CASE("negative samples never hit positives and are deterministic (property)") {
    Rng gen(5);
    const std::vector<NegStrategy> strategies{
        NegStrategy::pure(NegKind::MultinomialByWeight), NegStrategy::pure(NegKind::UniformGroundTruthNeg),
        NegStrategy::pure(NegKind::UniformNonEdge), NegStrategy::mixture(0.5, 0.2, 0.3),
        NegStrategy::default_for(true)};
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 8 + uniform_index(gen, 20);
        EdgeSet es = testutil::random_edges(0, TimeStep(0), n, 0.2, gen);
        es.set_edge(0, n - 1, 2.0, EdgeLabel::Negative);
        const MultiRelGraph g = graph_with(es, n);
        const std::size_t k = 1 + uniform_index(gen, 15);
        for (const NegStrategy& s : strategies) {
            Rng a(trial);
            Rng b(trial);
            const auto out = sample_negatives(g, 0, TimeStep(0), k, s, a);
            CHECK(out.size() == k);
            CHECK(out == sample_negatives(g, 0, TimeStep(0), k, s, b));
            for (const auto& [u, v] : out) {
                CHECK(u < v);
                CHECK_FALSE(es.contains(u, v, EdgeLabel::Positive));
            }
        }
        Rng c(trial);
        const auto distinct = sample_negatives(g, 0, TimeStep(0), k, NegStrategy::pure(NegKind::UniformNonEdge), c);
        CHECK(std::set<NodePair>(distinct.begin(), distinct.end()).size() == k);
    }
}

TEST_CASE("mixture allocation uses largest remainders") {
    CHECK(allocate_counts(NegStrategy::mixture(0.5, 0.0, 0.5), 7) == std::array<std::size_t, 3>{4, 0, 3});
    CHECK(allocate_counts(NegStrategy::mixture(0.2, 0.3, 0.5), 10) == std::array<std::size_t, 3>{2, 3, 5});
    CHECK(allocate_counts(NegStrategy::mixture(1.0 / 3, 1.0 / 3, 1.0 / 3), 4) == std::array<std::size_t, 3>{2, 1, 1});
    CHECK(allocate_counts(NegStrategy::mixture(0.0, 0.0, 1.0), 3) == std::array<std::size_t, 3>{0, 0, 3});
    Rng rng(6);
    for (int trial = 0; trial < 200; ++trial) {
        const double a = uniform01(rng);
        const double b = (1.0 - a) * uniform01(rng);
        const NegStrategy s = NegStrategy::mixture(a, b, 1.0 - a - b);
        const std::size_t k = 1 + uniform_index(rng, 50);
        const auto counts = allocate_counts(s, k);
        CHECK(counts[0] + counts[1] + counts[2] == k);
        for (std::size_t i = 0; i < 3; ++i) {
            CHECK(std::abs(static_cast<double>(counts[i]) - s.ratios[i] * static_cast<double>(k)) < 1.0);
        }
    }
    CHECK_THROWS_AS(NegStrategy::mixture(0.5, 0.5, 0.5), StrategyError);
    CHECK_THROWS_AS(NegStrategy::mixture(1.5, -0.5, 0.0), StrategyError);
}

TEST_CASE("strategy text form") {
    CHECK(NegStrategy::parse("non_edge").ratios == std::array<double, 3>{0, 0, 1});
    CHECK(NegStrategy::parse("mixture:0.5,0,0.5").describe() == "mixture:0.5,0,0.5");
    CHECK(NegStrategy::parse(NegStrategy::pure(NegKind::MultinomialByWeight).describe()).ratios[0] == 1.0);
    CHECK_THROWS_AS(NegStrategy::parse("mixture:0.5,0.5"), ConfigError);
    CHECK_THROWS_AS(NegStrategy::parse("mixture:0.9,0.5,0"), ConfigError);
    CHECK_THROWS_AS(NegStrategy::parse("random"), ConfigError);
}
