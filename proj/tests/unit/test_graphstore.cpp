#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "good/errors.hpp"
#include "good/graph.hpp"
#include "good/rng.hpp"

using namespace good;
namespace fs = std::filesystem;

namespace {

GraphMeta small_meta(std::size_t n = 4) {
    GraphMeta m;
    m.num_nodes = n;
    m.num_contexts = 2;
    m.num_known_contexts = 1;
    m.num_steps = 3;
    return m;
}

fs::path write_temp(const std::string& name, const std::string& content) {
    const fs::path dir = fs::temp_directory_path() / "good_graphstore_tests";
    fs::create_directories(dir);
    const fs::path p = dir / name;
    std::ofstream(p) << content;
    return p;
}

EdgeSet path_graph() {
    EdgeSet es(0, TimeStep(0));
    es.set_edge(0, 1, 1.0, EdgeLabel::Positive);
    es.set_edge(1, 2, 1.0, EdgeLabel::Positive);
    return es;
}

// Spectral radius of a symmetric matrix by power iteration.
double spectral_radius(const SparseMatrix& a) {
    Matrix v(a.n, 1, 1.0);
    Rng rng(3);
    for (double& x : v.data()) {
        x = 0.5 + uniform01(rng);
    }
    double lambda = 0.0;
    for (int it = 0; it < 2000; ++it) {
        Matrix w = sparse_dense_product(a, v);
        double norm = 0.0;
        for (double x : w.data()) {
            norm += x * x;
        }
        norm = std::sqrt(norm);
        if (norm == 0.0) {
            return 0.0;
        }
        for (double& x : w.data()) {
            x /= norm;
        }
        lambda = norm;
        v = w;
    }
    return lambda;
}

} // namespace

TEST_CASE("load_edges worked examples") {
    const GraphMeta meta = small_meta();
    SUBCASE("empty file") {
        const auto p = write_temp("empty.csv", "src,dst,context,time,weight,label\n");
        CHECK(load_edges(p, meta).empty());
    }
    SUBCASE("mirrored rows are one logical edge") {
        const auto p = write_temp("mirror.csv",
                                  "src,dst,context,time,weight,label\n"
                                  "0,1,c0,t0,1.0,pos\n"
                                  "1,0,c0,t0,1.0,pos\n");
        const auto sets = load_edges(p, meta);
        REQUIRE(sets.size() == 1);
        CHECK(sets[0].logical_size() == 1);
        const auto directed = sets[0].directed_edges();
        REQUIRE(directed.size() == 2);
        CHECK(directed[0].weight == 1.0);
        CHECK(directed[1].weight == 1.0);
        CHECK(directed[0].src == directed[1].dst);
    }
    SUBCASE("duplicate rows sum their weights") {
        const auto p = write_temp("dup.csv",
                                  "src,dst,context,time,weight,label\n"
                                  "0,1,c0,t0,1.0,pos\n"
                                  "0,1,c0,t0,2.0,pos\n");
        const auto sets = load_edges(p, meta);
        REQUIRE(sets.size() == 1);
        CHECK(sets[0].find(0, 1)->weight == 3.0);
        CHECK(sets[0].find(1, 0)->weight == 3.0);
    }
}

TEST_CASE("load_edges errors carry line numbers") {
    const GraphMeta meta = small_meta();
    auto expect_parse = [&](const std::string& body, const std::string& needle) {
        const auto p = write_temp("bad.csv", "src,dst,context,time,weight,label\n" + body);
        try {
            (void)load_edges(p, meta);
            FAIL("expected failure");
        } catch (const ParseError& e) {
            CHECK(std::string(e.what()).find(needle) != std::string::npos);
        }
    };
    expect_parse("0,1,c0,t0,1,pos\n0,1,c7,t0,1,pos\n", "line 3");
    expect_parse("0,1,c0,t9,1,pos\n", "line 2");
    expect_parse("0,9,c0,t0,1,pos\n", "unknown node");
    expect_parse("0,1,c0,static,1,pos\n", "static");

    const auto neg = write_temp("neg.csv", "src,dst,context,time,weight,label\n0,1,c0,t0,-1,pos\n");
    CHECK_THROWS_AS(load_edges(neg, meta), ValidationError);
    CHECK_THROWS_AS(load_edges(fs::path("/nonexistent/edges.csv"), meta), IoError);
}

TEST_CASE("build_snapshot worked examples") {
    SUBCASE("isolated nodes give the identity") {
        const Snapshot s = build_snapshot(EdgeSet(0, TimeStep(0)), 3);
        CHECK(s.adj_norm.to_dense() == Matrix::identity(3));
        CHECK(s.degree == std::vector<std::size_t>{0, 0, 0});
    }
    SUBCASE("path graph, hand computed with self loops") {
        const Snapshot s = build_snapshot(path_graph(), 3);
        const Matrix a = s.adj_norm.to_dense();
        CHECK(std::abs(a(0, 0) - 0.5) < 1e-15);
        CHECK(std::abs(a(1, 1) - 1.0 / 3.0) < 1e-15);
        CHECK(std::abs(a(0, 1) - 1.0 / std::sqrt(6.0)) < 1e-15);
        CHECK(std::abs(a(0, 1) - 0.40825) < 1e-5);
        CHECK(a(0, 2) == 0.0);
        CHECK(s.degree == std::vector<std::size_t>{1, 2, 1});
    }
    SUBCASE("complete graph K3") {
        EdgeSet es(0, TimeStep(0));
        es.set_edge(0, 1, 1.0, EdgeLabel::Positive);
        es.set_edge(0, 2, 1.0, EdgeLabel::Positive);
        es.set_edge(1, 2, 1.0, EdgeLabel::Positive);
        const Matrix a = build_snapshot(es, 3).adj_norm.to_dense();
        for (double v : a.data()) {
            CHECK(std::abs(v - 1.0 / 3.0) < 1e-15);
        }
    }
    SUBCASE("negative edges do not enter the adjacency") {
        EdgeSet es = path_graph();
        es.set_edge(0, 2, 4.0, EdgeLabel::Negative);
        const Snapshot s = build_snapshot(es, 3);
        CHECK(s.adj_norm.at(0, 2) == 0.0);
        CHECK(s.degree[0] == 1);
    }
    SUBCASE("out of range node") {
        CHECK_THROWS_AS(build_snapshot(path_graph(), 2), ValidationError);
    }
}

TEST_CASE("snapshot invariants on random graphs (property)") {
    Rng rng(77);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t n = 2 + uniform_index(rng, 25);
        EdgeSet es(0, TimeStep(0));
        for (NodeId u = 0; u < n; ++u) {
            for (NodeId v = u + 1; v < n; ++v) {
                if (uniform01(rng) < 0.2) {
                    es.set_edge(u, v, 1.0 + uniform01(rng), EdgeLabel::Positive);
                }
            }
        }
        const Snapshot s = build_snapshot(es, n);
        const Matrix a = s.adj_norm.to_dense();
        for (std::size_t i = 0; i < n; ++i) {
            double row_sum = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                CHECK(std::abs(a(i, j) - a(j, i)) < 1e-12);
                row_sum += a(i, j);
            }
            CHECK(row_sum > 0.0);
            CHECK(row_sum <= std::sqrt(static_cast<double>(s.degree[i] + 1)) + 1e-12);
            if (s.degree[i] == 0) {
                for (std::size_t j = 0; j < n; ++j) {
                    CHECK(a(i, j) == (i == j ? 1.0 : 0.0));
                }
            }
        }
        CHECK(spectral_radius(s.adj_norm) <= 1.0 + 1e-9);
        // deterministic construction
        const Snapshot again = build_snapshot(es, n);
        CHECK(again.adj_norm.values == s.adj_norm.values);
        CHECK(again.adj_norm.col_idx == s.adj_norm.col_idx);
        for (const Edge& e : es.directed_edges()) {
            CHECK(es.find(e.dst, e.src)->weight == e.weight);
        }
    }
}

TEST_CASE("rolling_splits") {
    SUBCASE("T=6 window=3 reproduces the seasons protocol") {
        // one-based seasons (1,2,3)->4, (2,3,4)->5, (3,4,5)->6
        const SplitSpec s = rolling_splits(6, 3);
        CHECK(s.train.inputs == std::vector<std::size_t>{0, 1, 2});
        CHECK(s.train.target == 3);
        CHECK(s.validation.inputs == std::vector<std::size_t>{1, 2, 3});
        CHECK(s.validation.target == 4);
        CHECK(s.test.inputs == std::vector<std::size_t>{2, 3, 4});
        CHECK(s.test.target == 5);
    }
    SUBCASE("T=5 window=2") {
        const SplitSpec s = rolling_splits(5, 2);
        CHECK(s.train.inputs == std::vector<std::size_t>{0, 1});
        CHECK(s.train.target == 2);
        CHECK(s.test.inputs == std::vector<std::size_t>{2, 3});
        CHECK(s.test.target == 4);
    }
    SUBCASE("too few steps") {
        CHECK_THROWS_AS(rolling_splits(4, 3), ArgumentError);
    }
    SUBCASE("targets never leak into inputs") {
        for (std::size_t w = 1; w < 6; ++w) {
            for (std::size_t t = w + 3; t < w + 8; ++t) {
                const SplitSpec s = rolling_splits(t, w);
                for (const Window* win : {&s.train, &s.validation, &s.test}) {
                    CHECK(win->target == win->inputs.back() + 1);
                    for (std::size_t step : win->inputs) {
                        CHECK(step != win->target);
                    }
                }
            }
        }
    }
}

TEST_CASE("positive_edges") {
    GraphMeta meta = small_meta(4);
    EdgeSet k3(1, TimeStep(2));
    k3.set_edge(0, 1, 1.0, EdgeLabel::Positive);
    k3.set_edge(2, 0, 1.0, EdgeLabel::Positive);
    k3.set_edge(1, 2, 1.0, EdgeLabel::Positive);
    EdgeSet mixed(0, TimeStep(1));
    mixed.set_edge(0, 1, 1.0, EdgeLabel::Positive);
    mixed.set_edge(1, 3, 1.0, EdgeLabel::Positive);
    mixed.set_edge(2, 3, 1.0, EdgeLabel::Negative);
    MultiRelGraph g(meta, {k3, mixed}, FeatureMatrix::learnable(4));

    CHECK(positive_edges(g, 0, TimeStep(0)).empty());
    const auto pairs = positive_edges(g, 1, TimeStep(2));
    CHECK(pairs.size() == 3);
    for (const auto& [u, v] : pairs) {
        CHECK(u < v);
    }
    CHECK(positive_edges(g, 0, TimeStep(1)).size() == 2);
    CHECK_THROWS_AS(positive_edges(g, 0, std::nullopt), LookupError);
}

TEST_CASE("graph validation and static contexts") {
    GraphMeta meta = small_meta(3);
    meta.time_dependent = {true, false};
    EdgeSet st(1, std::nullopt);
    st.set_edge(0, 2, 1.0, EdgeLabel::Positive);
    MultiRelGraph g(meta, {st}, FeatureMatrix::learnable(2));
    CHECK(&g.snapshot_at(1, 0) == &g.snapshot_at(1, 2));
    CHECK(g.snapshot_at(1, 1).degree[0] == 1);

    GraphMeta bad = meta;
    bad.num_known_contexts = 2;
    CHECK_THROWS_AS(MultiRelGraph(bad, {}, FeatureMatrix::learnable(2)), ValidationError);
    CHECK_THROWS_AS(MultiRelGraph(meta, {EdgeSet(1, TimeStep(0))}, FeatureMatrix::learnable(2)),
                    ValidationError);
    CHECK_THROWS_AS(MultiRelGraph(meta, {}, FeatureMatrix::loaded(Matrix(2, 2))), ValidationError);

    EdgeSet self(0, TimeStep(0));
    CHECK_THROWS_AS(self.set_edge(1, 1, 1.0, EdgeLabel::Positive), ValidationError);
}

TEST_CASE("feature files") {
    Matrix values = Matrix::from_rows({{0.5, -1.25}, {3.0, 1e-3}, {0.1, 0.2}});
    const fs::path dir = fs::temp_directory_path() / "good_graphstore_tests";
    fs::create_directories(dir);
    write_features(dir / "features.csv", values);
    const FeatureMatrix f = load_features(dir / "features.csv", 3);
    CHECK(f.source == FeatureSource::Loaded);
    CHECK(f.values == values);

    const FeatureMatrix l = resolve_features("learnable:8", dir, 3);
    CHECK(l.source == FeatureSource::Learnable);
    CHECK(l.dim == 8);
    CHECK_THROWS_AS(resolve_features("learnable:x", dir, 3), ParseError);
    CHECK_THROWS_AS(load_features(dir / "features.csv", 4), ValidationError);
}
