#pragma once

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "good/graph.hpp"
#include "good/rng.hpp"

namespace testutil {

inline good::Matrix random_matrix(std::size_t r, std::size_t c, good::Rng& rng, double scale = 1.0) {
    good::Matrix m(r, c);
    for (double& v : m.data()) {
        v = scale * good::standard_normal(rng);
    }
    return m;
}

inline good::EdgeSet path_graph(good::ContextId c = 0, good::TimeStep t = good::TimeStep(0)) {
    good::EdgeSet es(c, t);
    es.set_edge(0, 1, 1.0, good::EdgeLabel::Positive);
    es.set_edge(1, 2, 1.0, good::EdgeLabel::Positive);
    return es;
}

// Erdos-Renyi edge set with ground-truth negatives among the non-edges.
inline good::EdgeSet random_edges(good::ContextId c, good::TimeStep t, std::size_t n, double p, good::Rng& rng) {
    good::EdgeSet es(c, t);
    for (good::NodeId u = 0; u < n; ++u) {
        for (good::NodeId v = u + 1; v < n; ++v) {
            const double r = good::uniform01(rng);
            if (r < p) {
                es.set_edge(u, v, 1.0, good::EdgeLabel::Positive);
            } else if (r < p * 1.3) {
                es.set_edge(u, v, 1.0 + static_cast<double>(good::uniform_index(rng, 3)), good::EdgeLabel::Negative);
            }
        }
    }
    return es;
}

// `known` time-dependent known contexts plus one target, all random.
inline good::MultiRelGraph random_graph(std::size_t n, std::size_t known, std::size_t steps, std::size_t feature_dim,
                                        std::uint64_t seed, double p = 0.15) {
    good::Rng rng(seed);
    good::GraphMeta meta;
    meta.num_nodes = n;
    meta.num_contexts = known + 1;
    meta.num_known_contexts = known;
    meta.num_steps = steps;
    std::vector<good::EdgeSet> sets;
    for (good::ContextId c = 0; c <= known; ++c) {
        for (std::size_t t = 0; t < steps; ++t) {
            sets.push_back(random_edges(c, good::TimeStep(t), n, p, rng));
        }
    }
    return good::MultiRelGraph(meta, std::move(sets),
                               good::FeatureMatrix::loaded(random_matrix(n, feature_dim, rng)));
}

inline std::filesystem::path temp_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "good_unit_tests" / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

} // namespace testutil
