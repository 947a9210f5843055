#include "good/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <queue>

#include "good/errors.hpp"
#include "good/rng.hpp"

namespace good {

using nlohmann::json;

// ---- config -----------------------------------------------------------------

void SynthConfig::validate() const {
    auto fail = [](const std::string& key, const std::string& why) {
        throw ArgumentError(key + ": " + why);
    };
    if (num_nodes < 3) {
        fail("num_nodes", "need at least 3 nodes");
    }
    if (latent_dim == 0) {
        fail("latent_dim", "must be positive");
    }
    if (feature_dim == 0) {
        fail("feature_dim", "must be positive");
    }
    if (num_known_contexts == 0) {
        fail("num_known_contexts", "need at least one known context");
    }
    if (num_target_contexts == 0) {
        fail("num_target_contexts", "out-of-domain prediction needs at least one target context");
    }
    if (num_steps < 2) {
        fail("num_steps", "need at least 2 steps");
    }
    if (target_mixture.size() != num_known_contexts) {
        fail("target_mixture", "length must equal num_known_contexts");
    }
    double total = 0.0;
    for (double q : target_mixture) {
        if (!(q >= 0.0)) {
            fail("target_mixture", "entries must be nonnegative");
        }
        total += q;
    }
    if (std::abs(total - 1.0) > 1e-9) {
        fail("target_mixture", "entries must sum to 1");
    }
    if (!(edge_density > 0.0) || !(edge_density < 1.0)) {
        fail("edge_density", "must lie in (0, 1)");
    }
    if (!(target_density_scale > 0.0) || edge_density * target_density_scale >= 1.0) {
        fail("target_density_scale", "target density must lie in (0, 1)");
    }
    const double pairs = 0.5 * static_cast<double>(num_nodes) * static_cast<double>(num_nodes - 1);
    if (edge_density * pairs < static_cast<double>(num_nodes)) {
        fail("edge_density", "expected edges per snapshot must be at least num_nodes");
    }
    if (!(temporal_drift >= 0.0)) {
        fail("temporal_drift", "must be nonnegative");
    }
    if (!(noise >= 0.0)) {
        fail("noise", "must be nonnegative");
    }
    if (!(feature_noise >= 0.0)) {
        fail("feature_noise", "must be nonnegative");
    }
    if (!(logit_scale > 0.0)) {
        fail("logit_scale", "must be positive");
    }
    if (!(negative_ratio >= 0.0)) {
        fail("negative_ratio", "must be nonnegative");
    }
}

json to_json(const SynthConfig& cfg) {
    return json{
        {"num_nodes", cfg.num_nodes},
        {"latent_dim", cfg.latent_dim},
        {"feature_dim", cfg.feature_dim},
        {"features", cfg.features == SynthFeatures::Latent ? "latent" : "random"},
        {"feature_noise", cfg.feature_noise},
        {"num_known_contexts", cfg.num_known_contexts},
        {"num_target_contexts", cfg.num_target_contexts},
        {"num_steps", cfg.num_steps},
        {"target_mixture", cfg.target_mixture},
        {"edge_density", cfg.edge_density},
        {"target_density_scale", cfg.target_density_scale},
        {"temporal_drift", cfg.temporal_drift},
        {"noise", cfg.noise},
        {"logit_scale", cfg.logit_scale},
        {"negative_ratio", cfg.negative_ratio},
        {"seed", cfg.seed},
    };
}

SynthConfig synth_config_from_json(const json& j) {
    SynthConfig cfg;
    cfg.num_nodes = j.at("num_nodes").get<std::size_t>();
    cfg.latent_dim = j.at("latent_dim").get<std::size_t>();
    cfg.feature_dim = j.at("feature_dim").get<std::size_t>();
    const std::string features = j.at("features").get<std::string>();
    if (features != "latent" && features != "random") {
        throw ParseError("unknown synthetic feature mode '" + features + "'");
    }
    cfg.features = features == "latent" ? SynthFeatures::Latent : SynthFeatures::Random;
    cfg.feature_noise = j.at("feature_noise").get<double>();
    cfg.num_known_contexts = j.at("num_known_contexts").get<std::size_t>();
    cfg.num_target_contexts = j.at("num_target_contexts").get<std::size_t>();
    cfg.num_steps = j.at("num_steps").get<std::size_t>();
    cfg.target_mixture = j.at("target_mixture").get<std::vector<double>>();
    cfg.edge_density = j.at("edge_density").get<double>();
    cfg.target_density_scale = j.at("target_density_scale").get<double>();
    cfg.temporal_drift = j.at("temporal_drift").get<double>();
    cfg.noise = j.at("noise").get<double>();
    cfg.logit_scale = j.at("logit_scale").get<double>();
    cfg.negative_ratio = j.at("negative_ratio").get<double>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
    return cfg;
}

// ---- truth --------------------------------------------------------------------

Matrix SynthTruth::interaction_at(ContextId c, std::size_t t, double temporal_drift) const {
    Matrix r = interaction.at(c);
    r.axpy(static_cast<double>(t) * temporal_drift, drift.at(c));
    return r;
}

double SynthTruth::score(ContextId c, std::size_t t, NodeId u, NodeId v, double temporal_drift) const {
    const Matrix r = interaction_at(c, t, temporal_drift);
    const auto zu = latent.row(u);
    const auto zv = latent.row(v);
    double acc = 0.0;
    for (std::size_t i = 0; i < r.rows(); ++i) {
        double inner = 0.0;
        for (std::size_t j = 0; j < r.cols(); ++j) {
            inner += r(i, j) * zv[j];
        }
        acc += zu[i] * inner;
    }
    return acc;
}

double SynthTruth::logit(ContextId c, std::size_t t, NodeId u, NodeId v, double temporal_drift) const {
    return score(c, t, u, v, temporal_drift) + bias.at(c).at(t);
}

// ---- generation ---------------------------------------------------------------

namespace {

double logistic(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

// Symmetric k x k matrix with i.i.d. Gaussian entries, rescaled to the given
// Frobenius norm (the standard deviation of z^T R z' for z, z' ~ N(0, I)).
Matrix random_symmetric(std::size_t k, double frobenius, Rng& rng) {
    Matrix r(k, k);
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = i; j < k; ++j) {
            const double v = standard_normal(rng);
            r(i, j) = v;
            r(j, i) = v;
        }
    }
    double norm = 0.0;
    for (double v : r.data()) {
        norm += v * v;
    }
    norm = std::sqrt(norm);
    for (double& v : r.data()) {
        v *= frobenius / norm;
    }
    return r;
}

// Bias b such that the mean of logistic(score + b) over all pairs hits target.
double solve_bias(const std::vector<double>& scores, double target) {
    auto mean_prob = [&](double b) {
        double acc = 0.0;
        for (double s : scores) {
            acc += logistic(s + b);
        }
        return acc / static_cast<double>(scores.size());
    };
    double lo = -200.0;
    double hi = 200.0;
    if (mean_prob(lo) > target || mean_prob(hi) < target) {
        throw GenerationError("edge density " + std::to_string(target) +
                              " unreachable for this latent geometry; change edge_density or latent_dim");
    }
    for (int it = 0; it < 64; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mean_prob(mid) < target) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    const double b = 0.5 * (lo + hi);
    if (std::abs(mean_prob(b) - target) > 1e-3 * target) {
        throw GenerationError("edge density " + std::to_string(target) +
                              " unreachable for this latent geometry; change edge_density or latent_dim");
    }
    return b;
}

} // namespace

SyntheticDataset generate(const SynthConfig& config) {
    config.validate();
    Rng rng(config.seed);
    const std::size_t n = config.num_nodes;
    const std::size_t k = config.latent_dim;
    const std::size_t known = config.num_known_contexts;
    const std::size_t contexts = known + config.num_target_contexts;

    SynthTruth truth;
    truth.latent = Matrix(n, k);
    for (double& v : truth.latent.data()) {
        v = standard_normal(rng);
    }
    std::vector<Matrix> base(known);
    for (std::size_t c = 0; c < known; ++c) {
        base[c] = random_symmetric(k, config.logit_scale, rng);
        truth.drift.push_back(random_symmetric(k, config.logit_scale, rng));
    }
    truth.interaction = base;
    for (std::size_t j = 0; j < config.num_target_contexts; ++j) {
        Matrix mix(k, k);
        Matrix mix_drift(k, k);
        for (std::size_t c = 0; c < known; ++c) {
            mix.axpy(config.target_mixture[c], base[c]);
            mix_drift.axpy(config.target_mixture[c], truth.drift[c]);
        }
        const Matrix own = random_symmetric(k, config.logit_scale, rng);
        mix.axpy(config.noise, own);
        truth.interaction.push_back(std::move(mix));
        truth.drift.push_back(std::move(mix_drift));
    }

    GraphMeta meta;
    meta.num_nodes = n;
    meta.num_contexts = contexts;
    meta.num_known_contexts = known;
    meta.num_steps = config.num_steps;

    std::vector<EdgeSet> sets;
    truth.bias.assign(contexts, std::vector<double>(config.num_steps, 0.0));
    const std::size_t num_pairs = n * (n - 1) / 2;
    std::vector<double> scores(num_pairs);
    for (ContextId c = 0; c < contexts; ++c) {
        const double density =
            c < known ? config.edge_density : config.edge_density * config.target_density_scale;
        for (std::size_t t = 0; t < config.num_steps; ++t) {
            const Matrix r = truth.interaction_at(c, t, config.temporal_drift);
            const Matrix zr = matmul(truth.latent, r);
            const Matrix full = matmul_nt(zr, truth.latent);
            std::size_t idx = 0;
            for (NodeId u = 0; u < n; ++u) {
                for (NodeId v = u + 1; v < n; ++v) {
                    scores[idx++] = full(u, v);
                }
            }
            const double b = solve_bias(scores, density);
            truth.bias[c][t] = b;

            EdgeSet es(c, TimeStep(t));
            std::vector<std::size_t> non_edges;
            std::vector<double> non_edge_prob;
            std::size_t positives = 0;
            idx = 0;
            for (NodeId u = 0; u < n; ++u) {
                for (NodeId v = u + 1; v < n; ++v, ++idx) {
                    const double p = logistic(scores[idx] + b);
                    if (uniform01(rng) < p) {
                        // repeat purchases: weight counts extra co-occurrences
                        double w = 1.0;
                        for (int rep = 0; rep < 3; ++rep) {
                            if (uniform01(rng) < p) {
                                w += 1.0;
                            }
                        }
                        es.set_edge(u, v, w, EdgeLabel::Positive);
                        ++positives;
                    } else {
                        non_edges.push_back(idx);
                        non_edge_prob.push_back(p);
                    }
                }
            }

            // Hard ground-truth negatives: weighted sampling without
            // replacement among non-edges, weight = edge probability
            // (Efraimidis-Spirakis keys log(U) / p, keep the largest).
            const auto want = static_cast<std::size_t>(
                std::llround(config.negative_ratio * static_cast<double>(positives)));
            const std::size_t m = std::min(want, non_edges.size());
            if (m > 0) {
                using Item = std::pair<double, std::size_t>;
                std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
                for (std::size_t i = 0; i < non_edges.size(); ++i) {
                    double u01 = uniform01(rng);
                    while (u01 == 0.0) {
                        u01 = uniform01(rng);
                    }
                    const double key = std::log(u01) / std::max(non_edge_prob[i], 1e-300);
                    if (heap.size() < m) {
                        heap.emplace(key, i);
                    } else if (key > heap.top().first) {
                        heap.pop();
                        heap.emplace(key, i);
                    }
                }
                std::vector<std::size_t> chosen;
                while (!heap.empty()) {
                    chosen.push_back(non_edges[heap.top().second]);
                    heap.pop();
                }
                std::sort(chosen.begin(), chosen.end());
                // Decode pair index -> (u, v) by walking rows.
                std::size_t row_start = 0;
                NodeId u = 0;
                for (std::size_t pair : chosen) {
                    while (pair >= row_start + (n - 1 - u)) {
                        row_start += n - 1 - u;
                        ++u;
                    }
                    const NodeId v = u + 1 + (pair - row_start);
                    es.set_edge(u, v, 1.0 + static_cast<double>(uniform_index(rng, 3)),
                                EdgeLabel::Negative);
                }
            }
            sets.push_back(std::move(es));
        }
    }

    Matrix features(n, config.feature_dim);
    if (config.features == SynthFeatures::Latent) {
        Matrix proj(k, config.feature_dim);
        const double s = 1.0 / std::sqrt(static_cast<double>(k));
        for (double& v : proj.data()) {
            v = s * standard_normal(rng);
        }
        features = matmul(truth.latent, proj);
        for (double& v : features.data()) {
            v += config.feature_noise * standard_normal(rng);
        }
    } else {
        for (double& v : features.data()) {
            v = standard_normal(rng);
        }
    }

    SyntheticDataset out{config,
                         MultiRelGraph(meta, std::move(sets), FeatureMatrix::loaded(std::move(features))),
                         config.target_mixture, std::move(truth)};
    return out;
}

// ---- persistence ------------------------------------------------------------

void write_dataset(const SyntheticDataset& data, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        throw IoError("cannot create dataset directory " + dir.string() + ": " + ec.message());
    }
    write_edges(dir / "edges.csv", data.graph.all_edge_sets());
    write_features(dir / "features.csv", data.graph.features().values);
    json manifest{
        {"format_version", kDatasetFormatVersion},
        {"config", to_json(data.config)},
        {"target_mixture", data.target_mixture},
    };
    std::ofstream out(dir / "manifest.json");
    if (!out) {
        throw IoError("cannot write manifest in " + dir.string());
    }
    out << manifest.dump(2) << '\n';
    if (!out) {
        throw IoError("failed writing manifest in " + dir.string());
    }
}

LoadedDataset load_dataset(const std::filesystem::path& dir, const std::string& feature_override) {
    const auto manifest_path = dir / "manifest.json";
    std::ifstream in(manifest_path);
    if (!in) {
        throw IoError("cannot open " + manifest_path.string());
    }
    json manifest;
    try {
        manifest = json::parse(in);
    } catch (const json::exception& e) {
        throw ParseError("malformed manifest " + manifest_path.string() + ": " + e.what());
    }
    GraphMeta meta;
    std::vector<double> mixture;
    try {
        if (manifest.at("format_version").get<int>() != kDatasetFormatVersion) {
            throw IncompatibleError("unsupported dataset format_version in " + manifest_path.string());
        }
        const json& cfg = manifest.at("config");
        meta.num_nodes = cfg.at("num_nodes").get<std::size_t>();
        meta.num_known_contexts = cfg.at("num_known_contexts").get<std::size_t>();
        meta.num_contexts = meta.num_known_contexts + cfg.at("num_target_contexts").get<std::size_t>();
        meta.num_steps = cfg.at("num_steps").get<std::size_t>();
        if (cfg.contains("static_contexts")) {
            meta.time_dependent.assign(meta.num_contexts, true);
            for (std::size_t c : cfg.at("static_contexts").get<std::vector<std::size_t>>()) {
                meta.time_dependent.at(c) = false;
            }
        }
        if (manifest.contains("target_mixture")) {
            mixture = manifest.at("target_mixture").get<std::vector<double>>();
        }
    } catch (const json::exception& e) {
        throw ParseError("manifest " + manifest_path.string() + " is missing fields: " + e.what());
    }
    std::vector<EdgeSet> sets = load_edges(dir / "edges.csv", meta);
    FeatureMatrix features = feature_override.empty()
                                 ? load_features(dir / "features.csv", meta.num_nodes)
                                 : resolve_features(feature_override, dir, meta.num_nodes);
    return LoadedDataset{MultiRelGraph(meta, std::move(sets), std::move(features)), std::move(manifest),
                         std::move(mixture)};
}

} // namespace good
