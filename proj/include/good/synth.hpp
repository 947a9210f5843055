#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "good/graph.hpp"

namespace good {

enum class SynthFeatures { Latent, Random };

/// Parameters of the latent-factor benchmark. Known contexts get their own
/// symmetric interaction matrix R_c; every target uses the mixture
/// sum_c target_mixture[c] * R_c plus `noise` times a private matrix.
struct SynthConfig {
    std::size_t num_nodes = 300;
    std::size_t latent_dim = 8;
    std::size_t feature_dim = 16;
    SynthFeatures features = SynthFeatures::Latent;
    double feature_noise = 1.0;
    std::size_t num_known_contexts = 3;
    std::size_t num_target_contexts = 1;
    std::size_t num_steps = 6;
    std::vector<double> target_mixture{0.5, 0.3, 0.2};
    double edge_density = 0.02;
    // Target contexts are drawn at edge_density * target_density_scale.
    double target_density_scale = 1.0;
    double temporal_drift = 0.0;
    double noise = 0.0;
    // Standard deviation of the raw bilinear logits.
    double logit_scale = 4.0;
    // Ground-truth negatives per positive edge in each snapshot.
    double negative_ratio = 0.25;
    std::uint64_t seed = 0;

    void validate() const;
};

nlohmann::json to_json(const SynthConfig& cfg);
SynthConfig synth_config_from_json(const nlohmann::json& j);

/// Everything needed to recompute the generating logits.
struct SynthTruth {
    Matrix latent;                                  // n x latent_dim
    std::vector<Matrix> interaction;                // per context, at t = 0
    std::vector<Matrix> drift;                      // per context
    std::vector<std::vector<double>> bias;          // [context][step]

    Matrix interaction_at(ContextId c, std::size_t t, double temporal_drift) const;
    // Raw bilinear score z_u^T R_c(t) z_v (without the density bias).
    double score(ContextId c, std::size_t t, NodeId u, NodeId v, double temporal_drift) const;
    double logit(ContextId c, std::size_t t, NodeId u, NodeId v, double temporal_drift) const;
};

struct SyntheticDataset {
    SynthConfig config;
    MultiRelGraph graph;
    std::vector<double> target_mixture;
    SynthTruth truth;
};

SyntheticDataset generate(const SynthConfig& config);

// Writes edges.csv, features.csv and manifest.json into `dir`.
void write_dataset(const SyntheticDataset& data, const std::filesystem::path& dir);

/// A dataset directory read back from disk.
struct LoadedDataset {
    MultiRelGraph graph;
    nlohmann::json manifest;
    std::vector<double> target_mixture;
};

inline constexpr int kDatasetFormatVersion = 1;

// `feature_override` may be empty (use the dataset's features.csv) or a
// feature spec accepted by resolve_features.
LoadedDataset load_dataset(const std::filesystem::path& dir, const std::string& feature_override = {});

} // namespace good
