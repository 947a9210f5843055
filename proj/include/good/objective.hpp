#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "good/graph.hpp"
#include "good/tape.hpp"

namespace good {

enum class Variant { Good, GoodLc, GoodLcPlus };

std::string to_string(Variant v);
Variant parse_variant(const std::string& text);

// Scores are clamped into [kScoreClamp, 1 - kScoreClamp] before taking logs.
inline constexpr double kScoreClamp = 1e-12;

// Mean binary cross-entropy of an m x 1 score column against 0/1 labels.
Var binary_cross_entropy(Var scores, std::span<const double> labels);

// Per-context mean BCE averaged over the target contexts. Throws
// ArgumentError on an empty batch.
Var link_loss(std::span<const Var> scores, std::span<const std::vector<double>> labels);
double link_loss(std::span<const std::vector<double>> scores, std::span<const std::vector<double>> labels);

// (1/C) * sum_c (ln(1 + q_c) - ln(1 + q_hat_c))^2 with q constant.
Var disentangle_loss(std::span<const double> q, Var q_hat);
double disentangle_loss(std::span<const double> q, std::span<const double> q_hat);

// GOOD_LC trains on the link loss alone; the others add the disentangler loss.
Var total_loss(Variant variant, Var link, Var disent);
double total_loss(Variant variant, double link, double disent);

// ---- negative sampling ------------------------------------------------------

enum class NegKind { MultinomialByWeight = 0, UniformGroundTruthNeg = 1, UniformNonEdge = 2 };

/// A pure strategy is a Mixture with a single nonzero ratio.
struct NegStrategy {
    std::array<double, 3> ratios{0.0, 0.0, 1.0};  // indexed by NegKind

    static NegStrategy pure(NegKind kind);
    static NegStrategy mixture(double by_weight, double uniform_gt, double non_edge);
    // Mixture(by-weight 0.5, non-edge 0.5) when ground-truth negatives exist,
    // otherwise uniform non-edges.
    static NegStrategy default_for(bool has_ground_truth_negatives);

    void validate() const;
    std::string describe() const;
    static NegStrategy parse(const std::string& text);
};

// Largest-remainder split of k by the ratios.
std::array<std::size_t, 3> allocate_counts(const NegStrategy& strategy, std::size_t k);

// k canonical (src < dst) pairs, none a positive edge of (context, time).
std::vector<NodePair> sample_negatives(const MultiRelGraph& graph, ContextId context, TimeStep time, std::size_t k,
                                       const NegStrategy& strategy, Rng& rng);

} // namespace good
