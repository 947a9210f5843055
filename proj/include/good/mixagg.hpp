#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "good/tape.hpp"

namespace good {

enum class Aggregator { Sum, Stack, DSum, DStack };

std::string to_string(Aggregator kind);
Aggregator parse_aggregator(const std::string& text);

// Smallest concentration drawn for the Dirichlet sampler.
inline constexpr double kMinConcentration = 1e-3;

// alpha_i ~ U[1e-3, 1), then q ~ Dirichlet(alpha). Always on the simplex.
std::vector<double> sample_coefficients(std::size_t count, Rng& rng);
// 1 / count everywhere.
std::vector<double> inference_coefficients(std::size_t count);
// Softmax of unconstrained logits.
std::vector<double> normalize_learned(std::span<const double> raw);

// Throws ArgumentError unless q is nonnegative and sums to 1 within 1e-9.
void check_simplex(std::span<const double> q);

// Output width of `kind` over `count` embeddings of width `dim`.
std::size_t aggregated_dim(Aggregator kind, std::size_t count, std::size_t dim);

// Combines per-context embeddings with coefficients `q` (a 1 x C Var, either
// constant or differentiable). `degrees` holds one raw degree vector per
// embedding and is required by the degree-weighted kinds.
Var aggregate(Aggregator kind, std::span<const Var> embeddings, Var q,
              std::span<const std::vector<std::size_t>* const> degrees = {});

// Tape-free convenience wrapper over the same computation.
Matrix aggregate(Aggregator kind, std::span<const Matrix> embeddings, std::span<const double> q,
                 std::span<const std::vector<std::size_t>> degrees = {});

} // namespace good
