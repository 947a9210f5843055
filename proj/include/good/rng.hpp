#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace good {

/// Every run owns exactly one of these; nothing in the library touches a
/// global generator.
using Rng = std::mt19937_64;

// Uniform in [0, 1) built from the top 53 bits, so the value sequence depends
// only on the engine and not on the standard library's distribution code.
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Uniform integer in [0, n) by rejection (unbiased, library independent).
std::uint64_t uniform_index(Rng& rng, std::uint64_t n);

double standard_normal(Rng& rng);

// log of a Gamma(shape, 1) draw. Works in log space via
// G(a) = G(a + 1) * U^(1/a), which stays finite for concentrations near 0
// where a direct draw underflows to exactly 0.
double log_gamma_draw(Rng& rng, double shape);

// Independent stream seeds derived from a base seed (splitmix64 mixing).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

std::string save_rng_state(const Rng& rng);
Rng load_rng_state(const std::string& state);

} // namespace good
