#include "good/rng.hpp"

#include <cmath>
#include <sstream>

#include "good/errors.hpp"

namespace good {

std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
    if (n == 0) {
        throw ArgumentError("uniform_index: empty range");
    }
    const std::uint64_t limit = Rng::max() - (Rng::max() % n);
    std::uint64_t x = rng();
    while (x >= limit) {
        x = rng();
    }
    return x % n;
}

double standard_normal(Rng& rng) {
    std::normal_distribution<double> dist(0.0, 1.0);
    return dist(rng);
}

double log_gamma_draw(Rng& rng, double shape) {
    if (!(shape > 0.0)) {
        throw ArgumentError("gamma shape must be positive");
    }
    std::gamma_distribution<double> dist(shape + 1.0, 1.0);
    const double g = dist(rng);
    double u = uniform01(rng);
    while (u == 0.0) {
        u = uniform01(rng);
    }
    return std::log(g) + std::log(u) / shape;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::string save_rng_state(const Rng& rng) {
    std::ostringstream os;
    os << rng;
    return os.str();
}

Rng load_rng_state(const std::string& state) {
    Rng rng;
    std::istringstream is(state);
    is >> rng;
    if (!is) {
        throw ParseError("corrupt generator state");
    }
    return rng;
}

} // namespace good
