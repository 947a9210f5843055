#include "doctest.h"

#include <cmath>
#include <numeric>

#include "good/errors.hpp"
#include "good/mixagg.hpp"
#include "helpers.hpp"

using namespace good;
using testutil::random_matrix;

namespace {

double simplex_error(const std::vector<double>& q) {
    return std::abs(std::accumulate(q.begin(), q.end(), 0.0) - 1.0);
}

} // namespace

TEST_CASE("sample_coefficients examples") {
    Rng rng(1);
    for (int i = 0; i < 20; ++i) {
        CHECK(sample_coefficients(1, rng) == std::vector<double>{1.0});
    }
    CHECK_THROWS_AS(sample_coefficients(0, rng), ArgumentError);
}

TEST_CASE("sample_coefficients stays on the simplex (property)") {
    Rng rng(2);
    for (int i = 0; i < 10000; ++i) {
        const std::size_t c = 2 + uniform_index(rng, 7);
        const auto q = sample_coefficients(c, rng);
        REQUIRE(q.size() == c);
        for (double v : q) {
            CHECK(v >= 0.0);
        }
        CHECK(simplex_error(q) <= 1e-9);
    }
}

TEST_CASE("sample_coefficients coordinates are exchangeable (Monte Carlo)") {
    Rng rng(3);
    std::vector<double> mean(4, 0.0);
    const int draws = 100000;
    for (int i = 0; i < draws; ++i) {
        const auto q = sample_coefficients(4, rng);
        for (std::size_t c = 0; c < 4; ++c) {
            mean[c] += q[c] / draws;
        }
    }
    for (double m : mean) {
        CHECK(std::abs(m - 0.25) < 0.02);
    }
}

TEST_CASE("inference and learned coefficients") {
    CHECK(inference_coefficients(4) == std::vector<double>{0.25, 0.25, 0.25, 0.25});
    CHECK(inference_coefficients(1) == std::vector<double>{1.0});
    for (double v : inference_coefficients(3)) {
        CHECK(v == 1.0 / 3.0);
    }
    CHECK(normalize_learned(std::vector<double>{0.0, 0.0}) == std::vector<double>{0.5, 0.5});
    const auto flat = normalize_learned(std::vector<double>{7.5, 7.5, 7.5});
    for (double v : flat) {
        CHECK(std::abs(v - 1.0 / 3.0) < 1e-15);
    }
    const auto two_to_one = normalize_learned(std::vector<double>{std::log(2.0), 0.0});
    CHECK(std::abs(two_to_one[0] - 2.0 / 3.0) < 1e-15);
    CHECK(std::abs(two_to_one[1] - 1.0 / 3.0) < 1e-15);
    CHECK_NOTHROW(check_simplex(two_to_one));
    CHECK_THROWS_AS(check_simplex(std::vector<double>{0.7, 0.2}), ArgumentError);
    CHECK_THROWS_AS(check_simplex(std::vector<double>{1.2, -0.2}), ArgumentError);
}

TEST_CASE("aggregate examples") {
    Rng rng(4);
    const Matrix h0 = random_matrix(5, 3, rng);
    SUBCASE("identical embeddings are a fixed point of Sum") {
        const std::vector<Matrix> same{h0, h0, h0};
        for (int i = 0; i < 20; ++i) {
            const auto q = sample_coefficients(3, rng);
            const Matrix out = aggregate(Aggregator::Sum, same, q);
            for (std::size_t k = 0; k < out.size(); ++k) {
                CHECK(std::abs(out.data()[k] - h0.data()[k]) <= 4e-16 * std::abs(h0.data()[k]));
            }
        }
        CHECK(aggregate(Aggregator::Sum, same, std::vector<double>{0.5, 0.25, 0.25}) == h0);
    }
    SUBCASE("one-hot coefficients select a context") {
        const std::vector<Matrix> hs{random_matrix(5, 3, rng), h0, random_matrix(5, 3, rng)};
        CHECK(aggregate(Aggregator::Sum, hs, std::vector<double>{0.0, 1.0, 0.0}) == h0);
    }
    SUBCASE("DSum with a single regular context is the identity") {
        const std::vector<Matrix> hs{h0};
        const std::vector<std::vector<std::size_t>> deg{{3, 3, 3, 3, 3}};
        CHECK(aggregate(Aggregator::DSum, hs, std::vector<double>{1.0}, deg) == h0);
    }
    SUBCASE("Stack blocks") {
        const Matrix h1 = random_matrix(5, 3, rng);
        const std::vector<Matrix> hs{h0, h1};
        const std::vector<double> q{0.4, 0.6};
        const Matrix out = aggregate(Aggregator::Stack, hs, q);
        REQUIRE(out.cols() == 6);
        for (std::size_t i = 0; i < 5; ++i) {
            for (std::size_t j = 0; j < 3; ++j) {
                CHECK(out(i, j) == 0.4 * h0(i, j));
                CHECK(out(i, j + 3) == 0.6 * h1(i, j));
            }
        }
        CHECK(aggregated_dim(Aggregator::Stack, 2, 3) == 6);
        CHECK(aggregated_dim(Aggregator::DSum, 2, 3) == 3);
    }
    SUBCASE("degree weighting, zero degree contributes nothing") {
        const std::vector<Matrix> hs{h0};
        const std::vector<std::vector<std::size_t>> deg{{0, 1, 2, 4, 4}};
        const Matrix out = aggregate(Aggregator::DStack, hs, std::vector<double>{1.0}, deg);
        const double f[] = {0.0, 0.25, 0.5, 1.0, 1.0};
        for (std::size_t i = 0; i < 5; ++i) {
            for (std::size_t j = 0; j < 3; ++j) {
                CHECK(out(i, j) == f[i] * h0(i, j));
            }
        }
    }
    SUBCASE("errors") {
        const std::vector<Matrix> hs{h0, random_matrix(5, 2, rng)};
        CHECK_THROWS_AS(aggregate(Aggregator::Sum, hs, std::vector<double>{0.5, 0.5}), ArgumentError);
        const std::vector<Matrix> ok{h0, h0};
        CHECK_THROWS_AS(aggregate(Aggregator::Sum, ok, std::vector<double>{1.0}), ArgumentError);
        CHECK_THROWS_AS(aggregate(Aggregator::DSum, ok, std::vector<double>{0.5, 0.5}), ArgumentError);
    }
}

TEST_CASE("aggregate properties") {
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t c = 1 + uniform_index(rng, 4);
        const std::size_t n = 2 + uniform_index(rng, 6);
        const std::size_t d = 1 + uniform_index(rng, 4);
        std::vector<Matrix> hs;
        std::vector<std::vector<std::size_t>> deg;
        for (std::size_t k = 0; k < c; ++k) {
            hs.push_back(random_matrix(n, d, rng));
            std::vector<std::size_t> dk(n);
            for (auto& v : dk) {
                v = uniform_index(rng, 5);
            }
            deg.push_back(dk);
        }
        const auto q = sample_coefficients(c, rng);
        const Matrix sum_out = aggregate(Aggregator::Sum, hs, q);

        // linearity in each embedding
        const std::size_t j = uniform_index(rng, c);
        std::vector<Matrix> scaled = hs;
        for (double& v : scaled[j].data()) {
            v *= 2.0;
        }
        const Matrix scaled_out = aggregate(Aggregator::Sum, scaled, q);
        for (std::size_t i = 0; i < sum_out.size(); ++i) {
            const double expected = sum_out.data()[i] + q[j] * hs[j].data()[i];
            CHECK(std::abs(scaled_out.data()[i] - expected) < 1e-12);
        }

        // node permutation equivariance
        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        for (std::size_t i = n; i > 1; --i) {
            std::swap(perm[i - 1], perm[uniform_index(rng, i)]);
        }
        std::vector<Matrix> permuted;
        for (const Matrix& h : hs) {
            Matrix p(n, d);
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t k = 0; k < d; ++k) {
                    p(i, k) = h(perm[i], k);
                }
            }
            permuted.push_back(p);
        }
        const Matrix perm_out = aggregate(Aggregator::Sum, permuted, q);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t k = 0; k < d; ++k) {
                CHECK(perm_out(i, k) == sum_out(perm[i], k));
            }
        }

        // continuity in q
        std::vector<double> q2 = sample_coefficients(c, rng);
        double l1 = 0.0;
        double hmax = 0.0;
        for (std::size_t k = 0; k < c; ++k) {
            l1 += std::abs(q[k] - q2[k]);
            hmax = std::max(hmax, max_abs(hs[k]));
        }
        const Matrix out2 = aggregate(Aggregator::Sum, hs, q2);
        for (std::size_t i = 0; i < out2.size(); ++i) {
            CHECK(std::abs(out2.data()[i] - sum_out.data()[i]) <= hmax * l1 + 1e-12);
        }

        // stacked blocks deconcatenate into weighted inputs
        const Matrix stacked = aggregate(Aggregator::DStack, hs, q, deg);
        for (std::size_t k = 0; k < c; ++k) {
            const std::size_t max_deg = std::max<std::size_t>(1, *std::max_element(deg[k].begin(), deg[k].end()));
            for (std::size_t i = 0; i < n; ++i) {
                const double f = static_cast<double>(deg[k][i]) / static_cast<double>(max_deg);
                for (std::size_t col = 0; col < d; ++col) {
                    CHECK(stacked(i, k * d + col) == (f * hs[k](i, col)) * q[k]);
                }
            }
        }
    }
}

TEST_CASE("aggregator names") {
    for (Aggregator a : {Aggregator::Sum, Aggregator::Stack, Aggregator::DSum, Aggregator::DStack}) {
        CHECK(parse_aggregator(to_string(a)) == a);
    }
    CHECK(parse_aggregator("DStack") == Aggregator::DStack);
    CHECK_THROWS_AS(parse_aggregator("mean"), ConfigError);
}
