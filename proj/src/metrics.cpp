#include "good/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

#include "good/errors.hpp"

namespace good {

namespace {

void check_inputs(std::span<const double> scores, std::span<const double> labels) {
    if (scores.size() != labels.size()) {
        throw ArgumentError("metrics: " + std::to_string(scores.size()) + " scores vs " +
                            std::to_string(labels.size()) + " labels");
    }
    if (scores.empty()) {
        throw ArgumentError("metrics of an empty input");
    }
    for (double y : labels) {
        if (y != 0.0 && y != 1.0) {
            throw ArgumentError("labels must be 0 or 1");
        }
    }
}

} // namespace

double accuracy(std::span<const double> scores, std::span<const double> labels, double threshold) {
    check_inputs(scores, labels);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const double predicted = scores[i] >= threshold ? 1.0 : 0.0;
        correct += predicted == labels[i] ? 1 : 0;
    }
    return static_cast<double>(correct) / static_cast<double>(scores.size());
}

double roc_auc(std::span<const double> scores, std::span<const double> labels) {
    check_inputs(scores, labels);
    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // Sum of positive ranks, with tied groups sharing their average rank.
    // Ranks are doubled to stay integral.
    unsigned long long doubled_rank_sum = 0;
    std::size_t positives = 0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) {
            ++j;
        }
        const unsigned long long doubled_avg = (i + 1) + (j + 1);  // 2 * average of ranks i+1..j+1
        for (std::size_t k = i; k <= j; ++k) {
            if (labels[order[k]] == 1.0) {
                doubled_rank_sum += doubled_avg;
                ++positives;
            }
        }
        i = j + 1;
    }
    const std::size_t negatives = n - positives;
    if (positives == 0 || negatives == 0) {
        throw ArgumentError("roc_auc needs at least one positive and one negative");
    }
    const unsigned long long p = positives;
    // 2 * U = doubled_rank_sum - p (p + 1)
    const unsigned long long doubled_u = doubled_rank_sum - p * (p + 1);
    return static_cast<double>(doubled_u) / (2.0 * static_cast<double>(p) * static_cast<double>(negatives));
}

} // namespace good
