#pragma once

#include <span>

namespace good {

// Fraction of entries where (score >= threshold) agrees with the 0/1 label.
double accuracy(std::span<const double> scores, std::span<const double> labels, double threshold = 0.5);

// Probability that a random positive outscores a random negative, ties
// counting one half, from average ranks. Needs both classes present.
double roc_auc(std::span<const double> scores, std::span<const double> labels);

} // namespace good
