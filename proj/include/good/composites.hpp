#pragma once

#include <string>
#include <vector>

#include "good/gradcheck.hpp"

namespace good {

struct CompositeReport {
    std::string name;
    GradCheckResult result;
    double seconds = 0.0;
};

// Finite-difference checks of every model building block (subblock,
// two-step residual encoder, aggregation, both heads, both losses and the
// assembled model). `fault_op` corrupts one backward rule for harness tests.
std::vector<CompositeReport> check_composites(const std::string& fault_op = {});

inline constexpr double kGradCheckTolerance = 1e-4;

} // namespace good
