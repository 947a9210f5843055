#pragma once

#include <functional>
#include <span>
#include <string>

#include "good/tape.hpp"

namespace good {

// Builds a scalar loss on the given tape. It must register every checked
// Parameter through Tape::parameter and must be deterministic across calls
// (re-seed any generator inside so dropout masks repeat).
using LossBuilder = std::function<Var(Tape&)>;

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::string worst_parameter;
    std::size_t worst_index = 0;
    std::size_t coordinates = 0;
};

// Central differences per coordinate against the tape gradient. The relative
// error of a coordinate is |a - n| / max(1e-6, |a| + |n|).
GradCheckResult grad_check(const LossBuilder& f, std::span<Parameter* const> params,
                           double eps = 1e-5, const std::string& fault_op = {});

} // namespace good
