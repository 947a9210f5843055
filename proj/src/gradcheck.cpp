#include "good/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "good/errors.hpp"

namespace good {

namespace {

double evaluate(const LossBuilder& f) {
    Tape tape;
    Var loss = f(tape);
    if (loss.rows() != 1 || loss.cols() != 1) {
        throw ArgumentError("grad_check loss must be scalar");
    }
    return loss.value()(0, 0);
}

} // namespace

GradCheckResult grad_check(const LossBuilder& f, std::span<Parameter* const> params, double eps,
                           const std::string& fault_op) {
    if (!(eps > 0.0)) {
        throw ArgumentError("grad_check eps must be positive");
    }
    for (Parameter* p : params) {
        p->zero_grad();
    }
    {
        Tape tape;
        if (!fault_op.empty()) {
            tape.inject_fault(fault_op);
        }
        Var loss = f(tape);
        tape.backward(loss);
    }
    std::vector<Matrix> analytic;
    analytic.reserve(params.size());
    for (Parameter* p : params) {
        analytic.push_back(p->grad);
    }

    GradCheckResult result;
    for (std::size_t k = 0; k < params.size(); ++k) {
        Parameter& p = *params[k];
        for (std::size_t i = 0; i < p.value.size(); ++i) {
            const double original = p.value.data()[i];
            p.value.data()[i] = original + eps;
            const double up = evaluate(f);
            p.value.data()[i] = original - eps;
            const double down = evaluate(f);
            p.value.data()[i] = original;

            const double numeric = (up - down) / (2.0 * eps);
            const double a = analytic[k].data()[i];
            const double rel = std::abs(a - numeric) / std::max(1e-6, std::abs(a) + std::abs(numeric));
            ++result.coordinates;
            if (rel > result.max_rel_error || result.worst_parameter.empty()) {
                if (rel >= result.max_rel_error) {
                    result.max_rel_error = rel;
                    result.worst_parameter = p.name;
                    result.worst_index = i;
                }
            }
        }
    }
    return result;
}

} // namespace good
