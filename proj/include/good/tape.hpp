#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "good/matrix.hpp"
#include "good/rng.hpp"
#include "good/sparse.hpp"

namespace good {

enum class Mode { Train, Eval };

/// A learnable tensor plus its gradient accumulator.
struct Parameter {
    std::string name;
    Matrix value;
    Matrix grad;

    Parameter() = default;
    Parameter(std::string name, Matrix value);

    void zero_grad();
};

class Tape;

/// Handle to a node recorded on a Tape. Cheap to copy; only valid while the
/// owning tape is alive.
class Var {
public:
    Var() = default;

    const Matrix& value() const;
    std::size_t rows() const { return value().rows(); }
    std::size_t cols() const { return value().cols(); }
    Tape* tape() const noexcept { return tape_; }
    std::size_t id() const noexcept { return id_; }
    bool valid() const noexcept { return tape_ != nullptr; }

private:
    friend class Tape;
    Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

    Tape* tape_ = nullptr;
    std::size_t id_ = 0;
};

/// Reverse-mode recorder. Nodes are appended in evaluation order, so walking
/// the node list backwards is a reverse topological traversal.
class Tape {
public:
    // Receives the gradient flowing into the node's output and pushes
    // contributions into its inputs via accumulate().
    using BackwardFn = std::function<void(Tape&, const Matrix& grad_out)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var constant(Matrix value);
    Var parameter(Parameter& p);
    Var record(const char* op, Matrix value, std::initializer_list<Var> inputs, BackwardFn fn);
    Var record(const char* op, Matrix value, std::span<const Var> inputs, BackwardFn fn);

    // Seeds d(loss)/d(loss) = 1, replays the tape backwards and adds the
    // resulting gradients into every registered Parameter::grad.
    void backward(Var loss);

    const Matrix& value(Var v) const;
    // Gradient of the last backward() w.r.t. v; zeros when none reached it.
    Matrix grad(Var v) const;
    bool requires_grad(Var v) const;
    void accumulate(Var v, const Matrix& g);

    // Test hook: scales the gradient routed through every node of kind `op`
    // so harnesses can prove they detect a broken backward rule.
    void inject_fault(std::string op, double factor = 1.5);

    std::size_t size() const noexcept { return nodes_.size(); }

private:
    struct Node {
        const char* op = "";
        Matrix value;
        Matrix grad;
        bool requires_grad = false;
        bool has_grad = false;
        BackwardFn backward;
        Parameter* param = nullptr;
    };

    void check_owned(Var v) const;

    std::deque<Node> nodes_;
    std::string fault_op_;
    double fault_factor_ = 1.0;
};

// ---- primitives -----------------------------------------------------------

Var matmul(Var a, Var b);
// Constant sparse A times a differentiable dense h.
Var spmm(const SparseMatrix& a, Var h);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var hadamard(Var a, Var b);
// m (r x c) + row (1 x c) broadcast over rows.
Var add_row(Var m, Var row);
Var scale(Var a, double s);
// a * s where s is a differentiable 1x1.
Var scale_by(Var a, Var s);
// diag(factors) * a with constant factors.
Var scale_rows(Var a, std::vector<double> factors);
Var relu(Var x);
Var sigmoid(Var x);
Var log1p(Var x);
Var square(Var x);
// Row-wise max-subtracted softmax.
Var softmax_rows(Var x);
// 1 x c column means.
Var mean_rows(Var x);
Var sum(Var x);
Var mean(Var x);
Var gather_rows(Var x, std::vector<std::size_t> rows);
Var concat_cols(std::span<const Var> parts);
Var element(Var x, std::size_t r, std::size_t c);

// Vector softmax outside the tape.
std::vector<double> softmax(std::span<const double> logits);

} // namespace good
