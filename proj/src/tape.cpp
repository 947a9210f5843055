#include "good/tape.hpp"

#include <algorithm>
#include <cmath>

#include "good/errors.hpp"

namespace good {

Parameter::Parameter(std::string name, Matrix value)
    : name(std::move(name)), value(std::move(value)) {
    grad = Matrix(this->value.rows(), this->value.cols());
}

void Parameter::zero_grad() {
    if (!grad.same_shape(value)) {
        grad = Matrix(value.rows(), value.cols());
    } else {
        grad.fill(0.0);
    }
}

const Matrix& Var::value() const {
    if (tape_ == nullptr) {
        throw ArgumentError("use of an unbound Var");
    }
    return tape_->value(*this);
}

// ---- Tape -----------------------------------------------------------------

Var Tape::constant(Matrix value) {
    Node node;
    node.op = "constant";
    node.value = std::move(value);
    nodes_.push_back(std::move(node));
    return Var(this, nodes_.size() - 1);
}

Var Tape::parameter(Parameter& p) {
    Node node;
    node.op = "parameter";
    node.value = p.value;
    node.requires_grad = true;
    node.param = &p;
    nodes_.push_back(std::move(node));
    return Var(this, nodes_.size() - 1);
}

Var Tape::record(const char* op, Matrix value, std::initializer_list<Var> inputs, BackwardFn fn) {
    return record(op, std::move(value), std::span<const Var>(inputs.begin(), inputs.size()),
                  std::move(fn));
}

Var Tape::record(const char* op, Matrix value, std::span<const Var> inputs, BackwardFn fn) {
    bool needs = false;
    for (const Var& in : inputs) {
        check_owned(in);
        needs = needs || nodes_[in.id()].requires_grad;
    }
    Node node;
    node.op = op;
    node.value = std::move(value);
    node.requires_grad = needs;
    if (needs) {
        node.backward = std::move(fn);
    }
    nodes_.push_back(std::move(node));
    return Var(this, nodes_.size() - 1);
}

void Tape::backward(Var loss) {
    check_owned(loss);
    Node& root = nodes_[loss.id()];
    if (root.value.rows() != 1 || root.value.cols() != 1) {
        throw ArgumentError("backward requires a scalar loss, got " + root.value.shape_string());
    }
    for (Node& n : nodes_) {
        n.has_grad = false;
    }
    root.grad = Matrix(1, 1, 1.0);
    root.has_grad = true;

    for (std::size_t i = loss.id() + 1; i-- > 0;) {
        Node& node = nodes_[i];
        if (!node.has_grad || !node.requires_grad) {
            continue;
        }
        if (node.param != nullptr) {
            node.param->grad.axpy(1.0, node.grad);
            continue;
        }
        if (!node.backward) {
            continue;
        }
        if (!fault_op_.empty() && fault_op_ == node.op) {
            Matrix scaled = node.grad;
            for (double& v : scaled.data()) {
                v *= fault_factor_;
            }
            node.backward(*this, scaled);
        } else {
            node.backward(*this, node.grad);
        }
    }
}

const Matrix& Tape::value(Var v) const {
    check_owned(v);
    return nodes_[v.id()].value;
}

Matrix Tape::grad(Var v) const {
    check_owned(v);
    const Node& node = nodes_[v.id()];
    if (!node.has_grad) {
        return Matrix(node.value.rows(), node.value.cols());
    }
    return node.grad;
}

bool Tape::requires_grad(Var v) const {
    check_owned(v);
    return nodes_[v.id()].requires_grad;
}

void Tape::accumulate(Var v, const Matrix& g) {
    check_owned(v);
    Node& node = nodes_[v.id()];
    if (!node.requires_grad) {
        return;
    }
    if (!g.same_shape(node.value)) {
        throw DimensionError(std::string("gradient shape ") + g.shape_string() +
                             " does not match value " + node.value.shape_string() + " of '" +
                             node.op + "'");
    }
    if (!node.has_grad) {
        node.grad = g;
        node.has_grad = true;
    } else {
        node.grad.axpy(1.0, g);
    }
}

void Tape::inject_fault(std::string op, double factor) {
    fault_op_ = std::move(op);
    fault_factor_ = factor;
}

void Tape::check_owned(Var v) const {
    if (v.tape() != this || v.id() >= nodes_.size()) {
        throw ArgumentError("Var does not belong to this tape");
    }
}

// ---- primitives -----------------------------------------------------------

namespace {

Tape& tape_of(Var a) {
    if (!a.valid()) {
        throw ArgumentError("use of an unbound Var");
    }
    return *a.tape();
}

void require_same_shape(const char* op, const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) {
        throw DimensionError(std::string(op) + " shape mismatch: " + a.shape_string() + " vs " +
                             b.shape_string());
    }
}

template <typename F>
Matrix map(const Matrix& x, F f) {
    Matrix out(x.rows(), x.cols());
    auto src = x.data();
    auto dst = out.data();
    for (std::size_t i = 0; i < src.size(); ++i) {
        dst[i] = f(src[i]);
    }
    return out;
}

} // namespace

Var matmul(Var a, Var b) {
    Tape& t = tape_of(a);
    Matrix out = matmul(a.value(), b.value());
    return t.record("matmul", std::move(out), {a, b}, [a, b](Tape& tape, const Matrix& g) {
        if (tape.requires_grad(a)) {
            tape.accumulate(a, matmul_nt(g, b.value()));
        }
        if (tape.requires_grad(b)) {
            tape.accumulate(b, matmul_tn(a.value(), g));
        }
    });
}

Var spmm(const SparseMatrix& a, Var h) {
    Tape& t = tape_of(h);
    Matrix out = sparse_dense_product(a, h.value());
    // The adjacency is owned by a snapshot that outlives the tape.
    const SparseMatrix* adj = &a;
    return t.record("spmm", std::move(out), {h}, [adj, h](Tape& tape, const Matrix& g) {
        tape.accumulate(h, sparse_transpose_dense_product(*adj, g));
    });
}

Var add(Var a, Var b) {
    Tape& t = tape_of(a);
    require_same_shape("add", a.value(), b.value());
    Matrix out = a.value();
    out.axpy(1.0, b.value());
    return t.record("add", std::move(out), {a, b}, [a, b](Tape& tape, const Matrix& g) {
        tape.accumulate(a, g);
        tape.accumulate(b, g);
    });
}

Var sub(Var a, Var b) {
    Tape& t = tape_of(a);
    require_same_shape("sub", a.value(), b.value());
    Matrix out = a.value();
    out.axpy(-1.0, b.value());
    return t.record("sub", std::move(out), {a, b}, [a, b](Tape& tape, const Matrix& g) {
        tape.accumulate(a, g);
        Matrix neg = g;
        for (double& v : neg.data()) {
            v = -v;
        }
        tape.accumulate(b, neg);
    });
}

Var hadamard(Var a, Var b) {
    Tape& t = tape_of(a);
    require_same_shape("hadamard", a.value(), b.value());
    const Matrix& av = a.value();
    const Matrix& bv = b.value();
    Matrix out(av.rows(), av.cols());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out.data()[i] = av.data()[i] * bv.data()[i];
    }
    return t.record("hadamard", std::move(out), {a, b}, [a, b](Tape& tape, const Matrix& g) {
        const Matrix& av2 = a.value();
        const Matrix& bv2 = b.value();
        if (tape.requires_grad(a)) {
            Matrix ga(g.rows(), g.cols());
            for (std::size_t i = 0; i < g.size(); ++i) {
                ga.data()[i] = g.data()[i] * bv2.data()[i];
            }
            tape.accumulate(a, ga);
        }
        if (tape.requires_grad(b)) {
            Matrix gb(g.rows(), g.cols());
            for (std::size_t i = 0; i < g.size(); ++i) {
                gb.data()[i] = g.data()[i] * av2.data()[i];
            }
            tape.accumulate(b, gb);
        }
    });
}

Var add_row(Var m, Var row) {
    Tape& t = tape_of(m);
    const Matrix& mv = m.value();
    const Matrix& rv = row.value();
    if (rv.rows() != 1 || rv.cols() != mv.cols()) {
        throw DimensionError("add_row shape mismatch: " + mv.shape_string() + " + " +
                             rv.shape_string());
    }
    Matrix out = mv;
    for (std::size_t i = 0; i < out.rows(); ++i) {
        auto r = out.row(i);
        for (std::size_t j = 0; j < out.cols(); ++j) {
            r[j] += rv(0, j);
        }
    }
    return t.record("add_row", std::move(out), {m, row}, [m, row](Tape& tape, const Matrix& g) {
        tape.accumulate(m, g);
        if (tape.requires_grad(row)) {
            Matrix gr(1, g.cols());
            for (std::size_t i = 0; i < g.rows(); ++i) {
                for (std::size_t j = 0; j < g.cols(); ++j) {
                    gr(0, j) += g(i, j);
                }
            }
            tape.accumulate(row, gr);
        }
    });
}

Var scale(Var a, double s) {
    Tape& t = tape_of(a);
    Matrix out = map(a.value(), [s](double v) { return v * s; });
    return t.record("scale", std::move(out), {a}, [a, s](Tape& tape, const Matrix& g) {
        tape.accumulate(a, map(g, [s](double v) { return v * s; }));
    });
}

Var scale_by(Var a, Var s) {
    Tape& t = tape_of(a);
    if (s.rows() != 1 || s.cols() != 1) {
        throw DimensionError("scale_by expects a 1x1 scale, got " + s.value().shape_string());
    }
    const double sv = s.value()(0, 0);
    Matrix out = map(a.value(), [sv](double v) { return v * sv; });
    return t.record("scale_by", std::move(out), {a, s}, [a, s](Tape& tape, const Matrix& g) {
        const double k = s.value()(0, 0);
        if (tape.requires_grad(a)) {
            tape.accumulate(a, map(g, [k](double v) { return v * k; }));
        }
        if (tape.requires_grad(s)) {
            double acc = 0.0;
            const Matrix& av = a.value();
            for (std::size_t i = 0; i < g.size(); ++i) {
                acc += g.data()[i] * av.data()[i];
            }
            tape.accumulate(s, Matrix(1, 1, acc));
        }
    });
}

Var scale_rows(Var a, std::vector<double> factors) {
    Tape& t = tape_of(a);
    const Matrix& av = a.value();
    if (factors.size() != av.rows()) {
        throw DimensionError("scale_rows: " + std::to_string(factors.size()) +
                             " factors for matrix " + av.shape_string());
    }
    Matrix out = av;
    for (std::size_t i = 0; i < out.rows(); ++i) {
        for (double& v : out.row(i)) {
            v *= factors[i];
        }
    }
    return t.record("scale_rows", std::move(out), {a},
                    [a, f = std::move(factors)](Tape& tape, const Matrix& g) {
                        Matrix ga = g;
                        for (std::size_t i = 0; i < ga.rows(); ++i) {
                            for (double& v : ga.row(i)) {
                                v *= f[i];
                            }
                        }
                        tape.accumulate(a, ga);
                    });
}

Var relu(Var x) {
    Tape& t = tape_of(x);
    Matrix out = map(x.value(), [](double v) { return v > 0.0 ? v : 0.0; });
    return t.record("relu", std::move(out), {x}, [x](Tape& tape, const Matrix& g) {
        const Matrix& xv = x.value();
        Matrix gx(g.rows(), g.cols());
        for (std::size_t i = 0; i < g.size(); ++i) {
            gx.data()[i] = xv.data()[i] > 0.0 ? g.data()[i] : 0.0;
        }
        tape.accumulate(x, gx);
    });
}

Var sigmoid(Var x) {
    Tape& t = tape_of(x);
    Matrix out = map(x.value(), [](double v) {
        if (v >= 0.0) {
            return 1.0 / (1.0 + std::exp(-v));
        }
        const double e = std::exp(v);
        return e / (1.0 + e);
    });
    Matrix y = out;
    return t.record("sigmoid", std::move(out), {x}, [x, y = std::move(y)](Tape& tape, const Matrix& g) {
        Matrix gx(g.rows(), g.cols());
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double s = y.data()[i];
            gx.data()[i] = g.data()[i] * s * (1.0 - s);
        }
        tape.accumulate(x, gx);
    });
}

Var log1p(Var x) {
    Tape& t = tape_of(x);
    Matrix out = map(x.value(), [](double v) {
        if (v <= -1.0) {
            throw ArgumentError("log1p argument must exceed -1");
        }
        return std::log1p(v);
    });
    return t.record("log1p", std::move(out), {x}, [x](Tape& tape, const Matrix& g) {
        const Matrix& xv = x.value();
        Matrix gx(g.rows(), g.cols());
        for (std::size_t i = 0; i < g.size(); ++i) {
            gx.data()[i] = g.data()[i] / (1.0 + xv.data()[i]);
        }
        tape.accumulate(x, gx);
    });
}

Var square(Var x) {
    Tape& t = tape_of(x);
    Matrix out = map(x.value(), [](double v) { return v * v; });
    return t.record("square", std::move(out), {x}, [x](Tape& tape, const Matrix& g) {
        const Matrix& xv = x.value();
        Matrix gx(g.rows(), g.cols());
        for (std::size_t i = 0; i < g.size(); ++i) {
            gx.data()[i] = 2.0 * xv.data()[i] * g.data()[i];
        }
        tape.accumulate(x, gx);
    });
}

std::vector<double> softmax(std::span<const double> logits) {
    if (logits.empty()) {
        throw ArgumentError("softmax of an empty vector");
    }
    const double mx = *std::max_element(logits.begin(), logits.end());
    std::vector<double> out(logits.size());
    double total = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - mx);
        total += out[i];
    }
    for (double& v : out) {
        v /= total;
    }
    return out;
}

Var softmax_rows(Var x) {
    Tape& t = tape_of(x);
    const Matrix& xv = x.value();
    if (xv.cols() == 0) {
        throw ArgumentError("softmax of an empty row");
    }
    Matrix out(xv.rows(), xv.cols());
    for (std::size_t i = 0; i < xv.rows(); ++i) {
        auto s = softmax(xv.row(i));
        std::copy(s.begin(), s.end(), out.row(i).begin());
    }
    Matrix y = out;
    return t.record("softmax", std::move(out), {x},
                    [x, y = std::move(y)](Tape& tape, const Matrix& g) {
                        Matrix gx(g.rows(), g.cols());
                        for (std::size_t i = 0; i < g.rows(); ++i) {
                            double dot = 0.0;
                            for (std::size_t j = 0; j < g.cols(); ++j) {
                                dot += g(i, j) * y(i, j);
                            }
                            for (std::size_t j = 0; j < g.cols(); ++j) {
                                gx(i, j) = y(i, j) * (g(i, j) - dot);
                            }
                        }
                        tape.accumulate(x, gx);
                    });
}

Var mean_rows(Var x) {
    Tape& t = tape_of(x);
    const Matrix& xv = x.value();
    if (xv.rows() == 0) {
        throw ArgumentError("mean_rows of a matrix with no rows");
    }
    Matrix out(1, xv.cols());
    for (std::size_t i = 0; i < xv.rows(); ++i) {
        for (std::size_t j = 0; j < xv.cols(); ++j) {
            out(0, j) += xv(i, j);
        }
    }
    const double inv = 1.0 / static_cast<double>(xv.rows());
    for (double& v : out.data()) {
        v *= inv;
    }
    const std::size_t n = xv.rows();
    return t.record("mean_rows", std::move(out), {x}, [x, n, inv](Tape& tape, const Matrix& g) {
        Matrix gx(n, g.cols());
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < g.cols(); ++j) {
                gx(i, j) = g(0, j) * inv;
            }
        }
        tape.accumulate(x, gx);
    });
}

Var sum(Var x) {
    Tape& t = tape_of(x);
    double acc = 0.0;
    for (double v : x.value().data()) {
        acc += v;
    }
    return t.record("sum", Matrix(1, 1, acc), {x}, [x](Tape& tape, const Matrix& g) {
        tape.accumulate(x, Matrix(x.rows(), x.cols(), g(0, 0)));
    });
}

Var mean(Var x) {
    Tape& t = tape_of(x);
    const std::size_t n = x.value().size();
    if (n == 0) {
        throw ArgumentError("mean of an empty matrix");
    }
    double acc = 0.0;
    for (double v : x.value().data()) {
        acc += v;
    }
    const double inv = 1.0 / static_cast<double>(n);
    return t.record("mean", Matrix(1, 1, acc * inv), {x}, [x, inv](Tape& tape, const Matrix& g) {
        tape.accumulate(x, Matrix(x.rows(), x.cols(), g(0, 0) * inv));
    });
}

Var gather_rows(Var x, std::vector<std::size_t> rows) {
    Tape& t = tape_of(x);
    const Matrix& xv = x.value();
    Matrix out(rows.size(), xv.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] >= xv.rows()) {
            throw ArgumentError("gather_rows index " + std::to_string(rows[i]) +
                                " out of range for " + xv.shape_string());
        }
        auto src = xv.row(rows[i]);
        std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    return t.record("gather_rows", std::move(out), {x},
                    [x, idx = std::move(rows)](Tape& tape, const Matrix& g) {
                        Matrix gx(x.rows(), x.cols());
                        for (std::size_t i = 0; i < idx.size(); ++i) {
                            auto dst = gx.row(idx[i]);
                            auto src = g.row(i);
                            for (std::size_t j = 0; j < src.size(); ++j) {
                                dst[j] += src[j];
                            }
                        }
                        tape.accumulate(x, gx);
                    });
}

Var concat_cols(std::span<const Var> parts) {
    if (parts.empty()) {
        throw ArgumentError("concat_cols of nothing");
    }
    Tape& t = tape_of(parts.front());
    const std::size_t n = parts.front().rows();
    std::size_t total = 0;
    for (const Var& p : parts) {
        if (p.rows() != n) {
            throw DimensionError("concat_cols row mismatch: " + parts.front().value().shape_string() +
                                 " vs " + p.value().shape_string());
        }
        total += p.cols();
    }
    Matrix out(n, total);
    std::size_t offset = 0;
    for (const Var& p : parts) {
        const Matrix& pv = p.value();
        for (std::size_t i = 0; i < n; ++i) {
            std::copy(pv.row(i).begin(), pv.row(i).end(), out.row(i).begin() + static_cast<std::ptrdiff_t>(offset));
        }
        offset += pv.cols();
    }
    std::vector<Var> inputs(parts.begin(), parts.end());
    return t.record("concat_cols", std::move(out), parts, [inputs](Tape& tape, const Matrix& g) {
        std::size_t off = 0;
        for (const Var& p : inputs) {
            const std::size_t c = p.cols();
            if (tape.requires_grad(p)) {
                Matrix gp(g.rows(), c);
                for (std::size_t i = 0; i < g.rows(); ++i) {
                    for (std::size_t j = 0; j < c; ++j) {
                        gp(i, j) = g(i, off + j);
                    }
                }
                tape.accumulate(p, gp);
            }
            off += c;
        }
    });
}

Var element(Var x, std::size_t r, std::size_t c) {
    Tape& t = tape_of(x);
    const Matrix& xv = x.value();
    if (r >= xv.rows() || c >= xv.cols()) {
        throw ArgumentError("element index out of range for " + xv.shape_string());
    }
    return t.record("element", Matrix(1, 1, xv(r, c)), {x}, [x, r, c](Tape& tape, const Matrix& g) {
        Matrix gx(x.rows(), x.cols());
        gx(r, c) = g(0, 0);
        tape.accumulate(x, gx);
    });
}

} // namespace good
