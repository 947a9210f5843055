#include "good/nn.hpp"

#include <cmath>

#include "good/errors.hpp"

namespace good {

BatchNorm::BatchNorm(std::string name, std::size_t features)
    : gamma(name + ".gamma", Matrix(1, features, 1.0)),
      beta(name + ".beta", Matrix(1, features, 0.0)),
      running_mean(1, features, 0.0),
      running_var(1, features, 1.0) {}

void BatchNorm::reset_identity() {
    gamma.value.fill(1.0);
    beta.value.fill(0.0);
    running_mean.fill(0.0);
    running_var.fill(1.0);
}

Var batch_norm(Var x, BatchNorm& bn, Mode mode) {
    Tape& tape = *x.tape();
    const Matrix& xv = x.value();
    const std::size_t n = xv.rows();
    const std::size_t d = xv.cols();
    if (d != bn.features()) {
        throw DimensionError("batch_norm feature mismatch: input " + xv.shape_string() +
                             " vs state with " + std::to_string(bn.features()) + " features");
    }
    if (n == 0) {
        throw ArgumentError("batch_norm needs at least one row");
    }
    if (!(bn.epsilon > 0.0)) {
        throw ArgumentError("batch_norm epsilon must be positive");
    }
    Var gamma = tape.parameter(bn.gamma);
    Var beta = tape.parameter(bn.beta);

    Matrix mean(1, d);
    Matrix var(1, d);
    if (mode == Mode::Train) {
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < d; ++j) {
                mean(0, j) += xv(i, j);
            }
        }
        for (double& v : mean.data()) {
            v /= static_cast<double>(n);
        }
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < d; ++j) {
                const double c = xv(i, j) - mean(0, j);
                var(0, j) += c * c;
            }
        }
        for (double& v : var.data()) {
            v /= static_cast<double>(n);
        }
        for (std::size_t j = 0; j < d; ++j) {
            bn.running_mean(0, j) = (1.0 - bn.momentum) * bn.running_mean(0, j) + bn.momentum * mean(0, j);
            bn.running_var(0, j) = (1.0 - bn.momentum) * bn.running_var(0, j) + bn.momentum * var(0, j);
        }
    } else {
        mean = bn.running_mean;
        var = bn.running_var;
    }

    Matrix inv_std(1, d);
    for (std::size_t j = 0; j < d; ++j) {
        inv_std(0, j) = 1.0 / std::sqrt(var(0, j) + bn.epsilon);
    }
    Matrix xhat(n, d);
    Matrix out(n, d);
    const Matrix& gv = gamma.value();
    const Matrix& bv = beta.value();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            xhat(i, j) = (xv(i, j) - mean(0, j)) * inv_std(0, j);
            out(i, j) = gv(0, j) * xhat(i, j) + bv(0, j);
        }
    }

    const bool batch_stats = mode == Mode::Train;
    return tape.record(
        "batch_norm", std::move(out), {x, gamma, beta},
        [x, gamma, beta, xhat = std::move(xhat), inv_std = std::move(inv_std), batch_stats](
            Tape& t, const Matrix& g) {
            const std::size_t rows = g.rows();
            const std::size_t cols = g.cols();
            const Matrix& gv2 = gamma.value();
            Matrix dgamma(1, cols);
            Matrix dbeta(1, cols);
            for (std::size_t i = 0; i < rows; ++i) {
                for (std::size_t j = 0; j < cols; ++j) {
                    dgamma(0, j) += g(i, j) * xhat(i, j);
                    dbeta(0, j) += g(i, j);
                }
            }
            if (t.requires_grad(x)) {
                Matrix dx(rows, cols);
                if (batch_stats) {
                    const double inv_n = 1.0 / static_cast<double>(rows);
                    for (std::size_t j = 0; j < cols; ++j) {
                        // dxhat = g * gamma; sums over the batch of dxhat and dxhat * xhat
                        const double sum_dxhat = dbeta(0, j) * gv2(0, j);
                        const double sum_dxhat_xhat = dgamma(0, j) * gv2(0, j);
                        for (std::size_t i = 0; i < rows; ++i) {
                            const double dxhat = g(i, j) * gv2(0, j);
                            dx(i, j) = inv_n * inv_std(0, j) *
                                       (static_cast<double>(rows) * dxhat - sum_dxhat -
                                        xhat(i, j) * sum_dxhat_xhat);
                        }
                    }
                } else {
                    for (std::size_t i = 0; i < rows; ++i) {
                        for (std::size_t j = 0; j < cols; ++j) {
                            dx(i, j) = g(i, j) * gv2(0, j) * inv_std(0, j);
                        }
                    }
                }
                t.accumulate(x, dx);
            }
            t.accumulate(gamma, dgamma);
            t.accumulate(beta, dbeta);
        });
}

Var dropout(Var x, double rate, Mode mode, Rng& rng) {
    if (!(rate >= 0.0) || rate >= 1.0) {
        throw ArgumentError("dropout rate must lie in [0, 1), got " + std::to_string(rate));
    }
    if (mode == Mode::Eval || rate == 0.0) {
        return x;
    }
    Tape& tape = *x.tape();
    const Matrix& xv = x.value();
    const double keep_scale = 1.0 / (1.0 - rate);
    Matrix mask(xv.rows(), xv.cols());
    for (double& m : mask.data()) {
        m = uniform01(rng) < rate ? 0.0 : keep_scale;
    }
    Matrix out(xv.rows(), xv.cols());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out.data()[i] = xv.data()[i] * mask.data()[i];
    }
    return tape.record("dropout", std::move(out), {x},
                       [x, mask = std::move(mask)](Tape& t, const Matrix& g) {
                           Matrix gx(g.rows(), g.cols());
                           for (std::size_t i = 0; i < g.size(); ++i) {
                               gx.data()[i] = g.data()[i] * mask.data()[i];
                           }
                           t.accumulate(x, gx);
                       });
}

Matrix glorot_uniform(std::size_t rows, std::size_t cols, Rng& rng) {
    const double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
    Matrix w(rows, cols);
    for (double& v : w.data()) {
        v = a * (2.0 * uniform01(rng) - 1.0);
    }
    return w;
}

} // namespace good
