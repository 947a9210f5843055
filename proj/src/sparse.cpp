#include "good/sparse.hpp"

#include <algorithm>

#include "good/errors.hpp"

namespace good {

double SparseMatrix::at(std::size_t r, std::size_t c) const {
    const auto first = col_idx.begin() + static_cast<std::ptrdiff_t>(row_ptr[r]);
    const auto last = col_idx.begin() + static_cast<std::ptrdiff_t>(row_ptr[r + 1]);
    const auto it = std::lower_bound(first, last, c);
    if (it == last || *it != c) {
        return 0.0;
    }
    return values[static_cast<std::size_t>(it - col_idx.begin())];
}

Matrix SparseMatrix::to_dense() const {
    Matrix out(n, n);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t k = row_ptr[r]; k < row_ptr[r + 1]; ++k) {
            out(r, col_idx[k]) = values[k];
        }
    }
    return out;
}

Matrix sparse_dense_product(const SparseMatrix& a, const Matrix& h) {
    if (a.n != h.rows()) {
        throw DimensionError("sparse product shape mismatch: [" + std::to_string(a.n) + "x" +
                             std::to_string(a.n) + "] * " + h.shape_string());
    }
    Matrix out(a.n, h.cols());
    for (std::size_t r = 0; r < a.n; ++r) {
        auto out_row = out.row(r);
        for (std::size_t k = a.row_ptr[r]; k < a.row_ptr[r + 1]; ++k) {
            const double w = a.values[k];
            auto h_row = h.row(a.col_idx[k]);
            for (std::size_t j = 0; j < h.cols(); ++j) {
                out_row[j] += w * h_row[j];
            }
        }
    }
    return out;
}

Matrix sparse_transpose_dense_product(const SparseMatrix& a, const Matrix& h) {
    if (a.n != h.rows()) {
        throw DimensionError("sparse transpose product shape mismatch: [" + std::to_string(a.n) +
                             "x" + std::to_string(a.n) + "]^T * " + h.shape_string());
    }
    Matrix out(a.n, h.cols());
    for (std::size_t r = 0; r < a.n; ++r) {
        auto h_row = h.row(r);
        for (std::size_t k = a.row_ptr[r]; k < a.row_ptr[r + 1]; ++k) {
            const double w = a.values[k];
            auto out_row = out.row(a.col_idx[k]);
            for (std::size_t j = 0; j < h.cols(); ++j) {
                out_row[j] += w * h_row[j];
            }
        }
    }
    return out;
}

} // namespace good
