#pragma once

#include <cstddef>
#include <vector>

#include "good/matrix.hpp"

namespace good {

/// Square compressed-sparse-row matrix, used for normalized adjacencies.
struct SparseMatrix {
    std::size_t n = 0;
    std::vector<std::size_t> row_ptr;  // n + 1 entries
    std::vector<std::size_t> col_idx;
    std::vector<double> values;

    std::size_t nnz() const noexcept { return values.size(); }
    double at(std::size_t r, std::size_t c) const;
    Matrix to_dense() const;
};

// out = A * h
Matrix sparse_dense_product(const SparseMatrix& a, const Matrix& h);
// out = A^T * h
Matrix sparse_transpose_dense_product(const SparseMatrix& a, const Matrix& h);

} // namespace good
