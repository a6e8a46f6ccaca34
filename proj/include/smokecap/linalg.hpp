/******************************************************************************
 *
 * smokecap - single-view smoke density and velocity reconstruction
 *
 * This program is free software, distributed under the terms of the
 * Apache License, Version 2.0
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Sparse matrices, matrix-free operators and a Jacobi-preconditioned CG
 *
 ******************************************************************************/
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace smokecap {

using Vec = std::vector<double>;

struct Triplet {
    std::size_t row;
    std::size_t col;
    double weight;
};

//! Compressed sparse row matrix. A transposed copy is kept alongside so that
//! both products run row-wise with a fixed summation order.
class SparseMatrix {
public:
    SparseMatrix() = default;
    SparseMatrix(std::size_t rows, std::size_t cols);

    //! Duplicate (row, col) triplets are summed.
    static SparseMatrix from_triplets(std::size_t rows, std::size_t cols, std::vector<Triplet> triplets);

    //! Builds from per-row entry lists whose columns are already sorted and unique.
    static SparseMatrix from_rows(std::size_t cols, const std::vector<std::vector<std::pair<std::uint32_t, double>>>& rows);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t nnz() const { return values_.size(); }

    Vec apply(std::span<const double> v) const;
    void apply(std::span<const double> v, std::span<double> out) const;
    Vec apply_transpose(std::span<const double> v) const;
    void apply_transpose(std::span<const double> v, std::span<double> out) const;
    //! out = M^T M v in a single pass over the rows.
    void apply_normal(std::span<const double> v, std::span<double> out) const;

    //! Entry lookup, zero when absent.
    double coeff(std::size_t row, std::size_t col) const;

    //! diag(M^T M), i.e. squared column norms.
    Vec column_norms_squared() const;
    double row_sum(std::size_t row) const;

    //! [top; weight * bottom], column counts must match.
    static SparseMatrix vstack(const SparseMatrix& top, const SparseMatrix& bottom, double bottom_weight);

    template <class Fn>
    void for_each_in_row(std::size_t row, Fn&& fn) const
    {
        for (std::size_t e = row_ptr_[row]; e < row_ptr_[row + 1]; ++e) fn(static_cast<std::size_t>(col_idx_[e]), values_[e]);
    }

private:
    void build_transpose();

    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<std::size_t> row_ptr_{0};
    std::vector<std::uint32_t> col_idx_;
    Vec values_;
    std::vector<std::size_t> t_row_ptr_{0};
    std::vector<std::uint32_t> t_col_idx_;
    Vec t_values_;
};

//! Matrix-free symmetric operator. `diagonal` feeds the Jacobi preconditioner
//! and may be left empty (identity preconditioner). A non-empty
//! `preconditioner` (symmetric positive definite, out = M^-1 in) replaces it.
struct LinearOperator {
    std::size_t dimension = 0;
    std::function<void(std::span<const double>, std::span<double>)> apply;
    Vec diagonal;
    std::function<void(std::span<const double>, std::span<double>)> preconditioner;
};

struct CgOptions {
    double tol = 1e-4;
    int max_iter = 600;
};

struct CgResult {
    Vec x;
    int iterations = 0;
    double relative_residual = 0.0;
    bool converged = false;
};

//! Solves op(x) = rhs for symmetric positive (semi)definite op. Returns the
//! best iterate and the reached residual when max_iter runs out.
CgResult cg_solve(const LinearOperator& op, std::span<const double> rhs, const CgOptions& options,
                  std::span<const double> initial_guess = {});

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);
double norm_inf(std::span<const double> a);

} // namespace smokecap
