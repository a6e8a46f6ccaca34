/******************************************************************************
 *
 * smokecap - single-view smoke density and velocity reconstruction
 *
 * This program is free software, distributed under the terms of the
 * Apache License, Version 2.0
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Sparse matrices and conjugate gradients
 *
 ******************************************************************************/
#include "smokecap/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace smokecap {

namespace {

void check_length(std::size_t expected, std::size_t actual, const char* what)
{
    if (expected != actual)
        throw std::invalid_argument(std::string(what) + ": dimension mismatch, expected " + std::to_string(expected) +
                                    ", got " + std::to_string(actual));
}

} // namespace

SparseMatrix::SparseMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), row_ptr_(rows + 1, 0), t_row_ptr_(cols + 1, 0)
{
}

SparseMatrix SparseMatrix::from_triplets(std::size_t rows, std::size_t cols, std::vector<Triplet> triplets)
{
    for (const auto& t : triplets) {
        if (t.row >= rows || t.col >= cols)
            throw std::out_of_range("SparseMatrix: triplet (" + std::to_string(t.row) + ", " + std::to_string(t.col) +
                                    ") outside " + std::to_string(rows) + "x" + std::to_string(cols));
    }
    std::sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
        return a.row != b.row ? a.row < b.row : a.col < b.col;
    });

    SparseMatrix m(rows, cols);
    m.col_idx_.reserve(triplets.size());
    m.values_.reserve(triplets.size());
    std::size_t i = 0;
    for (std::size_t r = 0; r < rows; ++r) {
        while (i < triplets.size() && triplets[i].row == r) {
            const std::size_t c = triplets[i].col;
            double w = 0.0;
            while (i < triplets.size() && triplets[i].row == r && triplets[i].col == c) w += triplets[i++].weight;
            m.col_idx_.push_back(static_cast<std::uint32_t>(c));
            m.values_.push_back(w);
        }
        m.row_ptr_[r + 1] = m.values_.size();
    }
    m.build_transpose();
    return m;
}

SparseMatrix SparseMatrix::from_rows(std::size_t cols, const std::vector<std::vector<std::pair<std::uint32_t, double>>>& rows)
{
    SparseMatrix m(rows.size(), cols);
    std::size_t total = 0;
    for (const auto& r : rows) total += r.size();
    m.col_idx_.reserve(total);
    m.values_.reserve(total);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (const auto& [c, w] : rows[r]) {
            if (c >= cols) throw std::out_of_range("SparseMatrix: column index out of range");
            m.col_idx_.push_back(c);
            m.values_.push_back(w);
        }
        m.row_ptr_[r + 1] = m.values_.size();
    }
    m.build_transpose();
    return m;
}

void SparseMatrix::build_transpose()
{
    t_row_ptr_.assign(cols_ + 1, 0);
    for (auto c : col_idx_) ++t_row_ptr_[c + 1];
    for (std::size_t c = 0; c < cols_; ++c) t_row_ptr_[c + 1] += t_row_ptr_[c];
    t_col_idx_.resize(col_idx_.size());
    t_values_.resize(values_.size());
    std::vector<std::size_t> fill(t_row_ptr_.begin(), t_row_ptr_.end() - 1);
    for (std::size_t r = 0; r < rows_; ++r) {
        for (std::size_t e = row_ptr_[r]; e < row_ptr_[r + 1]; ++e) {
            const std::size_t dst = fill[col_idx_[e]]++;
            t_col_idx_[dst] = static_cast<std::uint32_t>(r);
            t_values_[dst] = values_[e];
        }
    }
}

void SparseMatrix::apply(std::span<const double> v, std::span<double> out) const
{
    check_length(cols_, v.size(), "SparseMatrix::apply input");
    check_length(rows_, out.size(), "SparseMatrix::apply output");
    for (std::size_t r = 0; r < rows_; ++r) {
        double s = 0.0;
        for (std::size_t e = row_ptr_[r]; e < row_ptr_[r + 1]; ++e) s += values_[e] * v[col_idx_[e]];
        out[r] = s;
    }
}

Vec SparseMatrix::apply(std::span<const double> v) const
{
    Vec out(rows_);
    apply(v, out);
    return out;
}

void SparseMatrix::apply_transpose(std::span<const double> v, std::span<double> out) const
{
    check_length(rows_, v.size(), "SparseMatrix::apply_transpose input");
    check_length(cols_, out.size(), "SparseMatrix::apply_transpose output");
    for (std::size_t c = 0; c < cols_; ++c) {
        double s = 0.0;
        for (std::size_t e = t_row_ptr_[c]; e < t_row_ptr_[c + 1]; ++e) s += t_values_[e] * v[t_col_idx_[e]];
        out[c] = s;
    }
}

void SparseMatrix::apply_normal(std::span<const double> v, std::span<double> out) const
{
    check_length(cols_, v.size(), "SparseMatrix::apply_normal input");
    check_length(cols_, out.size(), "SparseMatrix::apply_normal output");
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t r = 0; r < rows_; ++r) {
        const std::size_t b = row_ptr_[r], e = row_ptr_[r + 1];
        double s = 0.0;
        for (std::size_t k = b; k < e; ++k) s += values_[k] * v[col_idx_[k]];
        if (s == 0.0) continue;
        for (std::size_t k = b; k < e; ++k) out[col_idx_[k]] += values_[k] * s;
    }
}

Vec SparseMatrix::apply_transpose(std::span<const double> v) const
{
    Vec out(cols_);
    apply_transpose(v, out);
    return out;
}

double SparseMatrix::coeff(std::size_t row, std::size_t col) const
{
    if (row >= rows_ || col >= cols_) throw std::out_of_range("SparseMatrix::coeff");
    const auto first = col_idx_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[row]);
    const auto last = col_idx_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[row + 1]);
    const auto it = std::lower_bound(first, last, static_cast<std::uint32_t>(col));
    if (it == last || *it != col) return 0.0;
    return values_[static_cast<std::size_t>(it - col_idx_.begin())];
}

Vec SparseMatrix::column_norms_squared() const
{
    Vec d(cols_, 0.0);
    for (std::size_t c = 0; c < cols_; ++c)
        for (std::size_t e = t_row_ptr_[c]; e < t_row_ptr_[c + 1]; ++e) d[c] += t_values_[e] * t_values_[e];
    return d;
}

double SparseMatrix::row_sum(std::size_t row) const
{
    double s = 0.0;
    for (std::size_t e = row_ptr_[row]; e < row_ptr_[row + 1]; ++e) s += values_[e];
    return s;
}

SparseMatrix SparseMatrix::vstack(const SparseMatrix& top, const SparseMatrix& bottom, double bottom_weight)
{
    check_length(top.cols_, bottom.cols_, "SparseMatrix::vstack");
    SparseMatrix m(top.rows_ + bottom.rows_, top.cols_);
    m.col_idx_ = top.col_idx_;
    m.values_ = top.values_;
    std::copy(top.row_ptr_.begin(), top.row_ptr_.end(), m.row_ptr_.begin());
    m.col_idx_.insert(m.col_idx_.end(), bottom.col_idx_.begin(), bottom.col_idx_.end());
    for (double w : bottom.values_) m.values_.push_back(bottom_weight * w);
    const std::size_t offset = top.values_.size();
    for (std::size_t r = 0; r < bottom.rows_; ++r) m.row_ptr_[top.rows_ + r + 1] = offset + bottom.row_ptr_[r + 1];
    m.build_transpose();
    return m;
}

double dot(std::span<const double> a, std::span<const double> b)
{
    check_length(a.size(), b.size(), "dot");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double norm_inf(std::span<const double> a)
{
    double m = 0.0;
    for (double x : a) m = std::max(m, std::abs(x));
    return m;
}

CgResult cg_solve(const LinearOperator& op, std::span<const double> rhs, const CgOptions& options,
                  std::span<const double> initial_guess)
{
    const std::size_t n = op.dimension;
    check_length(n, rhs.size(), "cg_solve rhs");
    if (!op.diagonal.empty()) check_length(n, op.diagonal.size(), "cg_solve diagonal");
    if (!(options.tol > 0.0)) throw std::invalid_argument("cg_solve: tolerance must be positive");

    CgResult result;
    result.x.assign(n, 0.0);
    if (!initial_guess.empty()) {
        check_length(n, initial_guess.size(), "cg_solve initial guess");
        std::copy(initial_guess.begin(), initial_guess.end(), result.x.begin());
    }

    const double rhs_norm = norm2(rhs);
    if (rhs_norm == 0.0) {
        std::fill(result.x.begin(), result.x.end(), 0.0);
        result.converged = true;
        return result;
    }

    Vec r(n), z(n), p(n), q(n);
    op.apply(result.x, q);
    for (std::size_t i = 0; i < n; ++i) r[i] = rhs[i] - q[i];

    Vec inv_diag(n, 1.0);
    for (std::size_t i = 0; i < op.diagonal.size(); ++i)
        if (op.diagonal[i] > 0.0) inv_diag[i] = 1.0 / op.diagonal[i];

    const bool custom = static_cast<bool>(op.preconditioner);
    auto precondition = [&]() {
        if (custom) op.preconditioner(r, z);
        else
            for (std::size_t i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
    };

    const double target = options.tol * rhs_norm;
    double r_norm = norm2(r);
    precondition();
    p = z;
    double rz = dot(r, z);

    int it = 0;
    while (r_norm > target && it < options.max_iter) {
        op.apply(p, q);
        const double pq = dot(p, q);
        if (!(pq > 0.0)) break; // direction in the null space of a semidefinite op
        const double alpha = rz / pq;
        double rr = 0.0, rz_next = 0.0;
        if (custom) {
            for (std::size_t i = 0; i < n; ++i) {
                result.x[i] += alpha * p[i];
                r[i] -= alpha * q[i];
                rr += r[i] * r[i];
            }
            op.preconditioner(r, z);
            rz_next = dot(r, z);
        } else {
            for (std::size_t i = 0; i < n; ++i) {
                result.x[i] += alpha * p[i];
                r[i] -= alpha * q[i];
                z[i] = inv_diag[i] * r[i];
                rr += r[i] * r[i];
                rz_next += r[i] * z[i];
            }
        }
        ++it;
        r_norm = std::sqrt(rr);
        if (r_norm <= target) break;
        const double beta = rz_next / rz;
        rz = rz_next;
        for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    }

    result.iterations = it;
    result.relative_residual = r_norm / rhs_norm;
    result.converged = r_norm <= target;
    return result;
}

} // namespace smokecap
