/******************************************************************************
 *
 * smokecap - single-view smoke density and velocity reconstruction
 *
 * This program is free software, distributed under the terms of the
 * Apache License, Version 2.0
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Independent reference computations for the tests
 *
 * Everything here is written from the defining formulas with dense storage,
 * so it shares no code path with the library beyond its data types.
 *
 ******************************************************************************/
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

namespace oracle {

using Dense = std::vector<std::vector<double>>;

inline Dense zeros(std::size_t rows, std::size_t cols) { return Dense(rows, std::vector<double>(cols, 0.0)); }

inline std::vector<double> multiply(const Dense& a, const std::vector<double>& x)
{
    std::vector<double> y(a.size(), 0.0);
    for (std::size_t r = 0; r < a.size(); ++r)
        for (std::size_t c = 0; c < x.size(); ++c) y[r] += a[r][c] * x[c];
    return y;
}

inline Dense transpose(const Dense& a)
{
    if (a.empty()) return {};
    Dense t = zeros(a[0].size(), a.size());
    for (std::size_t r = 0; r < a.size(); ++r)
        for (std::size_t c = 0; c < a[r].size(); ++c) t[c][r] = a[r][c];
    return t;
}

inline Dense multiply(const Dense& a, const Dense& b)
{
    Dense out = zeros(a.size(), b.empty() ? 0 : b[0].size());
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t k = 0; k < b.size(); ++k)
            for (std::size_t j = 0; j < out[i].size(); ++j) out[i][j] += a[i][k] * b[k][j];
    return out;
}

//! Gaussian elimination with partial pivoting.
inline std::vector<double> solve(Dense a, std::vector<double> b)
{
    const std::size_t n = b.size();
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
        if (a[piv][col] == 0.0) throw std::runtime_error("oracle::solve: singular matrix");
        std::swap(a[piv], a[col]);
        std::swap(b[piv], b[col]);
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = a[r][col] / a[col][col];
            if (f == 0.0) continue;
            for (std::size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
            b[r] -= f * b[col];
        }
    }
    std::vector<double> x(n);
    for (std::size_t i = n; i-- > 0;) {
        double s = b[i];
        for (std::size_t c = i + 1; c < n; ++c) s -= a[i][c] * x[c];
        x[i] = s / a[i][i];
    }
    return x;
}

//! argmin 1/2 x^T H x - g^T x subject to x >= lower, by enumerating every
//! active set (n <= 16). H must be symmetric positive definite.
inline std::vector<double> box_qp(const Dense& h, const std::vector<double>& g, const std::vector<double>& lower)
{
    const std::size_t n = g.size();
    if (n > 16) throw std::invalid_argument("oracle::box_qp: too many unknowns for enumeration");
    auto energy = [&](const std::vector<double>& x) {
        double e = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            e -= g[i] * x[i];
            for (std::size_t j = 0; j < n; ++j) e += 0.5 * x[i] * h[i][j] * x[j];
        }
        return e;
    };
    std::vector<double> best;
    double best_energy = INFINITY;
    for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
        std::vector<std::size_t> free;
        std::vector<double> x(n);
        for (std::size_t i = 0; i < n; ++i) {
            if (mask & (1u << i)) x[i] = lower[i];
            else free.push_back(i);
        }
        if (!free.empty()) {
            Dense hf = zeros(free.size(), free.size());
            std::vector<double> rhs(free.size());
            for (std::size_t a = 0; a < free.size(); ++a) {
                rhs[a] = g[free[a]];
                for (std::size_t i = 0; i < n; ++i)
                    if (mask & (1u << i)) rhs[a] -= h[free[a]][i] * lower[i];
                for (std::size_t b = 0; b < free.size(); ++b) hf[a][b] = h[free[a]][free[b]];
            }
            const std::vector<double> xf = solve(hf, rhs);
            for (std::size_t a = 0; a < free.size(); ++a) x[free[a]] = xf[a];
        }
        bool feasible = true;
        for (std::size_t i = 0; i < n; ++i) feasible &= x[i] >= lower[i] - 1e-12;
        if (!feasible) continue;
        const double e = energy(x);
        if (e < best_energy) {
            best_energy = e;
            best = x;
        }
    }
    return best;
}

inline double rel_diff(const std::vector<double>& a, const std::vector<double>& b)
{
    double d = 0.0, n = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        d += (a[i] - b[i]) * (a[i] - b[i]);
        n += b[i] * b[i];
    }
    return n > 0.0 ? std::sqrt(d / n) : std::sqrt(d);
}

inline std::vector<double> random_vector(std::size_t n, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0)
{
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<double> v(n);
    for (double& x : v) x = u(rng);
    return v;
}

} // namespace oracle
