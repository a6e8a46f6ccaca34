/******************************************************************************
 *
 * smokecap - single-view smoke density and velocity reconstruction
 *
 * This program is free software, distributed under the terms of the
 * Apache License, Version 2.0
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Dense transport system assembled from the energy definition
 *
 ******************************************************************************/
#pragma once

#include "oracles.hpp"
#include "smokecap/recon_solver.hpp"

namespace oracle {

//! Independent of TransportSystem: T z per active cell, then T^T T plus every regularizer.
struct DenseTransport {
    Dense a;
    std::size_t nh = 0;
};

inline DenseTransport dense_transport(const smokecap::ScalarField& guess, const smokecap::VisualHull& hull,
                                      const smokecap::FlagGrid& flags, const smokecap::RegWeights& reg,
                                      bool perspective)
{
    const smokecap::GridDims& d = guess.dims();
    const std::size_t nh = hull.size(), n = nh + d.total_faces();
    Dense t = zeros(d.cells(), n);
    for (int k = 0; k < d.nz; ++k)
        for (int j = 0; j < d.ny; ++j)
            for (int i = 0; i < d.nx; ++i) {
                const std::size_t c = d.index(i, j, k);
                if (flags[c] == smokecap::CellFlag::Obstacle) continue;
                if (hull.contains(c)) t[c][static_cast<std::size_t>(hull.column(c))] = 1.0;
                const int idx[3] = {i, j, k};
                for (int a = 0; a < 3; ++a) {
                    int lo[3] = {i, j, k}, hi[3] = {i, j, k};
                    double span = 2.0;
                    if (idx[a] == 0) {
                        hi[a] = 1;
                        span = 1.0;
                    } else if (idx[a] == d.size(a) - 1) {
                        lo[a] = idx[a] - 1;
                        span = 1.0;
                    } else {
                        --lo[a];
                        ++hi[a];
                    }
                    // per-cell gradient, i.e. in units of the cell size
                    const double g = (guess(hi[0], hi[1], hi[2]) - guess(lo[0], lo[1], lo[2])) / span;
                    int up[3] = {i, j, k};
                    ++up[a];
                    t[c][nh + d.face_index(a, i, j, k)] += 0.5 * g;
                    t[c][nh + d.face_index(a, up[0], up[1], up[2])] += 0.5 * g;
                }
            }
    Dense a = multiply(transpose(t), t);
    for (std::size_t m = 0; m < nh; ++m) a[m][m] += reg.beta_phi;
    for (std::size_t f = nh; f < n; ++f) a[f][f] += reg.beta_u;
    auto couple = [&](std::size_t p, std::size_t q, double w) {
        a[p][p] += w;
        a[q][q] += w;
        a[p][q] -= w;
        a[q][p] -= w;
    };
    for (int k = 0; k < d.nz; ++k)
        for (int j = 0; j < d.ny; ++j)
            for (int i = 0; i < d.nx; ++i) {
                const std::size_t c = d.index(i, j, k);
                if (!hull.contains(c)) continue;
                const int next[3][3] = {{i + 1, j, k}, {i, j + 1, k}, {i, j, k + 1}};
                for (const auto& o : next)
                    if (d.inside(o[0], o[1], o[2]) && hull.contains(d.index(o[0], o[1], o[2])))
                        couple(static_cast<std::size_t>(hull.column(c)), static_cast<std::size_t>(hull.column(d.index(o[0], o[1], o[2]))),
                               reg.alpha_phi);
            }
    for (int ax = 0; ax < 3; ++ax) {
        const auto e = d.face_extent(ax);
        for (int k = 0; k < e[2]; ++k)
            for (int j = 0; j < e[1]; ++j)
                for (int i = 0; i < e[0]; ++i) {
                    const std::size_t f = nh + d.face_index(ax, i, j, k);
                    if (i + 1 < e[0]) couple(f, nh + d.face_index(ax, i + 1, j, k), reg.alpha_u);
                    if (j + 1 < e[1]) couple(f, nh + d.face_index(ax, i, j + 1, k), reg.alpha_u);
                    if (k + 1 < e[2]) couple(f, nh + d.face_index(ax, i, j, k + 1), reg.alpha_u);
                    if (ax == 2) a[f][f] += reg.lambda_tiko * (perspective && reg.adaptive_z ? smokecap::adaptive_z_weight(j, d.ny) : 1.0);
                }
    }
    for (int j = 0; j < d.ny; ++j)
        for (int i = 0; i < d.nx; ++i) {
            std::vector<std::size_t> row;
            for (int k = 0; k <= d.nz; ++k) {
                const bool below = k > 0 && hull.contains(d.index(i, j, k - 1));
                const bool above = k < d.nz && hull.contains(d.index(i, j, k));
                if (below || above) row.push_back(nh + d.face_index(2, i, j, k));
            }
            for (std::size_t p : row)
                for (std::size_t q : row) a[p][q] += reg.lambda_sum;
        }
    return {a, nh};
}

} // namespace oracle
