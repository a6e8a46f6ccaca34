/******************************************************************************
 *
 * smokecap - single-view smoke density and velocity reconstruction
 *
 * This program is free software, distributed under the terms of the
 * Apache License, Version 2.0
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Density sources
 *
 ******************************************************************************/
#include "smokecap/inflow.hpp"

#include <algorithm>
#include <stdexcept>

namespace smokecap {

double Inflow::total_rate() const
{
    double s = 0.0;
    for (std::size_t c : cells) s += rate[c];
    return s;
}

std::vector<bool> inflow_face_mask(const GridDims& d, const Inflow& inflow)
{
    std::vector<bool> in_region(d.cells(), false);
    for (std::size_t c : inflow.cells) in_region[c] = true;
    std::vector<bool> mask(d.total_faces(), false);
    for (std::size_t c : inflow.cells) {
        const int i = static_cast<int>(c % d.nx);
        const int j = static_cast<int>((c / d.nx) % d.ny);
        const int k = static_cast<int>(c / (static_cast<std::size_t>(d.nx) * d.ny));
        for (int axis = 0; axis < 3; ++axis) {
            int hi[3] = {i, j, k};
            ++hi[axis];
            mask[d.face_index(axis, i, j, k)] = true;
            mask[d.face_index(axis, hi[0], hi[1], hi[2])] = true;
        }
    }
    return mask;
}

void apply_inflow(ScalarField& density, MacField& velocity, const Inflow& inflow)
{
    if (inflow.empty()) return;
    const GridDims& d = density.dims();
    if (!(inflow.rate.dims() == d)) throw std::invalid_argument("apply_inflow: source grid does not match density grid");
    for (std::size_t c : inflow.cells) density[c] = std::max(0.0, density[c] + inflow.rate[c]);
    if (!inflow.velocity) return;

    const std::vector<bool> mask = inflow_face_mask(d, inflow);
    auto data = velocity.data();
    for (int axis = 0; axis < 3; ++axis) {
        const std::size_t off = d.face_offset(axis);
        for (std::size_t f = 0; f < d.faces(axis); ++f)
            if (mask[off + f]) data[off + f] = (*inflow.velocity)[axis];
    }
}

} // namespace smokecap
