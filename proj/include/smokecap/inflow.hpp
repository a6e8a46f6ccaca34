/******************************************************************************
 *
 * smokecap - single-view smoke density and velocity reconstruction
 *
 * This program is free software, distributed under the terms of the
 * Apache License, Version 2.0
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Density sources shared by the forward simulator and the reconstruction
 *
 ******************************************************************************/
#pragma once

#include <optional>
#include <vector>

#include "smokecap/grid.hpp"

namespace smokecap {

//! Per-cell emission added every frame, with an optional prescribed velocity
//! on the faces bounding the region.
struct Inflow {
    ScalarField rate;
    std::vector<std::size_t> cells;
    std::optional<Vec3> velocity;

    bool empty() const { return cells.empty(); }
    double total_rate() const;
};

//! Adds the emission (clamped >= 0) and overwrites velocity on region faces.
void apply_inflow(ScalarField& density, MacField& velocity, const Inflow& inflow);

//! True for faces whose left or right cell belongs to the region.
std::vector<bool> inflow_face_mask(const GridDims& dims, const Inflow& inflow);

} // namespace smokecap
