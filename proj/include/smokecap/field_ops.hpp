/******************************************************************************
 *
 * smokecap - single-view smoke density and velocity reconstruction
 *
 * This program is free software, distributed under the terms of the
 * Apache License, Version 2.0
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Interpolation, semi-Lagrangian advection, MAC differential operators,
 * divergence-free projection and grid transfer
 *
 ******************************************************************************/
#pragma once

#include <array>

#include "smokecap/grid.hpp"
#include "smokecap/linalg.hpp"

namespace smokecap {

//! Clamped trilinear interpolation at world position p.
double interpolate_scalar(const ScalarField& f, const Vec3& p);
//! Per-component trilinear interpolation at world position p.
Vec3 interpolate_mac(const MacField& v, const Vec3& p);

//! Same as above with p given in cell units (world / dx).
double sample_scalar_cells(const ScalarField& f, const Vec3& p_cells);
Vec3 sample_mac_cells(const MacField& v, const Vec3& p_cells);

//! Single-step semi-Lagrangian backtrace; dt in frames, velocity in cells/frame.
ScalarField advect_scalar(const ScalarField& f, const MacField& v, double dt = 1.0);
MacField advect_mac(const MacField& v, const MacField& carrier, double dt = 1.0);

//! MAC divergence per fluid/inflow cell, zero in obstacle and empty cells.
ScalarField divergence(const MacField& v, const FlagGrid& flags);

//! Cell-centered gradient (central differences, one-sided at the boundary), per world unit.
std::array<ScalarField, 3> gradient_scalar(const ScalarField& f);

struct ProjectionStats {
    int iterations = 0;
    double relative_residual = 0.0;
    double max_divergence_before = 0.0;
    double max_divergence_after = 0.0;
};

//! Pressure projection on a fixed flag layout. The Poisson matrix is assembled
//! once and reused across calls. Obstacle faces are solid walls, empty cells
//! and the domain boundary are open (p = 0).
class DivergenceProjector {
public:
    explicit DivergenceProjector(const FlagGrid& flags, int max_iter = 5000);

    //! Result satisfies max |div| <= tol * max|v| / dx over fluid cells.
    MacField project(const MacField& v, double tol, ProjectionStats* stats = nullptr) const;

    const FlagGrid& flags() const { return flags_; }

private:
    FlagGrid flags_;
    std::vector<std::int64_t> cell_to_row_;
    std::vector<std::size_t> row_to_cell_;
    SparseMatrix poisson_;
    Vec diagonal_;
    int max_iter_;
};

MacField project_divergence_free(const MacField& v, const FlagGrid& flags, double tol, ProjectionStats* stats = nullptr);

//! 2x volume averaging. Odd extents average the children that exist.
ScalarField restrict_field(const ScalarField& f);
//! Trilinear upsampling by an integer factor.
ScalarField prolong_field(const ScalarField& f, int factor = 2);
//! Face-flux averaging down. Velocities are rescaled to coarse cells/frame.
MacField restrict_field(const MacField& v);
//! Trilinear upsampling per component, rescaled to fine cells/frame.
MacField prolong_field(const MacField& v, int factor = 2);
//! Coarse flags: a coarse cell is an obstacle if any child is.
FlagGrid restrict_flags(const FlagGrid& flags);
//! Fine flags: every child copies its parent cell.
FlagGrid prolong_flags(const FlagGrid& flags, int factor = 2);

} // namespace smokecap
