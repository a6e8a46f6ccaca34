/******************************************************************************
 *
 * smokecap - single-view smoke density and velocity reconstruction
 *
 * This program is free software, distributed under the terms of the
 * Apache License, Version 2.0
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Voxel grids: cell-centered scalars, staggered MAC velocities, cell flags
 *
 ******************************************************************************/
#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "smokecap/vec3.hpp"

namespace smokecap {

//! Uniform cubic cells, cell (i,j,k) spans [i*dx, (i+1)*dx] etc. in world units.
struct GridDims {
    int nx = 2;
    int ny = 2;
    int nz = 2;
    double dx = 1.0;

    void validate() const;

    std::size_t cells() const { return static_cast<std::size_t>(nx) * ny * nz; }
    std::size_t index(int i, int j, int k) const
    {
        return static_cast<std::size_t>(i) + static_cast<std::size_t>(nx) * (static_cast<std::size_t>(j) + static_cast<std::size_t>(ny) * k);
    }
    bool inside(int i, int j, int k) const { return i >= 0 && j >= 0 && k >= 0 && i < nx && j < ny && k < nz; }
    int size(int axis) const { return axis == 0 ? nx : (axis == 1 ? ny : nz); }

    //! Lattice extent of the faces normal to `axis`.
    std::array<int, 3> face_extent(int axis) const
    {
        std::array<int, 3> e{nx, ny, nz};
        ++e[static_cast<std::size_t>(axis)];
        return e;
    }
    std::size_t faces(int axis) const
    {
        const auto e = face_extent(axis);
        return static_cast<std::size_t>(e[0]) * e[1] * e[2];
    }
    std::size_t total_faces() const { return faces(0) + faces(1) + faces(2); }
    std::size_t face_offset(int axis) const
    {
        std::size_t o = 0;
        for (int a = 0; a < axis; ++a) o += faces(a);
        return o;
    }
    //! Index of face (i,j,k) normal to `axis` within the packed MAC layout.
    std::size_t face_index(int axis, int i, int j, int k) const
    {
        const auto e = face_extent(axis);
        return face_offset(axis) + static_cast<std::size_t>(i) +
               static_cast<std::size_t>(e[0]) * (static_cast<std::size_t>(j) + static_cast<std::size_t>(e[1]) * k);
    }

    Vec3 extent() const { return {nx * dx, ny * dx, nz * dx}; }

    bool operator==(const GridDims&) const = default;
};

class ScalarField {
public:
    ScalarField() = default;
    explicit ScalarField(const GridDims& dims, double value = 0.0);

    const GridDims& dims() const { return dims_; }
    std::span<double> values() { return values_; }
    std::span<const double> values() const { return values_; }
    std::size_t size() const { return values_.size(); }

    double& operator()(int i, int j, int k) { return values_[dims_.index(i, j, k)]; }
    double operator()(int i, int j, int k) const { return values_[dims_.index(i, j, k)]; }
    double& operator[](std::size_t idx) { return values_[idx]; }
    double operator[](std::size_t idx) const { return values_[idx]; }

    double sum() const;
    double min() const;
    double max() const;
    double max_abs() const;
    bool all_finite() const;

private:
    GridDims dims_;
    std::vector<double> values_;
};

//! Staggered velocity field, components stored as three consecutive blocks
//! (u on x-faces, v on y-faces, w on z-faces). Units are cells per frame.
class MacField {
public:
    MacField() = default;
    explicit MacField(const GridDims& dims, double value = 0.0);

    const GridDims& dims() const { return dims_; }
    std::span<double> data() { return data_; }
    std::span<const double> data() const { return data_; }
    std::size_t size() const { return data_.size(); }

    std::span<double> component(int axis);
    std::span<const double> component(int axis) const;

    double& face(int axis, int i, int j, int k) { return data_[dims_.face_index(axis, i, j, k)]; }
    double face(int axis, int i, int j, int k) const { return data_[dims_.face_index(axis, i, j, k)]; }

    //! Average of the two faces bounding cell (i,j,k) along each axis.
    Vec3 centered(int i, int j, int k) const;

    double max_abs() const;
    bool all_finite() const;

private:
    GridDims dims_;
    std::vector<double> data_;
};

enum class CellFlag : std::uint8_t { Fluid = 0, Obstacle = 1, Inflow = 2, Empty = 3 };

class FlagGrid {
public:
    FlagGrid() = default;
    explicit FlagGrid(const GridDims& dims, CellFlag value = CellFlag::Fluid);

    const GridDims& dims() const { return dims_; }
    CellFlag& operator()(int i, int j, int k) { return flags_[dims_.index(i, j, k)]; }
    CellFlag operator()(int i, int j, int k) const { return flags_[dims_.index(i, j, k)]; }
    CellFlag operator[](std::size_t idx) const { return flags_[idx]; }
    CellFlag& operator[](std::size_t idx) { return flags_[idx]; }

    //! Fluid and inflow cells carry pressure and density.
    bool is_fluid(int i, int j, int k) const
    {
        const CellFlag f = (*this)(i, j, k);
        return f == CellFlag::Fluid || f == CellFlag::Inflow;
    }
    bool is_obstacle(int i, int j, int k) const { return dims_.inside(i, j, k) && (*this)(i, j, k) == CellFlag::Obstacle; }

    //! True when the face normal to `axis` at lattice (i,j,k) touches an obstacle cell.
    bool face_touches_obstacle(int axis, int i, int j, int k) const;

    std::size_t count(CellFlag f) const;

private:
    GridDims dims_;
    std::vector<CellFlag> flags_;
};

//! Zeroes every face touching an obstacle cell.
void enforce_obstacles(MacField& v, const FlagGrid& flags);
//! Zeroes density inside obstacle cells.
void enforce_obstacles(ScalarField& f, const FlagGrid& flags);

} // namespace smokecap
