/******************************************************************************
 *
 * smokecap - single-view smoke density and velocity reconstruction
 *
 * This program is free software, distributed under the terms of the
 * Apache License, Version 2.0
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Voxel grid containers
 *
 ******************************************************************************/
#include "smokecap/grid.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace smokecap {

void GridDims::validate() const
{
    if (nx < 2 || ny < 2 || nz < 2)
        throw std::invalid_argument("grid dims must be >= 2 per axis, got " + std::to_string(nx) + "x" +
                                    std::to_string(ny) + "x" + std::to_string(nz));
    if (!(dx > 0.0)) throw std::invalid_argument("grid cell size dx must be positive");
}

ScalarField::ScalarField(const GridDims& dims, double value) : dims_(dims), values_(dims.cells(), value) {}

double ScalarField::sum() const
{
    double s = 0.0;
    for (double v : values_) s += v;
    return s;
}

double ScalarField::min() const { return values_.empty() ? 0.0 : *std::min_element(values_.begin(), values_.end()); }
double ScalarField::max() const { return values_.empty() ? 0.0 : *std::max_element(values_.begin(), values_.end()); }

double ScalarField::max_abs() const
{
    double m = 0.0;
    for (double v : values_) m = std::max(m, std::abs(v));
    return m;
}

bool ScalarField::all_finite() const
{
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

MacField::MacField(const GridDims& dims, double value) : dims_(dims), data_(dims.total_faces(), value) {}

std::span<double> MacField::component(int axis)
{
    return std::span<double>(data_).subspan(dims_.face_offset(axis), dims_.faces(axis));
}

std::span<const double> MacField::component(int axis) const
{
    return std::span<const double>(data_).subspan(dims_.face_offset(axis), dims_.faces(axis));
}

Vec3 MacField::centered(int i, int j, int k) const
{
    return {0.5 * (face(0, i, j, k) + face(0, i + 1, j, k)), 0.5 * (face(1, i, j, k) + face(1, i, j + 1, k)),
            0.5 * (face(2, i, j, k) + face(2, i, j, k + 1))};
}

double MacField::max_abs() const
{
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::abs(v));
    return m;
}

bool MacField::all_finite() const
{
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

FlagGrid::FlagGrid(const GridDims& dims, CellFlag value) : dims_(dims), flags_(dims.cells(), value) {}

bool FlagGrid::face_touches_obstacle(int axis, int i, int j, int k) const
{
    int li = i, lj = j, lk = k;
    if (axis == 0) --li;
    else if (axis == 1) --lj;
    else --lk;
    return is_obstacle(li, lj, lk) || is_obstacle(i, j, k);
}

std::size_t FlagGrid::count(CellFlag f) const { return static_cast<std::size_t>(std::count(flags_.begin(), flags_.end(), f)); }

void enforce_obstacles(MacField& v, const FlagGrid& flags)
{
    const GridDims& d = v.dims();
    if (flags.count(CellFlag::Obstacle) == 0) return;
    for (int axis = 0; axis < 3; ++axis) {
        const auto e = d.face_extent(axis);
        for (int k = 0; k < e[2]; ++k)
            for (int j = 0; j < e[1]; ++j)
                for (int i = 0; i < e[0]; ++i)
                    if (flags.face_touches_obstacle(axis, i, j, k)) v.face(axis, i, j, k) = 0.0;
    }
}

void enforce_obstacles(ScalarField& f, const FlagGrid& flags)
{
    for (std::size_t c = 0; c < f.size(); ++c)
        if (flags[c] == CellFlag::Obstacle) f[c] = 0.0;
}

} // namespace smokecap
