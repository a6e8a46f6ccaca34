/******************************************************************************
 *
 * smokecap - single-view smoke density and velocity reconstruction
 *
 * This program is free software, distributed under the terms of the
 * Apache License, Version 2.0
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Interpolation, advection, MAC operators, pressure projection, transfer
 *
 ******************************************************************************/
#include "smokecap/field_ops.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace smokecap {

namespace {

inline double lerp(double a, double b, double t) { return a + t * (b - a); }

//! Clamped trilinear lookup on a lattice of the given extent; g in lattice coordinates.
double trilinear(std::span<const double> data, const std::array<int, 3>& e, double gx, double gy, double gz)
{
    gx = std::clamp(gx, 0.0, static_cast<double>(e[0] - 1));
    gy = std::clamp(gy, 0.0, static_cast<double>(e[1] - 1));
    gz = std::clamp(gz, 0.0, static_cast<double>(e[2] - 1));
    const int i0 = std::min(static_cast<int>(gx), e[0] - 2 < 0 ? 0 : e[0] - 2);
    const int j0 = std::min(static_cast<int>(gy), e[1] - 2 < 0 ? 0 : e[1] - 2);
    const int k0 = std::min(static_cast<int>(gz), e[2] - 2 < 0 ? 0 : e[2] - 2);
    const int i1 = std::min(i0 + 1, e[0] - 1);
    const int j1 = std::min(j0 + 1, e[1] - 1);
    const int k1 = std::min(k0 + 1, e[2] - 1);
    const double tx = gx - i0, ty = gy - j0, tz = gz - k0;
    const auto at = [&](int i, int j, int k) {
        return data[static_cast<std::size_t>(i) + static_cast<std::size_t>(e[0]) * (static_cast<std::size_t>(j) + static_cast<std::size_t>(e[1]) * k)];
    };
    const double c00 = lerp(at(i0, j0, k0), at(i1, j0, k0), tx);
    const double c10 = lerp(at(i0, j1, k0), at(i1, j1, k0), tx);
    const double c01 = lerp(at(i0, j0, k1), at(i1, j0, k1), tx);
    const double c11 = lerp(at(i0, j1, k1), at(i1, j1, k1), tx);
    return lerp(lerp(c00, c10, ty), lerp(c01, c11, ty), tz);
}

std::array<int, 3> cell_extent(const GridDims& d) { return {d.nx, d.ny, d.nz}; }

double sample_component_cells(const MacField& v, int axis, const Vec3& p)
{
    Vec3 g = p - Vec3{0.5, 0.5, 0.5};
    g[axis] = p[axis];
    return trilinear(v.component(axis), v.dims().face_extent(axis), g.x, g.y, g.z);
}

void check_same_dims(const GridDims& a, const GridDims& b, const char* what)
{
    if (!(a.nx == b.nx && a.ny == b.ny && a.nz == b.nz))
        throw std::invalid_argument(std::string(what) + ": grid dimensions differ");
}

} // namespace

double sample_scalar_cells(const ScalarField& f, const Vec3& p)
{
    return trilinear(f.values(), cell_extent(f.dims()), p.x - 0.5, p.y - 0.5, p.z - 0.5);
}

Vec3 sample_mac_cells(const MacField& v, const Vec3& p)
{
    return {sample_component_cells(v, 0, p), sample_component_cells(v, 1, p), sample_component_cells(v, 2, p)};
}

double interpolate_scalar(const ScalarField& f, const Vec3& p) { return sample_scalar_cells(f, p / f.dims().dx); }

Vec3 interpolate_mac(const MacField& v, const Vec3& p) { return sample_mac_cells(v, p / v.dims().dx); }

ScalarField advect_scalar(const ScalarField& f, const MacField& v, double dt)
{
    if (!(dt > 0.0)) throw std::invalid_argument("advect_scalar: dt must be positive");
    check_same_dims(f.dims(), v.dims(), "advect_scalar");
    const GridDims& d = f.dims();
    ScalarField out(d);
    for (int k = 0; k < d.nz; ++k)
        for (int j = 0; j < d.ny; ++j)
            for (int i = 0; i < d.nx; ++i) {
                const Vec3 vel = v.centered(i, j, k);
                if (vel.x == 0.0 && vel.y == 0.0 && vel.z == 0.0) {
                    out(i, j, k) = f(i, j, k);
                    continue;
                }
                const Vec3 p{i + 0.5 - dt * vel.x, j + 0.5 - dt * vel.y, k + 0.5 - dt * vel.z};
                out(i, j, k) = sample_scalar_cells(f, p);
            }
    return out;
}

MacField advect_mac(const MacField& v, const MacField& carrier, double dt)
{
    if (!(dt > 0.0)) throw std::invalid_argument("advect_mac: dt must be positive");
    check_same_dims(v.dims(), carrier.dims(), "advect_mac");
    const GridDims& d = v.dims();
    MacField out(d);
    for (int axis = 0; axis < 3; ++axis) {
        const auto e = d.face_extent(axis);
        for (int k = 0; k < e[2]; ++k)
            for (int j = 0; j < e[1]; ++j)
                for (int i = 0; i < e[0]; ++i) {
                    Vec3 p{i + 0.5, j + 0.5, k + 0.5};
                    p[axis] -= 0.5;
                    const Vec3 vel = sample_mac_cells(carrier, p);
                    if (vel.x == 0.0 && vel.y == 0.0 && vel.z == 0.0) {
                        out.face(axis, i, j, k) = v.face(axis, i, j, k);
                        continue;
                    }
                    out.face(axis, i, j, k) = sample_component_cells(v, axis, p - vel * dt);
                }
    }
    return out;
}

ScalarField divergence(const MacField& v, const FlagGrid& flags)
{
    check_same_dims(v.dims(), flags.dims(), "divergence");
    const GridDims& d = v.dims();
    ScalarField out(d);
    const double inv_dx = 1.0 / d.dx;
    for (int k = 0; k < d.nz; ++k)
        for (int j = 0; j < d.ny; ++j)
            for (int i = 0; i < d.nx; ++i) {
                if (!flags.is_fluid(i, j, k)) continue;
                out(i, j, k) = ((v.face(0, i + 1, j, k) - v.face(0, i, j, k)) + (v.face(1, i, j + 1, k) - v.face(1, i, j, k)) +
                                (v.face(2, i, j, k + 1) - v.face(2, i, j, k))) *
                               inv_dx;
            }
    return out;
}

std::array<ScalarField, 3> gradient_scalar(const ScalarField& f)
{
    const GridDims& d = f.dims();
    std::array<ScalarField, 3> g{ScalarField(d), ScalarField(d), ScalarField(d)};
    const double inv_dx = 1.0 / d.dx;
    for (int k = 0; k < d.nz; ++k)
        for (int j = 0; j < d.ny; ++j)
            for (int i = 0; i < d.nx; ++i) {
                const int idx[3] = {i, j, k};
                for (int a = 0; a < 3; ++a) {
                    const int n = d.size(a);
                    int lo[3] = {i, j, k}, hi[3] = {i, j, k};
                    double scale = 0.5 * inv_dx;
                    if (idx[a] == 0) {
                        hi[a] = 1;
                        scale = inv_dx;
                    } else if (idx[a] == n - 1) {
                        lo[a] = n - 2;
                        scale = inv_dx;
                    } else {
                        lo[a] = idx[a] - 1;
                        hi[a] = idx[a] + 1;
                    }
                    g[a](i, j, k) = (f(hi[0], hi[1], hi[2]) - f(lo[0], lo[1], lo[2])) * scale;
                }
            }
    return g;
}

DivergenceProjector::DivergenceProjector(const FlagGrid& flags, int max_iter) : flags_(flags), max_iter_(max_iter)
{
    const GridDims& d = flags.dims();
    cell_to_row_.assign(d.cells(), -1);
    for (int k = 0; k < d.nz; ++k)
        for (int j = 0; j < d.ny; ++j)
            for (int i = 0; i < d.nx; ++i)
                if (flags.is_fluid(i, j, k)) {
                    cell_to_row_[d.index(i, j, k)] = static_cast<std::int64_t>(row_to_cell_.size());
                    row_to_cell_.push_back(d.index(i, j, k));
                }

    std::vector<std::vector<std::pair<std::uint32_t, double>>> rows(row_to_cell_.size());
    diagonal_.assign(row_to_cell_.size(), 0.0);
    static constexpr int offsets[6][3] = {{-1, 0, 0}, {1, 0, 0}, {0, -1, 0}, {0, 1, 0}, {0, 0, -1}, {0, 0, 1}};
    for (std::size_t r = 0; r < row_to_cell_.size(); ++r) {
        const std::size_t c = row_to_cell_[r];
        const int i = static_cast<int>(c % d.nx);
        const int j = static_cast<int>((c / d.nx) % d.ny);
        const int k = static_cast<int>(c / (static_cast<std::size_t>(d.nx) * d.ny));
        double diag = 0.0;
        auto& row = rows[r];
        for (const auto& o : offsets) {
            const int ni = i + o[0], nj = j + o[1], nk = k + o[2];
            if (!d.inside(ni, nj, nk)) {
                diag += 1.0; // open boundary, p = 0 outside
                continue;
            }
            const CellFlag nf = flags(ni, nj, nk);
            if (nf == CellFlag::Obstacle) continue; // solid wall, no flux
            diag += 1.0;
            if (nf != CellFlag::Empty)
                row.emplace_back(static_cast<std::uint32_t>(cell_to_row_[d.index(ni, nj, nk)]), -1.0);
        }
        row.emplace_back(static_cast<std::uint32_t>(r), diag);
        std::sort(row.begin(), row.end());
        diagonal_[r] = diag;
    }
    poisson_ = SparseMatrix::from_rows(row_to_cell_.size(), rows);
}

MacField DivergenceProjector::project(const MacField& v, double tol, ProjectionStats* stats) const
{
    const GridDims& d = flags_.dims();
    check_same_dims(v.dims(), d, "project_divergence_free");
    if (!(tol > 0.0)) throw std::invalid_argument("project_divergence_free: tolerance must be positive");

    MacField out = v;
    enforce_obstacles(out, flags_);
    const double vmax = out.max_abs();
    const ScalarField div = divergence(out, flags_);

    ProjectionStats local;
    local.max_divergence_before = div.max_abs();
    if (vmax == 0.0 || row_to_cell_.empty()) {
        if (stats) *stats = local;
        return out;
    }

    Vec rhs(row_to_cell_.size());
    for (std::size_t r = 0; r < rhs.size(); ++r) rhs[r] = -d.dx * d.dx * div[row_to_cell_[r]];
    const double rhs_norm = norm2(rhs);
    if (rhs_norm == 0.0) {
        if (stats) *stats = local;
        return out;
    }

    LinearOperator op;
    op.dimension = rhs.size();
    op.apply = [this](std::span<const double> x, std::span<double> y) { poisson_.apply(x, y); };
    op.diagonal = diagonal_;
    // ||r||_2 <= tol * vmax * dx bounds the per-cell divergence by tol * vmax / dx
    CgOptions cg;
    cg.tol = std::min(0.5, tol * vmax * d.dx / rhs_norm);
    cg.max_iter = max_iter_;
    const CgResult sol = cg_solve(op, rhs, cg);
    if (!sol.converged)
        throw std::runtime_error("pressure projection: CG did not converge after " + std::to_string(sol.iterations) +
                                 " iterations, relative residual " + std::to_string(sol.relative_residual));

    const auto pressure = [&](int i, int j, int k) {
        if (!d.inside(i, j, k)) return 0.0;
        const std::int64_t r = cell_to_row_[d.index(i, j, k)];
        return r < 0 ? 0.0 : sol.x[static_cast<std::size_t>(r)];
    };
    const double inv_dx = 1.0 / d.dx;
    for (int axis = 0; axis < 3; ++axis) {
        const auto e = d.face_extent(axis);
        for (int k = 0; k < e[2]; ++k)
            for (int j = 0; j < e[1]; ++j)
                for (int i = 0; i < e[0]; ++i) {
                    if (flags_.face_touches_obstacle(axis, i, j, k)) continue;
                    int li = i, lj = j, lk = k;
                    if (axis == 0) --li;
                    else if (axis == 1) --lj;
                    else --lk;
                    const bool l_fluid = d.inside(li, lj, lk) && flags_.is_fluid(li, lj, lk);
                    const bool r_fluid = d.inside(i, j, k) && flags_.is_fluid(i, j, k);
                    if (!l_fluid && !r_fluid) continue;
                    out.face(axis, i, j, k) -= (pressure(i, j, k) - pressure(li, lj, lk)) * inv_dx;
                }
    }

    if (stats) {
        local.iterations = sol.iterations;
        local.relative_residual = sol.relative_residual;
        local.max_divergence_after = divergence(out, flags_).max_abs();
        *stats = local;
    }
    return out;
}

MacField project_divergence_free(const MacField& v, const FlagGrid& flags, double tol, ProjectionStats* stats)
{
    return DivergenceProjector(flags).project(v, tol, stats);
}

namespace {

GridDims coarse_dims(const GridDims& d)
{
    return GridDims{(d.nx + 1) / 2, (d.ny + 1) / 2, (d.nz + 1) / 2, d.dx * 2.0};
}

} // namespace

ScalarField restrict_field(const ScalarField& f)
{
    const GridDims& d = f.dims();
    const GridDims c = coarse_dims(d);
    ScalarField out(c);
    for (int k = 0; k < c.nz; ++k)
        for (int j = 0; j < c.ny; ++j)
            for (int i = 0; i < c.nx; ++i) {
                double s = 0.0;
                int n = 0;
                for (int dk = 0; dk < 2; ++dk)
                    for (int dj = 0; dj < 2; ++dj)
                        for (int di = 0; di < 2; ++di) {
                            const int fi = 2 * i + di, fj = 2 * j + dj, fk = 2 * k + dk;
                            if (!d.inside(fi, fj, fk)) continue;
                            s += f(fi, fj, fk);
                            ++n;
                        }
                out(i, j, k) = s / n;
            }
    return out;
}

ScalarField prolong_field(const ScalarField& f, int factor)
{
    if (factor < 1) throw std::invalid_argument("prolong_field: factor must be >= 1");
    const GridDims& c = f.dims();
    if (factor == 1) return f;
    const GridDims d{c.nx * factor, c.ny * factor, c.nz * factor, c.dx / factor};
    ScalarField out(d);
    const std::array<int, 3> e{c.nx, c.ny, c.nz};
    for (int k = 0; k < d.nz; ++k)
        for (int j = 0; j < d.ny; ++j)
            for (int i = 0; i < d.nx; ++i)
                out(i, j, k) = trilinear(f.values(), e, (i + 0.5) / factor - 0.5, (j + 0.5) / factor - 0.5, (k + 0.5) / factor - 0.5);
    return out;
}

MacField restrict_field(const MacField& v)
{
    const GridDims& d = v.dims();
    const GridDims c = coarse_dims(d);
    MacField out(c);
    for (int axis = 0; axis < 3; ++axis) {
        const auto ce = c.face_extent(axis);
        const auto fe = d.face_extent(axis);
        const int t1 = (axis + 1) % 3, t2 = (axis + 2) % 3;
        for (int k = 0; k < ce[2]; ++k)
            for (int j = 0; j < ce[1]; ++j)
                for (int i = 0; i < ce[0]; ++i) {
                    const int ci[3] = {i, j, k};
                    int base[3] = {2 * i, 2 * j, 2 * k};
                    base[axis] = std::min(2 * ci[axis], fe[axis] - 1);
                    double s = 0.0;
                    int n = 0;
                    for (int a = 0; a < 2; ++a)
                        for (int b = 0; b < 2; ++b) {
                            int fi[3] = {base[0], base[1], base[2]};
                            fi[t1] += a;
                            fi[t2] += b;
                            if (fi[t1] >= fe[t1] || fi[t2] >= fe[t2]) continue;
                            s += v.face(axis, fi[0], fi[1], fi[2]);
                            ++n;
                        }
                    out.face(axis, i, j, k) = 0.5 * s / n;
                }
    }
    return out;
}

MacField prolong_field(const MacField& v, int factor)
{
    if (factor < 1) throw std::invalid_argument("prolong_field: factor must be >= 1");
    if (factor == 1) return v;
    const GridDims& c = v.dims();
    const GridDims d{c.nx * factor, c.ny * factor, c.nz * factor, c.dx / factor};
    MacField out(d);
    for (int axis = 0; axis < 3; ++axis) {
        const auto fe = d.face_extent(axis);
        const auto ce = c.face_extent(axis);
        for (int k = 0; k < fe[2]; ++k)
            for (int j = 0; j < fe[1]; ++j)
                for (int i = 0; i < fe[0]; ++i) {
                    double g[3] = {(i + 0.5) / factor - 0.5, (j + 0.5) / factor - 0.5, (k + 0.5) / factor - 0.5};
                    const int idx[3] = {i, j, k};
                    g[axis] = static_cast<double>(idx[axis]) / factor;
                    out.face(axis, i, j, k) = factor * trilinear(v.component(axis), ce, g[0], g[1], g[2]);
                }
    }
    return out;
}

FlagGrid restrict_flags(const FlagGrid& flags)
{
    const GridDims& d = flags.dims();
    const GridDims c = coarse_dims(d);
    FlagGrid out(c, CellFlag::Fluid);
    for (int k = 0; k < c.nz; ++k)
        for (int j = 0; j < c.ny; ++j)
            for (int i = 0; i < c.nx; ++i) {
                bool obstacle = false, inflow = false, all_empty = true;
                for (int dk = 0; dk < 2; ++dk)
                    for (int dj = 0; dj < 2; ++dj)
                        for (int di = 0; di < 2; ++di) {
                            const int fi = 2 * i + di, fj = 2 * j + dj, fk = 2 * k + dk;
                            if (!d.inside(fi, fj, fk)) continue;
                            const CellFlag f = flags(fi, fj, fk);
                            obstacle |= f == CellFlag::Obstacle;
                            inflow |= f == CellFlag::Inflow;
                            all_empty &= f == CellFlag::Empty;
                        }
                out(i, j, k) = obstacle ? CellFlag::Obstacle : (inflow ? CellFlag::Inflow : (all_empty ? CellFlag::Empty : CellFlag::Fluid));
            }
    return out;
}

FlagGrid prolong_flags(const FlagGrid& flags, int factor)
{
    if (factor < 1) throw std::invalid_argument("prolong_flags: factor must be >= 1");
    const GridDims& d = flags.dims();
    const GridDims f{d.nx * factor, d.ny * factor, d.nz * factor, d.dx / factor};
    FlagGrid out(f);
    for (int k = 0; k < f.nz; ++k)
        for (int j = 0; j < f.ny; ++j)
            for (int i = 0; i < f.nx; ++i) out(i, j, k) = flags(i / factor, j / factor, k / factor);
    return out;
}

} // namespace smokecap
