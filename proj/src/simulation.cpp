/******************************************************************************
 *
 * smokecap - single-view smoke density and velocity reconstruction
 *
 * This program is free software, distributed under the terms of the
 * Apache License, Version 2.0
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Forward smoke simulation
 *
 ******************************************************************************/
#include "smokecap/simulation.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace smokecap {

void SourceSpec::validate(const GridDims& dims) const
{
    if (!(rate >= 0.0)) throw std::invalid_argument("source rate must be >= 0");
    const Vec3 ext{static_cast<double>(dims.nx), static_cast<double>(dims.ny), static_cast<double>(dims.nz)};
    for (int a = 0; a < 3; ++a)
        if (center[a] < 0.0 || center[a] > ext[a]) throw std::invalid_argument("source center lies outside the domain");
    if (shape == Shape::Cylinder && !(radius > 0.0 && height > 0.0))
        throw std::invalid_argument("cylinder source needs positive radius and height");
    if (shape == Shape::Box && !(half_extent.x > 0.0 && half_extent.y > 0.0 && half_extent.z > 0.0))
        throw std::invalid_argument("box source needs positive extents");
}

bool SourceSpec::contains(const Vec3& p) const
{
    const Vec3 r = p - center;
    if (shape == Shape::Cylinder) return r.x * r.x + r.z * r.z <= radius * radius && std::abs(r.y) <= 0.5 * height;
    return std::abs(r.x) <= half_extent.x && std::abs(r.y) <= half_extent.y && std::abs(r.z) <= half_extent.z;
}

Inflow rasterize_source(const SourceSpec& source, const GridDims& dims, const FlagGrid* flags)
{
    source.validate(dims);
    Inflow inflow;
    inflow.rate = ScalarField(dims);
    inflow.velocity = source.velocity;
    for (int k = 0; k < dims.nz; ++k)
        for (int j = 0; j < dims.ny; ++j)
            for (int i = 0; i < dims.nx; ++i) {
                if (flags && (*flags)(i, j, k) == CellFlag::Obstacle) continue;
                if (!source.contains({i + 0.5, j + 0.5, k + 0.5})) continue;
                const std::size_t c = dims.index(i, j, k);
                inflow.rate[c] = source.rate;
                inflow.cells.push_back(c);
            }
    return inflow;
}

FlagGrid scene_flags(const GridDims& dims, const SimParams& params)
{
    FlagGrid flags(dims, CellFlag::Fluid);
    if (!params.obstacle) return flags;
    const Sphere& s = *params.obstacle;
    for (int k = 0; k < dims.nz; ++k)
        for (int j = 0; j < dims.ny; ++j)
            for (int i = 0; i < dims.nx; ++i)
                if (length(Vec3{i + 0.5, j + 0.5, k + 0.5} - s.center) <= s.radius) flags(i, j, k) = CellFlag::Obstacle;
    return flags;
}

namespace {

void add_buoyancy(MacField& u, const ScalarField& density, const Vec3& buoyancy)
{
    const GridDims& d = u.dims();
    for (int axis = 0; axis < 3; ++axis) {
        if (buoyancy[axis] == 0.0) continue;
        const auto e = d.face_extent(axis);
        for (int k = 0; k < e[2]; ++k)
            for (int j = 0; j < e[1]; ++j)
                for (int i = 0; i < e[0]; ++i) {
                    int lo[3] = {i, j, k};
                    --lo[axis];
                    const bool has_lo = d.inside(lo[0], lo[1], lo[2]);
                    const bool has_hi = d.inside(i, j, k);
                    if (!has_lo || !has_hi) continue; // boundary faces keep their flux
                    const double rho = 0.5 * (density(lo[0], lo[1], lo[2]) + density(i, j, k));
                    u.face(axis, i, j, k) += buoyancy[axis] * rho;
                }
    }
}

void add_jitter(MacField& u, const Inflow& inflow, double amplitude, std::uint64_t seed, int frame)
{
    if (amplitude <= 0.0 || inflow.empty()) return;
    std::mt19937_64 rng(seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(frame));
    std::uniform_real_distribution<double> dist(-amplitude, amplitude);
    const GridDims& d = u.dims();
    const std::vector<bool> mask = inflow_face_mask(d, inflow);
    auto data = u.data();
    for (std::size_t f = 0; f < mask.size(); ++f)
        if (mask[f]) data[f] += dist(rng);
}

} // namespace

SimState step_sim(const SimState& state, const FlagGrid& flags, const SimParams& params, const Inflow& inflow,
                  const DivergenceProjector& projector, int frame_index)
{
    if (!(state.density.dims() == flags.dims()) || !(state.velocity.dims() == flags.dims()))
        throw std::invalid_argument("step_sim: state and flag grids differ");

    ScalarField density = state.density;
    MacField velocity = state.velocity;
    add_jitter(velocity, inflow, params.jitter, params.seed, frame_index);
    add_buoyancy(velocity, density, params.buoyancy);
    enforce_obstacles(velocity, flags);
    velocity = projector.project(velocity, params.projection_tol);

    SimState next;
    next.velocity = advect_mac(velocity, velocity);
    next.density = advect_scalar(density, velocity);
    apply_inflow(next.density, next.velocity, inflow);
    enforce_obstacles(next.density, flags);
    enforce_obstacles(next.velocity, flags);
    for (std::size_t c = 0; c < next.density.size(); ++c) next.density[c] = std::max(0.0, next.density[c]);

    if (!next.density.all_finite() || !next.velocity.all_finite())
        throw std::runtime_error("simulation produced non-finite values at frame " + std::to_string(frame_index));
    return next;
}

SimState step_sim(const SimState& state, const FlagGrid& flags, const SimParams& params)
{
    const Inflow inflow = rasterize_source(params.source, flags.dims(), &flags);
    const DivergenceProjector projector(flags);
    return step_sim(state, flags, params, inflow, projector, 0);
}

Scene parse_scene(const std::string& name)
{
    if (name == "plume") return Scene::Plume;
    if (name == "jet") return Scene::Jet;
    if (name == "obstacle_plume") return Scene::ObstaclePlume;
    throw std::invalid_argument("unknown scene '" + name + "' (expected plume, jet or obstacle_plume)");
}

std::string scene_name(Scene scene)
{
    switch (scene) {
    case Scene::Plume: return "plume";
    case Scene::Jet: return "jet";
    case Scene::ObstaclePlume: return "obstacle_plume";
    }
    return "plume";
}

SimParams scene_defaults(Scene scene, const GridDims& dims)
{
    SimParams p;
    const double cx = 0.5 * dims.nx, cz = 0.5 * dims.nz;
    p.source.shape = SourceSpec::Shape::Cylinder;
    p.source.radius = std::max(1.5, dims.nx / 8.0);
    p.source.height = std::max(2.0, dims.ny / 12.0);
    p.source.center = {cx, 1.0 + 0.5 * p.source.height, cz};
    switch (scene) {
    case Scene::Plume: break;
    case Scene::Jet:
        p.source.shape = SourceSpec::Shape::Box;
        p.source.half_extent = {std::max(1.0, dims.nx / 16.0), std::max(1.0, dims.ny / 24.0), std::max(1.0, dims.nz / 16.0)};
        p.source.center = {1.0 + p.source.half_extent.x, 0.25 * dims.ny, cz};
        p.source.velocity = Vec3{1.0, 0.0, 0.0};
        break;
    case Scene::ObstaclePlume: p.obstacle = Sphere{{cx, 0.5 * dims.ny, cz}, dims.nx / 6.0}; break;
    }
    return p;
}

std::vector<SimState> run_scene(Scene scene, const GridDims& dims, const SimParams& params,
                                const std::function<void(int, const SimState&)>& sink)
{
    dims.validate();
    if (params.frames < 1) throw std::invalid_argument("run_scene: frames must be >= 1");
    SimParams p = params;
    if (scene == Scene::ObstaclePlume && !p.obstacle) p.obstacle = scene_defaults(scene, dims).obstacle;

    const FlagGrid flags = scene_flags(dims, p);
    const Inflow inflow = rasterize_source(p.source, dims, &flags);
    const DivergenceProjector projector(flags);

    std::vector<SimState> states;
    states.reserve(static_cast<std::size_t>(p.frames));
    SimState state{ScalarField(dims), MacField(dims)};
    for (int t = 0; t < p.frames; ++t) {
        state = step_sim(state, flags, p, inflow, projector, t);
        if (sink) sink(t, state);
        states.push_back(state);
    }
    return states;
}

} // namespace smokecap
