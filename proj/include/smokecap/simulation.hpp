/******************************************************************************
 *
 * smokecap - single-view smoke density and velocity reconstruction
 *
 * This program is free software, distributed under the terms of the
 * Apache License, Version 2.0
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Stable-fluids smoke solver generating synthetic ground truth
 *
 ******************************************************************************/
#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "smokecap/field_ops.hpp"
#include "smokecap/inflow.hpp"

namespace smokecap {

//! Source geometry in cell units. Cylinders stand along +y.
struct SourceSpec {
    enum class Shape { Cylinder, Box };
    Shape shape = Shape::Cylinder;
    Vec3 center{16.0, 3.0, 16.0};
    double radius = 4.0;
    double height = 4.0;
    Vec3 half_extent{3.0, 2.0, 3.0};
    double rate = 1.0;
    std::optional<Vec3> velocity;

    void validate(const GridDims& dims) const;
    bool contains(const Vec3& p_cells) const;
};

struct Sphere {
    Vec3 center; // cells
    double radius = 0.0;
};

struct SimParams {
    Vec3 buoyancy{0.0, 0.02, 0.0};
    SourceSpec source;
    int frames = 40;
    std::uint64_t seed = 1;
    //! Amplitude of the random velocity perturbation in the source, 0 disables it.
    double jitter = 0.0;
    double projection_tol = 1e-4;
    std::optional<Sphere> obstacle;
};

struct SimState {
    ScalarField density;
    MacField velocity;
};

Inflow rasterize_source(const SourceSpec& source, const GridDims& dims, const FlagGrid* flags = nullptr);
FlagGrid scene_flags(const GridDims& dims, const SimParams& params);

//! One frame: buoyancy, obstacle walls, projection, self-advection of
//! velocity, density advection by the projected velocity, then emission.
SimState step_sim(const SimState& state, const FlagGrid& flags, const SimParams& params, const Inflow& inflow,
                  const DivergenceProjector& projector, int frame_index = 0);
SimState step_sim(const SimState& state, const FlagGrid& flags, const SimParams& params);

enum class Scene { Plume, Jet, ObstaclePlume };
Scene parse_scene(const std::string& name);
std::string scene_name(Scene scene);

//! Scene defaults for the given grid (source placement, jet velocity, sphere).
SimParams scene_defaults(Scene scene, const GridDims& dims);

//! Runs `frames` steps from rest; the sink receives every state.
std::vector<SimState> run_scene(Scene scene, const GridDims& dims, const SimParams& params,
                                const std::function<void(int, const SimState&)>& sink = {});

} // namespace smokecap
