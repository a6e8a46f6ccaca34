/******************************************************************************
 *
 * smokecap - single-view smoke density and velocity reconstruction
 *
 * This program is free software, distributed under the terms of the
 * Apache License, Version 2.0
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Frame loop: prediction, coupled update, alignment and inflow, plus source
 * estimation, re-simulation and extrapolation.
 *
 ******************************************************************************/
#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "smokecap/recon_solver.hpp"
#include "smokecap/simulation.hpp"

namespace smokecap {

struct FrameState {
    ScalarField density;
    MacField velocity;
    int frame = 0;
};

//! Estimated emitter. The region is restricted to `inflow.cells`.
struct SourceEstimate {
    Inflow inflow;
    double reprojection_error = 0.0; //!< relative L1 on the region pixels
};

//! Depth range of the source in cell units along z, [z_min, z_max).
struct DepthLimits {
    double z_min = 0.0;
    double z_max = 0.0;
};

struct SourceOptions {
    SourceSpec shape;   //!< geometric limit; its rate is ignored
    DepthLimits depth;
    double threshold = 0.05; //!< fraction of the image maximum
    int refine_iters = 20;   //!< multiplicative refinement passes
    double step = 0.5;       //!< ray step, cells
};

SourceEstimate estimate_source(const Image& first, const Camera& camera, const GridDims& dims, const SourceOptions& options,
                               const FlagGrid* flags = nullptr);

struct ReconContext {
    GridDims dims;
    FlagGrid flags;
    Camera camera;
    SourceOptions source;
    std::optional<Vec3> source_velocity;
    SolverOptions solver;
    SecondaryMode secondary = SecondaryMode::None;
    double secondary_weight = 0.1;
    double ray_step = 0.5;           //!< cells
    double hull_threshold = 1e-3;    //!< fraction of the image maximum
    int hull_dilation = 1;
    bool multiscale = false;
    bool verbose = true;             //!< per-frame progress on stderr
};

//! Intermediates of one combined estimation step.
struct FrameLog {
    ScalarField predicted_density;
    MacField predicted_velocity;
    ScalarField density_update;
    MacField velocity_update;
    //! Velocity applied before the fine solve on the multi-scale path; zero otherwise.
    MacField coarse_update;
    std::size_t hull_cells = 0;
    std::vector<std::uint8_t> hull_mask; //!< per cell, 1 inside the hull of the fine solve
    double initial_residual = 0.0;
    double final_residual = 0.0;
    double seconds = 0.0;
    std::vector<IterationDiagnostics> iterations; //!< outer iterations of the fine solve
};

FrameState combined_estimation(const FrameState& prev, const Image& image, const Inflow& inflow, const ReconContext& ctx,
                               FrameLog* log = nullptr);

struct Reconstruction {
    SourceEstimate source;
    std::vector<FrameState> frames;
    std::vector<FrameLog> logs; //!< logs[t] belongs to frames[t]; logs[0] is empty
};

Reconstruction reconstruct_sequence(const std::vector<Image>& images, const ReconContext& ctx,
                                    const std::function<void(const FrameState&, const FrameLog&)>& sink = {});

//! Velocities that moved the density of one reconstructed frame: the density
//! was advected by `predicted`, then by `update`.
struct MotionStep {
    MacField predicted;
    MacField update;
    MacField coarse_update; //!< applied between the two when non-empty
};

std::vector<MotionStep> motion_steps(const Reconstruction& recon);

//! Source rate resampled onto a grid refined by `factor`.
Inflow refine_inflow(const Inflow& inflow, int factor);

//! Advects a density field refined by `factor` through the prolonged motion.
//! Frame 0 is the refined source; frame t follows motion[t].
std::vector<ScalarField> resimulate(const std::vector<MotionStep>& motion, int factor, const Inflow& fine_source,
                                    const FlagGrid& fine_flags);

std::vector<SimState> extrapolate(const FrameState& last, int frames, const SimParams& params, const FlagGrid& flags,
                                  const Inflow& inflow);

//! Relative L1 image error |a - b|_1 / |b|_1.
double relative_l1(std::span<const double> a, std::span<const double> b);

} // namespace smokecap
