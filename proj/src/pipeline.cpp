/******************************************************************************
 *
 * smokecap - single-view smoke density and velocity reconstruction
 *
 * This program is free software, distributed under the terms of the
 * Apache License, Version 2.0
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Frame loop and the tools built on reconstructed sequences
 *
 ******************************************************************************/
#include "smokecap/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace smokecap {

double relative_l1(std::span<const double> a, std::span<const double> b)
{
    if (a.size() != b.size()) throw std::invalid_argument("relative_l1: length mismatch");
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num += std::abs(a[i] - b[i]);
        den += std::abs(b[i]);
    }
    if (den == 0.0) return num == 0.0 ? 0.0 : 1.0;
    return num / den;
}

SourceEstimate estimate_source(const Image& first, const Camera& camera, const GridDims& dims, const SourceOptions& options,
                               const FlagGrid* flags)
{
    dims.validate();
    if (first.width != camera.width || first.height != camera.height)
        throw std::invalid_argument("estimate_source: image size does not match camera");
    if (!(options.depth.z_max > options.depth.z_min)) throw std::invalid_argument("estimate_source: empty depth range");
    const double peak = first.max();
    if (!(peak > 0.0))
        throw std::runtime_error("estimate_source: first image is black; no source can be estimated "
                                 "(check the image path or the exposure scale)");
    const double threshold = options.threshold * peak;

    // candidate cells: inside the shape and depth limits and lit in the first image
    std::vector<std::uint8_t> mask(dims.cells(), 0);
    std::vector<int> pixel_of(dims.cells(), -1);
    std::vector<int> per_pixel(static_cast<std::size_t>(first.width) * first.height, 0);
    for (int k = 0; k < dims.nz; ++k)
        for (int j = 0; j < dims.ny; ++j)
            for (int i = 0; i < dims.nx; ++i) {
                const Vec3 p{i + 0.5, j + 0.5, k + 0.5};
                if (p.z < options.depth.z_min || p.z >= options.depth.z_max) continue;
                if (!options.shape.contains(p)) continue;
                if (flags && flags->is_obstacle(i, j, k)) continue;
                const auto pix = camera.project(p * dims.dx);
                if (!pix) continue;
                const int x = static_cast<int>(std::floor(pix->first));
                const int y = static_cast<int>(std::floor(pix->second));
                if (x < 0 || y < 0 || x >= first.width || y >= first.height) continue;
                if (first.at(x, y) <= threshold) continue;
                const std::size_t c = dims.index(i, j, k);
                mask[c] = 1;
                pixel_of[c] = y * first.width + x;
                ++per_pixel[static_cast<std::size_t>(pixel_of[c])];
            }

    const VisualHull region(dims, std::move(mask));
    if (region.empty())
        throw std::runtime_error("estimate_source: no lit pixel falls inside the source limits; "
                                 "move or enlarge the source shape/depth limits or lower the source threshold");

    // line-integral normalization: a pixel's value spread evenly over its cells
    Vec rate(region.size());
    for (std::size_t n = 0; n < region.size(); ++n) {
        const int px = pixel_of[region.cells()[n]];
        rate[n] = first.values[static_cast<std::size_t>(px)] / (per_pixel[static_cast<std::size_t>(px)] * dims.dx);
    }

    const Projection proj = build_projection_matrix(camera, dims, region, options.step * dims.dx);
    const Vec back = proj.matrix.apply_transpose(first.values);
    Vec img(proj.matrix.rows()), denom(region.size());
    for (int it = 0; it < options.refine_iters; ++it) {
        proj.matrix.apply(rate, img);
        proj.matrix.apply_transpose(img, denom);
        for (std::size_t n = 0; n < rate.size(); ++n)
            if (denom[n] > 0.0) rate[n] *= back[n] / denom[n];
    }

    SourceEstimate est;
    est.inflow.rate = region.scatter(rate);
    est.inflow.cells = region.cells();

    // reprojection error on the lit pixels the region projects onto
    proj.matrix.apply(rate, img);
    double num = 0.0, den = 0.0;
    for (std::size_t r = 0; r < img.size(); ++r) {
        bool hit = false;
        proj.matrix.for_each_in_row(r, [&](std::size_t, double) { hit = true; });
        if (!hit || first.values[r] <= threshold) continue;
        num += std::abs(img[r] - first.values[r]);
        den += first.values[r];
    }
    est.reprojection_error = den > 0.0 ? num / den : 0.0;
    return est;
}

namespace {

using Clock = std::chrono::steady_clock;

VisualHull frame_hull(const Image& image, const ScalarField& predicted, const FlagGrid& flags, const Camera& camera,
                      const GridDims& dims, double threshold, int dilation)
{
    const VisualHull silhouette = compute_visual_hull(image, camera, dims, threshold * image.max(), dilation);
    std::vector<std::uint8_t> mask = silhouette.mask();
    const double cut = threshold * predicted.max();
    for (std::size_t c = 0; c < mask.size(); ++c) {
        if (predicted[c] > cut && predicted[c] > 0.0) mask[c] = 1;
        if (flags[c] == CellFlag::Obstacle) mask[c] = 0;
    }
    return VisualHull(dims, std::move(mask));
}

struct LevelSolve {
    UpdateResult update;
    VisualHull hull;
};

//! One calculate_update at the resolution of `predicted`. The image also
//! holds this frame's emission, which is added after the update; its
//! projection is removed from the target so motion does not explain it.
LevelSolve solve_level(const ScalarField& predicted, const ScalarField& emission, const Image& image, const FlagGrid& flags,
                       const ReconContext& ctx)
{
    const GridDims& dims = predicted.dims();
    ScalarField expected = predicted;
    if (emission.size() == expected.size())
        for (std::size_t c = 0; c < expected.size(); ++c) expected[c] += emission[c];
    const VisualHull hull = frame_hull(image, expected, flags, ctx.camera, dims, ctx.hull_threshold, ctx.hull_dilation);
    const double step = ctx.ray_step * dims.dx;
    Projection proj = build_projection_matrix(ctx.camera, dims, hull, step);
    if (ctx.secondary != SecondaryMode::None)
        proj = add_secondary_view(proj, secondary_camera(ctx.camera, dims, ctx.secondary), dims, hull, step, ctx.secondary_weight);
    Vec target = stacked_target(image, ctx.secondary, ctx.secondary_weight);
    const Vec guess = hull.gather(expected);
    const Vec predicted_image = proj.matrix.apply(guess);
    for (std::size_t r = 0; r < target.size(); ++r) target[r] -= predicted_image[r];

    SolverOptions options = ctx.solver;
    options.perspective = ctx.camera.kind == CameraKind::Perspective;
    LevelSolve out;
    out.hull = hull;
    out.update = calculate_update(predicted, target, proj, hull, flags, options);
    return out;
}

} // namespace

FrameState combined_estimation(const FrameState& prev, const Image& image, const Inflow& inflow, const ReconContext& ctx,
                               FrameLog* log)
{
    const auto t0 = Clock::now();
    const int frame = prev.frame + 1;
    const GridDims& dims = ctx.dims;
    if (!(prev.density.dims() == dims) || !(prev.velocity.dims() == dims))
        throw std::invalid_argument("combined_estimation: state grid does not match the context");
    const DivergenceProjector projector(ctx.flags);
    const double tol = ctx.solver.projection_tol;

    try {
        MacField predicted_u = projector.project(advect_mac(prev.velocity, prev.velocity), tol);
        ScalarField predicted = advect_scalar(prev.density, predicted_u);
        enforce_obstacles(predicted, ctx.flags);

        MacField coarse_update(dims);
        bool used_coarse = false;
        ScalarField guess = predicted;
        MacField guess_u = predicted_u;
        if (ctx.multiscale) {
            if (dims.nx % 2 || dims.ny % 2 || dims.nz % 2)
                throw std::invalid_argument("multi-scale reconstruction needs even grid dimensions");
            ReconContext coarse = ctx;
            coarse.dims = restrict_field(predicted).dims();
            const FlagGrid coarse_flags = restrict_flags(ctx.flags);
            const ScalarField coarse_emission = inflow.empty() ? ScalarField() : restrict_field(inflow.rate);
            const LevelSolve c = solve_level(restrict_field(predicted), coarse_emission, image, coarse_flags, coarse);
            coarse_update = projector.project(prolong_field(c.update.velocity_update, 2), tol);
            guess = advect_scalar(predicted, coarse_update);
            enforce_obstacles(guess, ctx.flags);
            guess_u = projector.project(advect_mac(predicted_u, coarse_update), tol);
            for (std::size_t f = 0; f < guess_u.size(); ++f) guess_u.data()[f] += coarse_update.data()[f];
            used_coarse = true;
        }

        const LevelSolve fine = solve_level(guess, inflow.empty() ? ScalarField() : inflow.rate, image, ctx.flags, ctx);
        const MacField& u_upd = fine.update.velocity_update;

        FrameState next;
        next.frame = frame;
        next.density = advect_scalar(guess, u_upd);
        enforce_obstacles(next.density, ctx.flags);
        // u_upd is divergence-free, so projecting the sum only touches the advected part
        MacField moved = advect_mac(guess_u, u_upd);
        for (std::size_t f = 0; f < moved.size(); ++f) moved.data()[f] += u_upd.data()[f];
        next.velocity = projector.project(moved, tol);
        apply_inflow(next.density, next.velocity, inflow);
        enforce_obstacles(next.velocity, ctx.flags);

        const double seconds = std::chrono::duration<double>(Clock::now() - t0).count();
        if (ctx.verbose)
            std::fprintf(stderr, "frame %d: hull %zu cells, residual %.4e -> %.4e, %.2f s\n", frame, fine.hull.size(),
                         fine.update.initial_residual, fine.update.final_residual(), seconds);
        if (log) {
            log->predicted_density = std::move(predicted);
            log->predicted_velocity = std::move(predicted_u);
            log->density_update = fine.update.density_update;
            log->velocity_update = u_upd;
            log->coarse_update = used_coarse ? std::move(coarse_update) : MacField();
            log->hull_cells = fine.hull.size();
            log->hull_mask = fine.hull.mask();
            log->initial_residual = fine.update.initial_residual;
            log->final_residual = fine.update.final_residual();
            log->iterations = fine.update.diagnostics;
            log->seconds = seconds;
        }
        return next;
    } catch (const std::exception& e) {
        throw std::runtime_error("frame " + std::to_string(frame) + ": " + e.what());
    }
}

Reconstruction reconstruct_sequence(const std::vector<Image>& images, const ReconContext& ctx,
                                    const std::function<void(const FrameState&, const FrameLog&)>& sink)
{
    if (images.empty()) throw std::invalid_argument("reconstruct_sequence: no input images");
    Reconstruction recon;
    recon.source = estimate_source(images.front(), ctx.camera, ctx.dims, ctx.source, &ctx.flags);
    recon.source.inflow.velocity = ctx.source_velocity;
    if (ctx.verbose)
        std::fprintf(stderr, "source: %zu cells, total rate %.4e, reprojection error %.3f\n", recon.source.inflow.cells.size(),
                     recon.source.inflow.total_rate(), recon.source.reprojection_error);

    FrameState state{ScalarField(ctx.dims), MacField(ctx.dims), 0};
    apply_inflow(state.density, state.velocity, recon.source.inflow);
    recon.frames.push_back(state);
    recon.logs.emplace_back();
    if (sink) sink(recon.frames.back(), recon.logs.back());

    for (std::size_t t = 1; t < images.size(); ++t) {
        FrameLog log;
        state = combined_estimation(state, images[t], recon.source.inflow, ctx, &log);
        recon.frames.push_back(state);
        recon.logs.push_back(std::move(log));
        if (sink) sink(recon.frames.back(), recon.logs.back());
    }
    return recon;
}

std::vector<MotionStep> motion_steps(const Reconstruction& recon)
{
    std::vector<MotionStep> steps;
    for (std::size_t t = 1; t < recon.logs.size(); ++t)
        steps.push_back({recon.logs[t].predicted_velocity, recon.logs[t].velocity_update, recon.logs[t].coarse_update});
    return steps;
}

Inflow refine_inflow(const Inflow& inflow, int factor)
{
    if (factor < 1) throw std::invalid_argument("refine_inflow: factor must be >= 1");
    const GridDims& d = inflow.rate.dims();
    const GridDims fd{d.nx * factor, d.ny * factor, d.nz * factor, d.dx / factor};
    Inflow out;
    out.rate = ScalarField(fd);
    out.velocity = inflow.velocity;
    if (out.velocity) *out.velocity = *out.velocity * static_cast<double>(factor);
    for (int k = 0; k < fd.nz; ++k)
        for (int j = 0; j < fd.ny; ++j)
            for (int i = 0; i < fd.nx; ++i) {
                const double r = inflow.rate(i / factor, j / factor, k / factor);
                if (r == 0.0) continue;
                const std::size_t c = fd.index(i, j, k);
                out.rate[c] = r;
                out.cells.push_back(c);
            }
    return out;
}

std::vector<ScalarField> resimulate(const std::vector<MotionStep>& motion, int factor, const Inflow& fine_source,
                                    const FlagGrid& fine_flags)
{
    if (factor < 1) throw std::invalid_argument("resimulate: factor must be >= 1");
    const GridDims& fd = fine_flags.dims();
    if (!(fine_source.rate.dims() == fd)) throw std::invalid_argument("resimulate: source grid does not match the flags");
    auto refine = [&](const MacField& v) {
        if (!(v.dims().nx * factor == fd.nx && v.dims().ny * factor == fd.ny && v.dims().nz * factor == fd.nz))
            throw std::invalid_argument("resimulate: velocity grid times factor does not match the fine grid");
        return factor == 1 ? v : prolong_field(v, factor);
    };

    std::vector<ScalarField> out;
    ScalarField density(fd);
    MacField scratch(fd);
    apply_inflow(density, scratch, fine_source);
    out.push_back(density);
    for (std::size_t t = 0; t < motion.size(); ++t) {
        density = advect_scalar(density, refine(motion[t].predicted));
        if (motion[t].coarse_update.size() > 0) density = advect_scalar(density, refine(motion[t].coarse_update));
        density = advect_scalar(density, refine(motion[t].update));
        enforce_obstacles(density, fine_flags);
        apply_inflow(density, scratch, fine_source);
        if (!density.all_finite()) throw std::runtime_error("resimulate: non-finite density at frame " + std::to_string(t + 1));
        out.push_back(density);
    }
    return out;
}

std::vector<SimState> extrapolate(const FrameState& last, int frames, const SimParams& params, const FlagGrid& flags,
                                  const Inflow& inflow)
{
    if (frames < 0) throw std::invalid_argument("extrapolate: frame count must be >= 0");
    std::vector<SimState> out;
    if (frames == 0) return out;
    const DivergenceProjector projector(flags);
    SimState state{last.density, last.velocity};
    for (int t = 0; t < frames; ++t) {
        state = step_sim(state, flags, params, inflow, projector, last.frame + 1 + t);
        out.push_back(state);
    }
    return out;
}

} // namespace smokecap
