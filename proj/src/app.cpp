/******************************************************************************
 *
 * smokecap - single-view smoke density and velocity reconstruction
 *
 * This program is free software, distributed under the terms of the
 * Apache License, Version 2.0
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Command implementations shared by the CLI and the acceptance run
 *
 ******************************************************************************/
#include "smokecap/app.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "smokecap/io.hpp"

namespace smokecap {

namespace {

std::filesystem::path truth_dir(const AppConfig& cfg) { return cfg.out_dir / "truth"; }
std::filesystem::path recon_dir(const AppConfig& cfg) { return cfg.out_dir / "recon"; }

void require_file(const std::filesystem::path& path, const std::string& hint)
{
    if (!std::filesystem::exists(path)) throw std::runtime_error("missing " + path.string() + " (" + hint + ")");
}

void require_dims(const GridDims& found, const GridDims& expected, const std::filesystem::path& path)
{
    if (!(found.nx == expected.nx && found.ny == expected.ny && found.nz == expected.nz))
        throw std::runtime_error(path.string() + ": grid " + std::to_string(found.nx) + "x" + std::to_string(found.ny) + "x" +
                                 std::to_string(found.nz) + " does not match the configured " + std::to_string(expected.nx) + "x" +
                                 std::to_string(expected.ny) + "x" + std::to_string(expected.nz));
}

ScalarField load_scalar(const std::filesystem::path& path, const GridDims& dims, const std::string& hint)
{
    require_file(path, hint);
    ScalarField f = read_scalar_volume(path);
    require_dims(f.dims(), dims, path);
    return f;
}

MacField load_mac(const std::filesystem::path& path, const GridDims& dims, const std::string& hint)
{
    require_file(path, hint);
    MacField f = read_mac_volume(path);
    require_dims(f.dims(), dims, path);
    return f;
}

std::vector<Image> load_images(const AppConfig& cfg)
{
    std::vector<Image> images;
    for (int t = 0; t < cfg.frames; ++t) {
        const auto path = frame_path(image_dir(cfg), "image", t, "pgm");
        require_file(path, "run 'project' or set image_dir");
        images.push_back(read_image(path));
        if (images.back().width != cfg.image_width || images.back().height != cfg.image_height)
            throw std::runtime_error(path.string() + ": image size does not match image_width x image_height");
    }
    return images;
}

Projection full_projection(const AppConfig& cfg)
{
    return build_projection_matrix(front_camera(cfg), cfg.dims, VisualHull::full(cfg.dims), cfg.ray_step);
}

int last_recon_frame(const AppConfig& cfg)
{
    int last = -1;
    while (std::filesystem::exists(frame_path(recon_dir(cfg), "density", last + 1, "fvol"))) ++last;
    if (last < 0) throw std::runtime_error("no reconstruction in " + recon_dir(cfg).string() + " (run 'reconstruct')");
    return last;
}

} // namespace

std::vector<SimState> run_simulate(const AppConfig& cfg)
{
    const SimParams params = sim_params(cfg);
    return run_scene(cfg.scene, cfg.dims, params, [&](int t, const SimState& s) {
        write_volume(frame_path(truth_dir(cfg), "density", t, "fvol"), s.density);
        write_volume(frame_path(truth_dir(cfg), "velocity", t, "fvol"), s.velocity);
    });
}

std::vector<Image> run_project(const AppConfig& cfg)
{
    const Projection proj = full_projection(cfg);
    const VisualHull full = VisualHull::full(cfg.dims);
    std::vector<Image> images;
    for (int t = 0; t < cfg.frames; ++t) {
        const ScalarField density = load_scalar(frame_path(truth_dir(cfg), "density", t, "fvol"), cfg.dims, "run 'simulate'");
        images.push_back(project(proj, density, full));
        write_image(frame_path(image_dir(cfg), "image", t, "pgm"), images.back());
    }
    return images;
}

Reconstruction run_reconstruct(const AppConfig& cfg, EvalReport* report)
{
    const std::vector<Image> images = load_images(cfg);
    const ReconContext ctx = recon_context(cfg);
    const auto dir = recon_dir(cfg);
    std::filesystem::create_directories(dir);
    std::ofstream solver_log(dir / "solver_log.csv");
    if (!solver_log) throw std::runtime_error("cannot write " + (dir / "solver_log.csv").string());
    solver_log << "frame,iteration,objective,image_residual,divergence\n";
    Reconstruction recon = reconstruct_sequence(images, ctx, [&](const FrameState& s, const FrameLog& log) {
        write_volume(frame_path(dir, "density", s.frame, "fvol"), s.density);
        write_volume(frame_path(dir, "velocity", s.frame, "fvol"), s.velocity);
        if (s.frame == 0) return;
        for (const IterationDiagnostics& d : log.iterations) {
            char line[160];
            std::snprintf(line, sizeof(line), "%d,%d,%.6e,%.6e,%.6e\n", s.frame, d.iteration, d.objective, d.image_residual, d.divergence);
            solver_log << line;
        }
        solver_log.flush();
        write_volume(frame_path(dir, "predicted", s.frame, "fvol"), log.predicted_velocity);
        write_volume(frame_path(dir, "update", s.frame, "fvol"), log.velocity_update);
        if (cfg.multiscale) write_volume(frame_path(dir, "coarse", s.frame, "fvol"), log.coarse_update);
    });
    write_volume(dir / "source.fvol", recon.source.inflow.rate);
    // stale frames from a longer earlier run would be picked up by resim and extrapolate
    for (int t = cfg.frames;; ++t) {
        bool any = false;
        for (const char* prefix : {"density", "velocity", "predicted", "update", "coarse"})
            any |= std::filesystem::remove(frame_path(dir, prefix, t, "fvol"));
        if (!any) break;
    }
    const EvalReport r = run_eval(cfg);
    if (report) *report = r;
    return recon;
}

EvalReport run_eval(const AppConfig& cfg)
{
    const std::vector<Image> images = load_images(cfg);
    const Projection proj = full_projection(cfg);
    const VisualHull full = VisualHull::full(cfg.dims);
    const FlagGrid flags = scene_flags(cfg);
    bool has_truth = true;
    for (int t = 0; t < cfg.frames && has_truth; ++t)
        has_truth = std::filesystem::exists(frame_path(truth_dir(cfg), "density", t, "fvol")) &&
                    std::filesystem::exists(frame_path(truth_dir(cfg), "velocity", t, "fvol"));

    const std::string hint = "run 'reconstruct'";
    std::vector<Image> rendered;
    std::vector<ScalarField> density, true_density;
    std::vector<MacField> velocity, true_velocity;
    for (int t = 0; t < cfg.frames; ++t) {
        density.push_back(load_scalar(frame_path(recon_dir(cfg), "density", t, "fvol"), cfg.dims, hint));
        velocity.push_back(load_mac(frame_path(recon_dir(cfg), "velocity", t, "fvol"), cfg.dims, hint));
        rendered.push_back(project(proj, density.back(), full));
        if (has_truth) {
            true_density.push_back(load_scalar(frame_path(truth_dir(cfg), "density", t, "fvol"), cfg.dims, "run 'simulate'"));
            true_velocity.push_back(load_mac(frame_path(truth_dir(cfg), "velocity", t, "fvol"), cfg.dims, "run 'simulate'"));
        }
    }
    std::vector<EvalFrame> frames;
    for (int t = 0; t < cfg.frames; ++t) {
        EvalFrame f{&rendered[t], &images[t], &density[t], &velocity[t], nullptr, nullptr, t};
        if (has_truth) {
            f.true_density = &true_density[t];
            f.true_velocity = &true_velocity[t];
        }
        frames.push_back(f);
    }
    EvalReport report = evaluate(frames, flags);
    const auto path = cfg.out_dir / "report.csv";
    std::filesystem::create_directories(cfg.out_dir);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << report.to_csv();
    if (!out) throw std::runtime_error("cannot write " + path.string());
    return report;
}

Inflow read_source(const AppConfig& cfg)
{
    Inflow inflow;
    inflow.rate = load_scalar(recon_dir(cfg) / "source.fvol", cfg.dims, "run 'reconstruct'");
    for (std::size_t c = 0; c < inflow.rate.size(); ++c)
        if (inflow.rate[c] > 0.0) inflow.cells.push_back(c);
    inflow.velocity = sim_params(cfg).source.velocity;
    return inflow;
}

std::vector<ScalarField> run_resim(const AppConfig& cfg)
{
    const int last = last_recon_frame(cfg);
    const std::string hint = "run 'reconstruct'";
    std::vector<MotionStep> motion;
    for (int t = 1; t <= last; ++t) {
        MotionStep step;
        step.predicted = load_mac(frame_path(recon_dir(cfg), "predicted", t, "fvol"), cfg.dims, hint);
        step.update = load_mac(frame_path(recon_dir(cfg), "update", t, "fvol"), cfg.dims, hint);
        const auto coarse = frame_path(recon_dir(cfg), "coarse", t, "fvol");
        if (std::filesystem::exists(coarse)) step.coarse_update = load_mac(coarse, cfg.dims, hint);
        motion.push_back(std::move(step));
    }
    const Inflow source = refine_inflow(read_source(cfg), cfg.resim_factor);
    const FlagGrid flags = prolong_flags(scene_flags(cfg), cfg.resim_factor);
    std::vector<ScalarField> out = resimulate(motion, cfg.resim_factor, source, flags);
    for (std::size_t t = 0; t < out.size(); ++t)
        write_volume(frame_path(cfg.out_dir / "resim", "density", static_cast<int>(t), "fvol"), out[t]);
    return out;
}

std::vector<SimState> run_extrapolate(const AppConfig& cfg)
{
    const int last = last_recon_frame(cfg);
    const int from = cfg.extrapolate_from < 0 ? last : cfg.extrapolate_from;
    if (from > last)
        throw std::runtime_error("extrapolate_from " + std::to_string(from) + " exceeds the last reconstructed frame " +
                                 std::to_string(last));
    const std::string hint = "run 'reconstruct'";
    FrameState state{load_scalar(frame_path(recon_dir(cfg), "density", from, "fvol"), cfg.dims, hint),
                     load_mac(frame_path(recon_dir(cfg), "velocity", from, "fvol"), cfg.dims, hint), from};
    std::vector<SimState> out = extrapolate(state, cfg.extrapolate_frames, sim_params(cfg), scene_flags(cfg), read_source(cfg));
    for (std::size_t t = 0; t < out.size(); ++t) {
        const int frame = from + 1 + static_cast<int>(t);
        write_volume(frame_path(cfg.out_dir / "extrap", "density", frame, "fvol"), out[t].density);
        write_volume(frame_path(cfg.out_dir / "extrap", "velocity", frame, "fvol"), out[t].velocity);
    }
    return out;
}

} // namespace smokecap
