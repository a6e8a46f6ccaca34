/******************************************************************************
 *
 * smokecap - single-view smoke density and velocity reconstruction
 *
 * This program is free software, distributed under the terms of the
 * Apache License, Version 2.0
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * key=value run configuration
 *
 ******************************************************************************/
#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "smokecap/pipeline.hpp"

namespace smokecap {

//! Every setting of a run. Lengths are in cells unless noted.
struct AppConfig {
    // grid and synthetic scene
    GridDims dims{32, 48, 32, 1.0};
    Scene scene = Scene::Plume;
    int frames = 40;
    std::uint64_t seed = 1;
    double jitter = 0.0;
    double buoyancy = 0.02;
    double source_rate = 1.0;
    std::optional<Vec3> source_velocity; //!< scene default when unset
    bool source_velocity_none = false;   //!< "source_velocity = none"

    // camera
    CameraKind camera = CameraKind::Perspective;
    int image_width = 64;
    int image_height = 96;
    std::optional<double> camera_distance; //!< world units from the domain center; 2.5 x depth when unset
    double ray_step = 0.5;
    double hull_threshold = 1e-3;
    int hull_dilation = 1;

    // source estimation limits; the scene source grown by one cell when unset
    std::optional<SourceSpec::Shape> source_limit_shape;
    std::optional<Vec3> source_limit_center;
    std::optional<double> source_limit_radius;
    std::optional<double> source_limit_height;
    std::optional<Vec3> source_limit_half_extent;
    std::optional<double> source_depth_min;
    std::optional<double> source_depth_max;
    double source_threshold = 0.05;

    // solver
    PdParams pd;
    RegWeights reg;
    CgOptions cg{1e-4, 600};
    double projection_tol = 1e-4;
    SecondaryMode secondary = SecondaryMode::None;
    double secondary_weight = 0.1;
    bool multiscale = false;

    // outputs and follow-up tools
    std::filesystem::path out_dir = "out";
    std::optional<std::filesystem::path> image_dir; //!< <out_dir>/images when unset
    int resim_factor = 2;
    int extrapolate_from = -1; //!< last frame when negative
    int extrapolate_frames = 25;
};

//! Parses key=value lines; '#' starts a comment. Unknown or repeated keys and
//! malformed values are errors naming `origin` and the line number.
AppConfig parse_config(const std::string& text, const std::string& origin = "<config>");
AppConfig load_config(const std::filesystem::path& path);

//! Text listing every key with its default value.
std::string default_config_text();

SimParams sim_params(const AppConfig& cfg);
FlagGrid scene_flags(const AppConfig& cfg);
Camera front_camera(const AppConfig& cfg);
SourceOptions source_options(const AppConfig& cfg);
ReconContext recon_context(const AppConfig& cfg);
std::filesystem::path image_dir(const AppConfig& cfg);

} // namespace smokecap
