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
#include "smokecap/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>
#include <type_traits>
#include <vector>

namespace smokecap {

namespace {

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double to_double(const std::string& v)
{
    double out = 0.0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(out))
        throw std::invalid_argument("expected a number, got '" + v + "'");
    return out;
}

long long to_integer(const std::string& v)
{
    long long out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) throw std::invalid_argument("expected an integer, got '" + v + "'");
    return out;
}

int to_int(const std::string& v)
{
    const long long x = to_integer(v);
    if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max())
        throw std::invalid_argument("integer out of range: '" + v + "'");
    return static_cast<int>(x);
}

bool to_bool(const std::string& v)
{
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw std::invalid_argument("expected true or false, got '" + v + "'");
}

Vec3 to_vec3(const std::string& v)
{
    Vec3 out;
    std::size_t start = 0;
    for (int a = 0; a < 3; ++a) {
        const std::size_t comma = v.find(',', start);
        if ((a < 2) != (comma != std::string::npos)) throw std::invalid_argument("expected x,y,z, got '" + v + "'");
        out[a] = to_double(trim(v.substr(start, a < 2 ? comma - start : std::string::npos)));
        start = comma + 1;
    }
    return out;
}

std::string fmt(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string fmt(const Vec3& v) { return fmt(v.x) + "," + fmt(v.y) + "," + fmt(v.z); }

struct Entry {
    std::string key;
    std::function<void(AppConfig&, const std::string&)> set;
    std::function<std::string(const AppConfig&)> get;
};

template <class T>
std::string opt(const std::optional<T>& v)
{
    if (!v) return "auto";
    if constexpr (std::is_same_v<T, std::filesystem::path>) return v->string();
    else return fmt(*v);
}

const std::vector<Entry>& entries()
{
    static const std::vector<Entry> table = {
        {"nx", [](AppConfig& c, const std::string& v) { c.dims.nx = to_int(v); }, [](const AppConfig& c) { return std::to_string(c.dims.nx); }},
        {"ny", [](AppConfig& c, const std::string& v) { c.dims.ny = to_int(v); }, [](const AppConfig& c) { return std::to_string(c.dims.ny); }},
        {"nz", [](AppConfig& c, const std::string& v) { c.dims.nz = to_int(v); }, [](const AppConfig& c) { return std::to_string(c.dims.nz); }},
        {"dx", [](AppConfig& c, const std::string& v) { c.dims.dx = to_double(v); }, [](const AppConfig& c) { return fmt(c.dims.dx); }},
        {"scene", [](AppConfig& c, const std::string& v) { c.scene = parse_scene(v); }, [](const AppConfig& c) { return scene_name(c.scene); }},
        {"frames", [](AppConfig& c, const std::string& v) { c.frames = to_int(v); }, [](const AppConfig& c) { return std::to_string(c.frames); }},
        {"seed",
         [](AppConfig& c, const std::string& v) {
             const long long s = to_integer(v);
             if (s < 0) throw std::invalid_argument("seed must be >= 0");
             c.seed = static_cast<std::uint64_t>(s);
         },
         [](const AppConfig& c) { return std::to_string(c.seed); }},
        {"jitter", [](AppConfig& c, const std::string& v) { c.jitter = to_double(v); }, [](const AppConfig& c) { return fmt(c.jitter); }},
        {"buoyancy", [](AppConfig& c, const std::string& v) { c.buoyancy = to_double(v); }, [](const AppConfig& c) { return fmt(c.buoyancy); }},
        {"source_rate", [](AppConfig& c, const std::string& v) { c.source_rate = to_double(v); }, [](const AppConfig& c) { return fmt(c.source_rate); }},
        {"source_velocity",
         [](AppConfig& c, const std::string& v) {
             c.source_velocity_none = v == "none";
             if (c.source_velocity_none) c.source_velocity.reset();
             else c.source_velocity = to_vec3(v);
         },
         [](const AppConfig& c) { return c.source_velocity_none ? std::string("none") : opt(c.source_velocity); }},
        {"camera", [](AppConfig& c, const std::string& v) { c.camera = parse_camera_kind(v); },
         [](const AppConfig& c) { return std::string(c.camera == CameraKind::Perspective ? "perspective" : "orthographic"); }},
        {"image_width", [](AppConfig& c, const std::string& v) { c.image_width = to_int(v); }, [](const AppConfig& c) { return std::to_string(c.image_width); }},
        {"image_height", [](AppConfig& c, const std::string& v) { c.image_height = to_int(v); }, [](const AppConfig& c) { return std::to_string(c.image_height); }},
        {"camera_distance", [](AppConfig& c, const std::string& v) { c.camera_distance = to_double(v); }, [](const AppConfig& c) { return opt(c.camera_distance); }},
        {"ray_step", [](AppConfig& c, const std::string& v) { c.ray_step = to_double(v); }, [](const AppConfig& c) { return fmt(c.ray_step); }},
        {"hull_threshold", [](AppConfig& c, const std::string& v) { c.hull_threshold = to_double(v); }, [](const AppConfig& c) { return fmt(c.hull_threshold); }},
        {"hull_dilation", [](AppConfig& c, const std::string& v) { c.hull_dilation = to_int(v); }, [](const AppConfig& c) { return std::to_string(c.hull_dilation); }},
        {"source_limit_shape",
         [](AppConfig& c, const std::string& v) {
             if (v == "cylinder") c.source_limit_shape = SourceSpec::Shape::Cylinder;
             else if (v == "box") c.source_limit_shape = SourceSpec::Shape::Box;
             else throw std::invalid_argument("expected cylinder or box, got '" + v + "'");
         },
         [](const AppConfig& c) {
             if (!c.source_limit_shape) return std::string("auto");
             return std::string(*c.source_limit_shape == SourceSpec::Shape::Cylinder ? "cylinder" : "box");
         }},
        {"source_limit_center", [](AppConfig& c, const std::string& v) { c.source_limit_center = to_vec3(v); }, [](const AppConfig& c) { return opt(c.source_limit_center); }},
        {"source_limit_radius", [](AppConfig& c, const std::string& v) { c.source_limit_radius = to_double(v); }, [](const AppConfig& c) { return opt(c.source_limit_radius); }},
        {"source_limit_height", [](AppConfig& c, const std::string& v) { c.source_limit_height = to_double(v); }, [](const AppConfig& c) { return opt(c.source_limit_height); }},
        {"source_limit_half_extent", [](AppConfig& c, const std::string& v) { c.source_limit_half_extent = to_vec3(v); }, [](const AppConfig& c) { return opt(c.source_limit_half_extent); }},
        {"source_depth_min", [](AppConfig& c, const std::string& v) { c.source_depth_min = to_double(v); }, [](const AppConfig& c) { return opt(c.source_depth_min); }},
        {"source_depth_max", [](AppConfig& c, const std::string& v) { c.source_depth_max = to_double(v); }, [](const AppConfig& c) { return opt(c.source_depth_max); }},
        {"source_threshold", [](AppConfig& c, const std::string& v) { c.source_threshold = to_double(v); }, [](const AppConfig& c) { return fmt(c.source_threshold); }},
        {"sigma_phi", [](AppConfig& c, const std::string& v) { c.pd.sigma_phi = to_double(v); }, [](const AppConfig& c) { return fmt(c.pd.sigma_phi); }},
        {"tau_phi", [](AppConfig& c, const std::string& v) { c.pd.tau_phi = to_double(v); }, [](const AppConfig& c) { return fmt(c.pd.tau_phi); }},
        {"theta_phi", [](AppConfig& c, const std::string& v) { c.pd.theta_phi = to_double(v); }, [](const AppConfig& c) { return fmt(c.pd.theta_phi); }},
        {"sigma_u", [](AppConfig& c, const std::string& v) { c.pd.sigma_u = to_double(v); }, [](const AppConfig& c) { return fmt(c.pd.sigma_u); }},
        {"tau_u", [](AppConfig& c, const std::string& v) { c.pd.tau_u = to_double(v); }, [](const AppConfig& c) { return fmt(c.pd.tau_u); }},
        {"theta_u", [](AppConfig& c, const std::string& v) { c.pd.theta_u = to_double(v); }, [](const AppConfig& c) { return fmt(c.pd.theta_u); }},
        {"sigma_phi2", [](AppConfig& c, const std::string& v) { c.pd.sigma_phi2 = to_double(v); }, [](const AppConfig& c) { return fmt(c.pd.sigma_phi2); }},
        {"tau_phi2", [](AppConfig& c, const std::string& v) { c.pd.tau_phi2 = to_double(v); }, [](const AppConfig& c) { return fmt(c.pd.tau_phi2); }},
        {"theta_phi2", [](AppConfig& c, const std::string& v) { c.pd.theta_phi2 = to_double(v); }, [](const AppConfig& c) { return fmt(c.pd.theta_phi2); }},
        {"outer_iters", [](AppConfig& c, const std::string& v) { c.pd.outer_iters = to_int(v); }, [](const AppConfig& c) { return std::to_string(c.pd.outer_iters); }},
        {"inner_iters", [](AppConfig& c, const std::string& v) { c.pd.inner_iters = to_int(v); }, [](const AppConfig& c) { return std::to_string(c.pd.inner_iters); }},
        {"alpha_phi", [](AppConfig& c, const std::string& v) { c.reg.alpha_phi = to_double(v); }, [](const AppConfig& c) { return fmt(c.reg.alpha_phi); }},
        {"alpha_u", [](AppConfig& c, const std::string& v) { c.reg.alpha_u = to_double(v); }, [](const AppConfig& c) { return fmt(c.reg.alpha_u); }},
        {"beta_phi", [](AppConfig& c, const std::string& v) { c.reg.beta_phi = to_double(v); }, [](const AppConfig& c) { return fmt(c.reg.beta_phi); }},
        {"beta_u", [](AppConfig& c, const std::string& v) { c.reg.beta_u = to_double(v); }, [](const AppConfig& c) { return fmt(c.reg.beta_u); }},
        {"lambda_sum", [](AppConfig& c, const std::string& v) { c.reg.lambda_sum = to_double(v); }, [](const AppConfig& c) { return fmt(c.reg.lambda_sum); }},
        {"lambda_tiko", [](AppConfig& c, const std::string& v) { c.reg.lambda_tiko = to_double(v); }, [](const AppConfig& c) { return fmt(c.reg.lambda_tiko); }},
        {"adaptive_z", [](AppConfig& c, const std::string& v) { c.reg.adaptive_z = to_bool(v); }, [](const AppConfig& c) { return std::string(c.reg.adaptive_z ? "true" : "false"); }},
        {"cg_tol", [](AppConfig& c, const std::string& v) { c.cg.tol = to_double(v); }, [](const AppConfig& c) { return fmt(c.cg.tol); }},
        {"cg_max_iter", [](AppConfig& c, const std::string& v) { c.cg.max_iter = to_int(v); }, [](const AppConfig& c) { return std::to_string(c.cg.max_iter); }},
        {"projection_tol", [](AppConfig& c, const std::string& v) { c.projection_tol = to_double(v); }, [](const AppConfig& c) { return fmt(c.projection_tol); }},
        {"secondary", [](AppConfig& c, const std::string& v) { c.secondary = parse_secondary_mode(v); }, [](const AppConfig& c) { return secondary_mode_name(c.secondary); }},
        {"secondary_weight", [](AppConfig& c, const std::string& v) { c.secondary_weight = to_double(v); }, [](const AppConfig& c) { return fmt(c.secondary_weight); }},
        {"multiscale", [](AppConfig& c, const std::string& v) { c.multiscale = to_bool(v); }, [](const AppConfig& c) { return std::string(c.multiscale ? "true" : "false"); }},
        {"out_dir", [](AppConfig& c, const std::string& v) { c.out_dir = v; }, [](const AppConfig& c) { return c.out_dir.string(); }},
        {"image_dir", [](AppConfig& c, const std::string& v) { c.image_dir = std::filesystem::path(v); }, [](const AppConfig& c) { return opt(c.image_dir); }},
        {"resim_factor", [](AppConfig& c, const std::string& v) { c.resim_factor = to_int(v); }, [](const AppConfig& c) { return std::to_string(c.resim_factor); }},
        {"extrapolate_from", [](AppConfig& c, const std::string& v) { c.extrapolate_from = to_int(v); }, [](const AppConfig& c) { return std::to_string(c.extrapolate_from); }},
        {"extrapolate_frames", [](AppConfig& c, const std::string& v) { c.extrapolate_frames = to_int(v); }, [](const AppConfig& c) { return std::to_string(c.extrapolate_frames); }},
    };
    return table;
}

void validate(const AppConfig& c)
{
    c.dims.validate();
    c.pd.validate();
    c.reg.validate();
    if (c.frames < 1) throw std::invalid_argument("frames must be >= 1");
    if (c.image_width < 1 || c.image_height < 1) throw std::invalid_argument("image size must be positive");
    if (!(c.ray_step > 0.0 && c.ray_step <= 0.5)) throw std::invalid_argument("ray_step must lie in (0, 0.5] cells");
    if (!(c.cg.tol > 0.0) || c.cg.max_iter < 1) throw std::invalid_argument("cg_tol must be > 0 and cg_max_iter >= 1");
    if (!(c.projection_tol > 0.0)) throw std::invalid_argument("projection_tol must be > 0");
    if (c.secondary_weight < 0.0) throw std::invalid_argument("secondary_weight must be >= 0");
    if (c.resim_factor < 1) throw std::invalid_argument("resim_factor must be >= 1");
    if (c.extrapolate_frames < 0) throw std::invalid_argument("extrapolate_frames must be >= 0");
    if (c.hull_dilation < 0) throw std::invalid_argument("hull_dilation must be >= 0");
}

} // namespace

AppConfig parse_config(const std::string& text, const std::string& origin)
{
    AppConfig cfg;
    std::set<std::string> seen;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::string where = origin + ":" + std::to_string(lineno) + ": ";
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw std::invalid_argument(where + "expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const auto& table = entries();
        const auto it = std::find_if(table.begin(), table.end(), [&](const Entry& e) { return e.key == key; });
        if (it == table.end()) throw std::invalid_argument(where + "unknown key '" + key + "'");
        if (!seen.insert(key).second) throw std::invalid_argument(where + "key '" + key + "' given twice");
        if (value.empty()) throw std::invalid_argument(where + "missing value for '" + key + "'");
        // "auto" keeps an optional key unset; keys that default to it accept nothing else
        if (value == "auto" && it->get(AppConfig{}) == "auto") continue;
        try {
            it->set(cfg, value);
        } catch (const std::exception& e) {
            throw std::invalid_argument(where + key + ": " + e.what());
        }
    }
    try {
        validate(cfg);
    } catch (const std::exception& e) {
        throw std::invalid_argument(origin + ": " + e.what());
    }
    return cfg;
}

AppConfig load_config(const std::filesystem::path& path)
{
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open config file " + path.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_config(ss.str(), path.string());
}

std::string default_config_text()
{
    const AppConfig cfg;
    std::string out;
    for (const Entry& e : entries()) out += e.key + " = " + e.get(cfg) + "\n";
    return out;
}

SimParams sim_params(const AppConfig& cfg)
{
    SimParams p = scene_defaults(cfg.scene, cfg.dims);
    p.frames = cfg.frames;
    p.seed = cfg.seed;
    p.jitter = cfg.jitter;
    p.buoyancy = {0.0, cfg.buoyancy, 0.0};
    p.projection_tol = cfg.projection_tol;
    p.source.rate = cfg.source_rate;
    if (cfg.source_velocity_none) p.source.velocity.reset();
    else if (cfg.source_velocity) p.source.velocity = cfg.source_velocity;
    return p;
}

FlagGrid scene_flags(const AppConfig& cfg) { return scene_flags(cfg.dims, sim_params(cfg)); }

Camera front_camera(const AppConfig& cfg)
{
    const double distance = cfg.camera_distance.value_or(2.5 * cfg.dims.nz * cfg.dims.dx);
    return Camera::front(cfg.dims, cfg.camera, cfg.image_width, cfg.image_height, distance);
}

SourceOptions source_options(const AppConfig& cfg)
{
    const SourceSpec scene = sim_params(cfg).source;
    SourceOptions o;
    o.shape = scene;
    o.shape.shape = cfg.source_limit_shape.value_or(scene.shape);
    o.shape.center = cfg.source_limit_center.value_or(scene.center);
    o.shape.radius = cfg.source_limit_radius.value_or(scene.radius + 1.0);
    o.shape.height = cfg.source_limit_height.value_or(scene.height + 2.0);
    o.shape.half_extent = cfg.source_limit_half_extent.value_or(scene.half_extent + Vec3{1.0, 1.0, 1.0});
    const double reach = o.shape.shape == SourceSpec::Shape::Cylinder ? o.shape.radius : o.shape.half_extent.z;
    o.depth.z_min = cfg.source_depth_min.value_or(o.shape.center.z - reach);
    o.depth.z_max = cfg.source_depth_max.value_or(o.shape.center.z + reach);
    o.threshold = cfg.source_threshold;
    o.step = cfg.ray_step;
    return o;
}

ReconContext recon_context(const AppConfig& cfg)
{
    ReconContext ctx;
    ctx.dims = cfg.dims;
    ctx.flags = scene_flags(cfg);
    ctx.camera = front_camera(cfg);
    ctx.source = source_options(cfg);
    ctx.source_velocity = sim_params(cfg).source.velocity;
    ctx.solver.pd = cfg.pd;
    ctx.solver.reg = cfg.reg;
    ctx.solver.cg = cfg.cg;
    ctx.solver.projection_tol = cfg.projection_tol;
    ctx.secondary = cfg.secondary;
    ctx.secondary_weight = cfg.secondary_weight;
    ctx.ray_step = cfg.ray_step;
    ctx.hull_threshold = cfg.hull_threshold;
    ctx.hull_dilation = cfg.hull_dilation;
    ctx.multiscale = cfg.multiscale;
    return ctx;
}

std::filesystem::path image_dir(const AppConfig& cfg) { return cfg.image_dir.value_or(cfg.out_dir / "images"); }

} // namespace smokecap
