/******************************************************************************
 *
 * smokecap - single-view smoke density and velocity reconstruction
 *
 * This program is free software, distributed under the terms of the
 * Apache License, Version 2.0
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Cameras, projection matrix assembly and visual hulls
 *
 ******************************************************************************/
#include "smokecap/tomography.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <map>
#include <stdexcept>

namespace smokecap {

double Image::max() const { return values.empty() ? 0.0 : *std::max_element(values.begin(), values.end()); }

double Image::sum() const
{
    double s = 0.0;
    for (double v : values) s += v;
    return s;
}

Image mirror_horizontal(const Image& image)
{
    Image out(image.width, image.height);
    for (int y = 0; y < image.height; ++y)
        for (int x = 0; x < image.width; ++x) out.at(image.width - 1 - x, y) = image.at(x, y);
    return out;
}

void Camera::validate() const
{
    if (width <= 0 || height <= 0) throw std::invalid_argument("camera image size must be positive");
    if (std::abs(length(forward) - 1.0) > 1e-9 || std::abs(length(up) - 1.0) > 1e-9)
        throw std::invalid_argument("camera forward and up vectors must be unit length");
    if (length(cross(forward, up)) < 1e-9) throw std::invalid_argument("camera forward and up vectors are parallel");
    if (kind == CameraKind::Perspective && !(focal > 0.0)) throw std::invalid_argument("perspective camera needs focal > 0");
    if (kind == CameraKind::Orthographic && !(footprint > 0.0))
        throw std::invalid_argument("orthographic camera needs footprint > 0");
}

Vec3 Camera::right() const { return normalized(cross(forward, up)); }
Vec3 Camera::true_up() const { return cross(right(), forward); }

Ray Camera::pixel_ray(double px, double py) const
{
    const Vec3 r = right(), u = true_up();
    if (kind == CameraKind::Orthographic)
        return {position + r * ((px - cx) * footprint) - u * ((py - cy) * footprint), forward};
    return {position, normalized(forward * focal + r * (px - cx) - u * (py - cy))};
}

std::optional<std::pair<double, double>> Camera::project(const Vec3& p) const
{
    const Vec3 d = p - position;
    const Vec3 r = right(), u = true_up();
    if (kind == CameraKind::Orthographic) return std::make_pair(cx + dot(d, r) / footprint, cy - dot(d, u) / footprint);
    const double z = dot(d, forward);
    if (z <= 0.0) return std::nullopt;
    return std::make_pair(cx + focal * dot(d, r) / z, cy - focal * dot(d, u) / z);
}

Camera Camera::front(const GridDims& dims, CameraKind kind, int width, int height, double distance)
{
    const Vec3 ext = dims.extent();
    if (!(distance > 0.5 * ext.z)) throw std::invalid_argument("camera distance must place the camera outside the domain");
    Camera cam;
    cam.kind = kind;
    cam.width = width;
    cam.height = height;
    cam.cx = 0.5 * width;
    cam.cy = 0.5 * height;
    cam.position = ext * 0.5 + Vec3{0.0, 0.0, distance};
    const double fp = std::max(ext.x / width, ext.y / height);
    if (kind == CameraKind::Orthographic) cam.footprint = fp;
    else cam.focal = (distance - 0.5 * ext.z) / fp; // near face fills the image
    cam.validate();
    return cam;
}

CameraKind parse_camera_kind(const std::string& name)
{
    if (name == "perspective") return CameraKind::Perspective;
    if (name == "orthographic") return CameraKind::Orthographic;
    throw std::invalid_argument("unknown camera kind '" + name + "' (expected perspective or orthographic)");
}

VisualHull::VisualHull(const GridDims& dims, std::vector<std::uint8_t> mask)
    : dims_(dims), mask_(std::move(mask)), column_(dims.cells(), -1)
{
    if (mask_.size() != dims.cells()) throw std::invalid_argument("VisualHull: mask size does not match grid");
    for (std::size_t c = 0; c < mask_.size(); ++c)
        if (mask_[c]) {
            column_[c] = static_cast<std::int64_t>(cells_.size());
            cells_.push_back(c);
        }
}

VisualHull VisualHull::full(const GridDims& dims) { return VisualHull(dims, std::vector<std::uint8_t>(dims.cells(), 1)); }

Vec VisualHull::gather(const ScalarField& f) const
{
    Vec out(cells_.size());
    for (std::size_t n = 0; n < cells_.size(); ++n) out[n] = f[cells_[n]];
    return out;
}

ScalarField VisualHull::scatter(std::span<const double> packed) const
{
    if (packed.size() != cells_.size()) throw std::invalid_argument("VisualHull::scatter: size mismatch");
    ScalarField f(dims_);
    for (std::size_t n = 0; n < cells_.size(); ++n) f[cells_[n]] = packed[n];
    return f;
}

VisualHull VisualHull::united(const VisualHull& other) const
{
    std::vector<std::uint8_t> m = mask_;
    for (std::size_t c = 0; c < m.size(); ++c) m[c] = static_cast<std::uint8_t>(m[c] | other.mask_[c]);
    return VisualHull(dims_, std::move(m));
}

VisualHull VisualHull::dilated(int radius) const
{
    if (radius <= 0) return *this;
    const GridDims& d = dims_;
    std::vector<std::uint8_t> m(mask_.size(), 0);
    for (int k = 0; k < d.nz; ++k)
        for (int j = 0; j < d.ny; ++j)
            for (int i = 0; i < d.nx; ++i) {
                if (!mask_[d.index(i, j, k)]) continue;
                for (int dk = -radius; dk <= radius; ++dk)
                    for (int dj = -radius; dj <= radius; ++dj)
                        for (int di = -radius; di <= radius; ++di)
                            if (d.inside(i + di, j + dj, k + dk)) m[d.index(i + di, j + dj, k + dk)] = 1;
            }
    return VisualHull(d, std::move(m));
}

namespace {

//! Slab intersection with the box [0, ext]; returns false when missed.
bool clip_to_box(const Ray& ray, const Vec3& ext, double& t0, double& t1)
{
    t0 = 0.0;
    t1 = std::numeric_limits<double>::infinity();
    if (ray.direction.x == 0.0 && ray.direction.y == 0.0 && ray.direction.z == 0.0) return false;
    t0 = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < 3; ++a) {
        const double o = ray.origin[a], dir = ray.direction[a];
        if (dir == 0.0) {
            if (o < 0.0 || o > ext[a]) return false;
            continue;
        }
        double ta = (0.0 - o) / dir, tb = (ext[a] - o) / dir;
        if (ta > tb) std::swap(ta, tb);
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
    }
    return t1 > t0;
}

} // namespace

Projection build_projection_matrix(const Camera& camera, const GridDims& dims, const VisualHull& hull, double step)
{
    camera.validate();
    if (!(hull.dims() == dims)) throw std::invalid_argument("build_projection_matrix: hull grid does not match");
    if (!(step > 0.0) || step > 0.5 * dims.dx + 1e-12)
        throw std::invalid_argument("build_projection_matrix: ray step must be in (0, dx/2]");
    if (hull.empty()) std::cerr << "warning: empty visual hull, projection matrix has no columns\n";

    const Vec3 ext = dims.extent();
    const std::size_t npix = static_cast<std::size_t>(camera.width) * camera.height;
    std::vector<std::vector<std::pair<std::uint32_t, double>>> rows(npix);
    const double inv_dx = 1.0 / dims.dx;
    const std::array<int, 3> n{dims.nx, dims.ny, dims.nz};

    std::vector<std::pair<std::uint32_t, double>> scratch;
    for (int py = 0; py < camera.height; ++py)
        for (int px = 0; px < camera.width; ++px) {
            if (hull.empty()) continue;
            const Ray ray = camera.pixel_ray(px + 0.5, py + 0.5);
            double t0, t1;
            if (!clip_to_box(ray, ext, t0, t1)) continue;
            if (camera.kind == CameraKind::Perspective) t0 = std::max(t0, 0.0);
            const double len = t1 - t0;
            if (!(len > 0.0)) continue;
            const int nsteps = static_cast<int>(std::ceil(len / step - 1e-9));
            const double h = len / nsteps;

            scratch.clear();
            for (int s = 0; s < nsteps; ++s) {
                const Vec3 p = ray.origin + ray.direction * (t0 + (s + 0.5) * h);
                int base[3];
                double frac[3];
                for (int a = 0; a < 3; ++a) {
                    const double g = std::clamp(p[a] * inv_dx - 0.5, 0.0, static_cast<double>(n[a] - 1));
                    base[a] = std::min(static_cast<int>(g), n[a] - 2);
                    frac[a] = g - base[a];
                }
                for (int c = 0; c < 8; ++c) {
                    const int di = c & 1, dj = (c >> 1) & 1, dk = (c >> 2) & 1;
                    const double w = (di ? frac[0] : 1.0 - frac[0]) * (dj ? frac[1] : 1.0 - frac[1]) * (dk ? frac[2] : 1.0 - frac[2]);
                    if (w <= 0.0) continue;
                    const std::int64_t col = hull.column(dims.index(base[0] + di, base[1] + dj, base[2] + dk));
                    if (col < 0) continue;
                    scratch.emplace_back(static_cast<std::uint32_t>(col), w * h);
                }
            }
            std::sort(scratch.begin(), scratch.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
            auto& row = rows[static_cast<std::size_t>(py) * camera.width + px];
            for (const auto& [col, w] : scratch) {
                if (!row.empty() && row.back().first == col) row.back().second += w;
                else row.emplace_back(col, w);
            }
        }

    Projection proj;
    proj.matrix = SparseMatrix::from_rows(hull.size(), rows);
    proj.width = camera.width;
    proj.height = camera.height;
    proj.views = 1;

    // pixels per voxel at the depth of the domain center
    const double center_depth = dot(ext * 0.5 - camera.position, camera.forward);
    const double ppv = camera.kind == CameraKind::Orthographic ? dims.dx / camera.footprint : camera.focal * dims.dx / center_depth;
    std::map<std::pair<std::int64_t, std::int64_t>, std::uint32_t> bins;
    proj.ray_groups.resize(hull.size());
    for (std::size_t n = 0; n < hull.size(); ++n) {
        const std::size_t c = hull.cells()[n];
        const int i = static_cast<int>(c % dims.nx);
        const int j = static_cast<int>((c / dims.nx) % dims.ny);
        const int k = static_cast<int>(c / (static_cast<std::size_t>(dims.nx) * dims.ny));
        const auto pix = camera.project(Vec3{i + 0.5, j + 0.5, k + 0.5} * dims.dx);
        const std::pair<std::int64_t, std::int64_t> key =
            pix ? std::make_pair(static_cast<std::int64_t>(std::floor(pix->first / ppv)), static_cast<std::int64_t>(std::floor(pix->second / ppv)))
                : std::make_pair(std::numeric_limits<std::int64_t>::min(), static_cast<std::int64_t>(n));
        proj.ray_groups[n] = bins.try_emplace(key, static_cast<std::uint32_t>(bins.size())).first->second;
    }
    return proj;
}

Image project(const Projection& projection, const ScalarField& density, const VisualHull& hull)
{
    if (projection.matrix.cols() != hull.size()) throw std::invalid_argument("project: hull does not match projection columns");
    Image img(projection.width, projection.height * projection.views);
    projection.matrix.apply(hull.gather(density), img.values);
    return img;
}

double default_hull_threshold(const Image& image) { return 1e-3 * image.max(); }

VisualHull compute_visual_hull(const Image& image, const Camera& camera, const GridDims& dims, double threshold, int dilation)
{
    if (image.width != camera.width || image.height != camera.height)
        throw std::invalid_argument("compute_visual_hull: image size does not match camera");
    std::vector<std::uint8_t> mask(dims.cells(), 0);
    for (int k = 0; k < dims.nz; ++k)
        for (int j = 0; j < dims.ny; ++j)
            for (int i = 0; i < dims.nx; ++i) {
                const auto pix = camera.project(Vec3{i + 0.5, j + 0.5, k + 0.5} * dims.dx);
                if (!pix) continue;
                const int x = static_cast<int>(std::floor(pix->first));
                const int y = static_cast<int>(std::floor(pix->second));
                if (x < 0 || y < 0 || x >= image.width || y >= image.height) continue;
                if (image.at(x, y) > threshold) mask[dims.index(i, j, k)] = 1;
            }
    return VisualHull(dims, std::move(mask)).dilated(dilation);
}

SecondaryMode parse_secondary_mode(const std::string& name)
{
    if (name == "none") return SecondaryMode::None;
    if (name == "front_as_back") return SecondaryMode::FrontAsBack;
    if (name == "front_as_side") return SecondaryMode::FrontAsSide;
    throw std::invalid_argument("unknown secondary view mode '" + name + "' (expected none, front_as_back or front_as_side)");
}

std::string secondary_mode_name(SecondaryMode mode)
{
    switch (mode) {
    case SecondaryMode::None: return "none";
    case SecondaryMode::FrontAsBack: return "front_as_back";
    case SecondaryMode::FrontAsSide: return "front_as_side";
    }
    return "none";
}

Camera secondary_camera(const Camera& front, const GridDims& dims, SecondaryMode mode)
{
    const Vec3 center = dims.extent() * 0.5;
    Camera cam = front;
    const Vec3 rel = front.position - center;
    if (mode == SecondaryMode::FrontAsBack) {
        cam.position = center + Vec3{rel.x, rel.y, -rel.z};
        cam.forward = Vec3{front.forward.x, front.forward.y, -front.forward.z};
        cam.up = Vec3{front.up.x, front.up.y, -front.up.z};
    } else if (mode == SecondaryMode::FrontAsSide) {
        const auto rot = [](const Vec3& v) { return Vec3{v.z, v.y, -v.x}; }; // +90 degrees about y
        cam.position = center + rot(rel);
        cam.forward = rot(front.forward);
        cam.up = rot(front.up);
    } else {
        throw std::invalid_argument("secondary_camera: mode 'none' has no camera");
    }
    cam.validate();
    return cam;
}

Projection add_secondary_view(const Projection& front, const Camera& secondary, const GridDims& dims,
                              const VisualHull& hull, double step, double weight)
{
    if (weight < 0.0) throw std::invalid_argument("add_secondary_view: weight must be >= 0");
    const Projection side = build_projection_matrix(secondary, dims, hull, step);
    if (side.width != front.width || side.height != front.height)
        throw std::invalid_argument("add_secondary_view: secondary image size differs from the front view");
    Projection out;
    out.matrix = SparseMatrix::vstack(front.matrix, side.matrix, weight);
    out.width = front.width;
    out.height = front.height;
    out.views = front.views + 1;
    out.ray_groups = front.ray_groups;
    return out;
}

Vec stacked_target(const Image& front, SecondaryMode mode, double weight)
{
    Vec out = front.values;
    if (mode == SecondaryMode::None) return out;
    const Image second = mode == SecondaryMode::FrontAsBack ? mirror_horizontal(front) : front;
    for (double v : second.values) out.push_back(weight * v);
    return out;
}

} // namespace smokecap
