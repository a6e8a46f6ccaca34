/******************************************************************************
 *
 * smokecap - single-view smoke density and velocity reconstruction
 *
 * This program is free software, distributed under the terms of the
 * Apache License, Version 2.0
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Cameras, ray-marched projection matrices and visual hulls
 *
 ******************************************************************************/
#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "smokecap/grid.hpp"
#include "smokecap/linalg.hpp"

namespace smokecap {

//! Grayscale image, row-major with row 0 at the top. Values are line
//! integrals of density (density * world length).
struct Image {
    int width = 0;
    int height = 0;
    Vec values;

    Image() = default;
    Image(int w, int h, double value = 0.0) : width(w), height(h), values(static_cast<std::size_t>(w) * h, value) {}

    double& at(int x, int y) { return values[static_cast<std::size_t>(y) * width + x]; }
    double at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
    double max() const;
    double sum() const;
};

Image mirror_horizontal(const Image& image);

enum class CameraKind { Perspective, Orthographic };

struct Ray {
    Vec3 origin;
    Vec3 direction;
};

struct Camera {
    CameraKind kind = CameraKind::Orthographic;
    Vec3 position;
    Vec3 forward{0.0, 0.0, -1.0};
    Vec3 up{0.0, 1.0, 0.0};
    double focal = 0.0;     //!< pixels, perspective only
    double footprint = 0.0; //!< world units per pixel, orthographic only
    double cx = 0.0;        //!< principal point, pixels
    double cy = 0.0;
    int width = 0;
    int height = 0;

    void validate() const;
    Vec3 right() const;
    Vec3 true_up() const;

    //! Ray through continuous pixel coordinates (pixel x spans [x, x+1]).
    Ray pixel_ray(double px, double py) const;
    //! Continuous pixel coordinates of a world point, none when behind a perspective camera.
    std::optional<std::pair<double, double>> project(const Vec3& p) const;

    //! Camera on the +z side of the domain looking down -z at the domain center;
    //! `distance` is measured from the center. The whole domain fits the image.
    static Camera front(const GridDims& dims, CameraKind kind, int width, int height, double distance);
};

CameraKind parse_camera_kind(const std::string& name);

//! Single-view silhouette hull with a compact column numbering.
class VisualHull {
public:
    VisualHull() = default;
    VisualHull(const GridDims& dims, std::vector<std::uint8_t> mask);
    static VisualHull full(const GridDims& dims);

    const GridDims& dims() const { return dims_; }
    std::size_t size() const { return cells_.size(); }
    bool empty() const { return cells_.empty(); }
    bool contains(std::size_t cell) const { return mask_[cell] != 0; }
    //! Compact column of a cell, -1 outside the hull.
    std::int64_t column(std::size_t cell) const { return column_[cell]; }
    const std::vector<std::size_t>& cells() const { return cells_; }
    const std::vector<std::uint8_t>& mask() const { return mask_; }

    Vec gather(const ScalarField& f) const;
    ScalarField scatter(std::span<const double> packed) const;

    VisualHull united(const VisualHull& other) const;
    VisualHull dilated(int radius = 1) const;

private:
    GridDims dims_;
    std::vector<std::uint8_t> mask_;
    std::vector<std::int64_t> column_;
    std::vector<std::size_t> cells_;
};

//! Projection matrix with its image layout. Views are stacked vertically:
//! rows = width * height * views.
struct Projection {
    SparseMatrix matrix;
    int width = 0;
    int height = 0;
    int views = 1;
    //! Per hull column, the id of the bundle of voxels along one line of
    //! sight of the first view (voxel centers binned by projected position).
    std::vector<std::uint32_t> ray_groups;
};

//! Ray-marching quadrature: each pixel ray is clipped to the domain box,
//! sampled at midpoints of equal sub-steps no longer than `step`, and every
//! sample's trilinear weights (times the sub-step length) are splatted onto
//! the 8 surrounding hull voxels.
Projection build_projection_matrix(const Camera& camera, const GridDims& dims, const VisualHull& hull, double step);

Image project(const Projection& projection, const ScalarField& density, const VisualHull& hull);

double default_hull_threshold(const Image& image);

//! Voxels whose centers project onto pixels brighter than `threshold`,
//! dilated by `dilation` voxels.
VisualHull compute_visual_hull(const Image& image, const Camera& camera, const GridDims& dims, double threshold,
                               int dilation = 1);

enum class SecondaryMode { None, FrontAsBack, FrontAsSide };
SecondaryMode parse_secondary_mode(const std::string& name);
std::string secondary_mode_name(SecondaryMode mode);

//! Camera that sees the domain from behind (mirror of the front camera) or
//! from the +x side (front camera rotated about the vertical axis).
Camera secondary_camera(const Camera& front, const GridDims& dims, SecondaryMode mode);

//! Appends weight-scaled rows of the secondary camera's matrix.
Projection add_secondary_view(const Projection& front, const Camera& secondary, const GridDims& dims,
                              const VisualHull& hull, double step, double weight);

//! Target vector for a stacked projection: [i; weight * i'] with i' the
//! mirrored (front_as_back) or unchanged (front_as_side) input image.
Vec stacked_target(const Image& front, SecondaryMode mode, double weight);

} // namespace smokecap
