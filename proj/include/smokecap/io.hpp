/******************************************************************************
 *
 * smokecap - single-view smoke density and velocity reconstruction
 *
 * This program is free software, distributed under the terms of the
 * Apache License, Version 2.0
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Volume and image files
 *
 * Volumes: magic "FVOL1", then nx, ny, nz, channels as little-endian u32,
 * dx as little-endian f32, then little-endian f32 samples in x-fastest
 * order. MAC fields (channels = 3) store the u, v and w face blocks one
 * after the other.
 *
 * Images: binary 16-bit PGM (P5, big-endian samples). The comment line
 * "#scale=<float>" gives the value of the sample 65535.
 *
 ******************************************************************************/
#pragma once

#include <filesystem>
#include <string>

#include "smokecap/grid.hpp"
#include "smokecap/tomography.hpp"

namespace smokecap {

struct VolumeHeader {
    GridDims dims;
    std::uint32_t channels = 1;
};

void write_volume(const std::filesystem::path& path, const ScalarField& field);
void write_volume(const std::filesystem::path& path, const MacField& field);
VolumeHeader read_volume_header(const std::filesystem::path& path);
ScalarField read_scalar_volume(const std::filesystem::path& path);
MacField read_mac_volume(const std::filesystem::path& path);

//! The scale defaults to the image maximum (1 for a black image).
void write_image(const std::filesystem::path& path, const Image& image, double scale = 0.0);
Image read_image(const std::filesystem::path& path);

//! dir / "<prefix>_<frame, 4 digits>.<ext>"
std::filesystem::path frame_path(const std::filesystem::path& dir, const std::string& prefix, int frame, const std::string& ext);

} // namespace smokecap
