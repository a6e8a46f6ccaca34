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
 ******************************************************************************/
#include "smokecap/io.hpp"

#include <array>
#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace smokecap {

namespace {

constexpr char volume_magic[5] = {'F', 'V', 'O', 'L', '1'};
constexpr std::size_t volume_header_bytes = 5 + 4 * 4 + 4;

void put_u32(std::string& out, std::uint32_t v)
{
    for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xFF));
}

std::uint32_t get_u32(const unsigned char* p)
{
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) | (static_cast<std::uint32_t>(p[2]) << 16) |
           (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_f32(std::string& out, double v)
{
    if (!std::isfinite(v)) throw std::invalid_argument("write_volume: non-finite sample");
    put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
}

float get_f32(const unsigned char* p) { return std::bit_cast<float>(get_u32(p)); }

std::string volume_header(const GridDims& d, std::uint32_t channels)
{
    std::string out(volume_magic, sizeof(volume_magic));
    put_u32(out, static_cast<std::uint32_t>(d.nx));
    put_u32(out, static_cast<std::uint32_t>(d.ny));
    put_u32(out, static_cast<std::uint32_t>(d.nz));
    put_u32(out, channels);
    put_f32(out, d.dx);
    return out;
}

void write_file(const std::filesystem::path& path, const std::string& bytes)
{
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw std::runtime_error("write to " + path.string() + " failed");
}

std::string read_file(const std::filesystem::path& path)
{
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

struct ParsedVolume {
    VolumeHeader header;
    std::string bytes;
};

ParsedVolume parse_volume(const std::filesystem::path& path)
{
    ParsedVolume v;
    v.bytes = read_file(path);
    if (v.bytes.size() < volume_header_bytes || std::memcmp(v.bytes.data(), volume_magic, sizeof(volume_magic)) != 0)
        throw std::runtime_error(path.string() + ": not an FVOL1 volume");
    const auto* p = reinterpret_cast<const unsigned char*>(v.bytes.data()) + sizeof(volume_magic);
    v.header.dims = {static_cast<int>(get_u32(p)), static_cast<int>(get_u32(p + 4)), static_cast<int>(get_u32(p + 8)),
                     static_cast<double>(get_f32(p + 16))};
    v.header.channels = get_u32(p + 12);
    if (v.header.channels != 1 && v.header.channels != 3)
        throw std::runtime_error(path.string() + ": unsupported channel count " + std::to_string(v.header.channels));
    try {
        v.header.dims.validate();
    } catch (const std::exception& e) {
        throw std::runtime_error(path.string() + ": " + e.what());
    }
    const std::size_t samples = v.header.channels == 1 ? v.header.dims.cells() : v.header.dims.total_faces();
    const std::size_t expected = volume_header_bytes + 4 * samples;
    if (v.bytes.size() != expected)
        throw std::runtime_error(path.string() + ": expected " + std::to_string(expected) + " bytes, found " +
                                 std::to_string(v.bytes.size()));
    return v;
}

void decode_samples(const std::string& bytes, std::span<double> out)
{
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data()) + volume_header_bytes;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = get_f32(p + 4 * i);
}

} // namespace

void write_volume(const std::filesystem::path& path, const ScalarField& field)
{
    std::string bytes = volume_header(field.dims(), 1);
    bytes.reserve(bytes.size() + 4 * field.size());
    for (double v : field.values()) put_f32(bytes, v);
    write_file(path, bytes);
}

void write_volume(const std::filesystem::path& path, const MacField& field)
{
    std::string bytes = volume_header(field.dims(), 3);
    bytes.reserve(bytes.size() + 4 * field.size());
    for (double v : field.data()) put_f32(bytes, v);
    write_file(path, bytes);
}

VolumeHeader read_volume_header(const std::filesystem::path& path) { return parse_volume(path).header; }

ScalarField read_scalar_volume(const std::filesystem::path& path)
{
    const ParsedVolume v = parse_volume(path);
    if (v.header.channels != 1) throw std::runtime_error(path.string() + ": expected a scalar volume, found a MAC volume");
    ScalarField f(v.header.dims);
    decode_samples(v.bytes, f.values());
    return f;
}

MacField read_mac_volume(const std::filesystem::path& path)
{
    const ParsedVolume v = parse_volume(path);
    if (v.header.channels != 3) throw std::runtime_error(path.string() + ": expected a MAC volume, found a scalar volume");
    MacField f(v.header.dims);
    decode_samples(v.bytes, f.data());
    return f;
}

void write_image(const std::filesystem::path& path, const Image& image, double scale)
{
    if (image.width <= 0 || image.height <= 0) throw std::invalid_argument("write_image: empty image");
    if (scale <= 0.0) scale = image.max() > 0.0 ? image.max() : 1.0;
    char scale_text[64];
    std::snprintf(scale_text, sizeof(scale_text), "%.9g", scale);
    std::string bytes = "P5\n#scale=" + std::string(scale_text) + "\n" + std::to_string(image.width) + " " +
                        std::to_string(image.height) + "\n65535\n";
    for (double v : image.values) {
        if (!std::isfinite(v)) throw std::invalid_argument("write_image: non-finite pixel");
        const double q = std::round(std::clamp(v / scale, 0.0, 1.0) * 65535.0);
        const auto s = static_cast<std::uint16_t>(q);
        bytes.push_back(static_cast<char>(s >> 8));
        bytes.push_back(static_cast<char>(s & 0xFF));
    }
    write_file(path, bytes);
}

Image read_image(const std::filesystem::path& path)
{
    const std::string bytes = read_file(path);
    std::size_t pos = 0;
    double scale = 1.0;
    auto fail = [&](const std::string& what) { throw std::runtime_error(path.string() + ": " + what); };
    // header tokens, with comment lines allowed between them
    auto next_token = [&]() {
        for (;;) {
            while (pos < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
            if (pos < bytes.size() && bytes[pos] == '#') {
                const std::size_t end = bytes.find('\n', pos);
                if (end == std::string::npos) fail("unterminated comment");
                const std::string comment = bytes.substr(pos + 1, end - pos - 1);
                if (comment.rfind("scale=", 0) == 0) {
                    try {
                        scale = std::stod(comment.substr(6));
                    } catch (const std::exception&) {
                        fail("bad scale comment '" + comment + "'");
                    }
                }
                pos = end + 1;
                continue;
            }
            break;
        }
        const std::size_t start = pos;
        while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
        if (start == pos) fail("truncated header");
        return bytes.substr(start, pos - start);
    };
    if (next_token() != "P5") fail("not a binary PGM (P5)");
    int w = 0, h = 0, maxval = 0;
    try {
        w = std::stoi(next_token());
        h = std::stoi(next_token());
        maxval = std::stoi(next_token());
    } catch (const std::invalid_argument&) {
        fail("malformed header");
    }
    if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535) fail("invalid dimensions or maxval");
    ++pos; // single whitespace before the raster
    const std::size_t bps = maxval > 255 ? 2 : 1;
    const std::size_t expected = static_cast<std::size_t>(w) * h * bps;
    if (bytes.size() - std::min(pos, bytes.size()) != expected)
        fail("expected " + std::to_string(expected) + " raster bytes, found " + std::to_string(bytes.size() - std::min(pos, bytes.size())));
    Image img(w, h);
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data()) + pos;
    for (std::size_t i = 0; i < img.values.size(); ++i) {
        const unsigned s = bps == 2 ? (static_cast<unsigned>(p[2 * i]) << 8) | p[2 * i + 1] : p[i];
        img.values[i] = scale * static_cast<double>(s) / maxval;
    }
    return img;
}

std::filesystem::path frame_path(const std::filesystem::path& dir, const std::string& prefix, int frame, const std::string& ext)
{
    char name[32];
    std::snprintf(name, sizeof(name), "_%04d.", frame);
    return dir / (prefix + name + ext);
}

} // namespace smokecap
