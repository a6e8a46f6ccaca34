/******************************************************************************
 *
 * smokecap - single-view smoke density and velocity reconstruction
 *
 * This program is free software, distributed under the terms of the
 * Apache License, Version 2.0
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Reconstruction error metrics
 *
 ******************************************************************************/
#include "smokecap/eval.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace smokecap {

namespace {

void check_sizes(std::span<const double> a, std::span<const double> b)
{
    if (a.size() != b.size()) throw std::invalid_argument("relative error: size mismatch");
}

double relative(double diff, double ref)
{
    if (ref > 0.0) return diff / ref;
    return diff > 0.0 ? 1.0 : 0.0;
}

bool is_fluid(CellFlag f) { return f == CellFlag::Fluid || f == CellFlag::Inflow; }

template <class Fn>
void for_fluid_cells(const MacField& a, const MacField& b, const FlagGrid& flags, Fn&& fn)
{
    const GridDims& d = flags.dims();
    if (!(a.dims() == d) || !(b.dims() == d)) throw std::invalid_argument("velocity metric: grid mismatch");
    for (int k = 0; k < d.nz; ++k)
        for (int j = 0; j < d.ny; ++j)
            for (int i = 0; i < d.nx; ++i)
                if (is_fluid(flags(i, j, k))) fn(a.centered(i, j, k), b.centered(i, j, k));
}

std::string num(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6e", v);
    return buf;
}

} // namespace

double relative_error_l1(std::span<const double> a, std::span<const double> b)
{
    check_sizes(a, b);
    double diff = 0.0, ref = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        diff += std::abs(a[i] - b[i]);
        ref += std::abs(b[i]);
    }
    return relative(diff, ref);
}

double relative_error_l2(std::span<const double> a, std::span<const double> b)
{
    check_sizes(a, b);
    double diff = 0.0, ref = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        diff += (a[i] - b[i]) * (a[i] - b[i]);
        ref += b[i] * b[i];
    }
    return relative(std::sqrt(diff), std::sqrt(ref));
}

double velocity_rms_error(const MacField& recon, const MacField& truth, const FlagGrid& flags)
{
    double sum = 0.0;
    std::size_t count = 0;
    for_fluid_cells(recon, truth, flags, [&](const Vec3& a, const Vec3& b) {
        const Vec3 e = a - b;
        sum += dot(e, e);
        ++count;
    });
    return count ? std::sqrt(sum / static_cast<double>(count)) : 0.0;
}

double velocity_cosine(const MacField& recon, const MacField& truth, const FlagGrid& flags)
{
    double ab = 0.0, aa = 0.0, bb = 0.0;
    for_fluid_cells(recon, truth, flags, [&](const Vec3& a, const Vec3& b) {
        ab += dot(a, b);
        aa += dot(a, a);
        bb += dot(b, b);
    });
    if (aa == 0.0 && bb == 0.0) return 1.0;
    if (aa == 0.0 || bb == 0.0) return 0.0;
    return ab / std::sqrt(aa * bb);
}

FrameMetrics EvalReport::mean() const
{
    FrameMetrics m;
    m.frame = -1;
    if (frames.empty()) return m;
    const double n = static_cast<double>(frames.size());
    if (has_truth) m.density_l1 = m.velocity_rms = m.velocity_cosine = 0.0;
    for (const FrameMetrics& f : frames) {
        m.image_l1 += f.image_l1 / n;
        m.image_l2 += f.image_l2 / n;
        if (has_truth) {
            *m.density_l1 += *f.density_l1 / n;
            *m.velocity_rms += *f.velocity_rms / n;
            *m.velocity_cosine += *f.velocity_cosine / n;
        }
    }
    return m;
}

std::string EvalReport::to_csv() const
{
    std::string out = has_truth ? "frame,image_l1,image_l2,density_l1,velocity_rms,velocity_cosine\n" : "frame,image_l1,image_l2\n";
    auto row = [&](const std::string& label, const FrameMetrics& f) {
        out += label + "," + num(f.image_l1) + "," + num(f.image_l2);
        if (has_truth) out += "," + num(*f.density_l1) + "," + num(*f.velocity_rms) + "," + num(*f.velocity_cosine);
        out += "\n";
    };
    for (const FrameMetrics& f : frames) row(std::to_string(f.frame), f);
    row("mean", mean());
    return out;
}

EvalReport evaluate(const std::vector<EvalFrame>& frames, const FlagGrid& flags)
{
    EvalReport report;
    report.has_truth = !frames.empty() && frames.front().true_density != nullptr;
    for (const EvalFrame& f : frames) {
        if (!f.rendered || !f.input) throw std::invalid_argument("evaluate: frame " + std::to_string(f.frame) + " lacks images");
        if ((f.true_density != nullptr) != report.has_truth)
            throw std::invalid_argument("evaluate: ground truth must be given for all frames or none");
        if (f.rendered->values.size() != f.input->values.size())
            throw std::invalid_argument("evaluate: frame " + std::to_string(f.frame) + " image size mismatch");
        FrameMetrics m;
        m.frame = f.frame;
        m.image_l1 = relative_error_l1(f.rendered->values, f.input->values);
        m.image_l2 = relative_error_l2(f.rendered->values, f.input->values);
        if (report.has_truth) {
            if (!f.density || !f.velocity || !f.true_velocity)
                throw std::invalid_argument("evaluate: frame " + std::to_string(f.frame) + " lacks volumes");
            m.density_l1 = relative_error_l1(f.density->values(), f.true_density->values());
            m.velocity_rms = velocity_rms_error(*f.velocity, *f.true_velocity, flags);
            m.velocity_cosine = velocity_cosine(*f.velocity, *f.true_velocity, flags);
        }
        for (double v : {m.image_l1, m.image_l2, m.density_l1.value_or(0.0), m.velocity_rms.value_or(0.0), m.velocity_cosine.value_or(0.0)})
            if (!std::isfinite(v)) throw std::runtime_error("evaluate: non-finite metric at frame " + std::to_string(f.frame));
        report.frames.push_back(m);
    }
    return report;
}

} // namespace smokecap
