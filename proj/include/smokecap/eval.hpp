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
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "smokecap/grid.hpp"
#include "smokecap/tomography.hpp"

namespace smokecap {

struct FrameMetrics {
    int frame = 0;
    double image_l1 = 0.0; //!< |P phi - i|_1 / |i|_1
    double image_l2 = 0.0; //!< |P phi - i|_2 / |i|_2
    // ground-truth metrics, present only when a truth sequence was given
    std::optional<double> density_l1;      //!< |phi - phi*|_1 / |phi*|_1
    std::optional<double> velocity_rms;    //!< cell-centered, cells/frame, over fluid cells
    std::optional<double> velocity_cosine; //!< sum u.u* / (|u| |u*|) over fluid cells
};

struct EvalReport {
    std::vector<FrameMetrics> frames;
    bool has_truth = false;

    FrameMetrics mean() const;
    //! Comma-separated table with a header line and a final "mean" row; numbers use %.6e.
    std::string to_csv() const;
};

//! Relative error |a - b| / |b| in the L1 or L2 norm. A zero reference gives
//! 0 when `a` is also zero and 1 otherwise.
double relative_error_l1(std::span<const double> a, std::span<const double> b);
double relative_error_l2(std::span<const double> a, std::span<const double> b);

//! RMS of the cell-centered velocity difference over Fluid and Inflow cells.
double velocity_rms_error(const MacField& recon, const MacField& truth, const FlagGrid& flags);
//! Cosine similarity of the cell-centered velocities over Fluid and Inflow
//! cells; 1 when both fields vanish there, 0 when only one does.
double velocity_cosine(const MacField& recon, const MacField& truth, const FlagGrid& flags);

struct EvalFrame {
    const Image* rendered = nullptr; //!< projection of the reconstruction
    const Image* input = nullptr;
    const ScalarField* density = nullptr;
    const MacField* velocity = nullptr;
    const ScalarField* true_density = nullptr; //!< null when no truth is available
    const MacField* true_velocity = nullptr;
    int frame = 0;
};

//! Truth must be given for all frames or none.
EvalReport evaluate(const std::vector<EvalFrame>& frames, const FlagGrid& flags);

} // namespace smokecap
