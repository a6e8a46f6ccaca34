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
 * Output layout below out_dir:
 *   truth/density_NNNN.fvol, truth/velocity_NNNN.fvol   simulate
 *   images/image_NNNN.pgm                               project (or image_dir)
 *   recon/density_NNNN.fvol, recon/velocity_NNNN.fvol   reconstruct
 *   recon/predicted_NNNN.fvol, recon/update_NNNN.fvol   motion of frame NNNN
 *   recon/coarse_NNNN.fvol                              multi-scale runs only
 *   recon/source.fvol                                   estimated emission rate
 *   recon/solver_log.csv                                per outer iteration of each frame
 *   report.csv                                          eval (also run by reconstruct)
 *   resim/density_NNNN.fvol                             resim
 *   extrap/density_NNNN.fvol, extrap/velocity_NNNN.fvol extrapolate
 *
 ******************************************************************************/
#pragma once

#include <vector>

#include "smokecap/config.hpp"
#include "smokecap/eval.hpp"

namespace smokecap {

//! Runs the synthetic scene and writes frames 0 .. frames-1.
std::vector<SimState> run_simulate(const AppConfig& cfg);

//! Renders the front view of each truth density into the image directory.
std::vector<Image> run_project(const AppConfig& cfg);

//! Reconstructs frames 0 .. frames-1 from the image directory, writes the
//! volumes, then evaluates them into report.csv.
Reconstruction run_reconstruct(const AppConfig& cfg, EvalReport* report = nullptr);

//! Compares recon/ with the images and, when truth/ holds every frame, with
//! the ground truth. Writes report.csv and returns the report.
EvalReport run_eval(const AppConfig& cfg);

//! Re-simulates the reconstructed motion on a grid refined by resim_factor.
std::vector<ScalarField> run_resim(const AppConfig& cfg);

//! Continues the simulation from reconstructed frame extrapolate_from.
std::vector<SimState> run_extrapolate(const AppConfig& cfg);

//! Estimated emitter as stored in recon/source.fvol.
Inflow read_source(const AppConfig& cfg);

} // namespace smokecap
