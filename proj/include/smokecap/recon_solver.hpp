/******************************************************************************
 *
 * smokecap - single-view smoke density and velocity reconstruction
 *
 * This program is free software, distributed under the terms of the
 * Apache License, Version 2.0
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Coupled density/velocity update: the outer primal-dual loop, its proximal
 * operators and the regularizers.
 *
 * Unknowns are packed as z = (density update on hull cells, velocity update
 * on all MAC faces). The transport residual per fluid cell c is
 *
 *   r_c = dphi_c + sum_a g_a(c) * (u_a(c-) + u_a(c+)) / 2
 *
 * with g the per-cell gradient of the density guess, i.e. the gradient is
 * taken at cell centers and the staggered velocity is averaged onto them.
 *
 ******************************************************************************/
#pragma once

#include <array>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "smokecap/field_ops.hpp"
#include "smokecap/tomography.hpp"

namespace smokecap {

struct PdParams {
    double sigma_phi = 10.0;
    double tau_phi = 0.01;
    double theta_phi = 1.0;
    double sigma_u = 0.1;
    double tau_u = 5.0;
    double theta_u = 1.0;
    double sigma_phi2 = 0.01;
    double tau_phi2 = 100.0;
    double theta_phi2 = 1.0;
    int outer_iters = 30;
    int inner_iters = 50;

    void validate() const;
};

struct RegWeights {
    double alpha_phi = 1e-3;
    double alpha_u = 1e-1;
    double beta_phi = 1e-4;
    double beta_u = 1e-4;
    double lambda_sum = 10.0;
    double lambda_tiko = 1e-3;
    //! Height-dependent z-Tikhonov, only honoured for perspective cameras.
    bool adaptive_z = true;

    void validate() const;
};

struct SolverOptions {
    PdParams pd;
    RegWeights reg;
    CgOptions cg{1e-4, 600};
    double projection_tol = 1e-4;
    bool perspective = false;
};

struct IterationDiagnostics {
    int iteration = 0;
    double objective = 0.0;
    double image_residual = 0.0;
    double divergence = 0.0;
    //! Current density update on hull cells; valid only during the log callback.
    std::span<const double> density_update;
};

struct UpdateResult {
    ScalarField density_update;
    MacField velocity_update;
    double initial_residual = 0.0;
    std::vector<IterationDiagnostics> diagnostics;

    double final_residual() const { return diagnostics.empty() ? initial_residual : diagnostics.back().image_residual; }
};

//! 1 + 10 * (|Y/2 - 1 - j| / (Y/2))^2
double adaptive_z_weight(int j, int ny);

//! One row per (i,j) voxel column that meets the hull; ones on the w-faces
//! bounding the hull cells of that column. Columns index the packed MAC layout.
SparseMatrix build_sum_operator(const GridDims& dims, const VisualHull& hull);

//! Quadratic part A of the transport objective plus the density and velocity
//! regularizers, applied matrix-free on packed (hull density, faces) vectors.
class TransportSystem {
public:
    TransportSystem(const ScalarField& density_guess, const VisualHull& hull, const FlagGrid& flags,
                    const RegWeights& reg, bool perspective);

    std::size_t density_size() const { return hull_.size(); }
    std::size_t velocity_size() const { return dims_.total_faces(); }
    std::size_t size() const { return density_size() + velocity_size(); }

    void apply(std::span<const double> z, std::span<double> out) const;
    const Vec& diagonal() const { return diagonal_; }

    //! Inverse of the shifted system restricted to its diagonal, except on
    //! each (i,j) column of w-faces, where the z-smoothness chain and the
    //! rank-one depth-sum term are inverted exactly.
    std::function<void(std::span<const double>, std::span<double>)> preconditioner(double sigma_phi, double sigma_u) const;

    //! Transport residual on all cells for a packed z.
    Vec residual(std::span<const double> z) const;
    //! 1/2 |r|^2 + regularizer energies.
    double objective(std::span<const double> z) const;

    const std::array<ScalarField, 3>& gradient() const { return gradient_; }
    const SparseMatrix& sum_operator() const { return sum_op_; }

private:
    void apply_transport(std::span<const double> z, std::span<double> r) const;
    void apply_transport_transpose(std::span<const double> r, std::span<double> out) const;

    GridDims dims_;
    VisualHull hull_;
    std::vector<std::uint8_t> active_; //!< non-obstacle cells
    std::array<ScalarField, 3> gradient_;
    RegWeights reg_;
    SparseMatrix sum_op_;
    Vec w_tikhonov_; //!< per w-face z-Tikhonov weight
    std::vector<std::vector<std::uint32_t>> neighbours_;
    Vec diagonal_;
    mutable Vec scratch_;
};

//! (Sigma + A)^{-1} Sigma q with Sigma = sigma_phi on the density block and
//! sigma_u on the velocity block. `warm_start` may carry the previous result.
Vec prox_f(const TransportSystem& system, std::span<const double> q, double sigma_phi, double sigma_u,
           const CgOptions& cg, std::span<const double> warm_start = {});

//! Projection of a packed velocity block onto divergence-free fields.
Vec prox_g_u(std::span<const double> q_u, const DivergenceProjector& projector, double tol);

//! max(q_c, -(dphi + guess)) elementwise.
Vec prox_nonneg(std::span<const double> q_c, std::span<const double> density_update, std::span<const double> guess);

class RayBlockPreconditioner;

//! Normal equations of the image fit with the density regularizers:
//! sigma2 I + P^T P + alpha_phi L + beta_phi I on hull voxels. When the
//! projection carries ray groups, CG is preconditioned with the exact inverse
//! of each group's diagonal block; voxels on one line of sight are nearly
//! collinear in P^T P, which a diagonal preconditioner cannot resolve.
class TomographySystem {
public:
    TomographySystem(const Projection& projection, const VisualHull& hull, const RegWeights& reg, double sigma2);

    void apply(std::span<const double> x, std::span<double> out) const;
    LinearOperator as_operator() const;
    const Projection& projection() const { return *projection_; }
    bool block_preconditioned() const { return static_cast<bool>(blocks_); }

private:
    const Projection* projection_;
    std::vector<std::vector<std::uint32_t>> neighbours_;
    std::vector<std::size_t> neighbour_start_; //!< flat copy of neighbours_ for apply()
    std::vector<std::uint32_t> neighbour_list_;
    RegWeights reg_;
    double sigma2_;
    Vec diagonal_;
    std::shared_ptr<const RayBlockPreconditioner> blocks_;
};

//! Inner primal-dual loop: q_phi plus the correction minimizing
//! |P c - image_corr|^2 subject to c + q_phi + guess >= 0.
//! `warm_start` keeps the CG initial guess between calls when non-null.
Vec prox_g_phi(const TomographySystem& system, std::span<const double> q_phi, std::span<const double> image_corr,
               std::span<const double> guess, const PdParams& params, const CgOptions& cg, Vec* warm_start = nullptr);

//! Coupled density and velocity update for one frame. `target` is the image
//! difference i_t - P * guess in the projection's row layout.
UpdateResult calculate_update(const ScalarField& density_guess, std::span<const double> target, const Projection& projection,
                              const VisualHull& hull, const FlagGrid& flags, const SolverOptions& options,
                              const std::function<void(const IterationDiagnostics&)>& log = {});

} // namespace smokecap
