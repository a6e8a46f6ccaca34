/******************************************************************************
 *
 * smokecap - single-view smoke density and velocity reconstruction
 *
 * This program is free software, distributed under the terms of the
 * Apache License, Version 2.0
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Coupled density and velocity update solver
 *
 ******************************************************************************/
#include "smokecap/recon_solver.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace smokecap {

void PdParams::validate() const
{
    for (double s : {sigma_phi, tau_phi, sigma_u, tau_u, sigma_phi2, tau_phi2})
        if (!(s > 0.0)) throw std::invalid_argument("primal-dual sigma and tau parameters must be positive");
    for (double t : {theta_phi, theta_u, theta_phi2})
        if (!(t >= 0.0 && t <= 1.0)) throw std::invalid_argument("primal-dual theta parameters must lie in [0, 1]");
    if (outer_iters < 0 || inner_iters < 0) throw std::invalid_argument("iteration counts must be >= 0");
}

void RegWeights::validate() const
{
    for (double w : {alpha_phi, alpha_u, beta_phi, beta_u, lambda_sum, lambda_tiko})
        if (!(w >= 0.0)) throw std::invalid_argument("regularizer weights must be >= 0");
}

double adaptive_z_weight(int j, int ny)
{
    const double half = ny / 2.0;
    const double t = std::abs(half - 1.0 - j) / half;
    return 1.0 + 10.0 * t * t;
}

SparseMatrix build_sum_operator(const GridDims& dims, const VisualHull& hull)
{
    std::vector<std::vector<std::pair<std::uint32_t, double>>> rows;
    for (int j = 0; j < dims.ny; ++j)
        for (int i = 0; i < dims.nx; ++i) {
            std::vector<std::pair<std::uint32_t, double>> row;
            for (int k = 0; k <= dims.nz; ++k) {
                const bool below = k > 0 && hull.contains(dims.index(i, j, k - 1));
                const bool above = k < dims.nz && hull.contains(dims.index(i, j, k));
                if (below || above) row.emplace_back(static_cast<std::uint32_t>(dims.face_index(2, i, j, k)), 1.0);
            }
            if (!row.empty()) rows.push_back(std::move(row));
        }
    return SparseMatrix::from_rows(dims.total_faces(), rows);
}

namespace {

std::vector<std::vector<std::uint32_t>> hull_neighbours(const VisualHull& hull)
{
    const GridDims& d = hull.dims();
    std::vector<std::vector<std::uint32_t>> nb(hull.size());
    static constexpr int offsets[6][3] = {{-1, 0, 0}, {1, 0, 0}, {0, -1, 0}, {0, 1, 0}, {0, 0, -1}, {0, 0, 1}};
    for (std::size_t n = 0; n < hull.size(); ++n) {
        const std::size_t c = hull.cells()[n];
        const int i = static_cast<int>(c % d.nx);
        const int j = static_cast<int>((c / d.nx) % d.ny);
        const int k = static_cast<int>(c / (static_cast<std::size_t>(d.nx) * d.ny));
        for (const auto& o : offsets) {
            if (!d.inside(i + o[0], j + o[1], k + o[2])) continue;
            const std::int64_t col = hull.column(d.index(i + o[0], j + o[1], k + o[2]));
            if (col >= 0) nb[n].push_back(static_cast<std::uint32_t>(col));
        }
    }
    return nb;
}

//! out += alpha * L u for the graph Laplacian of same-component face neighbours.
void add_face_laplacian(const GridDims& d, double alpha, std::span<const double> u, std::span<double> out)
{
    if (alpha == 0.0) return;
    for (int axis = 0; axis < 3; ++axis) {
        const auto e = d.face_extent(axis);
        const std::size_t nx = static_cast<std::size_t>(e[0]), plane = nx * e[1];
        const double* uc = u.data() + d.face_offset(axis);
        double* oc = out.data() + d.face_offset(axis);
        for (int k = 0; k < e[2]; ++k)
            for (int j = 0; j < e[1]; ++j) {
                const std::size_t row = k * plane + j * nx;
                for (std::size_t i = 0; i + 1 < nx; ++i) {
                    const double diff = alpha * (uc[row + i] - uc[row + i + 1]);
                    oc[row + i] += diff;
                    oc[row + i + 1] -= diff;
                }
                if (j + 1 < e[1])
                    for (std::size_t i = 0; i < nx; ++i) {
                        const double diff = alpha * (uc[row + i] - uc[row + nx + i]);
                        oc[row + i] += diff;
                        oc[row + nx + i] -= diff;
                    }
                if (k + 1 < e[2])
                    for (std::size_t i = 0; i < nx; ++i) {
                        const double diff = alpha * (uc[row + i] - uc[row + plane + i]);
                        oc[row + i] += diff;
                        oc[row + plane + i] -= diff;
                    }
            }
    }
}

void add_face_laplacian_diagonal(const GridDims& d, double alpha, std::span<double> diag)
{
    if (alpha == 0.0) return;
    for (int axis = 0; axis < 3; ++axis) {
        const auto e = d.face_extent(axis);
        std::size_t f = d.face_offset(axis);
        for (int k = 0; k < e[2]; ++k)
            for (int j = 0; j < e[1]; ++j)
                for (int i = 0; i < e[0]; ++i, ++f) {
                    const int idx[3] = {i, j, k};
                    int deg = 0;
                    for (int b = 0; b < 3; ++b) deg += (idx[b] > 0) + (idx[b] + 1 < e[b]);
                    diag[f] += alpha * deg;
                }
    }
}

void check_finite(std::span<const double> v, const char* what, int iteration)
{
    for (double x : v)
        if (!std::isfinite(x))
            throw std::runtime_error(std::string("reconstruction solver: non-finite ") + what + " at iteration " + std::to_string(iteration));
}

} // namespace

TransportSystem::TransportSystem(const ScalarField& density_guess, const VisualHull& hull, const FlagGrid& flags,
                                 const RegWeights& reg, bool perspective)
    : dims_(density_guess.dims()), hull_(hull), active_(dims_.cells(), 1), gradient_(gradient_scalar(density_guess)), reg_(reg)
{
    reg.validate();
    if (!(hull.dims() == dims_) || !(flags.dims() == dims_)) throw std::invalid_argument("TransportSystem: grid mismatch");
    for (std::size_t c = 0; c < dims_.cells(); ++c) active_[c] = flags[c] != CellFlag::Obstacle;
    for (auto& g : gradient_)
        for (std::size_t c = 0; c < g.size(); ++c) g[c] = active_[c] ? g[c] * dims_.dx : 0.0; // per-cell units

    sum_op_ = build_sum_operator(dims_, hull_);

    const std::size_t nh = hull_.size();
    w_tikhonov_.assign(dims_.faces(2), reg_.lambda_tiko);
    if (perspective && reg_.adaptive_z) {
        const auto e = dims_.face_extent(2);
        std::size_t f = 0;
        for (int k = 0; k < e[2]; ++k)
            for (int j = 0; j < e[1]; ++j)
                for (int i = 0; i < e[0]; ++i, ++f) w_tikhonov_[f] = reg_.lambda_tiko * adaptive_z_weight(j, dims_.ny);
    }

    diagonal_.assign(size(), 0.0);
    neighbours_ = hull_neighbours(hull_);
    for (std::size_t n = 0; n < nh; ++n)
        diagonal_[n] = (active_[hull_.cells()[n]] ? 1.0 : 0.0) + reg_.beta_phi + reg_.alpha_phi * static_cast<double>(neighbours_[n].size());

    std::span<double> du(diagonal_.data() + nh, velocity_size());
    for (int k = 0; k < dims_.nz; ++k)
        for (int j = 0; j < dims_.ny; ++j)
            for (int i = 0; i < dims_.nx; ++i) {
                const std::size_t c = dims_.index(i, j, k);
                for (int a = 0; a < 3; ++a) {
                    const double h = 0.5 * gradient_[static_cast<std::size_t>(a)][c];
                    int hi[3] = {i, j, k};
                    ++hi[a];
                    du[dims_.face_index(a, i, j, k)] += h * h;
                    du[dims_.face_index(a, hi[0], hi[1], hi[2])] += h * h;
                }
            }
    for (double& v : du) v += reg_.beta_u;
    add_face_laplacian_diagonal(dims_, reg_.alpha_u, du);
    const std::size_t woff = dims_.face_offset(2);
    for (std::size_t f = 0; f < w_tikhonov_.size(); ++f) du[woff + f] += w_tikhonov_[f];
    const Vec s_diag = sum_op_.column_norms_squared();
    for (std::size_t f = 0; f < s_diag.size(); ++f) du[f] += reg_.lambda_sum * s_diag[f];
}

std::function<void(std::span<const double>, std::span<double>)> TransportSystem::preconditioner(double sigma_phi,
                                                                                             double sigma_u) const
{
    struct Data {
        std::size_t nh = 0, woff = 0, columns = 0, stride = 0, depth = 0;
        double off = 0.0;   // tridiagonal off-diagonal
        Vec inv_diag;       // everything outside the w-columns
        Vec pivot, upper;   // Thomas factors per w-face
        Vec t;              // T^-1 s per w-face
        Vec gamma;          // per column
        std::vector<std::uint8_t> in_sum;
    };
    auto data = std::make_shared<Data>();
    Data& d = *data;
    d.nh = density_size();
    d.woff = d.nh + dims_.face_offset(2);
    d.columns = static_cast<std::size_t>(dims_.nx) * dims_.ny;
    d.stride = d.columns;
    d.depth = static_cast<std::size_t>(dims_.nz) + 1;
    d.off = -reg_.alpha_u;
    d.inv_diag.resize(size());
    for (std::size_t i = 0; i < size(); ++i) d.inv_diag[i] = 1.0 / (diagonal_[i] + (i < d.nh ? sigma_phi : sigma_u));

    const std::size_t nw = d.columns * d.depth;
    d.in_sum.assign(nw, 0);
    for (std::size_t r = 0; r < sum_op_.rows(); ++r)
        sum_op_.for_each_in_row(r, [&](std::size_t f, double) { d.in_sum[f - dims_.face_offset(2)] = 1; });
    const double lambda = reg_.lambda_sum;
    d.pivot.resize(nw);
    d.upper.resize(nw);
    d.t.resize(nw);
    d.gamma.assign(d.columns, 0.0);
    for (std::size_t c = 0; c < d.columns; ++c) {
        for (std::size_t k = 0; k < d.depth; ++k) {
            const std::size_t f = c + k * d.stride;
            const double diag = diagonal_[d.woff + f] + sigma_u - lambda * d.in_sum[f];
            d.pivot[f] = k == 0 ? diag : diag - d.off * d.upper[f - d.stride];
            d.upper[f] = d.off / d.pivot[f];
        }
        double st = 0.0;
        // t = T^-1 s by forward and back substitution
        for (std::size_t k = 0; k < d.depth; ++k) {
            const std::size_t f = c + k * d.stride;
            const double prev = k == 0 ? 0.0 : d.t[f - d.stride];
            d.t[f] = (d.in_sum[f] - d.off * prev) / d.pivot[f];
        }
        for (std::size_t k = d.depth - 1; k-- > 0;) {
            const std::size_t f = c + k * d.stride;
            d.t[f] -= d.upper[f] * d.t[f + d.stride];
        }
        for (std::size_t k = 0; k < d.depth; ++k) st += d.in_sum[c + k * d.stride] * d.t[c + k * d.stride];
        d.gamma[c] = lambda / (1.0 + lambda * st);
    }

    return [data](std::span<const double> in, std::span<double> out) {
        const Data& d = *data;
        for (std::size_t i = 0; i < d.woff; ++i) out[i] = d.inv_diag[i] * in[i];
        const std::size_t wend = d.woff + d.columns * d.depth;
        for (std::size_t i = wend; i < in.size(); ++i) out[i] = d.inv_diag[i] * in[i];
        const double* r = in.data() + d.woff;
        double* y = out.data() + d.woff;
        for (std::size_t k = 0; k < d.depth; ++k) {
            const std::size_t base = k * d.stride;
            for (std::size_t c = 0; c < d.columns; ++c) {
                const std::size_t f = base + c;
                const double prev = k == 0 ? 0.0 : y[f - d.stride];
                y[f] = (r[f] - d.off * prev) / d.pivot[f];
            }
        }
        for (std::size_t k = d.depth - 1; k-- > 0;) {
            const std::size_t base = k * d.stride;
            for (std::size_t c = 0; c < d.columns; ++c) y[base + c] -= d.upper[base + c] * y[base + c + d.stride];
        }
        if (d.gamma.empty()) return;
        Vec sy(d.columns, 0.0);
        for (std::size_t k = 0; k < d.depth; ++k)
            for (std::size_t c = 0; c < d.columns; ++c) sy[c] += d.in_sum[k * d.stride + c] * y[k * d.stride + c];
        for (std::size_t k = 0; k < d.depth; ++k)
            for (std::size_t c = 0; c < d.columns; ++c) y[k * d.stride + c] -= d.gamma[c] * sy[c] * d.t[k * d.stride + c];
    };
}

void TransportSystem::apply_transport(std::span<const double> z, std::span<double> r) const
{
    const std::size_t nh = hull_.size();
    std::fill(r.begin(), r.end(), 0.0);
    for (std::size_t n = 0; n < nh; ++n) r[hull_.cells()[n]] = z[n];
    const double* u = z.data() + nh;
    const std::size_t off[3] = {dims_.face_offset(0), dims_.face_offset(1), dims_.face_offset(2)};
    const std::size_t sx = static_cast<std::size_t>(dims_.nx) + 1, sy = static_cast<std::size_t>(dims_.ny) + 1;
    const auto& gx = gradient_[0];
    const auto& gy = gradient_[1];
    const auto& gz = gradient_[2];
    for (int k = 0; k < dims_.nz; ++k)
        for (int j = 0; j < dims_.ny; ++j)
            for (int i = 0; i < dims_.nx; ++i) {
                const std::size_t c = dims_.index(i, j, k);
                if (!active_[c]) {
                    r[c] = 0.0;
                    continue;
                }
                const std::size_t fu = off[0] + i + sx * (j + static_cast<std::size_t>(dims_.ny) * k);
                const std::size_t fv = off[1] + i + static_cast<std::size_t>(dims_.nx) * (j + sy * k);
                const std::size_t fw = off[2] + c;
                const std::size_t fw_hi = fw + static_cast<std::size_t>(dims_.nx) * dims_.ny;
                r[c] += 0.5 * (gx[c] * (u[fu] + u[fu + 1]) + gy[c] * (u[fv] + u[fv + dims_.nx]) + gz[c] * (u[fw] + u[fw_hi]));
            }
}

void TransportSystem::apply_transport_transpose(std::span<const double> r, std::span<double> out) const
{
    const std::size_t nh = hull_.size();
    for (std::size_t n = 0; n < nh; ++n) out[n] += r[hull_.cells()[n]];
    double* u = out.data() + nh;
    const std::size_t off[3] = {dims_.face_offset(0), dims_.face_offset(1), dims_.face_offset(2)};
    const std::size_t sx = static_cast<std::size_t>(dims_.nx) + 1, sy = static_cast<std::size_t>(dims_.ny) + 1;
    for (int k = 0; k < dims_.nz; ++k)
        for (int j = 0; j < dims_.ny; ++j)
            for (int i = 0; i < dims_.nx; ++i) {
                const std::size_t c = dims_.index(i, j, k);
                if (!active_[c] || r[c] == 0.0) continue;
                const double h = 0.5 * r[c];
                const std::size_t fu = off[0] + i + sx * (j + static_cast<std::size_t>(dims_.ny) * k);
                const std::size_t fv = off[1] + i + static_cast<std::size_t>(dims_.nx) * (j + sy * k);
                const std::size_t fw = off[2] + c;
                const std::size_t fw_hi = fw + static_cast<std::size_t>(dims_.nx) * dims_.ny;
                const double hx = h * gradient_[0][c], hy = h * gradient_[1][c], hz = h * gradient_[2][c];
                u[fu] += hx;
                u[fu + 1] += hx;
                u[fv] += hy;
                u[fv + dims_.nx] += hy;
                u[fw] += hz;
                u[fw_hi] += hz;
            }
}

void TransportSystem::apply(std::span<const double> z, std::span<double> out) const
{
    if (z.size() != size() || out.size() != size()) throw std::invalid_argument("TransportSystem::apply: size mismatch");
    const std::size_t nh = hull_.size();
    std::span<const double> u = z.subspan(nh);
    std::span<double> ou = out.subspan(nh);

    for (std::size_t n = 0; n < nh; ++n) out[n] = reg_.beta_phi * z[n];
    for (std::size_t f = 0; f < u.size(); ++f) ou[f] = reg_.beta_u * u[f];

    scratch_.resize(dims_.cells());
    apply_transport(z, scratch_);
    apply_transport_transpose(scratch_, out);

    if (reg_.alpha_phi != 0.0)
        for (std::size_t n = 0; n < nh; ++n) {
            double lap = 0.0;
            for (std::uint32_t m : neighbours_[n]) lap += z[n] - z[m];
            out[n] += reg_.alpha_phi * lap;
        }

    add_face_laplacian(dims_, reg_.alpha_u, u, ou);
    const std::size_t woff = dims_.face_offset(2);
    for (std::size_t f = 0; f < w_tikhonov_.size(); ++f) ou[woff + f] += w_tikhonov_[f] * u[woff + f];
    if (reg_.lambda_sum != 0.0)
        for (std::size_t r = 0; r < sum_op_.rows(); ++r) {
            double s = 0.0;
            sum_op_.for_each_in_row(r, [&](std::size_t f, double w) { s += w * u[f]; });
            s *= reg_.lambda_sum;
            sum_op_.for_each_in_row(r, [&](std::size_t f, double w) { ou[f] += w * s; });
        }
}

Vec TransportSystem::residual(std::span<const double> z) const
{
    Vec r(dims_.cells());
    apply_transport(z, r);
    return r;
}

double TransportSystem::objective(std::span<const double> z) const
{
    // z^T A z / 2 covers both the transport term and every quadratic regularizer
    Vec az(size());
    apply(z, az);
    return 0.5 * dot(z, az);
}

Vec prox_f(const TransportSystem& system, std::span<const double> q, double sigma_phi, double sigma_u, const CgOptions& cg,
           std::span<const double> warm_start)
{
    const std::size_t n = system.size(), nh = system.density_size();
    if (q.size() != n) throw std::invalid_argument("prox_f: vector length does not match hull and face counts");
    LinearOperator op;
    op.dimension = n;
    op.apply = [&](std::span<const double> x, std::span<double> y) {
        system.apply(x, y);
        for (std::size_t i = 0; i < n; ++i) y[i] += (i < nh ? sigma_phi : sigma_u) * x[i];
    };
    op.diagonal = system.diagonal();
    op.preconditioner = system.preconditioner(sigma_phi, sigma_u);
    Vec rhs(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double s = i < nh ? sigma_phi : sigma_u;
        op.diagonal[i] += s;
        rhs[i] = s * q[i];
    }
    CgResult res = cg_solve(op, rhs, cg, warm_start);
    if (!res.converged && !(res.relative_residual < 10.0 * cg.tol))
        throw std::runtime_error("prox_f: CG stalled at relative residual " + std::to_string(res.relative_residual) +
                                 " after " + std::to_string(res.iterations) + " iterations");
    return std::move(res.x);
}

Vec prox_g_u(std::span<const double> q_u, const DivergenceProjector& projector, double tol)
{
    MacField v(projector.flags().dims());
    if (q_u.size() != v.size()) throw std::invalid_argument("prox_g_u: velocity block length does not match the grid");
    std::copy(q_u.begin(), q_u.end(), v.data().begin());
    const MacField p = projector.project(v, tol);
    return Vec(p.data().begin(), p.data().end());
}

Vec prox_nonneg(std::span<const double> q_c, std::span<const double> density_update, std::span<const double> guess)
{
    if (q_c.size() != density_update.size() || q_c.size() != guess.size())
        throw std::invalid_argument("prox_nonneg: length mismatch");
    Vec out(q_c.size());
    for (std::size_t i = 0; i < q_c.size(); ++i) out[i] = std::max(q_c[i], -(density_update[i] + guess[i]));
    return out;
}

class RayBlockPreconditioner {
public:
    RayBlockPreconditioner(const SparseMatrix& P, std::span<const std::uint32_t> groups,
                           const std::vector<std::vector<std::uint32_t>>& neighbours, double shift, double alpha)
        : local_(groups.size())
    {
        std::uint32_t count = 0;
        for (std::uint32_t g : groups) count = std::max(count, g + 1);
        members_.resize(count);
        for (std::size_t n = 0; n < groups.size(); ++n) {
            local_[n] = static_cast<std::uint32_t>(members_[groups[n]].size());
            members_[groups[n]].push_back(static_cast<std::uint32_t>(n));
        }
        for (const auto& m : members_)
            if (m.size() > max_block) throw std::runtime_error("tomography preconditioner: ray block too large");
        std::vector<Eigen::MatrixXd> blocks(count);
        for (std::uint32_t g = 0; g < count; ++g) blocks[g] = Eigen::MatrixXd::Zero(members_[g].size(), members_[g].size());
        for (std::size_t n = 0; n < groups.size(); ++n) {
            Eigen::MatrixXd& b = blocks[groups[n]];
            b(local_[n], local_[n]) += shift + alpha * static_cast<double>(neighbours[n].size());
            for (std::uint32_t m : neighbours[n])
                if (groups[m] == groups[n]) b(local_[n], local_[m]) -= alpha;
        }
        std::vector<std::pair<std::size_t, double>> row;
        for (std::size_t r = 0; r < P.rows(); ++r) {
            row.clear();
            P.for_each_in_row(r, [&](std::size_t c, double w) { row.emplace_back(c, w); });
            for (const auto& [a, wa] : row)
                for (const auto& [b, wb] : row)
                    if (groups[a] == groups[b]) blocks[groups[a]](local_[a], local_[b]) += wa * wb;
        }
        // explicit inverses: one dense product per block beats two tiny triangular solves
        offsets_.push_back(0);
        for (std::uint32_t g = 0; g < count; ++g) {
            const Eigen::LLT<Eigen::MatrixXd> llt(blocks[g]);
            if (llt.info() != Eigen::Success)
                throw std::runtime_error("tomography preconditioner: a ray block is not positive definite");
            const Eigen::MatrixXd inv = llt.solve(Eigen::MatrixXd::Identity(blocks[g].rows(), blocks[g].cols()));
            for (Eigen::Index r = 0; r < inv.rows(); ++r)
                for (Eigen::Index c = 0; c < inv.cols(); ++c) inverses_.push_back(inv(r, c));
            offsets_.push_back(inverses_.size());
            group_start_.push_back(order_.size());
            order_.insert(order_.end(), members_[g].begin(), members_[g].end());
        }
        group_start_.push_back(order_.size());
        members_.clear();
    }

    void apply(std::span<const double> in, std::span<double> out) const
    {
        double v[max_block];
        for (std::size_t g = 0; g + 1 < group_start_.size(); ++g) {
            const std::uint32_t* m = order_.data() + group_start_[g];
            const std::size_t size = group_start_[g + 1] - group_start_[g];
            for (std::size_t i = 0; i < size; ++i) v[i] = in[m[i]];
            const double* a = inverses_.data() + offsets_[g];
            for (std::size_t i = 0; i < size; ++i, a += size) {
                double acc = 0.0;
                for (std::size_t j = 0; j < size; ++j) acc += a[j] * v[j];
                out[m[i]] = acc;
            }
        }
    }

private:
    static constexpr std::size_t max_block = 4096;
    std::vector<std::uint32_t> local_;
    std::vector<std::vector<std::uint32_t>> members_;
    std::vector<std::uint32_t> order_;      //!< hull columns grouped by ray
    std::vector<std::size_t> group_start_;  //!< group g owns order_[group_start_[g] .. group_start_[g+1])
    Vec inverses_;
    std::vector<std::size_t> offsets_;
};

TomographySystem::TomographySystem(const Projection& projection, const VisualHull& hull, const RegWeights& reg, double sigma2)
    : projection_(&projection), neighbours_(hull_neighbours(hull)), reg_(reg), sigma2_(sigma2)
{
    if (projection.matrix.cols() != hull.size()) throw std::invalid_argument("TomographySystem: hull does not match projection");
    if (!(sigma2 > 0.0)) throw std::invalid_argument("TomographySystem: sigma2 must be positive");
    neighbour_start_.push_back(0);
    for (const auto& nb : neighbours_) {
        neighbour_list_.insert(neighbour_list_.end(), nb.begin(), nb.end());
        neighbour_start_.push_back(neighbour_list_.size());
    }
    diagonal_ = projection.matrix.column_norms_squared();
    for (std::size_t n = 0; n < diagonal_.size(); ++n)
        diagonal_[n] += sigma2_ + reg_.beta_phi + reg_.alpha_phi * static_cast<double>(neighbours_[n].size());
    if (projection.ray_groups.size() == hull.size() && !hull.empty())
        blocks_ = std::make_shared<RayBlockPreconditioner>(projection.matrix, projection.ray_groups, neighbours_,
                                                           sigma2_ + reg_.beta_phi, reg_.alpha_phi);
}

void TomographySystem::apply(std::span<const double> x, std::span<double> out) const
{
    projection_->matrix.apply_normal(x, out);
    const double diag = sigma2_ + reg_.beta_phi;
    for (std::size_t n = 0; n < x.size(); ++n) {
        double sum = 0.0;
        for (std::size_t k = neighbour_start_[n]; k < neighbour_start_[n + 1]; ++k) sum += x[neighbour_list_[k]];
        const double lap = static_cast<double>(neighbour_start_[n + 1] - neighbour_start_[n]) * x[n] - sum;
        out[n] += diag * x[n] + reg_.alpha_phi * lap;
    }
}

LinearOperator TomographySystem::as_operator() const
{
    LinearOperator op;
    op.dimension = diagonal_.size();
    op.apply = [this](std::span<const double> x, std::span<double> y) { apply(x, y); };
    op.diagonal = diagonal_;
    if (blocks_) op.preconditioner = [b = blocks_](std::span<const double> in, std::span<double> out) { b->apply(in, out); };
    return op;
}

Vec prox_g_phi(const TomographySystem& system, std::span<const double> q_phi, std::span<const double> image_corr,
               std::span<const double> guess, const PdParams& params, const CgOptions& cg, Vec* warm_start)
{
    const std::size_t n = q_phi.size();
    const SparseMatrix& P = system.projection().matrix;
    if (P.cols() != n || guess.size() != n || image_corr.size() != P.rows())
        throw std::invalid_argument("prox_g_phi: vector lengths do not match the projection");

    Vec headroom(n);
    for (std::size_t i = 0; i < n; ++i) headroom[i] = q_phi[i] + guess[i];

    const LinearOperator op = system.as_operator();
    const Vec pt_image = P.apply_transpose(image_corr);
    const double s2 = params.sigma_phi2, t2 = params.tau_phi2, th2 = params.theta_phi2;

    Vec x(n, 0.0), y(n, 0.0), c(n, 0.0), rhs(n);
    Vec local_warm;
    Vec& guess_p = warm_start ? *warm_start : local_warm;
    if (guess_p.size() != n) guess_p.assign(n, 0.0);

    for (int it = 0; it < params.inner_iters; ++it) {
        for (std::size_t i = 0; i < n; ++i) rhs[i] = s2 * (x[i] / s2 + y[i]) + pt_image[i];
        CgResult p = cg_solve(op, rhs, cg, guess_p);
        for (std::size_t i = 0; i < n; ++i) {
            x[i] += s2 * (y[i] - p.x[i]);
            const double cn = std::max(c[i] - t2 * x[i], -headroom[i]);
            y[i] = cn + th2 * (cn - c[i]);
            c[i] = cn;
        }
        guess_p = std::move(p.x);
    }

    Vec out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = q_phi[i] + c[i];
    return out;
}

UpdateResult calculate_update(const ScalarField& density_guess, std::span<const double> target, const Projection& projection,
                              const VisualHull& hull, const FlagGrid& flags, const SolverOptions& options,
                              const std::function<void(const IterationDiagnostics&)>& log)
{
    options.pd.validate();
    const GridDims& d = density_guess.dims();
    if (target.size() != projection.matrix.rows()) throw std::invalid_argument("calculate_update: target length does not match projection rows");
    if (density_guess.min() < 0.0) throw std::invalid_argument("calculate_update: density guess must be non-negative");

    const TransportSystem transport(density_guess, hull, flags, options.reg, options.perspective);
    const TomographySystem tomo(projection, hull, options.reg, options.pd.sigma_phi2);
    const DivergenceProjector projector(flags);
    const Vec guess = hull.gather(density_guess);

    const std::size_t nh = transport.density_size(), n = transport.size();
    const PdParams& pd = options.pd;
    Vec x(n, 0.0), y(n, 0.0), z(n, 0.0), w(n), z_next(n);
    Vec prox_warm, inner_warm;

    UpdateResult result;
    result.initial_residual = norm2(target);
    Vec image(projection.matrix.rows());

    for (int it = 0; it < pd.outer_iters; ++it) {
        // x-update through prox_f
        for (std::size_t i = 0; i < n; ++i) w[i] = x[i] / (i < nh ? pd.sigma_phi : pd.sigma_u) + y[i];
        Vec p = prox_f(transport, w, pd.sigma_phi, pd.sigma_u, options.cg, prox_warm);
        for (std::size_t i = 0; i < n; ++i) {
            const double s = i < nh ? pd.sigma_phi : pd.sigma_u;
            x[i] += s * (y[i] - p[i]);
        }
        prox_warm = std::move(p);
        check_finite(x, "dual variable", it);

        // z-update, velocity block
        Vec q_u(n - nh);
        for (std::size_t f = 0; f < q_u.size(); ++f) q_u[f] = z[nh + f] - pd.tau_u * x[nh + f];
        const Vec u_next = prox_g_u(q_u, projector, options.projection_tol);

        // z-update, density block
        Vec q_phi(nh);
        for (std::size_t i = 0; i < nh; ++i) q_phi[i] = z[i] - pd.tau_phi * x[i];
        projection.matrix.apply(q_phi, image);
        Vec corr(image.size());
        for (std::size_t r = 0; r < image.size(); ++r) corr[r] = target[r] - image[r];
        const Vec phi_next = prox_g_phi(tomo, q_phi, corr, guess, pd, options.cg, &inner_warm);

        std::copy(phi_next.begin(), phi_next.end(), z_next.begin());
        std::copy(u_next.begin(), u_next.end(), z_next.begin() + static_cast<std::ptrdiff_t>(nh));
        check_finite(z_next, "primal variable", it);

        for (std::size_t i = 0; i < n; ++i) {
            const double th = i < nh ? pd.theta_phi : pd.theta_u;
            y[i] = z_next[i] + th * (z_next[i] - z[i]);
        }
        z.swap(z_next);

        IterationDiagnostics diag;
        diag.iteration = it;
        projection.matrix.apply(std::span<const double>(z.data(), nh), image);
        double res = 0.0;
        for (std::size_t r = 0; r < image.size(); ++r) res += (image[r] - target[r]) * (image[r] - target[r]);
        diag.image_residual = std::sqrt(res);
        MacField u(d);
        std::copy(z.begin() + static_cast<std::ptrdiff_t>(nh), z.end(), u.data().begin());
        diag.divergence = divergence(u, flags).max_abs();
        diag.objective = transport.objective(z);
        diag.density_update = std::span<const double>(z.data(), nh);
        if (log) log(diag);
        diag.density_update = {};
        result.diagnostics.push_back(diag);
    }

    result.density_update = hull.scatter(std::span<const double>(z.data(), nh));
    result.velocity_update = MacField(d);
    std::copy(z.begin() + static_cast<std::ptrdiff_t>(nh), z.end(), result.velocity_update.data().begin());
    return result;
}

} // namespace smokecap
