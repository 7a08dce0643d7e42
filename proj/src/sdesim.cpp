#include "lcmito/sdesim.hpp"

#include <cmath>
#include <sstream>

#include "lcmito/parallel.hpp"

namespace lcmito::sdesim {

void TimeGrid::validate() const {
    if (!(delta > 0.0) || !std::isfinite(delta)) throw ValidationError("TimeGrid: delta must be positive");
    if (n_steps < 1) throw ValidationError("TimeGrid: n_steps must be positive");
}

void OUModel::validate() const {
    if (phi.rows() != phi.cols() || phi.rows() < 1) throw ValidationError("OUModel: phi must be square");
    matcore::require_finite(phi, "OUModel phi");
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ValidationError("OUModel: sigma must be nonnegative");
    const Matrix im_phi = Matrix::Identity(dim(), dim()) - phi;
    const double cond = matcore::condition_estimate(im_phi);
    if (!(cond < 1e12)) {
        std::ostringstream msg;
        msg << "OUModel: (I - phi) is numerically singular (condition estimate " << cond << ")";
        throw NumericError(msg.str());
    }
}

void TrajectorySet::validate() const {
    grid.validate();
    for (int j = 0; j < n_traj(); ++j) {
        const Matrix& x = traj(j);
        if (x.rows() != grid.n_steps + 1 || x.cols() != dim) {
            std::ostringstream msg;
            msg << "TrajectorySet: trajectory " << j << " has shape " << x.rows() << "x" << x.cols()
                << ", expected " << grid.n_steps + 1 << "x" << dim;
            throw ValidationError(msg.str());
        }
        if (!x.allFinite()) {
            std::ostringstream msg;
            msg << "TrajectorySet: trajectory " << j << " contains non-finite values";
            throw ValidationError(msg.str());
        }
    }
}

Matrix gen_random_phi(int d, double edge_prob, double diag_value, std::uint64_t seed) {
    if (d < 1) throw ValidationError("gen_random_phi: d must be >= 1");
    if (!(edge_prob >= 0.0 && edge_prob <= 1.0)) throw ValidationError("gen_random_phi: edge_prob outside [0, 1]");
    RngStream rs(derive_seed(seed, 0));
    for (int attempt = 0; attempt < 100; ++attempt) {
        Matrix phi = Matrix::Zero(d, d);
        for (int r = 0; r < d; ++r) {
            for (int c = 0; c < d; ++c) {
                if (r == c) {
                    phi(r, c) = diag_value;
                } else if (rs.uniform() < edge_prob) {
                    phi(r, c) = rs.uniform();
                }
            }
        }
        const Matrix im_phi = Matrix::Identity(d, d) - phi;
        if (matcore::condition_estimate(im_phi) < 1e12) return phi;
    }
    throw NumericError("gen_random_phi: 100 consecutive draws gave singular (I - phi)");
}

namespace {

// Draws X0 = (I - Phi)^{-1} e with per-coordinate noise scales.
Vector draw_initial(const Eigen::PartialPivLU<Matrix>& lu_im_phi, const Vector& noise_scale, RngStream& rs) {
    Vector e(noise_scale.size());
    for (Eigen::Index i = 0; i < e.size(); ++i) e(i) = noise_scale(i) * rs.normal();
    return lu_im_phi.solve(e);
}

void check_step_finite(const Vector& x, int j, int k) {
    if (!x.allFinite()) {
        std::ostringstream msg;
        msg << "simulation overflow: non-finite state at trajectory " << j << ", step " << k;
        throw NumericError(msg.str());
    }
}

enum class Drift { Linear, Sinusoidal };

TrajectorySet simulate_em(const Matrix& phi, const Vector& noise_scale, const TimeGrid& grid, int n_traj,
                          std::uint64_t seed, Drift drift, const Matrix* initial_rows) {
    grid.validate();
    matcore::require_finite(phi, "simulate: phi");
    if (n_traj < 1) throw ValidationError("simulate: n_traj must be positive");
    const int d = static_cast<int>(phi.rows());
    if (noise_scale.size() != d) throw ValidationError("simulate: diffusion scale length does not match dimension");

    if (initial_rows != nullptr && (initial_rows->rows() != n_traj || initial_rows->cols() != d)) {
        throw ValidationError("simulate: initial_rows shape mismatch");
    }
    const Matrix im_phi = Matrix::Identity(d, d) - phi;
    if (!(matcore::condition_estimate(im_phi) < 1e12)) {
        throw NumericError("simulate: (I - phi) is numerically singular");
    }
    const Eigen::PartialPivLU<Matrix> lu(im_phi);

    TrajectorySet out;
    out.grid = grid;
    out.dim = d;
    out.paths.assign(static_cast<std::size_t>(n_traj), Matrix());

    const double delta = grid.delta;
    const double sqrt_delta = std::sqrt(delta);
    parallel_for(static_cast<std::size_t>(n_traj), [&](std::size_t j) {
        RngStream rs(derive_seed(seed, j));
        Matrix path(grid.n_steps + 1, d);
        Vector state = initial_rows != nullptr ? Vector(initial_rows->row(static_cast<Eigen::Index>(j)).transpose())
                                               : draw_initial(lu, noise_scale, rs);
        check_step_finite(state, static_cast<int>(j), 0);
        path.row(0) = state.transpose();
        Vector drift_arg(d);
        Vector incr(d);
        for (int k = 0; k < grid.n_steps; ++k) {
            if (drift == Drift::Linear) {
                drift_arg = state;
            } else {
                for (int i = 0; i < d; ++i) drift_arg(i) = state(i) + std::sin(2.0 * M_PI * state(i));
            }
            incr.noalias() = delta * (phi * drift_arg);
            for (int i = 0; i < d; ++i) incr(i) += noise_scale(i) * sqrt_delta * rs.normal();
            state += incr;
            check_step_finite(state, static_cast<int>(j), k + 1);
            path.row(k + 1) = state.transpose();
        }
        out.paths[j] = std::move(path);
    });
    return out;
}

}  // namespace

Matrix sample_initial(const OUModel& model, int n_traj, std::uint64_t seed) {
    model.validate();
    if (n_traj < 1) throw ValidationError("sample_initial: n_traj must be positive");
    const int d = model.dim();
    const Eigen::PartialPivLU<Matrix> lu(Matrix::Identity(d, d) - model.phi);
    const Vector scale = Vector::Constant(d, model.sigma);
    Matrix rows(n_traj, d);
    parallel_for(static_cast<std::size_t>(n_traj), [&](std::size_t j) {
        RngStream rs(derive_seed(seed, j));
        rows.row(static_cast<Eigen::Index>(j)) = draw_initial(lu, scale, rs).transpose();
    });
    return rows;
}

TrajectorySet simulate_ou(const OUModel& model, const TimeGrid& grid, int n_traj, std::uint64_t seed,
                          const Matrix* initial_rows) {
    model.validate();
    return simulate_em(model.phi, Vector::Constant(model.dim(), model.sigma), grid, n_traj, seed, Drift::Linear,
                       initial_rows);
}

TrajectorySet simulate_nonlinear(const OUModel& model, const TimeGrid& grid, int n_traj, std::uint64_t seed,
                                 const Matrix* initial_rows) {
    model.validate();
    return simulate_em(model.phi, Vector::Constant(model.dim(), model.sigma), grid, n_traj, seed, Drift::Sinusoidal,
                       initial_rows);
}

TrajectorySet simulate_aniso(const Matrix& phi, const Vector& diffusion_diag, const TimeGrid& grid, int n_traj,
                             std::uint64_t seed, const Matrix* initial_rows) {
    if (phi.rows() != phi.cols()) throw ValidationError("simulate_aniso: phi must be square");
    if (diffusion_diag.size() != phi.rows()) {
        throw ValidationError("simulate_aniso: diffusion_diag length does not match phi dimension");
    }
    if ((diffusion_diag.array() < 0.0).any()) throw ValidationError("simulate_aniso: negative diffusion scale");
    return simulate_em(phi, diffusion_diag, grid, n_traj, seed, Drift::Linear, initial_rows);
}

TrajectorySet simulate_ou_exact(const OUModel& model, const TimeGrid& grid, int n_traj, std::uint64_t seed) {
    model.validate();
    grid.validate();
    if (n_traj < 1) throw ValidationError("simulate_ou_exact: n_traj must be positive");
    const int d = model.dim();
    const double h = grid.delta;

    const Matrix f = matcore::mat_exp(model.phi, h);

    // Van Loan block trick for Q = sigma^2 int_0^h e^{Phi s} e^{Phi^T s} ds:
    // exp([[-Phi, sigma^2 I], [0, Phi^T]] h) has upper-right block G with
    // Q = e^{Phi h} G.
    Matrix block = Matrix::Zero(2 * d, 2 * d);
    block.topLeftCorner(d, d) = -model.phi;
    block.topRightCorner(d, d) = model.sigma * model.sigma * Matrix::Identity(d, d);
    block.bottomRightCorner(d, d) = model.phi.transpose();
    const Matrix e = matcore::mat_exp(block, h);
    Matrix q = f * e.topRightCorner(d, d);
    q = 0.5 * (q + q.transpose());

    // PSD square root; robust to the sigma = 0 and tiny-eigenvalue cases
    // where a Cholesky factorization would fail.
    Eigen::SelfAdjointEigenSolver<Matrix> eig(q);
    Vector ev = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    const Matrix noise_transform = eig.eigenvectors() * ev.asDiagonal();

    const Eigen::PartialPivLU<Matrix> lu(Matrix::Identity(d, d) - model.phi);
    const Vector init_scale = Vector::Constant(d, model.sigma);

    TrajectorySet out;
    out.grid = grid;
    out.dim = d;
    out.paths.assign(static_cast<std::size_t>(n_traj), Matrix());
    parallel_for(static_cast<std::size_t>(n_traj), [&](std::size_t j) {
        RngStream rs(derive_seed(seed, j));
        Matrix path(grid.n_steps + 1, d);
        Vector state = draw_initial(lu, init_scale, rs);
        check_step_finite(state, static_cast<int>(j), 0);
        path.row(0) = state.transpose();
        Vector z(d);
        for (int k = 0; k < grid.n_steps; ++k) {
            for (int i = 0; i < d; ++i) z(i) = rs.normal();
            state = f * state + noise_transform * z;
            check_step_finite(state, static_cast<int>(j), k + 1);
            path.row(k + 1) = state.transpose();
        }
        out.paths[j] = std::move(path);
    });
    return out;
}

}  // namespace lcmito::sdesim
