#include "lcmito/ouest.hpp"

#include <sstream>

namespace lcmito::ouest {

void EstimationConfig::validate(const sdesim::TimeGrid& grid) const {
    if (stride < 1) throw ValidationError("EstimationConfig: stride must be >= 1");
    if (stride > grid.n_steps) throw ValidationError("EstimationConfig: stride exceeds the grid length");
    if (!(u > 1.0)) throw ValidationError("EstimationConfig: u must be > 1");
}

namespace {

// Applies fn(x_prev, x_next) to every delta_c-spaced pair selected by the
// config. Returns the pair count.
template <typename Fn>
long for_each_pair(const sdesim::TrajectorySet& data, const EstimationConfig& config, Fn&& fn) {
    const int stride = config.stride;
    long pairs = 0;
    for (int j = 0; j < data.n_traj(); ++j) {
        const Matrix& path = data.traj(j);
        const int last = config.pool_lags ? data.grid.n_steps - stride : 0;
        for (int k = 0; k <= last; k += stride) {
            fn(path.row(k), path.row(k + stride));
            ++pairs;
        }
    }
    return pairs;
}

}  // namespace

Matrix estimate_F(const sdesim::TrajectorySet& data, const EstimationConfig& config) {
    data.validate();
    config.validate(data.grid);
    const int d = data.dim;
    if (data.n_traj() < d + 2) {
        std::ostringstream msg;
        msg << "estimate_F: need at least " << d + 2 << " trajectories, got " << data.n_traj();
        throw ValidationError(msg.str());
    }
    Matrix c_lag = Matrix::Zero(d, d);   // (1/P) sum X_next X_prev^T
    Matrix c_zero = Matrix::Zero(d, d);  // (1/P) sum X_prev X_prev^T
    const long pairs = for_each_pair(data, config, [&](const auto& x_prev, const auto& x_next) {
        c_lag.noalias() += x_next.transpose() * x_prev;
        c_zero.noalias() += x_prev.transpose() * x_prev;
    });
    c_lag /= static_cast<double>(pairs);
    c_zero /= static_cast<double>(pairs);
    const double cond = matcore::condition_estimate(c_zero);
    if (!(cond < 1e12)) {
        std::ostringstream msg;
        msg << "estimate_F: C(0) is ill-conditioned (condition estimate " << cond << ")";
        throw NumericError(msg.str());
    }
    // F C(0) = C(-1)  =>  C(0)^T F^T = C(-1)^T with symmetric C(0).
    return matcore::solve(c_zero, c_lag.transpose()).transpose();
}

std::pair<Matrix, Matrix> estimate_phi(const Matrix& f_hat, double delta_c, double u) {
    matcore::require_finite(f_hat, "estimate_phi: f_hat");
    if (f_hat.rows() != f_hat.cols()) throw ValidationError("estimate_phi: f_hat must be square");
    if (!(delta_c > 0.0)) throw ValidationError("estimate_phi: delta_c must be positive");
    if (!(u > 1.0)) throw ValidationError("estimate_phi: u must be > 1");
    const int d = static_cast<int>(f_hat.rows());
    const Matrix eye = Matrix::Identity(d, d);

    const Matrix f_bar_plus_eye = matcore::svd_clip(eye + f_hat, 1.0, 3.0);
    const Matrix f_bar = f_bar_plus_eye - eye;
    // Clipped singular values >= 1 keep (F_bar + I) invertible.
    const Matrix phi_bar = (2.0 / delta_c) * matcore::solve(f_bar_plus_eye.transpose(), (f_bar - eye).transpose()).transpose();
    const Matrix phi_tilde = eye - matcore::svd_clip(eye - phi_bar, 1.0 / u, u);
    return {phi_tilde, phi_bar};
}

Matrix estimate_omega(const sdesim::TrajectorySet& data, const Matrix& f_hat, const EstimationConfig& config) {
    data.validate();
    config.validate(data.grid);
    const int d = data.dim;
    if (f_hat.rows() != d || f_hat.cols() != d) throw ValidationError("estimate_omega: f_hat shape mismatch");
    Matrix omega = Matrix::Zero(d, d);
    Vector resid(d);
    const long pairs = for_each_pair(data, config, [&](const auto& x_prev, const auto& x_next) {
        resid.noalias() = x_next.transpose() - f_hat * x_prev.transpose();
        omega.noalias() += resid * resid.transpose();
    });
    if (pairs <= d + 1) {
        std::ostringstream msg;
        msg << "estimate_omega: needs more than " << d + 1 << " pairs, got " << pairs;
        throw ValidationError(msg.str());
    }
    return omega / static_cast<double>(pairs - d - 1);
}

Matrix estimate_sigma(const Matrix& f_hat, const Matrix& phi, const Matrix& omega_hat) {
    matcore::require_finite(f_hat, "estimate_sigma: f_hat");
    matcore::require_finite(phi, "estimate_sigma: phi");
    matcore::require_finite(omega_hat, "estimate_sigma: omega_hat");
    const int d = static_cast<int>(f_hat.rows());
    const Matrix eye = Matrix::Identity(d, d);
    // Homogeneous case: zero residual covariance solves to zero diffusion
    // even when the Kronecker system itself is singular.
    if (omega_hat.cwiseAbs().maxCoeff() == 0.0) return Matrix::Zero(d, d);
    const Matrix lhs = matcore::kron(f_hat, f_hat) - matcore::kron(eye, eye);
    const double cond = matcore::condition_estimate(lhs);
    if (!(cond < 1e12)) {
        std::ostringstream msg;
        msg << "estimate_sigma: Kronecker system is near-singular (condition estimate " << cond
            << "); the system degenerates as phi approaches zero";
        throw NumericError(msg.str());
    }
    const Matrix rhs_op = matcore::kron(phi, eye) + matcore::kron(eye, phi);
    const Vector vec_omega = Eigen::Map<const Vector>(omega_hat.data(), d * d);
    const Vector vec_sigma = matcore::solve(lhs, rhs_op * vec_omega);
    Matrix sigma = Eigen::Map<const Matrix>(vec_sigma.data(), d, d);
    return 0.5 * (sigma + sigma.transpose());
}

EstimatedOUModel fit(const sdesim::TrajectorySet& data, const EstimationConfig& config) {
    EstimatedOUModel model;
    model.f_hat = estimate_F(data, config);
    model.phi_tilde = estimate_phi(model.f_hat, config.delta_c(data.grid), config.u).first;
    model.omega_hat = estimate_omega(data, model.f_hat, config);
    model.sigma_hat = estimate_sigma(model.f_hat, model.phi_tilde, model.omega_hat);
    model.u_used = config.u;
    return model;
}

}  // namespace lcmito::ouest
