#pragma once

#include <utility>

#include "lcmito/sdesim.hpp"

namespace lcmito::ouest {

using matcore::Matrix;
using matcore::Vector;

// Training configuration. The sample interval delta_c is expressed as an
// integer stride over the observation grid, which sidesteps float
// divisibility checks. pool_lags = false uses only the (X_0, X_{delta_c})
// pair of each trajectory, which is the literal estimator; pooling averages
// over every consecutive delta_c-spaced pair for variance reduction.
struct EstimationConfig {
    int stride = 10;
    double u = 10.0;
    bool pool_lags = false;

    double delta_c(const sdesim::TimeGrid& grid) const { return stride * grid.delta; }
    void validate(const sdesim::TimeGrid& grid) const;
};

struct EstimatedOUModel {
    Matrix phi_tilde;   // truncated drift estimate
    Matrix sigma_hat;   // instantaneous covariance estimate (sigma^2 I for isometric noise)
    Matrix f_hat;       // VAR(1) transition estimate
    Matrix omega_hat;   // VAR(1) residual covariance
    double u_used = 0.0;
};

// F_hat = C(-1) C(0)^{-1} from the delta_c-spaced pairs.
Matrix estimate_F(const sdesim::TrajectorySet& data, const EstimationConfig& config);

// The truncation pipeline: clip the singular values of (I + F_hat) into
// [1, 3], map through the Cayley-type formula Phi_bar = (2/delta_c)
// (F_bar - I)(F_bar + I)^{-1}, then clip (I - Phi_bar) into [1/u, u].
// Returns (phi_tilde, phi_bar).
std::pair<Matrix, Matrix> estimate_phi(const Matrix& f_hat, double delta_c, double u);

// Sample covariance of the one-lag fitting residual, normalized by
// (#pairs - d - 1).
Matrix estimate_omega(const sdesim::TrajectorySet& data, const Matrix& f_hat, const EstimationConfig& config);

// Kronecker identity between the VAR(1) residual covariance and the
// instantaneous covariance:
//   vec S = {F (x) F - I (x) I}^{-1} {Phi (x) I + I (x) Phi} vec Omega.
// The solve output is symmetrized before returning.
Matrix estimate_sigma(const Matrix& f_hat, const Matrix& phi, const Matrix& omega_hat);

EstimatedOUModel fit(const sdesim::TrajectorySet& data, const EstimationConfig& config);

}  // namespace lcmito::ouest
