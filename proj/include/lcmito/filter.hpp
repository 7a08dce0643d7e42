#pragma once

#include <utility>
#include <vector>

#include "lcmito/sdesim.hpp"

namespace lcmito::filter {

using matcore::Matrix;
using matcore::Vector;
using sdesim::TimeGrid;
using sdesim::TrajectorySet;

// A single conditional local independence query: does the history of
// coordinate alpha influence the drift of coordinate beta, given the
// coordinates in cond_set?
struct QuerySpec {
    int alpha = 0;
    int beta = 0;
    std::vector<int> cond_set;

    void validate(int d) const;
    // V \ C in ascending order.
    std::vector<int> latent_set(int d) const;
    // Position of alpha within latent_set.
    int alpha_position(int d) const;
};

// Drift matrix partitioned along (latent, observed) coordinates.
struct Blocks {
    Matrix phi_vc;     // latent x latent
    Matrix phi_vc_c;   // latent x observed
    Matrix phi_c_vc;   // observed x latent
    Matrix phi_c;      // observed x observed
    Vector phi_beta_vc;
    Vector phi_beta_c;
};
Blocks split_blocks(const Matrix& phi, const QuerySpec& query);

// Scaled conditional covariance of the latent coordinates at each grid
// point (one symmetric PSD matrix per point).
struct RiccatiPath {
    std::vector<Matrix> y;
};

// Conditioning of the stationary Gaussian N(0, sigma^2 Upsilon) with
// Upsilon = (I - Phi)^{-1} (I - Phi^T)^{-1}. Returns the coefficient matrix
// applied to X_C(0) to get the initial conditional mean, and the Schur
// complement y0.
std::pair<Matrix, Matrix> initial_values(const Matrix& phi, const QuerySpec& query);

// Integrates y' = Phi_vc y + y Phi_vc^T + I - y Phi_c_vc^T Phi_c_vc y with
// dense RK4 substeps of at most 1e-3, re-symmetrizing each step.
RiccatiPath solve_riccati(const Matrix& phi, const Matrix& y0, const QuerySpec& query, const TimeGrid& grid);

// Closed-form route through the Hamiltonian eigendecomposition
// ("negative exponential method"). Requires the Hamiltonian to be
// diagonalizable with no eigenvalues on the imaginary axis; used to
// cross-validate the integrator.
RiccatiPath solve_riccati_closed_form(const Matrix& phi, const Matrix& y0, const QuerySpec& query,
                                      const TimeGrid& grid);

// Per-grid-point coefficient matrices of the conditional-mean recursion.
// They depend only on (phi, query, y) and are shared across trajectories.
struct FilterCoeffs {
    std::vector<Matrix> a;  // latent x observed
    std::vector<Matrix> b;  // latent x latent
    std::vector<Matrix> c;  // latent x observed
};
FilterCoeffs make_coeffs(const Matrix& phi, const RiccatiPath& riccati, const QuerySpec& query);

// Conditional-mean recursion with left-endpoint coefficients:
//   m_k = m_{k-1} + (A_{k-1} X_{C,k-1} + B_{k-1} m_{k-1}) delta
//               + C_{k-1} (X_{C,k} - X_{C,k-1}).
// traj_xc holds the observed coordinates, one row per grid point.
std::vector<Vector> forward_filter(const Matrix& phi, const RiccatiPath& riccati, const Matrix& traj_xc,
                                   const QuerySpec& query, const TimeGrid& grid, const Vector& m0);

// pi is the alpha component of the conditional mean; mu is the drift
// projection phi_beta_vc . m + phi_beta_c . X_C.
std::pair<Vector, Vector> projections(const std::vector<Vector>& m_hat, const Matrix& traj_xc, const Matrix& phi,
                                      const QuerySpec& query);

struct FilterPaths {
    std::vector<Matrix> m_hat;   // per trajectory: (n+1) x latent
    std::vector<Vector> pi_hat;  // per trajectory: n+1
    std::vector<Vector> mu_hat;  // per trajectory: n+1
};

// Full pipeline over a set of trajectories: one Riccati/coefficient pass
// shared by all of them, then the per-trajectory recursion.
FilterPaths run_filter(const Matrix& phi, const TrajectorySet& data, const std::vector<int>& traj_indices,
                       const QuerySpec& query);

}  // namespace lcmito::filter
