#pragma once

#include <cstdint>
#include <vector>

#include "lcmito/matcore.hpp"
#include "lcmito/rng.hpp"

namespace lcmito::sdesim {

using matcore::Matrix;
using matcore::Vector;

// Uniform observation grid {0, delta, 2*delta, ..., n_steps*delta}. The
// horizon is always derived, never stored independently.
struct TimeGrid {
    double delta = 0.0;
    int n_steps = 0;

    double horizon() const { return n_steps * delta; }
    void validate() const;
};

// dX = Phi X dt + sigma dW with X0 drawn from the stationary linear SEM
// X0 = Phi X0 + e, e ~ N(0, sigma^2 I). Only nonsingularity of (I - Phi) is
// required here; the positive-definiteness assumed by the theory does not
// hold for the synthetic protocol (diagonal of Phi equal to 2), and the
// sampling itself never needs it.
struct OUModel {
    Matrix phi;
    double sigma = 1.0;

    int dim() const { return static_cast<int>(phi.rows()); }
    void validate() const;
};

// n_traj independent paths observed on a shared grid. traj(j) has one row
// per grid point and one column per coordinate.
struct TrajectorySet {
    TimeGrid grid;
    int dim = 0;
    std::vector<Matrix> paths;

    int n_traj() const { return static_cast<int>(paths.size()); }
    const Matrix& traj(int j) const { return paths[static_cast<std::size_t>(j)]; }
    void validate() const;
};

// Off-diagonal entries nonzero with probability edge_prob, nonzero values
// Uniform(0,1); diagonal fixed at diag_value. Draws are rejected until
// (I - Phi) is numerically nonsingular, up to 100 attempts.
Matrix gen_random_phi(int d, double edge_prob, double diag_value, std::uint64_t seed);

// Rows are i.i.d. draws of (I - Phi)^{-1} e with e ~ N(0, sigma^2 I).
Matrix sample_initial(const OUModel& model, int n_traj, std::uint64_t seed);

// Euler-Maruyama: X_{k+1} = X_k + delta Phi X_k + sigma sqrt(delta) Z_k.
// initial_rows, when given (n_traj x d), replaces the SEM draw; useful for
// pinning deterministic-drift comparisons.
TrajectorySet simulate_ou(const OUModel& model, const TimeGrid& grid, int n_traj, std::uint64_t seed,
                          const Matrix* initial_rows = nullptr);

// Exact discrete-time transitions X_{k+1} = F X_k + eps_k with F = e^{Phi delta}
// and Cov(eps) the integrated OU covariance. Used as an oracle generator; the
// Euler-Maruyama scheme above is the default so that discretization bias in
// experiments matches the synthetic protocol.
TrajectorySet simulate_ou_exact(const OUModel& model, const TimeGrid& grid, int n_traj, std::uint64_t seed);

// Drift Phi {X + sin(2 pi X)} with the sine taken elementwise.
TrajectorySet simulate_nonlinear(const OUModel& model, const TimeGrid& grid, int n_traj, std::uint64_t seed,
                                 const Matrix* initial_rows = nullptr);

// Per-coordinate diffusion scales instead of the isometric sigma.
TrajectorySet simulate_aniso(const Matrix& phi, const Vector& diffusion_diag, const TimeGrid& grid,
                             int n_traj, std::uint64_t seed, const Matrix* initial_rows = nullptr);

}  // namespace lcmito::sdesim
